//! Problem sources: Cassandra `.pomdp` files, built-in generators, and the
//! benchmark registry.

mod cassandra;
pub mod registry;
pub mod rocksample;
pub mod tag;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Belief, CsrMatrix, ModelError, ModelParts, PomdpModel};

pub use cassandra::{
    parse_pomdp, parse_pomdp_with, write_pomdp, ParseError, ParseOptions, LOAD_NORMALIZE_TOL,
};
pub use rocksample::{generate_rocksample, RockSampleConfig};
pub use tag::{generate_tag, TagConfig};

/// The classic two-door tiger problem.
pub const TIGER_POMDP: &str = include_str!("../../fixtures/tiger.pomdp");

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

pub fn tiger() -> PomdpModel {
    parse_pomdp(TIGER_POMDP).expect("bundled tiger fixture parses")
}

pub fn load_pomdp_file(path: &Path, opts: ParseOptions) -> Result<PomdpModel, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pomdp_with(&text, opts).map_err(|source| LoadError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Where a model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProblemSource {
    File { path: PathBuf, permissive: bool },
    Tiger,
    RockSample(RockSampleConfig),
    Tag(TagConfig),
    Random(RandomConfig),
}

impl ProblemSource {
    pub fn load(&self) -> Result<PomdpModel, LoadError> {
        match self {
            ProblemSource::File { path, permissive } => load_pomdp_file(
                path,
                ParseOptions {
                    permissive: *permissive,
                },
            ),
            ProblemSource::Tiger => Ok(tiger()),
            ProblemSource::RockSample(cfg) => Ok(generate_rocksample(cfg)?),
            ProblemSource::Tag(cfg) => Ok(generate_tag(cfg)?),
            ProblemSource::Random(cfg) => Ok(generate_random(
                cfg.num_states,
                cfg.num_actions,
                cfg.num_observations,
                cfg.discount,
                cfg.seed,
            )?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_observations: usize,
    pub discount: f64,
    pub seed: u64,
}

fn random_row(rng: &mut ChaCha8Rng, n: usize, keep: f64) -> Vec<(usize, f64)> {
    let mut w = Vec::new();
    for i in 0..n {
        if rng.gen_bool(keep) {
            w.push((i, rng.gen_range(0.05..1.0)));
        }
    }
    if w.is_empty() {
        w.push((rng.gen_range(0..n), 1.0));
    }
    let total: f64 = w.iter().map(|(_, v)| v).sum();
    w.into_iter().map(|(i, v)| (i, v / total)).collect()
}

/// Seeded random model with moderately sparse dynamics and rewards in
/// `[-1, 1]`. Used as a test fixture.
pub fn generate_random(
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    discount: f64,
    seed: u64,
) -> Result<PomdpModel, GenerateError> {
    if num_states == 0 || num_actions == 0 || num_observations == 0 {
        return Err(GenerateError::InvalidParams(
            "dimensions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transitions = (0..num_actions)
        .map(|_| {
            let rows = (0..num_states)
                .map(|_| random_row(&mut rng, num_states, 0.6))
                .collect();
            CsrMatrix::from_rows(num_states, rows)
        })
        .collect();
    let observations = (0..num_actions)
        .map(|_| {
            let rows = (0..num_states)
                .map(|_| random_row(&mut rng, num_observations, 0.7))
                .collect();
            CsrMatrix::from_rows(num_observations, rows)
        })
        .collect();
    let rewards = (0..num_actions)
        .map(|_| (0..num_states).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Ok(PomdpModel::new(ModelParts {
        num_states,
        num_actions,
        num_observations,
        transitions,
        observations,
        rewards,
        discount,
        initial_belief: Belief::uniform(num_states),
        state_names: None,
        action_names: None,
        observation_names: None,
    })?)
}
