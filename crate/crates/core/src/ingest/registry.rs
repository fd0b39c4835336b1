//! Named benchmark problems with published reference results.
//!
//! File-backed problems are looked up in a corpus directory: `$HSVI_CORPUS`
//! if set, otherwise `corpus/` at the workspace root. Tag is generated when
//! no `tag.pomdp` is present in the corpus.

use std::path::PathBuf;

use serde::Serialize;

use super::{LoadError, ProblemSource, RockSampleConfig, TagConfig};
use crate::model::PomdpModel;

/// Reference numbers for one benchmark: sizes, the HSVI2 reward with its
/// confidence half-width, and the QMDP baseline reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_observations: usize,
    pub hsvi2_reward: f64,
    pub ci_half_width: f64,
    pub hsvi2_time_s: f64,
    pub hsvi2_vectors: usize,
    pub qmdp_reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Corpus(&'static str),
    Tiger,
    Tag,
    RockSample(usize, usize),
}

#[derive(Debug, Clone, Copy)]
pub struct Benchmark {
    pub name: &'static str,
    kind: Kind,
    pub reference: Option<ReferenceRow>,
}

const fn row(
    sizes: (usize, usize, usize),
    hsvi2_reward: f64,
    ci_half_width: f64,
    hsvi2_time_s: f64,
    hsvi2_vectors: usize,
    qmdp_reward: f64,
) -> Option<ReferenceRow> {
    Some(ReferenceRow {
        num_states: sizes.0,
        num_actions: sizes.1,
        num_observations: sizes.2,
        hsvi2_reward,
        ci_half_width,
        hsvi2_time_s,
        hsvi2_vectors,
        qmdp_reward,
    })
}

pub const BENCHMARKS: &[Benchmark] = &[
    Benchmark {
        name: "tiger",
        kind: Kind::Tiger,
        reference: None,
    },
    Benchmark {
        name: "tiger-grid",
        kind: Kind::Corpus("tiger-grid"),
        reference: row((36, 5, 17), 2.30, 0.14, 52.0, 1003, 0.26),
    },
    Benchmark {
        name: "hallway",
        kind: Kind::Corpus("hallway"),
        reference: row((61, 5, 21), 0.52, 0.038, 2.4, 147, 0.14),
    },
    Benchmark {
        name: "hallway2",
        kind: Kind::Corpus("hallway2"),
        reference: row((93, 5, 17), 0.35, 0.048, 1.5, 114, 0.052),
    },
    Benchmark {
        name: "tag",
        kind: Kind::Tag,
        reference: row((870, 5, 30), -6.36, 1.2, 24.0, 415, -16.48),
    },
    Benchmark {
        name: "rocksample-4-4",
        kind: Kind::RockSample(4, 4),
        reference: row((257, 9, 2), 18.0, 1.2, 0.75, 177, 3.5),
    },
    Benchmark {
        name: "rocksample-7-8",
        kind: Kind::RockSample(7, 8),
        reference: row((12_545, 13, 2), 20.6, 1.2, 1003.0, 2491, 0.0),
    },
    Benchmark {
        // The published action count (19) does not fit the 5 + k pattern.
        name: "rocksample-10-10",
        kind: Kind::RockSample(10, 10),
        reference: row((102_401, 15, 2), 20.4, 1.3, 10014.0, 3199, 0.0),
    },
];

pub fn benchmark(name: &str) -> Option<&'static Benchmark> {
    BENCHMARKS.iter().find(|b| b.name == name)
}

pub fn corpus_dir() -> PathBuf {
    match std::env::var_os("HSVI_CORPUS") {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus"),
    }
}

impl Benchmark {
    /// Where the model for this benchmark comes from on this machine.
    pub fn source(&self) -> ProblemSource {
        let file = |stem: &str| ProblemSource::File {
            path: corpus_dir().join(format!("{stem}.pomdp")),
            permissive: false,
        };
        match self.kind {
            Kind::Corpus(stem) => file(stem),
            Kind::Tiger => ProblemSource::Tiger,
            Kind::Tag => {
                let path = corpus_dir().join("tag.pomdp");
                if path.exists() {
                    file("tag")
                } else {
                    ProblemSource::Tag(TagConfig::default())
                }
            }
            Kind::RockSample(n, k) => ProblemSource::RockSample(
                RockSampleConfig::standard(n, k, 0).expect("registry layouts are valid"),
            ),
        }
    }

    pub fn load(&self) -> Result<PomdpModel, LoadError> {
        self.source().load()
    }

    /// Whether the model can be produced without external files.
    pub fn is_available(&self) -> bool {
        match self.source() {
            ProblemSource::File { path, .. } => path.exists(),
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        for (i, a) in BENCHMARKS.iter().enumerate() {
            assert!(BENCHMARKS[i + 1..].iter().all(|b| b.name != a.name));
        }
    }

    #[test]
    fn generated_benchmarks_match_reference_sizes() {
        for name in ["tag", "rocksample-4-4"] {
            let b = benchmark(name).unwrap();
            let m = b.load().unwrap();
            let r = b.reference.unwrap();
            assert_eq!(
                (m.num_states(), m.num_actions(), m.num_observations()),
                (r.num_states, r.num_actions, r.num_observations),
                "{name}"
            );
        }
    }
}
