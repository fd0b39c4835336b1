//! Immutable POMDP representation and belief dynamics.
//!
//! Transitions are stored as one row-stochastic CSR matrix `Pr(s'|s,a)` per
//! action and observations as one CSR matrix `Pr(z|s',a)` per action. The
//! observation-conditioned kernel used by the belief update is never
//! materialized; `τ(b,a,z)` is computed by Bayes rule with explicit
//! normalization, yielding `Pr(z|b,a)` as a byproduct.

mod belief;
pub mod sparse;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use belief::{Belief, BELIEF_SUM_TOL};
pub use sparse::{is_sorted_subset, CsrMatrix, SparseVector, SPARSE_EPS};

/// Tolerance on row sums of `T` and `O`.
pub const STOCHASTIC_TOL: f64 = 1e-9;
/// Observations with `Pr(z|b,a)` at or below this are treated as impossible.
pub const OBS_PROB_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(
        "observation {observation} is impossible after action {action} (Pr = {probability:e})"
    )]
    ImpossibleObservation {
        action: usize,
        observation: usize,
        probability: f64,
    },
    #[error("{kind} row for action {action}, state {state} sums to {sum} (expected 1)")]
    Stochasticity {
        kind: &'static str,
        action: usize,
        state: usize,
        sum: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("discount must lie in [0, 1), got {0}")]
    Discount(f64),
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("non-finite reward R({state}, {action})")]
    Reward { state: usize, action: usize },
}

/// Smallest and largest immediate reward over all `(s, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardExtrema {
    pub r_min: f64,
    pub r_max: f64,
}

impl RewardExtrema {
    pub fn range(&self) -> f64 {
        self.r_max - self.r_min
    }
}

/// Raw components handed to [`PomdpModel::new`].
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_observations: usize,
    /// Per action, rows indexed by `s`, columns by `s'`.
    pub transitions: Vec<CsrMatrix>,
    /// Per action, rows indexed by `s'`, columns by `z`.
    pub observations: Vec<CsrMatrix>,
    /// Per action, one reward per state.
    pub rewards: Vec<Vec<f64>>,
    pub discount: f64,
    pub initial_belief: Belief,
    pub state_names: Option<Vec<String>>,
    pub action_names: Option<Vec<String>>,
    pub observation_names: Option<Vec<String>>,
}

/// One reachable successor of a belief under a fixed action.
#[derive(Debug, Clone, PartialEq)]
pub struct Child {
    pub observation: usize,
    pub probability: f64,
    pub belief: Belief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PomdpModel {
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    transitions: Vec<CsrMatrix>,
    observations: Vec<CsrMatrix>,
    rewards: Vec<Vec<f64>>,
    discount: f64,
    initial_belief: Belief,
    state_names: Vec<String>,
    action_names: Vec<String>,
    observation_names: Vec<String>,
    extrema: RewardExtrema,
    terminal: Vec<bool>,
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl PomdpModel {
    pub fn new(parts: ModelParts) -> Result<Self, ModelError> {
        let ModelParts {
            num_states: ns,
            num_actions: na,
            num_observations: nz,
            transitions,
            observations,
            rewards,
            discount,
            initial_belief,
            state_names,
            action_names,
            observation_names,
        } = parts;
        if ns == 0 || na == 0 || nz == 0 {
            return Err(ModelError::Dimension(
                "empty state, action or observation set".into(),
            ));
        }
        if transitions.len() != na || observations.len() != na || rewards.len() != na {
            return Err(ModelError::Dimension(
                "per-action tables must have one entry per action".into(),
            ));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(ModelError::Discount(discount));
        }
        for (a, t) in transitions.iter().enumerate() {
            if t.rows() != ns || t.cols() != ns {
                return Err(ModelError::Dimension(format!(
                    "transition matrix for action {a}"
                )));
            }
            for s in 0..ns {
                let sum = t.row_sum(s);
                if (sum - 1.0).abs() > STOCHASTIC_TOL || t.row(s).1.iter().any(|&p| p < 0.0) {
                    return Err(ModelError::Stochasticity {
                        kind: "transition",
                        action: a,
                        state: s,
                        sum,
                    });
                }
            }
        }
        for (a, o) in observations.iter().enumerate() {
            if o.rows() != ns || o.cols() != nz {
                return Err(ModelError::Dimension(format!(
                    "observation matrix for action {a}"
                )));
            }
            for s in 0..ns {
                let sum = o.row_sum(s);
                if (sum - 1.0).abs() > STOCHASTIC_TOL || o.row(s).1.iter().any(|&p| p < 0.0) {
                    return Err(ModelError::Stochasticity {
                        kind: "observation",
                        action: a,
                        state: s,
                        sum,
                    });
                }
            }
        }
        for (a, r) in rewards.iter().enumerate() {
            if r.len() != ns {
                return Err(ModelError::Dimension(format!(
                    "reward vector for action {a}"
                )));
            }
            if let Some(s) = r.iter().position(|v| !v.is_finite()) {
                return Err(ModelError::Reward {
                    state: s,
                    action: a,
                });
            }
        }
        if initial_belief.num_states() != ns {
            return Err(ModelError::Dimension("initial belief length".into()));
        }
        let check_names = |names: Option<Vec<String>>, n: usize, prefix: &str| match names {
            Some(v) if v.len() == n => Ok(v),
            Some(_) => Err(ModelError::Dimension(format!("{prefix} name list length"))),
            None => Ok(default_names(prefix, n)),
        };
        let state_names = check_names(state_names, ns, "s")?;
        let action_names = check_names(action_names, na, "a")?;
        let observation_names = check_names(observation_names, nz, "o")?;

        let mut extrema = RewardExtrema {
            r_min: f64::INFINITY,
            r_max: f64::NEG_INFINITY,
        };
        for r in rewards.iter().flatten() {
            extrema.r_min = extrema.r_min.min(*r);
            extrema.r_max = extrema.r_max.max(*r);
        }
        // Absorbing, zero-reward states end simulated episodes.
        let terminal = (0..ns)
            .map(|s| {
                (0..na).all(|a| {
                    let (cols, vals) = transitions[a].row(s);
                    rewards[a][s] == 0.0 && cols == [s] && (vals[0] - 1.0).abs() <= STOCHASTIC_TOL
                })
            })
            .collect();

        Ok(Self {
            num_states: ns,
            num_actions: na,
            num_observations: nz,
            transitions,
            observations,
            rewards,
            discount,
            initial_belief,
            state_names,
            action_names,
            observation_names,
            extrema,
            terminal,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_observations(&self) -> usize {
        self.num_observations
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_belief(&self) -> &Belief {
        &self.initial_belief
    }

    pub fn transition(&self, a: usize) -> &CsrMatrix {
        &self.transitions[a]
    }

    pub fn observation(&self, a: usize) -> &CsrMatrix {
        &self.observations[a]
    }

    /// Dense reward column `R(·, a)`.
    pub fn rewards(&self, a: usize) -> &[f64] {
        &self.rewards[a]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[a][s]
    }

    pub fn reward_extrema(&self) -> RewardExtrema {
        self.extrema
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn observation_names(&self) -> &[String] {
        &self.observation_names
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_names.iter().position(|n| n == name)
    }

    /// Absorbing state with zero reward under every action.
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// `R(b, a) = Σ_s b(s) R(s, a)`.
    pub fn belief_reward(&self, b: &Belief, a: usize) -> f64 {
        b.dot(&self.rewards[a])
    }

    /// Predicted next-state mass `Σ_s Pr(s'|s,a) b(s)`.
    pub fn predict(&self, b: &Belief, a: usize) -> SparseVector {
        self.transitions[a].left_multiply(b.as_sparse())
    }

    /// `Pr(z | b, a)` for every observation.
    pub fn observation_probability(&self, b: &Belief, a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_observations];
        let obs = &self.observations[a];
        for (sp, p) in self.predict(b, a).iter() {
            for (z, o) in obs.row_iter(sp) {
                out[z] += p * o;
            }
        }
        out
    }

    /// `τ(b, a, z)`.
    pub fn belief_update(&self, b: &Belief, a: usize, z: usize) -> Result<Belief, ModelError> {
        let obs = &self.observations[a];
        let predicted = self.predict(b, a);
        let (mut idx, mut val) = (Vec::new(), Vec::new());
        for (sp, p) in predicted.iter() {
            let o = obs.get(sp, z);
            if o > 0.0 {
                idx.push(sp);
                val.push(p * o);
            }
        }
        let mass = SparseVector::from_sorted(self.num_states, idx, val);
        let total = mass.sum();
        if total <= OBS_PROB_EPS {
            return Err(ModelError::ImpossibleObservation {
                action: a,
                observation: z,
                probability: total,
            });
        }
        Belief::from_mass(mass)
    }

    /// Every observation with `Pr(z|b,a) > 1e-12` together with its
    /// probability and posterior, in increasing observation order.
    pub fn reachable_children(&self, b: &Belief, a: usize) -> Vec<Child> {
        let predicted = self.predict(b, a);
        if self.num_observations == 1 {
            let belief =
                Belief::from_mass(predicted).expect("stochastic transitions preserve mass");
            return vec![Child {
                observation: 0,
                probability: 1.0,
                belief,
            }];
        }
        let obs = &self.observations[a];
        // Bucket the joint mass Pr(s', z | b, a) by observation; s' arrives in
        // increasing order so every bucket stays sorted.
        let mut buckets: Vec<(Vec<usize>, Vec<f64>)> =
            vec![(Vec::new(), Vec::new()); self.num_observations];
        for (sp, p) in predicted.iter() {
            for (z, o) in obs.row_iter(sp) {
                let m = p * o;
                if m > 0.0 {
                    buckets[z].0.push(sp);
                    buckets[z].1.push(m);
                }
            }
        }
        let mut children = Vec::new();
        for (z, (idx, val)) in buckets.into_iter().enumerate() {
            let total: f64 = val.iter().sum();
            if total <= OBS_PROB_EPS {
                continue;
            }
            let mass = SparseVector::from_sorted(self.num_states, idx, val);
            if let Ok(belief) = Belief::from_mass(mass) {
                children.push(Child {
                    observation: z,
                    probability: total,
                    belief,
                });
            }
        }
        children
    }

    /// Children for every action, indexed by action.
    pub fn expand(&self, b: &Belief) -> Vec<Vec<Child>> {
        (0..self.num_actions)
            .map(|a| self.reachable_children(b, a))
            .collect()
    }

    /// Stable fingerprint of the model contents, used to tie policy files to
    /// the problem they were computed for.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for n in [self.num_states, self.num_actions, self.num_observations] {
            h.update((n as u64).to_le_bytes());
        }
        h.update(self.discount.to_bits().to_le_bytes());
        let feed_matrix = |m: &CsrMatrix, h: &mut Sha256| {
            for r in 0..m.rows() {
                for (c, v) in m.row_iter(r) {
                    h.update((r as u64).to_le_bytes());
                    h.update((c as u64).to_le_bytes());
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        };
        for a in 0..self.num_actions {
            feed_matrix(&self.transitions[a], &mut h);
            feed_matrix(&self.observations[a], &mut h);
            for r in &self.rewards[a] {
                h.update(r.to_bits().to_le_bytes());
            }
        }
        for (s, p) in self.initial_belief.iter() {
            h.update((s as u64).to_le_bytes());
            h.update(p.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        hex::encode(&digest[..16])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_random, tiger};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_state(transitions: CsrMatrix, obs: CsrMatrix, nz: usize) -> PomdpModel {
        PomdpModel::new(ModelParts {
            num_states: 2,
            num_actions: 1,
            num_observations: nz,
            transitions: vec![transitions],
            observations: vec![obs],
            rewards: vec![vec![1.0, 2.0]],
            discount: 0.9,
            initial_belief: Belief::uniform(2),
            state_names: None,
            action_names: None,
            observation_names: None,
        })
        .unwrap()
    }

    #[test]
    fn uninformative_dynamics_fix_the_belief() {
        let m = two_state(
            CsrMatrix::identity(2),
            CsrMatrix::from_rows(3, vec![vec![(0, 0.2), (1, 0.3), (2, 0.5)]; 2]),
            3,
        );
        let b = Belief::from_dense(&[0.3, 0.7]).unwrap();
        for z in 0..3 {
            let next = m.belief_update(&b, 0, z).unwrap();
            assert!(next.l1_distance(&b) < 1e-12);
        }
    }

    #[test]
    fn deterministic_shift() {
        let m = two_state(
            CsrMatrix::from_rows(2, vec![vec![(1, 1.0)], vec![(1, 1.0)]]),
            CsrMatrix::from_rows(1, vec![vec![(0, 1.0)]; 2]),
            1,
        );
        let b = Belief::corner(2, 0);
        assert_eq!(
            m.belief_update(&b, 0, 0).unwrap().to_dense(),
            vec![0.0, 1.0]
        );
        let kids = m.reachable_children(&b, 0);
        assert_eq!(kids.len(), 1);
        assert_eq!(kids[0].probability, 1.0);
    }

    #[test]
    fn tiger_listen_posterior() {
        let m = tiger();
        let b = Belief::uniform(2);
        let listen = m.action_index("listen").unwrap();
        // Bayes: Pr(hear-left | tiger-left) = 0.85, prior 0.5 each side.
        let expect = 0.85 * 0.5 / (0.85 * 0.5 + 0.15 * 0.5);
        let post = m.belief_update(&b, listen, 0).unwrap();
        assert!((post.prob(0) - expect).abs() < 1e-12);
        assert!((post.prob(0) - 0.85).abs() < 1e-12);
        let pz = m.observation_probability(&b, listen);
        assert!((pz[0] - 0.5).abs() < 1e-12 && (pz[1] - 0.5).abs() < 1e-12);
        let open_left = m.action_index("open-left").unwrap();
        assert!((m.belief_reward(&b, open_left) - (-45.0)).abs() < 1e-12);

        let kids = m.reachable_children(&b, listen);
        assert_eq!(kids.len(), 2);
        assert!((kids[0].probability - 0.5).abs() < 1e-12);
        assert!((kids[1].belief.prob(0) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn uniform_sensor_and_single_observation() {
        let m = two_state(
            CsrMatrix::identity(2),
            CsrMatrix::from_rows(4, vec![vec![(0, 0.25), (1, 0.25), (2, 0.25), (3, 0.25)]; 2]),
            4,
        );
        let pz = m.observation_probability(&Belief::from_dense(&[0.1, 0.9]).unwrap(), 0);
        assert!(pz.iter().all(|p| (p - 0.25).abs() < 1e-15));
        let single = two_state(
            CsrMatrix::identity(2),
            CsrMatrix::from_rows(1, vec![vec![(0, 1.0)]; 2]),
            1,
        );
        assert_eq!(
            single.observation_probability(&Belief::uniform(2), 0),
            vec![1.0]
        );
    }

    #[test]
    fn impossible_observation_is_an_error_and_pruned_from_children() {
        // Perfect sensor: state 0 always emits z0, state 1 emits z1.
        let m = two_state(
            CsrMatrix::identity(2),
            CsrMatrix::from_rows(2, vec![vec![(0, 1.0)], vec![(1, 1.0)]]),
            2,
        );
        let b = Belief::corner(2, 0);
        assert!(matches!(
            m.belief_update(&b, 0, 1),
            Err(ModelError::ImpossibleObservation { .. })
        ));
        assert_eq!(m.reachable_children(&b, 0).len(), 1);
    }

    #[test]
    fn corner_reward() {
        let m = tiger();
        for a in 0..3 {
            for s in 0..2 {
                assert_eq!(m.belief_reward(&Belief::corner(2, s), a), m.reward(s, a));
            }
        }
    }

    #[test]
    fn rejects_substochastic_rows() {
        let err = PomdpModel::new(ModelParts {
            num_states: 2,
            num_actions: 1,
            num_observations: 1,
            transitions: vec![CsrMatrix::from_rows(
                2,
                vec![vec![(0, 0.9)], vec![(1, 1.0)]],
            )],
            observations: vec![CsrMatrix::from_rows(1, vec![vec![(0, 1.0)]; 2])],
            rewards: vec![vec![0.0, 0.0]],
            discount: 0.9,
            initial_belief: Belief::uniform(2),
            state_names: None,
            action_names: None,
            observation_names: None,
        })
        .unwrap_err();
        assert!(matches!(err, ModelError::Stochasticity { state: 0, .. }));
    }

    fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> Belief {
        let mut w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            w[0] = 1.0;
        }
        let t: f64 = w.iter().sum();
        Belief::from_dense(&w.iter().map(|x| x / t).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn observation_probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..1000 {
            let m = generate_random(2 + i % 7, 1 + i % 3, 1 + i % 4, 0.9, i as u64).unwrap();
            let b = random_belief(&mut rng, m.num_states());
            let a = rng.gen_range(0..m.num_actions());
            let total: f64 = m.observation_probability(&b, a).iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            let kids: f64 = m
                .reachable_children(&b, a)
                .iter()
                .map(|c| c.probability)
                .sum();
            assert!((kids - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn update_support_stays_within_successors(seed in 0u64..500, z_pick in 0usize..8) {
            let m = generate_random(6, 2, 3, 0.9, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = random_belief(&mut rng, 6);
            let a = (seed % 2) as usize;
            let z = z_pick % 3;
            if let Ok(next) = m.belief_update(&b, a, z) {
                let reachable: Vec<usize> = m.predict(&b, a).indices().to_vec();
                prop_assert!(next.support().iter().all(|s| reachable.contains(s)));
                prop_assert!((next.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(next.probs().iter().all(|&p| p > 0.0));
            }
        }
    }
}
