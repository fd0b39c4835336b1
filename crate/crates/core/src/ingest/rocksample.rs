//! RockSample generator.
//!
//! A rover on an `n × n` grid knows its own position but not which of the
//! `k` rocks are worth sampling. States encode `(x, y, rock bits)` plus one
//! absorbing terminal state reached by driving off the east edge.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GenerateError;
use crate::model::{Belief, CsrMatrix, ModelParts, PomdpModel, SparseVector};

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const SAMPLE: usize = 4;
/// `check_i` is action `FIRST_CHECK + i`.
pub const FIRST_CHECK: usize = 5;

const OBS_GOOD: usize = 0;
const OBS_BAD: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RockSampleConfig {
    pub size: usize,
    /// Rock cells as `(x, y)`.
    pub rocks: Vec<(usize, usize)>,
    pub start: (usize, usize),
    pub discount: f64,
    /// Distance at which a check is only 75% accurate.
    pub half_efficiency_distance: f64,
    pub good_sample_reward: f64,
    pub bad_sample_reward: f64,
    pub exit_reward: f64,
}

impl RockSampleConfig {
    pub fn with_positions(size: usize, num_rocks: usize, rocks: Vec<(usize, usize)>) -> Self {
        debug_assert_eq!(rocks.len(), num_rocks);
        Self {
            size,
            rocks,
            start: (0, size / 2),
            discount: 0.95,
            half_efficiency_distance: 20.0,
            good_sample_reward: 10.0,
            bad_sample_reward: -10.0,
            exit_reward: 10.0,
        }
    }

    /// Distinct rock cells drawn uniformly with a seeded generator; the start
    /// cell is excluded when the grid has room.
    pub fn seeded(size: usize, num_rocks: usize, seed: u64) -> Result<Self, GenerateError> {
        let start = (0, size / 2);
        let mut cells: Vec<(usize, usize)> = (0..size)
            .flat_map(|y| (0..size).map(move |x| (x, y)))
            .collect();
        if cells.len() > num_rocks {
            cells.retain(|&c| c != start);
        }
        if num_rocks > cells.len() {
            return Err(GenerateError::InvalidParams(format!(
                "{num_rocks} rocks do not fit on a {size}x{size} grid"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cells.shuffle(&mut rng);
        cells.truncate(num_rocks);
        Ok(Self::with_positions(size, num_rocks, cells))
    }

    /// The published layouts for `[4,4]` and `[7,8]`; other sizes fall back
    /// to [`RockSampleConfig::seeded`].
    pub fn standard(size: usize, num_rocks: usize, seed: u64) -> Result<Self, GenerateError> {
        let rocks = match (size, num_rocks) {
            (4, 4) => vec![(3, 1), (2, 1), (1, 3), (1, 0)],
            (7, 8) => vec![
                (2, 0),
                (0, 1),
                (3, 1),
                (6, 3),
                (2, 4),
                (3, 4),
                (5, 5),
                (1, 6),
            ],
            _ => return Self::seeded(size, num_rocks, seed),
        };
        Ok(Self::with_positions(size, num_rocks, rocks))
    }

    pub fn num_states(&self) -> usize {
        self.size * self.size * (1usize << self.rocks.len()) + 1
    }

    pub fn num_actions(&self) -> usize {
        FIRST_CHECK + self.rocks.len()
    }

    fn validate(&self) -> Result<(), GenerateError> {
        let bad = |m: String| Err(GenerateError::InvalidParams(m));
        if self.size == 0 {
            return bad("grid size must be at least 1".into());
        }
        if self.rocks.len() > 20 {
            return bad(format!("{} rocks is too many", self.rocks.len()));
        }
        for (i, &(x, y)) in self.rocks.iter().enumerate() {
            if x >= self.size || y >= self.size {
                return bad(format!("rock {i} at ({x},{y}) is outside the grid"));
            }
            if self.rocks[..i].contains(&(x, y)) {
                return bad(format!("rock {i} shares cell ({x},{y}) with another rock"));
            }
        }
        if self.start.0 >= self.size || self.start.1 >= self.size {
            return bad("start cell is outside the grid".into());
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("discount {} outside [0, 1)", self.discount));
        }
        if !(self.half_efficiency_distance > 0.0) {
            return bad("half-efficiency distance must be positive".into());
        }
        Ok(())
    }

    /// Probability that `check_i` reports the true rock quality from `(x, y)`.
    pub fn check_accuracy(&self, x: usize, y: usize, rock: usize) -> f64 {
        let (rx, ry) = self.rocks[rock];
        let d = ((x as f64 - rx as f64).powi(2) + (y as f64 - ry as f64).powi(2)).sqrt();
        0.5 + 0.5 * 2f64.powf(-d / self.half_efficiency_distance)
    }
}

/// Generates the model described by `cfg`.
pub fn generate_rocksample(cfg: &RockSampleConfig) -> Result<PomdpModel, GenerateError> {
    cfg.validate()?;
    let n = cfg.size;
    let k = cfg.rocks.len();
    let combos = 1usize << k;
    let ns = cfg.num_states();
    let terminal = ns - 1;
    let na = cfg.num_actions();
    let index = |x: usize, y: usize, bits: usize| (y * n + x) * combos + bits;
    let rock_at = |x: usize, y: usize| cfg.rocks.iter().position(|&r| r == (x, y));

    let mut trans: Vec<Vec<Vec<(usize, f64)>>> = vec![Vec::with_capacity(ns); na];
    let mut obs: Vec<Vec<Vec<(usize, f64)>>> = vec![Vec::with_capacity(ns); na];
    let mut rewards = vec![vec![0.0; ns]; na];

    for y in 0..n {
        for x in 0..n {
            for bits in 0..combos {
                let s = index(x, y, bits);
                debug_assert_eq!(trans[0].len(), s);
                for a in 0..na {
                    let (next, r) = match a {
                        NORTH => (index(x, (y + 1).min(n - 1), bits), 0.0),
                        SOUTH => (index(x, y.saturating_sub(1), bits), 0.0),
                        EAST if x + 1 == n => (terminal, cfg.exit_reward),
                        EAST => (index(x + 1, y, bits), 0.0),
                        WEST => (index(x.saturating_sub(1), y, bits), 0.0),
                        SAMPLE => match rock_at(x, y) {
                            Some(i) if bits & (1 << i) != 0 => {
                                (index(x, y, bits & !(1 << i)), cfg.good_sample_reward)
                            }
                            _ => (s, cfg.bad_sample_reward),
                        },
                        _ => (s, 0.0),
                    };
                    trans[a].push(vec![(next, 1.0)]);
                    rewards[a][s] = r;
                }
            }
        }
    }
    for t in trans.iter_mut() {
        t.push(vec![(terminal, 1.0)]);
    }

    // Observations depend on the arrival state s'; checks leave the state
    // unchanged, so s' carries the rover cell and the rock bits.
    for (a, o) in obs.iter_mut().enumerate() {
        for y in 0..n {
            for x in 0..n {
                for bits in 0..combos {
                    if a >= FIRST_CHECK {
                        let rock = a - FIRST_CHECK;
                        let acc = cfg.check_accuracy(x, y, rock);
                        let good = bits & (1 << rock) != 0;
                        let (pg, pb) = if good {
                            (acc, 1.0 - acc)
                        } else {
                            (1.0 - acc, acc)
                        };
                        o.push(vec![(OBS_GOOD, pg), (OBS_BAD, pb)]);
                    } else {
                        o.push(vec![(OBS_GOOD, 1.0)]);
                    }
                }
            }
        }
        o.push(vec![(OBS_GOOD, 1.0)]);
    }

    let start = index(cfg.start.0, cfg.start.1, 0);
    let initial = Belief::new(SparseVector::from_sorted(
        ns,
        (start..start + combos).collect(),
        vec![1.0 / combos as f64; combos],
    ))?;

    let mut state_names = Vec::with_capacity(ns);
    for y in 0..n {
        for x in 0..n {
            for bits in 0..combos {
                let rocks: String = (0..k)
                    .map(|i| if bits & (1 << i) != 0 { 'G' } else { 'B' })
                    .collect();
                state_names.push(format!("x{x}y{y}_{rocks}"));
            }
        }
    }
    state_names.push("terminal".into());
    let mut action_names: Vec<String> = ["north", "south", "east", "west", "sample"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    action_names.extend((0..k).map(|i| format!("check{i}")));

    Ok(PomdpModel::new(ModelParts {
        num_states: ns,
        num_actions: na,
        num_observations: 2,
        transitions: trans
            .into_iter()
            .map(|rows| CsrMatrix::from_rows(ns, rows))
            .collect(),
        observations: obs
            .into_iter()
            .map(|rows| CsrMatrix::from_rows(2, rows))
            .collect(),
        rewards,
        discount: cfg.discount,
        initial_belief: initial,
        state_names: Some(state_names),
        action_names: Some(action_names),
        observation_names: Some(vec!["good".into(), "bad".into()]),
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_sizes() {
        let m = generate_rocksample(&RockSampleConfig::standard(4, 4, 0).unwrap()).unwrap();
        assert_eq!(
            (m.num_states(), m.num_actions(), m.num_observations()),
            (257, 9, 2)
        );
        let cfg = RockSampleConfig::standard(7, 8, 0).unwrap();
        assert_eq!((cfg.num_states(), cfg.num_actions()), (12_545, 13));
        let m = generate_rocksample(&cfg).unwrap();
        assert_eq!(
            (m.num_states(), m.num_actions(), m.num_observations()),
            (12_545, 13, 2)
        );
    }

    #[test]
    fn degenerate_grid() {
        let m = generate_rocksample(&RockSampleConfig::with_positions(1, 0, vec![])).unwrap();
        assert_eq!((m.num_states(), m.num_actions()), (2, 5));
        assert_eq!(
            m.transition(EAST).row_iter(0).collect::<Vec<_>>(),
            vec![(1, 1.0)]
        );
        assert_eq!(m.reward(0, EAST), 10.0);
    }

    #[test]
    fn terminal_is_absorbing_with_zero_reward() {
        let cfg = RockSampleConfig::seeded(3, 2, 5).unwrap();
        let m = generate_rocksample(&cfg).unwrap();
        let t = m.num_states() - 1;
        assert!(m.is_terminal(t));
        for a in 0..m.num_actions() {
            assert_eq!(m.reward(t, a), 0.0);
            assert_eq!(
                m.transition(a).row_iter(t).collect::<Vec<_>>(),
                vec![(t, 1.0)]
            );
        }
        assert_eq!((1..t).filter(|&s| m.is_terminal(s)).count(), 0);
        let ex = m.reward_extrema();
        assert_eq!((ex.r_min, ex.r_max), (-10.0, 10.0));
    }

    #[test]
    fn sampling_consumes_good_rocks() {
        let cfg = RockSampleConfig::with_positions(2, 1, vec![(0, 1)]);
        let m = generate_rocksample(&cfg).unwrap();
        // Cell (x=0, y=1) has index 2 and holds the rock; bit 1 = good.
        let good = 2 * 2 + 1;
        assert_eq!(m.reward(good, SAMPLE), 10.0);
        assert_eq!(
            m.transition(SAMPLE).row_iter(good).next(),
            Some((good - 1, 1.0))
        );
        assert_eq!(m.reward(good - 1, SAMPLE), -10.0);
    }

    #[test]
    fn check_accuracy_decays_with_distance() {
        let cfg = RockSampleConfig::with_positions(5, 1, vec![(4, 4)]);
        assert_eq!(cfg.check_accuracy(4, 4, 0), 1.0);
        let far = cfg.check_accuracy(0, 0, 0);
        let expect = 0.5 + 0.5 * 2f64.powf(-(32f64).sqrt() / 20.0);
        assert!((far - expect).abs() < 1e-15);
    }

    #[test]
    fn invalid_params() {
        assert!(
            generate_rocksample(&RockSampleConfig::with_positions(2, 1, vec![(2, 0)])).is_err()
        );
        assert!(generate_rocksample(&RockSampleConfig::with_positions(
            2,
            2,
            vec![(1, 0), (1, 0)]
        ))
        .is_err());
        assert!(RockSampleConfig::seeded(1, 3, 0).is_err());
    }
}
