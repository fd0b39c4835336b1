//! Tag: a robot chases an opponent that actively moves away from it.
//!
//! The map is a 10×2 corridor with a 3×3 room on top of columns 5–7, 29 cells
//! in all. A state pairs the robot cell with either an opponent cell or the
//! absorbing `tagged` marker, giving 29 × 30 = 870 states. The robot observes
//! its own cell, or a distinct "same cell" signal when it shares a cell with
//! the opponent, for 30 observations.

use serde::{Deserialize, Serialize};

use super::GenerateError;
use crate::model::{Belief, CsrMatrix, ModelParts, PomdpModel, SparseVector};

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const TAG: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagConfig {
    pub discount: f64,
    pub move_reward: f64,
    pub tag_reward: f64,
    pub miss_reward: f64,
    /// Probability the opponent stays put instead of fleeing.
    pub stay_probability: f64,
}

impl Default for TagConfig {
    fn default() -> Self {
        Self {
            discount: 0.95,
            move_reward: -1.0,
            tag_reward: 10.0,
            miss_reward: -10.0,
            stay_probability: 0.2,
        }
    }
}

fn cells() -> Vec<(i32, i32)> {
    let mut out: Vec<(i32, i32)> = (0..2).flat_map(|y| (0..10).map(move |x| (x, y))).collect();
    out.extend((2..5).flat_map(|y| (5..8).map(move |x| (x, y))));
    out
}

pub fn generate_tag(cfg: &TagConfig) -> Result<PomdpModel, GenerateError> {
    if !(0.0..1.0).contains(&cfg.discount) || !(0.0..=1.0).contains(&cfg.stay_probability) {
        return Err(GenerateError::InvalidParams(
            "discount or stay probability out of range".into(),
        ));
    }
    let cells = cells();
    let nc = cells.len();
    let tagged = nc;
    let ns = nc * (nc + 1);
    let same_cell_obs = nc;
    let cell_of = |p: (i32, i32)| cells.iter().position(|&c| c == p);
    let step = |c: usize, a: usize| -> usize {
        let (x, y) = cells[c];
        let target = match a {
            NORTH => (x, y + 1),
            SOUTH => (x, y - 1),
            EAST => (x + 1, y),
            WEST => (x - 1, y),
            _ => (x, y),
        };
        cell_of(target).unwrap_or(c)
    };
    let state = |r: usize, o: usize| r * (nc + 1) + o;

    // Opponent flight: along each axis it steps away from the robot with
    // probability (1 - stay)/2, splitting that mass between both directions
    // when the axis coordinates coincide. Blocked steps leave it in place.
    let flee = |robot: usize, opp: usize| -> Vec<(usize, f64)> {
        let (rx, ry) = cells[robot];
        let (ox, oy) = cells[opp];
        let half = (1.0 - cfg.stay_probability) / 2.0;
        let mut moves = vec![(opp, cfg.stay_probability)];
        let mut axis = |neg: usize, pos: usize, r: i32, o: i32| {
            if o > r {
                moves.push((step(opp, pos), half));
            } else if o < r {
                moves.push((step(opp, neg), half));
            } else {
                moves.push((step(opp, pos), half / 2.0));
                moves.push((step(opp, neg), half / 2.0));
            }
        };
        axis(WEST, EAST, rx, ox);
        axis(SOUTH, NORTH, ry, oy);
        moves
    };

    let na = 5;
    let mut trans: Vec<Vec<Vec<(usize, f64)>>> = vec![Vec::new(); na];
    let mut rewards = vec![vec![0.0; ns]; na];
    for r in 0..nc {
        for o in 0..=nc {
            let s = state(r, o);
            for a in 0..na {
                let row = if o == tagged {
                    vec![(s, 1.0)]
                } else if a == TAG && r == o {
                    rewards[a][s] = cfg.tag_reward;
                    vec![(state(r, tagged), 1.0)]
                } else {
                    rewards[a][s] = if a == TAG {
                        cfg.miss_reward
                    } else {
                        cfg.move_reward
                    };
                    let r2 = step(r, a);
                    flee(r, o)
                        .into_iter()
                        .map(|(o2, p)| (state(r2, o2), p))
                        .collect()
                };
                trans[a].push(row);
            }
        }
    }
    let obs_rows: Vec<Vec<(usize, f64)>> = (0..nc)
        .flat_map(|r| {
            (0..=nc).map(move |o| {
                if o == r {
                    vec![(same_cell_obs, 1.0)]
                } else {
                    vec![(r, 1.0)]
                }
            })
        })
        .collect();

    let start: Vec<usize> = (0..nc)
        .flat_map(|r| (0..nc).map(move |o| state(r, o)))
        .collect();
    let p = 1.0 / start.len() as f64;
    let initial = Belief::new(SparseVector::from_sorted(
        ns,
        start.clone(),
        vec![p; start.len()],
    ))?;

    let mut state_names = Vec::with_capacity(ns);
    for r in 0..nc {
        for o in 0..=nc {
            if o == tagged {
                state_names.push(format!("r{r}_tagged"));
            } else {
                state_names.push(format!("r{r}_o{o}"));
            }
        }
    }
    let mut observation_names: Vec<String> = (0..nc).map(|c| format!("at{c}")).collect();
    observation_names.push("same".into());

    Ok(PomdpModel::new(ModelParts {
        num_states: ns,
        num_actions: na,
        num_observations: nc + 1,
        transitions: trans
            .into_iter()
            .map(|rows| CsrMatrix::from_rows(ns, rows))
            .collect(),
        observations: (0..na)
            .map(|_| CsrMatrix::from_rows(nc + 1, obs_rows.clone()))
            .collect(),
        rewards,
        discount: cfg.discount,
        initial_belief: initial,
        state_names: Some(state_names),
        action_names: Some(
            ["north", "south", "east", "west", "tag"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        ),
        observation_names: Some(observation_names),
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_size() {
        let m = generate_tag(&TagConfig::default()).unwrap();
        assert_eq!(
            (m.num_states(), m.num_actions(), m.num_observations()),
            (870, 5, 30)
        );
        assert_eq!(m.initial_belief().support().len(), 29 * 29);
        assert_eq!((0..870).filter(|&s| m.is_terminal(s)).count(), 29);
    }

    #[test]
    fn opponent_never_approaches() {
        let m = generate_tag(&TagConfig::default()).unwrap();
        let cells = cells();
        let dist = |a: usize, b: usize| {
            let (ax, ay) = cells[a];
            let (bx, by) = cells[b];
            (ax - bx).abs() + (ay - by).abs()
        };
        for r in 0..29 {
            for o in 0..29 {
                if r == o {
                    continue;
                }
                let s = r * 30 + o;
                for (s2, _) in m.transition(TAG).row_iter(s) {
                    let o2 = s2 % 30;
                    assert!(dist(r, o2) >= dist(r, o));
                }
            }
        }
    }
}
