//! Policy extraction and Monte-Carlo evaluation.
//!
//! Each episode draws its own seed from a ChaCha8 stream keyed by the master
//! seed, samples a start state from `b₀`, and runs until a terminal state or
//! the horizon. Returns are discounted.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{argmax, lower_q_values, LowerBound, MdpBound};
use crate::model::{Belief, CsrMatrix, PomdpModel};
use crate::solver::{SolveParams, Solver};

pub const DEFAULT_HORIZON: usize = 250;

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// One-step lookahead against the lower bound.
    Lookahead(LowerBound),
    /// The action stored with the best lower-bound vector at the belief.
    AlphaDirect(LowerBound),
    /// `argmax_a Σ_s b(s) Q(s,a)`, with `q[a][s]`.
    Qmdp(Vec<Vec<f64>>),
    Blind(usize),
}

impl Policy {
    pub fn qmdp(mdp: &MdpBound) -> Self {
        Policy::Qmdp(mdp.q.clone())
    }
}

/// Action chosen by `policy` at `b`; ties go to the lowest index.
pub fn policy_action(policy: &Policy, model: &PomdpModel, b: &Belief) -> usize {
    match policy {
        Policy::Lookahead(lb) => argmax(&lower_q_values(model, lb, b, &model.expand(b))),
        Policy::AlphaDirect(lb) => lb.vectors()[lb.best(b).0].action(),
        Policy::Qmdp(q) => argmax(&q.iter().map(|qa| b.dot(qa)).collect::<Vec<_>>()),
        Policy::Blind(a) => *a,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub horizon: usize,
    pub seed: u64,
    pub mean: f64,
    pub std_dev: f64,
    /// `1.96·sd/√n`.
    pub ci_half_width: f64,
    pub episode_seeds: Vec<u64>,
    pub returns: Vec<f64>,
    /// Steps where the tracked belief had to be rebuilt because the sampled
    /// observation had (numerically) zero probability under it.
    pub belief_resets: usize,
}

impl EvalReport {
    pub fn from_returns(
        returns: Vec<f64>,
        episode_seeds: Vec<u64>,
        horizon: usize,
        seed: u64,
        belief_resets: usize,
    ) -> Self {
        let n = returns.len();
        let mean = if n == 0 {
            0.0
        } else {
            returns.iter().sum::<f64>() / n as f64
        };
        let std_dev = if n < 2 {
            0.0
        } else {
            (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        let ci_half_width = if n == 0 {
            0.0
        } else {
            1.96 * std_dev / (n as f64).sqrt()
        };
        Self {
            episodes: n,
            horizon,
            seed,
            mean,
            std_dev,
            ci_half_width,
            episode_seeds,
            returns,
            belief_resets,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per episode: `episode,seed,return`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,seed,return\n");
        for (i, (s, r)) in self.episode_seeds.iter().zip(&self.returns).enumerate() {
            out.push_str(&format!("{i},{s},{r}\n"));
        }
        out
    }
}

/// Smallest horizon with `γ^H (R_max − R_min)/(1 − γ) < tol`.
pub fn min_horizon(model: &PomdpModel, tol: f64) -> usize {
    let gamma = model.discount();
    let tail = model.reward_extrema().range() / (1.0 - gamma);
    if tail < tol || gamma == 0.0 {
        return 1;
    }
    ((tol / tail).ln() / gamma.ln()).floor() as usize + 1
}

fn sample_row(m: &CsrMatrix, row: usize, u: f64) -> usize {
    let (cols, vals) = m.row(row);
    let mut acc = 0.0;
    for (&c, &v) in cols.iter().zip(vals) {
        acc += v;
        if u < acc {
            return c;
        }
    }
    *cols.last().expect("stochastic rows are nonempty")
}

/// Discounted return of one episode, and the number of belief resets.
pub fn run_episode(
    policy: &Policy,
    model: &PomdpModel,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, usize) {
    let gamma = model.discount();
    let mut b = model.initial_belief().clone();
    let mut s = b.sample_with(rng.gen());
    let (mut total, mut discount, mut resets) = (0.0, 1.0, 0);
    for _ in 0..horizon {
        if model.is_terminal(s) {
            break;
        }
        let a = policy_action(policy, model, &b);
        total += discount * model.reward(s, a);
        discount *= gamma;
        let next = sample_row(model.transition(a), s, rng.gen());
        let z = sample_row(model.observation(a), next, rng.gen());
        b = match model.belief_update(&b, a, z) {
            Ok(nb) => nb,
            Err(e) => {
                warn!("belief update failed ({e}); restarting from the prediction");
                resets += 1;
                Belief::from_mass(model.predict(&b, a)).expect("prediction keeps mass")
            }
        };
        s = next;
    }
    (total, resets)
}

/// Evaluates `policy` over `episodes` independent episodes.
pub fn simulate(
    policy: &Policy,
    model: &PomdpModel,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> EvalReport {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..episodes).map(|_| master.gen()).collect();
    let mut returns = Vec::with_capacity(episodes);
    let mut resets = 0;
    for &s in &seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (r, k) = run_episode(policy, model, horizon, &mut rng);
        returns.push(r);
        resets += k;
    }
    EvalReport::from_returns(returns, seeds, horizon, seed, resets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub time_s: f64,
    pub mean_reward: f64,
    pub ci: f64,
    pub lower_b0: f64,
    pub upper_b0: f64,
}

pub const REWARD_COLUMNS: [&str; 5] = ["time_s", "mean_reward", "ci", "lower_b0", "upper_b0"];

pub fn reward_rows_to_csv(rows: &[RewardRow]) -> String {
    let mut out = REWARD_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.time_s, r.mean_reward, r.ci, r.lower_b0, r.upper_b0
        ));
    }
    out
}

/// Solves with `params`, evaluating a snapshot of the lookahead policy each
/// time the solver's clock passes a checkpoint (seconds, ascending).
/// Solving stops early once converged; remaining checkpoints reuse the
/// final policy.
pub fn reward_vs_time(
    model: &PomdpModel,
    params: SolveParams,
    checkpoints: &[f64],
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Vec<RewardRow> {
    let mut solver = Solver::new(model, params);
    let mut rows = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        let remaining = t - solver.elapsed_s();
        if remaining > 0.0 {
            solver.run(Some(remaining));
        }
        let snapshot = Policy::Lookahead(solver.bounds().lower.clone());
        let report = simulate(&snapshot, model, episodes, horizon, seed);
        rows.push(RewardRow {
            time_s: solver.elapsed_s(),
            mean_reward: report.mean,
            ci: report.ci_half_width,
            lower_b0: solver.lower_b0(),
            upper_b0: solver.upper_b0(),
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::init_upper_mdp;
    use crate::ingest::{generate_random, tiger};
    use crate::model::ModelParts;

    #[test]
    fn blind_policy_on_a_single_state_chain() {
        let m = PomdpModel::new(ModelParts {
            num_states: 1,
            num_actions: 2,
            num_observations: 1,
            transitions: vec![CsrMatrix::identity(1); 2],
            observations: vec![CsrMatrix::identity(1); 2],
            rewards: vec![vec![2.0], vec![-1.0]],
            discount: 0.9,
            initial_belief: Belief::uniform(1),
            state_names: None,
            action_names: None,
            observation_names: None,
        })
        .unwrap();
        let r = simulate(&Policy::Blind(0), &m, 20, 50, 1);
        let expect = 2.0 * (1.0 - 0.9f64.powi(50)) / 0.1;
        assert!((r.mean - expect).abs() < 1e-9);
        assert!(r.std_dev < 1e-12);
    }

    #[test]
    fn qmdp_on_a_corner_is_the_mdp_action() {
        let m = generate_random(5, 3, 2, 0.9, 8).unwrap();
        let mdp = init_upper_mdp(&m, 1e-9, 10_000);
        let policy = Policy::qmdp(&mdp);
        for s in 0..5 {
            let best = argmax(&(0..3).map(|a| mdp.q[a][s]).collect::<Vec<_>>());
            assert_eq!(policy_action(&policy, &m, &Belief::corner(5, s)), best);
        }
    }

    #[test]
    fn discount_zero_lookahead_is_greedy() {
        let m = generate_random(4, 3, 2, 0.0, 4).unwrap();
        let lb = crate::bounds::init_lower_blind(&m, 1e-6, 100);
        let b = Belief::from_dense(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let greedy = argmax(&(0..3).map(|a| m.belief_reward(&b, a)).collect::<Vec<_>>());
        assert_eq!(policy_action(&Policy::Lookahead(lb), &m, &b), greedy);
    }

    #[test]
    fn same_seed_same_report() {
        let m = tiger();
        let p = Policy::Blind(0);
        let a = simulate(&p, &m, 30, 40, 9);
        let b = simulate(&p, &m, 30, 40, 9);
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        assert!((a.ci_half_width - 1.96 * a.std_dev / 30f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn horizon_makes_the_tail_negligible() {
        let m = tiger();
        let h = min_horizon(&m, 0.01);
        let tail = |h: usize| 0.95f64.powi(h as i32) * 110.0 / 0.05;
        assert!(tail(h) < 0.01);
        assert!(tail(h - 1) >= 0.01);
    }
}
