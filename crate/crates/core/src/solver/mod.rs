//! Heuristic search value iteration.
//!
//! Each trial walks a single path down from `b₀`, choosing the action with
//! the best upper-bound Q-value and the observation with the largest
//! probability-weighted excess width, until the bounds at the current node
//! are tight enough for its depth. The bounds are then updated at every
//! visited node on the way back up.

mod trace;

use std::time::Instant;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use trace::{SolveTrace, TraceRecord, TRACE_COLUMNS};

use crate::bounds::{
    argmax, init_lower_blind, init_upper_fib, init_upper_mdp, BoundsPair, Convergence, MdpBound,
    DEFAULT_MAX_ITERS, DEFAULT_RESIDUAL_TOL,
};
use crate::model::{Belief, Child, PomdpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heuristic {
    /// Greedy upper-bound actions and weighted-excess observations.
    Hsvi,
    /// Uniform random actions, observations sampled by probability. A
    /// baseline for tests.
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Target width of the bounds at `b₀`.
    pub epsilon: f64,
    /// Wallclock budget in seconds, including initialization.
    pub time_budget: Option<f64>,
    pub max_trials: Option<usize>,
    /// Depth cap for a trial; derived from `epsilon` when `None`.
    pub max_depth: Option<usize>,
    /// Prune a bound once it has grown by this factor since its last prune.
    pub prune_growth_factor: f64,
    /// Only used by the random heuristic.
    pub seed: u64,
    pub heuristic: Heuristic,
    pub init_residual_tol: f64,
    pub init_max_iters: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            time_budget: None,
            max_trials: None,
            max_depth: None,
            prune_growth_factor: 1.1,
            seed: 0,
            heuristic: Heuristic::Hsvi,
            init_residual_tol: DEFAULT_RESIDUAL_TOL,
            init_max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    Budget,
    TrialCap,
}

/// Depth past which `εγ^{-t}` exceeds any possible width, plus a margin.
pub fn default_max_depth(model: &PomdpModel, epsilon: f64) -> usize {
    let gamma = model.discount();
    let range = model.reward_extrema().range();
    if gamma == 0.0 || range == 0.0 {
        return 1;
    }
    let ratio = epsilon * (1.0 - gamma) / range;
    let depth = if ratio >= 1.0 {
        0.0
    } else {
        (ratio.ln() / gamma.ln()).ceil()
    };
    depth as usize + 10
}

/// `εγ^{-t}`.
pub fn width_threshold(model: &PomdpModel, epsilon: f64, t: usize) -> f64 {
    let t = i32::try_from(t).unwrap_or(i32::MAX);
    epsilon * model.discount().powi(-t)
}

/// IE-MAX: the action with the largest upper-bound Q-value, lowest index on
/// ties. `children` is `model.expand(b)`.
pub fn select_action(
    model: &PomdpModel,
    bounds: &BoundsPair,
    b: &Belief,
    children: &[Vec<Child>],
) -> usize {
    argmax(&bounds.upper.q_values(model, b, children))
}

/// The observation maximizing `Pr(z|b,a)·excess(τ(b,a,z), t+1)`, or `None`
/// when no child has positive weighted excess. `children` are the children
/// of `b` under the chosen action.
pub fn select_observation(
    model: &PomdpModel,
    bounds: &BoundsPair,
    children: &[Child],
    epsilon: f64,
    t: usize,
) -> Option<usize> {
    let threshold = width_threshold(model, epsilon, t + 1);
    let mut best: Option<(usize, f64)> = None;
    for child in children {
        let score = child.probability * (bounds.width(&child.belief) - threshold);
        if score > 0.0 && best.is_none_or(|(_, s)| score > s) {
            best = Some((child.observation, score));
        }
    }
    best.map(|(z, _)| z)
}

/// One trial from `b` at depth `t`. Returns the number of nodes updated.
pub fn explore(
    model: &PomdpModel,
    bounds: &mut BoundsPair,
    b: &Belief,
    epsilon: f64,
    t: usize,
    max_depth: usize,
) -> usize {
    explore_with(model, bounds, b, epsilon, t, max_depth, None)
}

fn explore_with(
    model: &PomdpModel,
    bounds: &mut BoundsPair,
    b: &Belief,
    epsilon: f64,
    t0: usize,
    max_depth: usize,
    mut rng: Option<&mut ChaCha8Rng>,
) -> usize {
    // Trials follow a single path, so the recursion unrolls into a forward
    // walk followed by updates in reverse order.
    let mut path: Vec<(Belief, Vec<Vec<Child>>)> = Vec::new();
    let mut current = b.clone();
    let mut t = t0;
    loop {
        if bounds.width(&current) <= width_threshold(model, epsilon, t) {
            break;
        }
        let children = model.expand(&current);
        if t >= max_depth {
            path.push((current, children));
            break;
        }
        let next = match rng.as_deref_mut() {
            None => {
                let a = select_action(model, bounds, &current, &children);
                select_observation(model, bounds, &children[a], epsilon, t)
                    .and_then(|z| children[a].iter().find(|c| c.observation == z))
                    .map(|c| c.belief.clone())
            }
            Some(rng) => {
                let a = rng.gen_range(0..model.num_actions());
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let kids = &children[a];
                kids.iter()
                    .find(|c| {
                        acc += c.probability;
                        u < acc
                    })
                    .or(kids.last())
                    .map(|c| c.belief.clone())
            }
        };
        path.push((current, children));
        match next {
            Some(nb) => {
                current = nb;
                t += 1;
            }
            None => break,
        }
    }
    for (node, children) in path.iter().rev() {
        bounds.lower.update_with_children(model, node, children);
        bounds.upper.update_with_children(model, node, children);
    }
    path.len()
}

/// Outcome of a solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub bounds: BoundsPair,
    pub trace: SolveTrace,
    pub termination: Termination,
    /// MDP relaxation computed during initialization, reused by QMDP.
    pub mdp: MdpBound,
    pub trials: usize,
    pub updates: usize,
    pub elapsed_s: f64,
}

/// Resumable solver state. [`Solver::run`] may be called repeatedly with
/// additional budget.
pub struct Solver<'m> {
    model: &'m PomdpModel,
    params: SolveParams,
    bounds: BoundsPair,
    mdp: MdpBound,
    fib_convergence: Convergence,
    trace: SolveTrace,
    trials: usize,
    updates: usize,
    max_depth: usize,
    elapsed_s: f64,
    lower_pruned_at: usize,
    upper_pruned_at: usize,
    rng: ChaCha8Rng,
}

impl<'m> Solver<'m> {
    /// Computes the initial bounds. Panics if `params.epsilon` is not positive.
    pub fn new(model: &'m PomdpModel, params: SolveParams) -> Self {
        assert!(params.epsilon > 0.0, "epsilon must be positive");
        let start = Instant::now();
        let lower = init_lower_blind(model, params.init_residual_tol, params.init_max_iters);
        let mdp = init_upper_mdp(model, params.init_residual_tol, params.init_max_iters);
        let fib = init_upper_fib(model, &mdp, params.init_residual_tol, params.init_max_iters);
        let bounds = BoundsPair {
            lower,
            upper: fib.upper_bound(),
        };
        let max_depth = params
            .max_depth
            .unwrap_or_else(|| default_max_depth(model, params.epsilon))
            .max(1);
        let mut solver = Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            params,
            lower_pruned_at: bounds.lower.len(),
            upper_pruned_at: 0,
            bounds,
            mdp,
            fib_convergence: fib.convergence,
            trace: SolveTrace::default(),
            trials: 0,
            updates: 0,
            max_depth,
            elapsed_s: start.elapsed().as_secs_f64(),
        };
        info!(
            "initialized bounds in {:.3}s: [{:.4}, {:.4}] at b0",
            solver.elapsed_s,
            solver.lower_b0(),
            solver.upper_b0()
        );
        solver.checkpoint();
        solver
    }

    pub fn model(&self) -> &'m PomdpModel {
        self.model
    }

    pub fn bounds(&self) -> &BoundsPair {
        &self.bounds
    }

    pub fn mdp(&self) -> &MdpBound {
        &self.mdp
    }

    pub fn fib_convergence(&self) -> Convergence {
        self.fib_convergence
    }

    pub fn trace(&self) -> &SolveTrace {
        &self.trace
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn elapsed_s(&self) -> f64 {
        self.elapsed_s
    }

    pub fn lower_b0(&self) -> f64 {
        self.bounds.lower.value(self.model.initial_belief())
    }

    pub fn upper_b0(&self) -> f64 {
        self.bounds.upper.value(self.model.initial_belief())
    }

    pub fn is_converged(&self) -> bool {
        self.bounds.width(self.model.initial_belief()) <= self.params.epsilon
    }

    fn checkpoint(&mut self) {
        let record = TraceRecord {
            time_s: self.elapsed_s,
            lower_b0: self.lower_b0(),
            upper_b0: self.upper_b0(),
            num_alpha: self.bounds.lower.len(),
            num_points: self.bounds.upper.num_points(),
            trials: self.trials,
            updates: self.updates,
        };
        self.trace.records.push(record);
    }

    fn maybe_prune(&mut self) {
        let factor = self.params.prune_growth_factor;
        if self.bounds.lower.len() as f64 >= self.lower_pruned_at as f64 * factor {
            let b0 = self.model.initial_belief();
            let lower = &mut self.bounds.lower;
            let witnesses: Vec<Belief> = lower.creation_witnesses().cloned().collect();
            let mut refs: Vec<&Belief> = witnesses.iter().collect();
            refs.push(b0);
            let removed = lower.prune(&refs);
            debug!("pruned {removed} vectors, {} left", lower.len());
            self.lower_pruned_at = lower.len();
        }
        let points = self.bounds.upper.num_points();
        if points > 0 && points as f64 >= (self.upper_pruned_at.max(1)) as f64 * factor {
            let removed = self.bounds.upper.prune();
            debug!(
                "pruned {removed} points, {} left",
                self.bounds.upper.num_points()
            );
            self.upper_pruned_at = self.bounds.upper.num_points();
        }
    }

    /// Runs one trial from `b₀` and records a checkpoint.
    pub fn trial(&mut self) {
        let start = Instant::now();
        let b0 = self.model.initial_belief().clone();
        let rng = (self.params.heuristic == Heuristic::UniformRandom).then_some(&mut self.rng);
        let n = explore_with(
            self.model,
            &mut self.bounds,
            &b0,
            self.params.epsilon,
            0,
            self.max_depth,
            rng,
        );
        self.updates += n;
        self.trials += 1;
        self.maybe_prune();
        self.elapsed_s += start.elapsed().as_secs_f64();
        self.checkpoint();
    }

    /// Runs trials until convergence, the overall budget or trial cap in the
    /// parameters, or `extra_budget` more seconds for this call.
    pub fn run(&mut self, extra_budget: Option<f64>) -> Termination {
        let call_start = self.elapsed_s;
        loop {
            if self.is_converged() {
                return Termination::Converged;
            }
            if self.params.max_trials.is_some_and(|m| self.trials >= m) {
                return Termination::TrialCap;
            }
            let over_total = self.params.time_budget.is_some_and(|t| self.elapsed_s >= t);
            let over_call = extra_budget.is_some_and(|t| self.elapsed_s - call_start >= t);
            if over_total || over_call {
                return Termination::Budget;
            }
            self.trial();
        }
    }

    pub fn into_result(self, termination: Termination) -> SolveResult {
        SolveResult {
            bounds: self.bounds,
            trace: self.trace,
            termination,
            mdp: self.mdp,
            trials: self.trials,
            updates: self.updates,
            elapsed_s: self.elapsed_s,
        }
    }
}

/// Initializes the bounds and runs trials until a stopping condition holds.
pub fn solve(model: &PomdpModel, params: SolveParams) -> SolveResult {
    let mut solver = Solver::new(model, params);
    let termination = solver.run(None);
    info!(
        "{termination:?} after {} trials, {:.3}s: [{:.6}, {:.6}]",
        solver.trials,
        solver.elapsed_s,
        solver.lower_b0(),
        solver.upper_b0()
    );
    solver.into_result(termination)
}
