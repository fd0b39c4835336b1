//! Numerical checks of the reachability-weighted convergence bounds.
//!
//! Everything here works on the reachable-belief graph truncated at a depth
//! cap, so maxima over "all reachable beliefs" are maxima over graph nodes.
//! Reports always carry the cap.
//!
//! Notation: `ρ(b) = γ^L(b)` with `L` the BFS depth, `‖f‖_p = max_b
//! |f(b)|/ρ(b)^p`, `H` the exact Bellman operator and `H_B` the point-based
//! operator that backs up only at the beliefs of `B`.

mod graph;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{
    argmax, backup_with_children, init_lower_blind, init_upper_fib, init_upper_mdp, lower_q_values,
    AlphaVector, BackupMode, BoundsPair, LowerBound,
};
use crate::ingest::{generate_random, GenerateError};
use crate::model::{Belief, Child, PomdpModel};
use crate::solver::{default_max_depth, explore};

pub use graph::{sample_spacing, BeliefSet, GraphNode, ReachableBeliefGraph, DEDUP_TOL};

pub const DEFAULT_DEPTH: usize = 6;
/// Slack allowed on every checked inequality.
pub const CHECK_SLACK: f64 = 1e-9;

/// A value function over beliefs.
pub trait ValueFunction {
    fn value(&self, b: &Belief) -> f64;
}

impl<F: Fn(&Belief) -> f64> ValueFunction for F {
    fn value(&self, b: &Belief) -> f64 {
        self(b)
    }
}

impl ValueFunction for LowerBound {
    fn value(&self, b: &Belief) -> f64 {
        LowerBound::value(self, b)
    }
}

/// The upper envelope of a set of dense vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    pub vectors: Vec<Vec<f64>>,
}

impl ValueFunction for GammaSet {
    fn value(&self, b: &Belief) -> f64 {
        self.vectors
            .iter()
            .map(|v| b.dot(v))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `max_b |V1(b) − V2(b)| / ρ(b)^p` over all graph nodes.
pub fn weighted_norm_distance(
    graph: &ReachableBeliefGraph,
    v1: &dyn ValueFunction,
    v2: &dyn ValueFunction,
    p: f64,
) -> f64 {
    let a: Vec<f64> = graph.nodes.iter().map(|n| v1.value(&n.belief)).collect();
    let b: Vec<f64> = graph.nodes.iter().map(|n| v2.value(&n.belief)).collect();
    weighted_gap(graph, &a, &b, p, |_| true)
}

fn weighted_gap(
    graph: &ReachableBeliefGraph,
    a: &[f64],
    b: &[f64],
    p: f64,
    keep: impl Fn(usize) -> bool,
) -> f64 {
    (0..graph.len())
        .filter(|&i| keep(i))
        .map(|i| (a[i] - b[i]).abs() / graph.nodes[i].rho.powf(p))
        .fold(0.0, f64::max)
}

/// `(HV)(b)` at an interior node, given `V` at every node.
fn graph_backup(model: &PomdpModel, graph: &ReachableBeliefGraph, i: usize, values: &[f64]) -> f64 {
    let gamma = model.discount();
    let node = &graph.nodes[i];
    node.children
        .iter()
        .enumerate()
        .map(|(a, kids)| {
            model.belief_reward(&node.belief, a)
                + gamma * kids.iter().map(|&(_, p, j)| p * values[j]).sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `Γ₀ = {R_min/(1−γ)·1}` followed by `num_steps` applications of `H_B`
/// with full backups. Element `t` of the result represents `V_t^B`.
pub fn conceptual_vi(model: &PomdpModel, set: &BeliefSet, num_steps: usize) -> Vec<LowerBound> {
    assert!(!set.is_empty(), "belief set must be nonempty");
    let floor = model.reward_extrema().r_min / (1.0 - model.discount());
    let children: Vec<Vec<Vec<Child>>> = set.beliefs.iter().map(|b| model.expand(b)).collect();
    let mut out = vec![LowerBound::new(vec![AlphaVector::full(
        0,
        vec![floor; model.num_states()],
    )])];
    for _ in 0..num_steps {
        let prev = out.last().expect("nonempty");
        let next = set
            .beliefs
            .iter()
            .zip(&children)
            .map(|(b, kids)| backup_with_children(model, prev, b, kids, BackupMode::Full))
            .collect();
        out.push(LowerBound::new(next));
    }
    out
}

/// Quantized belief used as a memo key. Beliefs that agree to 1e-14 in
/// every entry share a key, which moves values by at most
/// `2e-14·max|V|`.
type BeliefKey = Vec<i64>;

fn belief_key(b: &Belief) -> BeliefKey {
    let mut key = Vec::with_capacity(2 * b.support().len());
    for (s, p) in b.iter() {
        key.push(s as i64);
        key.push((p * 1e14).round() as i64);
    }
    key
}

/// Exact finite-horizon value iteration `V_t = H^t V₀` from a constant
/// `V₀`, evaluated lazily by memoized expectimax.
pub struct ExactVi<'m> {
    model: &'m PomdpModel,
    v0: f64,
    memo: HashMap<(BeliefKey, usize), f64>,
    expanded: HashMap<BeliefKey, Rc<Vec<Vec<Child>>>>,
}

impl<'m> ExactVi<'m> {
    pub fn new(model: &'m PomdpModel, v0: f64) -> Self {
        Self {
            model,
            v0,
            memo: HashMap::new(),
            expanded: HashMap::new(),
        }
    }

    pub fn value(&mut self, b: &Belief, t: usize) -> f64 {
        if t == 0 {
            return self.v0;
        }
        let key = belief_key(b);
        if let Some(&v) = self.memo.get(&(key.clone(), t)) {
            return v;
        }
        let model = self.model;
        let children = Rc::clone(
            self.expanded
                .entry(key.clone())
                .or_insert_with(|| Rc::new(model.expand(b))),
        );
        let gamma = model.discount();
        let mut best = f64::NEG_INFINITY;
        for (a, kids) in children.iter().enumerate() {
            let mut q = model.belief_reward(b, a);
            for c in kids {
                q += gamma * c.probability * self.value(&c.belief, t - 1);
            }
            best = best.max(q);
        }
        self.memo.insert((key, t), best);
        best
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }
}

/// One checked inequality `measured ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub p: f64,
    pub step: Option<usize>,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

impl CheckRow {
    fn new(check: &str, p: f64, step: Option<usize>, measured: f64, bound: f64) -> Self {
        Self {
            check: check.to_string(),
            p,
            step,
            measured,
            bound,
            passed: measured <= bound + CHECK_SLACK,
        }
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.measured
    }
}

/// Outcome of a verification run on one problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TheoryReport {
    pub problem: String,
    pub depth: usize,
    pub graph_nodes: usize,
    pub rows: Vec<CheckRow>,
    pub notes: Vec<String>,
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "problem", "depth", "check", "p", "step", "measured", "bound", "margin", "passed",
];

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn extend(&mut self, other: TheoryReport) {
        self.rows.extend(other.rows);
        self.notes.extend(other.notes);
    }

    pub fn to_csv(&self) -> String {
        let mut out = REPORT_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let step = r.step.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:e},{:e},{:e},{}",
                self.problem,
                self.depth,
                r.check,
                r.p,
                step,
                r.measured,
                r.bound,
                r.margin(),
                r.passed
            );
        }
        out
    }

    /// Worst margin per (check, p), plus notes.
    pub fn summary(&self) -> String {
        let mut groups: Vec<(String, f64, usize, usize, f64)> = Vec::new();
        for r in &self.rows {
            match groups.iter_mut().find(|g| g.0 == r.check && g.1 == r.p) {
                Some(g) => {
                    g.2 += 1;
                    g.3 += usize::from(!r.passed);
                    g.4 = g.4.min(r.margin());
                }
                None => groups.push((r.check.clone(), r.p, 1, usize::from(!r.passed), r.margin())),
            }
        }
        let mut out = format!(
            "problem {} depth {} nodes {} (maxima taken over the truncated graph)\n",
            self.problem, self.depth, self.graph_nodes
        );
        for (check, p, n, bad, worst) in groups {
            let status = if bad == 0 { "ok" } else { "VIOLATED" };
            let _ = writeln!(out, "  {check:<22} p={p:<5} rows {n:>4}  violations {bad:>3}  worst margin {worst:.3e}  {status}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "  note: {note}");
        }
        out
    }
}

/// `(‖HV − HV̄‖_p, ‖V − V̄‖_p)`, the first over interior nodes (whose
/// children are in the graph) and the second over all nodes.
pub fn contraction_pair(
    model: &PomdpModel,
    graph: &ReachableBeliefGraph,
    v: &dyn ValueFunction,
    w: &dyn ValueFunction,
    p: f64,
) -> (f64, f64) {
    let vv: Vec<f64> = graph.nodes.iter().map(|n| v.value(&n.belief)).collect();
    let wv: Vec<f64> = graph.nodes.iter().map(|n| w.value(&n.belief)).collect();
    let mut hv = vec![0.0; graph.len()];
    let mut hw = vec![0.0; graph.len()];
    for i in graph.interior() {
        hv[i] = graph_backup(model, graph, i, &vv);
        hw[i] = graph_backup(model, graph, i, &wv);
    }
    let interior_only = |i: usize| graph.nodes[i].depth < graph.max_depth;
    (
        weighted_gap(graph, &hv, &hw, p, interior_only),
        weighted_gap(graph, &vv, &wv, p, |_| true),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionOptions {
    pub seed: u64,
    /// Discount used in the claimed factor `γ^{1−p}`; defaults to the
    /// model's. Overriding it is a negative control.
    pub assumed_discount: Option<f64>,
    /// Vectors per random Γ-set are drawn from `1..=max_vectors`.
    pub max_vectors: usize,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            assumed_discount: None,
            max_vectors: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub p: f64,
    pub trials: usize,
    /// `γ^{1−p}`.
    pub factor: f64,
    pub max_ratio: f64,
    pub violations: usize,
    /// Largest `‖HV − HV̄‖ − factor·‖V − V̄‖` seen.
    pub worst_excess: f64,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn random_gamma_set(
    rng: &mut ChaCha8Rng,
    n: usize,
    lo: f64,
    hi: f64,
    max_vectors: usize,
) -> GammaSet {
    let k = rng.gen_range(1..=max_vectors.max(1));
    GammaSet {
        vectors: (0..k)
            .map(|_| (0..n).map(|_| rng.gen_range(lo..=hi)).collect())
            .collect(),
    }
}

/// Checks `‖HV − HV̄‖_p ≤ γ^{1−p}‖V − V̄‖_p` on random PWLC pairs, measured
/// as in [`contraction_pair`].
pub fn verify_contraction(
    model: &PomdpModel,
    graph: &ReachableBeliefGraph,
    p: f64,
    num_trials: usize,
    opts: ContractionOptions,
) -> ContractionReport {
    let gamma = model.discount();
    let factor = opts.assumed_discount.unwrap_or(gamma).powf(1.0 - p);
    let ext = model.reward_extrema();
    let (lo, hi) = if gamma < 1.0 {
        (ext.r_min / (1.0 - gamma), ext.r_max / (1.0 - gamma))
    } else {
        (ext.r_min, ext.r_max)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = ContractionReport {
        p,
        trials: num_trials,
        factor,
        max_ratio: 0.0,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
    };
    for _ in 0..num_trials {
        let v = random_gamma_set(&mut rng, model.num_states(), lo, hi, opts.max_vectors);
        let w = random_gamma_set(&mut rng, model.num_states(), lo, hi, opts.max_vectors);
        let (lhs, rhs) = contraction_pair(model, graph, &v, &w, p);
        let excess = lhs - factor * rhs;
        report.worst_excess = report.worst_excess.max(excess);
        if rhs > 0.0 {
            report.max_ratio = report.max_ratio.max(lhs / rhs);
        }
        if excess > CHECK_SLACK {
            report.violations += 1;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundOptions {
    /// Target half-width of the bracket on `V*` at each graph node.
    pub vstar_tolerance: f64,
    /// Upper limit on the policy-evaluation horizon.
    pub max_eval_horizon: usize,
    /// Memo entries allowed in policy evaluation before the horizon is
    /// shortened.
    pub eval_budget: usize,
}

impl Default for ErrorBoundOptions {
    fn default() -> Self {
        Self {
            vstar_tolerance: 1e-4,
            max_eval_horizon: 400,
            eval_budget: 500_000,
        }
    }
}

/// Brackets `[V̲, V̄]` on `V*` at every graph node, tightened by search
/// trials from each node.
fn vstar_brackets(model: &PomdpModel, graph: &ReachableBeliefGraph, tol: f64) -> Vec<(f64, f64)> {
    let mdp = init_upper_mdp(model, 1e-10, 100_000);
    let mut bounds = BoundsPair {
        lower: init_lower_blind(model, 1e-10, 100_000),
        upper: init_upper_fib(model, &mdp, 1e-10, 100_000).upper_bound(),
    };
    let depth = default_max_depth(model, tol);
    let (mut lower_at, mut upper_at) = (bounds.lower.len(), 1);
    for n in &graph.nodes {
        for _ in 0..10_000 {
            if bounds.width(&n.belief) <= tol {
                break;
            }
            explore(model, &mut bounds, &n.belief, tol, 0, depth);
            if bounds.lower.len() as f64 >= 1.1 * lower_at as f64 {
                let witnesses: Vec<Belief> = bounds.lower.creation_witnesses().cloned().collect();
                let mut refs: Vec<&Belief> = witnesses.iter().collect();
                refs.extend(graph.nodes.iter().map(|n| &n.belief));
                bounds.lower.prune(&refs);
                lower_at = bounds.lower.len();
            }
            if bounds.upper.num_points() as f64 >= 1.1 * upper_at as f64 {
                bounds.upper.prune();
                upper_at = bounds.upper.num_points().max(1);
            }
        }
    }
    graph
        .nodes
        .iter()
        .map(|n| (bounds.lower.value(&n.belief), bounds.upper.value(&n.belief)))
        .collect()
}

/// Value of the one-step-lookahead policy of `vhat` over a finite horizon,
/// with every leaf valued at `leaf`.
struct PolicyEval<'a> {
    model: &'a PomdpModel,
    vhat: &'a LowerBound,
    leaf: f64,
    memo: HashMap<(BeliefKey, usize), f64>,
    budget: usize,
}

impl PolicyEval<'_> {
    fn value(&mut self, b: &Belief, h: usize) -> Option<f64> {
        if h == 0 {
            return Some(self.leaf);
        }
        let key = belief_key(b);
        if let Some(&v) = self.memo.get(&(key.clone(), h)) {
            return Some(v);
        }
        if self.memo.len() >= self.budget {
            return None;
        }
        let children = self.model.expand(b);
        let a = argmax(&lower_q_values(self.model, self.vhat, b, &children));
        let mut v = self.model.belief_reward(b, a);
        for c in &children[a] {
            v += self.model.discount() * c.probability * self.value(&c.belief, h - 1)?;
        }
        self.memo.insert((key, h), v);
        Some(v)
    }
}

/// `[J_lo, J_hi]` bracketing `J^π̂(b₀)`, and the horizon used. The horizon
/// grows until the bracket is narrow or the evaluation budget runs out.
fn policy_value_bracket(
    model: &PomdpModel,
    vhat: &LowerBound,
    opts: &ErrorBoundOptions,
) -> (f64, f64, usize) {
    let gamma = model.discount();
    let ext = model.reward_extrema();
    let tail_scale = ext.range() / (1.0 - gamma);
    let target = if gamma == 0.0 || tail_scale == 0.0 {
        1
    } else {
        (((1e-6f64).ln() / gamma.ln()).ceil() as usize).clamp(1, opts.max_eval_horizon)
    };
    let mut best = None;
    let mut h = target.min(4);
    loop {
        let mut eval = PolicyEval {
            model,
            vhat,
            leaf: ext.r_min / (1.0 - gamma),
            memo: HashMap::new(),
            budget: opts.eval_budget,
        };
        match eval.value(model.initial_belief(), h) {
            Some(lo) => best = Some((lo, lo + gamma.powi(h as i32) * tail_scale, h)),
            None => break,
        }
        if h == target {
            break;
        }
        h = (h + h / 2).min(target);
    }
    best.expect("a one-step horizon fits any budget")
}

/// Exact VI and `H_B` iteration in lockstep from `V₀ = R_min/(1−γ)`, with
/// the single-step and accumulated error bounds checked at every step and
/// the regret bound checked for the final point-based value function.
pub fn verify_error_bounds(
    model: &PomdpModel,
    graph: &ReachableBeliefGraph,
    set: &BeliefSet,
    p: f64,
    num_steps: usize,
) -> TheoryReport {
    verify_error_bounds_grid(
        model,
        graph,
        set,
        &[p],
        num_steps,
        ErrorBoundOptions::default(),
    )
}

/// [`verify_error_bounds`] for several exponents, sharing the value
/// iterations, which do not depend on `p`.
pub fn verify_error_bounds_grid(
    model: &PomdpModel,
    graph: &ReachableBeliefGraph,
    set: &BeliefSet,
    ps: &[f64],
    num_steps: usize,
    opts: ErrorBoundOptions,
) -> TheoryReport {
    let gamma = model.discount();
    let ext = model.reward_extrema();
    let spread = ext.range();
    let floor = ext.r_min / (1.0 - gamma);
    let n = graph.len();
    let is_interior = |i: usize| graph.nodes[i].depth < graph.max_depth;
    let mut report = TheoryReport {
        depth: graph.max_depth,
        graph_nodes: n,
        ..Default::default()
    };

    let gammas = conceptual_vi(model, set, num_steps);
    let vb: Vec<Vec<f64>> = gammas
        .iter()
        .map(|g| graph.nodes.iter().map(|nd| g.value(&nd.belief)).collect())
        .collect();
    let mut exact = ExactVi::new(model, floor);
    let ve: Vec<Vec<f64>> = (0..=num_steps)
        .map(|t| {
            graph
                .nodes
                .iter()
                .map(|nd| exact.value(&nd.belief, t))
                .collect()
        })
        .collect();
    let h_of_vb: Vec<Vec<f64>> = vb[..num_steps]
        .iter()
        .map(|vals| {
            (0..n)
                .map(|i| {
                    if is_interior(i) {
                        graph_backup(model, graph, i, vals)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    for t in 0..=num_steps {
        let overshoot = (0..n)
            .map(|i| vb[t][i] - ve[t][i])
            .fold(f64::NEG_INFINITY, f64::max);
        report.rows.push(CheckRow::new(
            "point-based<=exact",
            0.0,
            Some(t),
            overshoot,
            0.0,
        ));
    }

    let vhat = gammas.last().expect("nonempty");
    let brackets = vstar_brackets(model, graph, opts.vstar_tolerance);
    let (j_lo, j_hi, horizon) = policy_value_bracket(model, vhat, &opts);
    let (vs_lo, vs_hi) = brackets[0];
    // Lower estimate of the regret: only a certain violation fails.
    let regret_lo = vs_lo - j_hi;
    report.notes.push(format!(
        "regret at b0 in [{:.6e}, {:.6e}] (V* in [{vs_lo:.9}, {vs_hi:.9}], policy value in [{j_lo:.9}, {j_hi:.9}] over horizon {horizon})",
        regret_lo,
        vs_hi - j_lo
    ));

    for &p in ps {
        let delta = sample_spacing(graph, set, p);
        let k = gamma.powf(1.0 - p);
        let step_bound = spread * delta / (1.0 - k);
        let accumulated = spread * delta / (1.0 - k).powi(2);
        for t in 0..num_steps {
            let err = weighted_gap(graph, &h_of_vb[t], &vb[t + 1], p, is_interior);
            report
                .rows
                .push(CheckRow::new("single-step", p, Some(t), err, step_bound));
        }
        for t in 0..=num_steps {
            let err = weighted_gap(graph, &ve[t], &vb[t], p, |_| true);
            report
                .rows
                .push(CheckRow::new("accumulated", p, Some(t), err, accumulated));
        }
        // Upper estimate of ‖V* − V̂‖_p from the brackets.
        let norm_hi = (0..n)
            .map(|i| {
                let (lo, hi) = brackets[i];
                let v = vb[num_steps][i];
                (v - lo).abs().max((hi - v).abs()) / graph.nodes[i].rho.powf(p)
            })
            .fold(0.0, f64::max);
        let regret_bound = 2.0 * k / (1.0 - k) * norm_hi;
        report
            .rows
            .push(CheckRow::new("regret", p, None, regret_lo, regret_bound));
        report.notes.push(format!("p={p}: spacing {delta:.6e}"));
    }
    report
}

/// The seeded 4-state fixture used by the verification suite.
pub fn random_fixture(seed: u64) -> Result<PomdpModel, GenerateError> {
    generate_random(4, 2, 2, 0.6, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub ps: Vec<f64>,
    pub depth: usize,
    /// Depth of the graph nodes used as `B`.
    pub set_depth: usize,
    pub num_steps: usize,
    pub contraction_trials: usize,
    pub seed: u64,
    pub assumed_discount: Option<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            ps: vec![0.0, 0.25, 0.5, 0.75],
            depth: DEFAULT_DEPTH,
            set_depth: 2,
            num_steps: 8,
            contraction_trials: 1000,
            seed: 0,
            assumed_discount: None,
        }
    }
}

/// The default verification problems: Tiger at the default depth and the
/// random fixture for seeds `0..3` at depth 4 (its graph grows as 4^depth).
pub fn standard_suite() -> Vec<(String, PomdpModel, SuiteConfig)> {
    let mut out = vec![(
        "tiger".to_string(),
        crate::ingest::tiger(),
        SuiteConfig::default(),
    )];
    for seed in 0..3 {
        let model = random_fixture(seed).expect("fixture parameters are valid");
        let cfg = SuiteConfig {
            depth: 4,
            num_steps: 5,
            seed,
            ..Default::default()
        };
        out.push((format!("random-{seed}"), model, cfg));
    }
    out
}

/// Contraction and error-bound checks on one problem.
pub fn run_suite(name: &str, model: &PomdpModel, cfg: &SuiteConfig) -> TheoryReport {
    let graph = ReachableBeliefGraph::build(model, cfg.depth);
    if graph.nodes.iter().any(|n| n.depth == cfg.depth) {
        warn!("{name}: reachable set truncated at depth {}", cfg.depth);
    }
    let mut report = TheoryReport {
        problem: name.to_string(),
        depth: cfg.depth,
        graph_nodes: graph.len(),
        ..Default::default()
    };
    report.rows.push(CheckRow::new(
        "rho-edge",
        0.0,
        None,
        if graph.rho_property_holds() { 0.0 } else { 1.0 },
        0.0,
    ));
    for &p in &cfg.ps {
        let c = verify_contraction(
            model,
            &graph,
            p,
            cfg.contraction_trials,
            ContractionOptions {
                seed: cfg.seed,
                assumed_discount: cfg.assumed_discount,
                ..Default::default()
            },
        );
        let mut row = CheckRow::new("contraction", p, None, c.max_ratio, c.factor);
        row.passed = c.passed();
        report.rows.push(row);
        if c.violations > 0 {
            report.notes.push(format!(
                "p={p}: contraction violated in {}/{} trials, worst ratio {:.6}",
                c.violations, c.trials, c.max_ratio
            ));
        }
    }
    let set = graph.belief_set(cfg.set_depth);
    let errors = verify_error_bounds_grid(
        model,
        &graph,
        &set,
        &cfg.ps,
        cfg.num_steps,
        ErrorBoundOptions::default(),
    );
    report.extend(errors);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::tiger;
    use proptest::prelude::*;

    #[test]
    fn norm_basics() {
        let m = tiger();
        let g = ReachableBeliefGraph::build(&m, 4);
        let v = GammaSet {
            vectors: vec![vec![1.0, -2.0]],
        };
        assert_eq!(weighted_norm_distance(&g, &v, &v, 0.5), 0.0);
        let shifted = |b: &Belief| v.value(b) + 3.0;
        let deepest = g.nodes.iter().map(|n| n.depth).max().unwrap();
        let d = weighted_norm_distance(&g, &v, &shifted, 0.5);
        assert!((d - 3.0 / 0.95f64.powf(0.5 * deepest as f64)).abs() < 1e-9);
        assert!((weighted_norm_distance(&g, &v, &shifted, 0.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_belief_greedy_step() {
        let m = generate_random(3, 3, 2, 0.0, 5).unwrap();
        let mut set = BeliefSet::default();
        set.push(m.initial_belief().clone(), "b0");
        let seq = conceptual_vi(&m, &set, 1);
        let a = argmax(
            &(0..3)
                .map(|a| m.belief_reward(m.initial_belief(), a))
                .collect::<Vec<_>>(),
        );
        let v = &seq[1].vectors()[0];
        assert_eq!(v.action(), a);
        assert_eq!(v.values(), m.rewards(a));
    }

    #[test]
    fn exact_vi_matches_direct_expectimax() {
        let m = tiger();
        fn direct(m: &PomdpModel, b: &Belief, t: usize, v0: f64) -> f64 {
            if t == 0 {
                return v0;
            }
            (0..m.num_actions())
                .map(|a| {
                    m.belief_reward(b, a)
                        + m.discount()
                            * m.reachable_children(b, a)
                                .iter()
                                .map(|c| c.probability * direct(m, &c.belief, t - 1, v0))
                                .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        }
        let mut vi = ExactVi::new(&m, -2000.0);
        for t in 0..5 {
            let want = direct(&m, m.initial_belief(), t, -2000.0);
            assert!((vi.value(m.initial_belief(), t) - want).abs() < 1e-8);
        }
    }

    #[test]
    fn point_based_never_exceeds_exact() {
        for seed in 0..3 {
            let m = random_fixture(seed).unwrap();
            let g = ReachableBeliefGraph::build(&m, 3);
            let set = g.belief_set(1);
            let seq = conceptual_vi(&m, &set, 4);
            let mut vi = ExactVi::new(&m, m.reward_extrema().r_min / 0.4);
            for (t, lb) in seq.iter().enumerate() {
                for n in &g.nodes {
                    assert!(lb.value(&n.belief) <= vi.value(&n.belief, t) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn tiger_point_based_iteration_converges_monotonically() {
        let m = tiger();
        let g = ReachableBeliefGraph::build(&m, 2);
        let set = g.belief_set(2);
        let seq = conceptual_vi(&m, &set, 600);
        let b0 = m.initial_belief();
        let values: Vec<f64> = seq.iter().map(|lb| lb.value(b0)).collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!((values[600] - values[599]).abs() < 1e-6);
        let brackets = vstar_brackets(&m, &g, 1e-6);
        assert!(values[600] <= brackets[0].1 + 1e-9);
        // Listening-only beliefs cover the optimal policy's first moves, so
        // the point-based value is close to optimal at b0.
        assert!(
            brackets[0].0 - values[600] < 1.0,
            "{} vs {:?}",
            values[600],
            brackets[0]
        );
    }

    #[test]
    fn zero_spacing_gives_zero_single_step_error() {
        let m = tiger();
        let g = ReachableBeliefGraph::build(&m, 3);
        let set = g.belief_set(3);
        let report = verify_error_bounds(&m, &g, &set, 0.5, 4);
        for r in report.rows.iter().filter(|r| r.check == "single-step") {
            assert!(r.measured.abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn undiscounted_claim_is_caught() {
        let m = tiger();
        let g = ReachableBeliefGraph::build(&m, 4);
        let honest = verify_contraction(&m, &g, 0.0, 200, ContractionOptions::default());
        assert!(honest.passed(), "{honest:?}");
        let corrupted = verify_contraction(
            &m,
            &g,
            0.0,
            200,
            ContractionOptions {
                assumed_discount: Some(0.3),
                ..Default::default()
            },
        );
        assert!(!corrupted.passed());
    }

    #[test]
    fn reset_to_a_shallow_belief_breaks_weighted_contraction() {
        // V and V̄ differ by 1 at b0 only. Deep Tiger beliefs reach b0 by
        // opening a door, so at a depth-d node the gap after one backup is
        // γ, weighted by γ^{-dp}, against a claimed γ^{1−p}.
        let m = tiger();
        let g = ReachableBeliefGraph::build(&m, 4);
        let b0 = m.initial_belief().clone();
        let bump = move |top: f64| {
            let b0 = b0.clone();
            move |b: &Belief| {
                if b.l1_distance(&b0) <= DEDUP_TOL {
                    top
                } else {
                    0.0
                }
            }
        };
        let (v, w) = (bump(1000.0), bump(999.0));
        let deepest = g.interior().map(|i| g.nodes[i].depth).max().unwrap();
        for p in [0.0, 0.25, 0.5] {
            let (lhs, rhs) = contraction_pair(&m, &g, &v, &w, p);
            assert!((rhs - 1.0).abs() < 1e-12);
            assert!((lhs - 0.95f64.powf(1.0 - deepest as f64 * p)).abs() < 1e-9);
            let claimed = 0.95f64.powf(1.0 - p);
            assert_eq!(lhs <= claimed + 1e-9, p == 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spacing_is_monotone(seed in 0u64..50, p in 0.0f64..0.95, q in 0.0f64..0.95) {
            let m = random_fixture(seed).unwrap();
            let g = ReachableBeliefGraph::build(&m, 3);
            let small = g.belief_set(0);
            let large = g.belief_set(1);
            prop_assert!(sample_spacing(&g, &large, p) <= sample_spacing(&g, &small, p) + 1e-15);
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(sample_spacing(&g, &small, lo) <= sample_spacing(&g, &small, hi) + 1e-15);
            prop_assert!(g.rho_property_holds());
        }

        #[test]
        fn classical_contraction_holds(seed in 0u64..50) {
            let m = random_fixture(seed).unwrap();
            let g = ReachableBeliefGraph::build(&m, 3);
            let r = verify_contraction(&m, &g, 0.0, 20, ContractionOptions { seed, ..Default::default() });
            prop_assert!(r.passed());
            prop_assert!(r.max_ratio <= 0.6 + 1e-9);
        }
    }
}
