use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use log::{info, warn};
use serde::Serialize;

use hsvi::bounds::{
    init_upper_mdp, read_policy, write_policy, PolicyFileError, DEFAULT_MAX_ITERS,
    DEFAULT_RESIDUAL_TOL,
};
use hsvi::ingest::registry::{benchmark, BENCHMARKS};
use hsvi::ingest::write_pomdp;
use hsvi::model::PomdpModel;
use hsvi::sim::{reward_rows_to_csv, simulate as run_simulation, EvalReport, Policy, RewardRow};
use hsvi::solver::{Heuristic, SolveParams, Solver, Termination};
use hsvi::theory::{run_suite, standard_suite, SuiteConfig, TheoryReport, REPORT_COLUMNS};

use crate::output::Outputs;
use crate::{BenchArgs, GenerateArgs, ProblemArgs, SimulateArgs, SolveArgs, TheoryArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(anyhow::Error),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Input(e) => write!(f, "{e:#}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Input(e)
    }
}

type CliResult = Result<(), CliError>;

fn load(args: &ProblemArgs) -> Result<(String, PomdpModel), CliError> {
    let (name, source) = args.source()?;
    let model = source
        .load()
        .with_context(|| format!("loading problem `{name}`"))?;
    info!(
        "{name}: {} states, {} actions, {} observations, discount {}",
        model.num_states(),
        model.num_actions(),
        model.num_observations(),
        model.discount()
    );
    Ok((name, model))
}

fn commit(outputs: Outputs, dir: Option<&Path>) -> CliResult {
    let written = outputs.commit(dir).context("writing outputs")?;
    for p in written {
        info!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    problem: String,
    problem_hash: String,
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    discount: f64,
    epsilon: f64,
    termination: Termination,
    elapsed_s: f64,
    trials: usize,
    updates: usize,
    lower_b0: f64,
    upper_b0: f64,
    width_b0: f64,
    num_alpha: usize,
    num_points: usize,
    init_converged: bool,
}

pub fn solve(args: SolveArgs) -> CliResult {
    let (name, model) = load(&args.problem)?;
    let params = SolveParams {
        epsilon: args.epsilon,
        time_budget: args.time_budget,
        max_trials: args.max_trials,
        seed: args.seed,
        heuristic: if args.random_heuristic {
            Heuristic::UniformRandom
        } else {
            Heuristic::Hsvi
        },
        ..Default::default()
    };
    let mut checkpoints = args.checkpoints.clone();
    if checkpoints.iter().any(|t| !(*t >= 0.0)) {
        return Err(CliError::Usage("checkpoints must be nonnegative".into()));
    }
    checkpoints.sort_by(f64::total_cmp);

    let mut solver = Solver::new(&model, params);
    let mut rows: Vec<RewardRow> = Vec::new();
    for &t in &checkpoints {
        let remaining = t - solver.elapsed_s();
        if remaining > 0.0 && !solver.is_converged() {
            solver.run(Some(remaining));
        }
        let policy = Policy::Lookahead(solver.bounds().lower.clone());
        let report = run_simulation(
            &policy,
            &model,
            args.episodes as usize,
            args.horizon,
            args.seed,
        );
        rows.push(RewardRow {
            time_s: solver.elapsed_s(),
            mean_reward: report.mean,
            ci: report.ci_half_width,
            lower_b0: solver.lower_b0(),
            upper_b0: solver.upper_b0(),
        });
    }
    let termination = solver.run(None);
    let summary = SolveSummary {
        problem: name,
        problem_hash: model.content_hash(),
        num_states: model.num_states(),
        num_actions: model.num_actions(),
        num_observations: model.num_observations(),
        discount: model.discount(),
        epsilon: args.epsilon,
        termination,
        elapsed_s: solver.elapsed_s(),
        trials: solver.trials(),
        updates: solver.updates(),
        lower_b0: solver.lower_b0(),
        upper_b0: solver.upper_b0(),
        width_b0: solver.upper_b0() - solver.lower_b0(),
        num_alpha: solver.bounds().lower.len(),
        num_points: solver.bounds().upper.num_points(),
        init_converged: solver.mdp().convergence.converged && solver.fib_convergence().converged,
    };

    let mut out = Outputs::default();
    out.add(
        args.out.join("policy.alpha"),
        write_policy(&model, &solver.bounds().lower),
    );
    out.add(args.out.join("trace.csv"), solver.trace().to_csv());
    out.add(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    );
    if !rows.is_empty() {
        out.add(args.out.join("reward.csv"), reward_rows_to_csv(&rows));
    }
    commit(out, Some(&args.out))?;
    println!(
        "{}: {:?} after {:.2}s, {} trials; bounds at b0 [{:.6}, {:.6}] (width {:.3e}); |Γ| = {}, |Υ| = {}",
        summary.problem,
        summary.termination,
        summary.elapsed_s,
        summary.trials,
        summary.lower_b0,
        summary.upper_b0,
        summary.width_b0,
        summary.num_alpha,
        summary.num_points
    );
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    let (_, model) = load(&args.problem)?;
    let policy = if let Some(path) = &args.policy {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let (_, lb) = read_policy(&model, &text).map_err(|e| match e {
            PolicyFileError::ProblemMismatch { .. } => {
                anyhow!("refusing to simulate {}: {e}", path.display())
            }
            other => anyhow!("{}: {other}", path.display()),
        })?;
        if args.direct {
            Policy::AlphaDirect(lb)
        } else {
            Policy::Lookahead(lb)
        }
    } else if let Some(a) = args.blind {
        if a >= model.num_actions() {
            return Err(CliError::Usage(format!(
                "action {a} out of range; the problem has {} actions",
                model.num_actions()
            )));
        }
        Policy::Blind(a)
    } else {
        Policy::qmdp(&init_upper_mdp(
            &model,
            DEFAULT_RESIDUAL_TOL,
            DEFAULT_MAX_ITERS,
        ))
    };
    let report = run_simulation(
        &policy,
        &model,
        args.episodes as usize,
        args.horizon,
        args.seed,
    );
    match &args.out {
        Some(dir) => {
            let mut out = Outputs::default();
            out.add(dir.join("report.json"), report.to_json() + "\n");
            out.add(dir.join("episodes.csv"), report.to_csv());
            commit(out, Some(dir))?;
            println!("{}", one_line(&report));
        }
        None => emit(&(report.to_json() + "\n"))?,
    }
    Ok(())
}

/// Writes to standard output; a closed pipe is not an error.
fn emit(text: &str) -> CliResult {
    let mut stdout = io::stdout().lock();
    match stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
    {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
            Err(CliError::Input(anyhow!("writing output: {e}")))
        }
        _ => Ok(()),
    }
}

fn one_line(r: &EvalReport) -> String {
    format!(
        "mean {:.4} ± {:.4} over {} episodes (horizon {}, seed {}, {} belief resets)",
        r.mean, r.ci_half_width, r.episodes, r.horizon, r.seed, r.belief_resets
    )
}

pub fn generate(args: GenerateArgs) -> CliResult {
    if !args.problem.is_given() {
        return Err(CliError::Usage(
            "generate needs a problem (--rocksample, --problem, --random or --pomdp)".into(),
        ));
    }
    let (_, model) = load(&args.problem)?;
    let text = write_pomdp(&model);
    match &args.out {
        Some(path) => {
            let mut out = Outputs::default();
            out.add(path.clone(), text);
            commit(out, path.parent().filter(|p| !p.as_os_str().is_empty()))
        }
        None => emit(&text),
    }
}

pub fn verify_theory(args: TheoryArgs) -> CliResult {
    let apply = |mut cfg: SuiteConfig| {
        cfg.ps = args.ps.clone();
        cfg.contraction_trials = args.trials;
        cfg.seed = cfg.seed.wrapping_add(args.seed);
        cfg.assumed_discount = args.assume_discount;
        cfg.set_depth = args.set_depth;
        cfg
    };
    let problems: Vec<(String, PomdpModel, SuiteConfig)> = if args.problem.is_given() {
        let (name, model) = load(&args.problem)?;
        vec![(name, model, apply(SuiteConfig::default()))]
    } else {
        standard_suite()
            .into_iter()
            .map(|(n, m, c)| (n, m, apply(c)))
            .collect()
    };
    let mut csv = REPORT_COLUMNS.join(",");
    csv.push('\n');
    let mut failed = Vec::new();
    for (name, model, mut cfg) in problems {
        if let Some(d) = args.depth {
            cfg.depth = d;
        }
        if let Some(s) = args.steps {
            cfg.num_steps = s;
        }
        let report: TheoryReport = run_suite(&name, &model, &cfg);
        print!("{}", report.summary());
        csv.extend(report.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
        if !report.passed() {
            failed.push(name);
        }
    }
    if let Some(dir) = &args.out {
        let mut out = Outputs::default();
        out.add(dir.join("theory.csv"), csv);
        commit(out, Some(dir))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "inequality violated on {}",
            failed.join(", ")
        )))
    }
}

#[derive(Debug, Serialize)]
struct BenchRow {
    name: String,
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    solve_time_s: f64,
    lower_b0: f64,
    upper_b0: f64,
    num_alpha: usize,
    reward: f64,
    ci: f64,
    qmdp_reward: f64,
    qmdp_ci: f64,
    ref_reward: Option<f64>,
    ref_ci: Option<f64>,
    ref_qmdp: Option<f64>,
}

pub fn bench(args: BenchArgs) -> CliResult {
    if args.list {
        for b in BENCHMARKS {
            let status = if b.is_available() {
                "available"
            } else {
                "missing"
            };
            match b.reference {
                Some(r) => println!(
                    "{:<18} {status:<9} {}/{}/{}  reference {} ± {}, QMDP {}",
                    b.name,
                    r.num_states,
                    r.num_actions,
                    r.num_observations,
                    r.hsvi2_reward,
                    r.ci_half_width,
                    r.qmdp_reward
                ),
                None => println!("{:<18} {status:<9}", b.name),
            }
        }
        return Ok(());
    }
    let selected: Vec<&'static hsvi::ingest::registry::Benchmark> = if args.problems.is_empty() {
        BENCHMARKS
            .iter()
            .filter(|b| {
                let ok = b.is_available();
                if !ok {
                    warn!("skipping {}: no model file in the corpus", b.name);
                }
                ok
            })
            .collect()
    } else {
        args.problems
            .iter()
            .map(|n| {
                benchmark(n).ok_or_else(|| CliError::Usage(format!("unknown benchmark `{n}`")))
            })
            .collect::<Result<_, _>>()?
    };

    let mut writer = csv::Writer::from_writer(Vec::new());
    for b in selected {
        let model = b
            .load()
            .with_context(|| format!("loading benchmark `{}`", b.name))?;
        let params = SolveParams {
            epsilon: args.epsilon,
            time_budget: Some(args.time_budget),
            seed: args.seed,
            ..Default::default()
        };
        let mut solver = Solver::new(&model, params);
        solver.run(None);
        let episodes = args.episodes as usize;
        let policy = Policy::Lookahead(solver.bounds().lower.clone());
        let ours = run_simulation(&policy, &model, episodes, args.horizon, args.seed);
        let qmdp = run_simulation(
            &Policy::qmdp(solver.mdp()),
            &model,
            episodes,
            args.horizon,
            args.seed,
        );
        let row = BenchRow {
            name: b.name.to_string(),
            num_states: model.num_states(),
            num_actions: model.num_actions(),
            num_observations: model.num_observations(),
            solve_time_s: solver.elapsed_s(),
            lower_b0: solver.lower_b0(),
            upper_b0: solver.upper_b0(),
            num_alpha: solver.bounds().lower.len(),
            reward: ours.mean,
            ci: ours.ci_half_width,
            qmdp_reward: qmdp.mean,
            qmdp_ci: qmdp.ci_half_width,
            ref_reward: b.reference.map(|r| r.hsvi2_reward),
            ref_ci: b.reference.map(|r| r.ci_half_width),
            ref_qmdp: b.reference.map(|r| r.qmdp_reward),
        };
        println!(
            "{:<18} reward {:>8.3} ± {:<6.3} QMDP {:>8.3} ± {:<6.3} bounds [{:.3}, {:.3}] |Γ| {} in {:.1}s{}",
            row.name,
            row.reward,
            row.ci,
            row.qmdp_reward,
            row.qmdp_ci,
            row.lower_b0,
            row.upper_b0,
            row.num_alpha,
            row.solve_time_s,
            b.reference
                .map(|r| format!("  (reference {} ± {}, QMDP {})", r.hsvi2_reward, r.ci_half_width, r.qmdp_reward))
                .unwrap_or_default()
        );
        writer.serialize(&row).context("formatting bench row")?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| anyhow!("formatting bench table: {e}"))?;
    let mut out = Outputs::default();
    out.add(
        args.out.join("bench.csv"),
        String::from_utf8(bytes).expect("csv is utf-8"),
    );
    commit(out, Some(&args.out))
}
