//! `hsvi` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 verification
//! failure. `HSVI_LOG` sets the log filter (default `warn`).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hsvi::ingest::registry::benchmark;
use hsvi::ingest::{ProblemSource, RandomConfig, RockSampleConfig};

#[derive(Debug, Parser)]
#[command(
    name = "hsvi",
    version,
    about = "Heuristic search value iteration for POMDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem and write the policy, trace and summary.
    Solve(SolveArgs),
    /// Evaluate a policy file or a baseline by simulation.
    Simulate(SimulateArgs),
    /// Write a generated or loaded problem in `.pomdp` format.
    Generate(GenerateArgs),
    /// Check the reachability-weighted convergence bounds numerically.
    VerifyTheory(TheoryArgs),
    /// Solve and evaluate registered benchmarks against reference rows.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
struct ProblemArgs {
    /// Problem file in Cassandra `.pomdp` format.
    #[arg(long, value_name = "PATH", group = "source")]
    pomdp: Option<PathBuf>,
    /// Generated RockSample instance, as `SIZE,ROCKS`.
    #[arg(long, value_name = "N,K", value_parser = parse_pair, group = "source")]
    rocksample: Option<(usize, usize)>,
    /// Seed for rock placement on sizes without a published layout.
    #[arg(long, value_name = "S", default_value_t = 0, requires = "rocksample")]
    rock_seed: u64,
    /// Registered benchmark name (see `bench --list`).
    #[arg(long, value_name = "NAME", group = "source")]
    problem: Option<String>,
    /// Seeded random model, as `STATES,ACTIONS,OBSERVATIONS,DISCOUNT,SEED`.
    #[arg(long, value_name = "SPEC", value_parser = parse_random, group = "source")]
    random: Option<RandomConfig>,
    /// Accept unnormalized rows in `.pomdp` files by renormalizing them.
    #[arg(long, requires = "pomdp")]
    permissive: bool,
}

impl ProblemArgs {
    fn is_given(&self) -> bool {
        self.pomdp.is_some()
            || self.rocksample.is_some()
            || self.problem.is_some()
            || self.random.is_some()
    }

    /// The selected source; Tiger when nothing was selected.
    fn source(&self) -> Result<(String, ProblemSource), commands::CliError> {
        if let Some(path) = &self.pomdp {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            return Ok((
                name,
                ProblemSource::File {
                    path: path.clone(),
                    permissive: self.permissive,
                },
            ));
        }
        if let Some((n, k)) = self.rocksample {
            let cfg = RockSampleConfig::standard(n, k, self.rock_seed)
                .map_err(|e| commands::CliError::Input(e.into()))?;
            return Ok((
                format!("rocksample-{n}-{k}"),
                ProblemSource::RockSample(cfg),
            ));
        }
        if let Some(name) = &self.problem {
            let b = benchmark(name)
                .ok_or_else(|| commands::CliError::Usage(format!("unknown problem `{name}`")))?;
            return Ok((name.clone(), b.source()));
        }
        if let Some(cfg) = &self.random {
            return Ok((
                format!("random-{}", cfg.seed),
                ProblemSource::Random(cfg.clone()),
            ));
        }
        Ok(("tiger".into(), ProblemSource::Tiger))
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or("expected two comma-separated integers")?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn parse_random(s: &str) -> Result<RandomConfig, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err("expected STATES,ACTIONS,OBSERVATIONS,DISCOUNT,SEED".into());
    }
    let int = |t: &str| t.parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok(RandomConfig {
        num_states: int(parts[0])?,
        num_actions: int(parts[1])?,
        num_observations: int(parts[2])?,
        discount: parts[3]
            .parse()
            .map_err(|e| format!("`{}`: {e}", parts[3]))?,
        seed: parts[4]
            .parse()
            .map_err(|e| format!("`{}`: {e}", parts[4]))?,
    })
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be positive".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn exponent(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..1.0).contains(&v) => Ok(v),
        Ok(_) => Err("must lie in [0, 1)".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Target width of the bounds at the initial belief.
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    epsilon: f64,
    /// Wallclock budget in seconds, initialization included.
    #[arg(long, value_name = "SECS", value_parser = positive_f64)]
    time_budget: Option<f64>,
    #[arg(long, value_name = "N")]
    max_trials: Option<usize>,
    /// Pick actions and observations uniformly at random instead of by the
    /// bound-guided heuristic.
    #[arg(long)]
    random_heuristic: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also evaluate the policy at these solver times (seconds), writing
    /// `reward.csv`.
    #[arg(long, value_name = "T1,T2,..", value_delimiter = ',')]
    checkpoints: Vec<f64>,
    /// Episodes per checkpoint evaluation.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: u64,
    #[arg(long, default_value_t = hsvi::sim::DEFAULT_HORIZON)]
    horizon: usize,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Policy file written by `solve`.
    #[arg(long, value_name = "PATH", required_unless_present_any = ["qmdp", "blind"])]
    policy: Option<PathBuf>,
    /// Use the QMDP baseline instead of a policy file.
    #[arg(long, conflicts_with_all = ["policy", "blind"])]
    qmdp: bool,
    /// Always take the action with this index.
    #[arg(long, value_name = "ACTION", conflicts_with = "policy")]
    blind: Option<usize>,
    /// Act on the stored action of the best vector instead of a one-step
    /// lookahead.
    #[arg(long, requires = "policy")]
    direct: bool,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: u64,
    #[arg(long, default_value_t = hsvi::sim::DEFAULT_HORIZON)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write `report.json` and `episodes.csv` here instead of printing the
    /// report.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    /// Problem to check; Tiger and the seeded random fixtures when omitted.
    #[command(flatten)]
    problem: ProblemArgs,
    /// Weight exponents to check.
    #[arg(long = "p", value_name = "P", value_delimiter = ',', value_parser = exponent, default_values_t = [0.0, 0.25, 0.5, 0.75])]
    ps: Vec<f64>,
    /// Depth cap of the reachable-belief graph [default: 6 for a named
    /// problem and Tiger, 4 for the random fixtures].
    #[arg(long)]
    depth: Option<usize>,
    /// Graph depth whose nodes form the point set.
    #[arg(long, default_value_t = 2)]
    set_depth: usize,
    /// Value-iteration steps [default: 8, or 5 for the random fixtures].
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Claim contraction with this discount instead of the model's
    /// (negative control).
    #[arg(long, value_name = "GAMMA")]
    assume_discount: Option<f64>,
    /// Write `theory.csv` here.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Benchmarks to run; every available one when omitted.
    #[arg(long = "problem", value_name = "NAME")]
    problems: Vec<String>,
    /// List registered benchmarks and exit.
    #[arg(long)]
    list: bool,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    epsilon: f64,
    /// Solve budget per benchmark, in seconds.
    #[arg(long, value_name = "SECS", default_value_t = 60.0, value_parser = positive_f64)]
    time_budget: f64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: u64,
    #[arg(long, default_value_t = hsvi::sim::DEFAULT_HORIZON)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HSVI_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(args) => commands::solve(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Generate(args) => commands::generate(args),
        Command::VerifyTheory(args) => commands::verify_theory(args),
        Command::Bench(args) => commands::bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
