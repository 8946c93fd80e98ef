use std::path::PathBuf;
use std::process::ExitCode;

use autoexplore::experiment::{run_experiment, Algorithm, EnvSpec, ExperimentSpec};
use autoexplore::output::{read_runs_file, write_csv, CsvKind};
use autoexplore::stats::aggregate;
use autoexplore::verify::AxOracle;
use autoexplore_core::disco::{Navigation, ThetaMode};
use autoexplore_core::ucb::{EpisodeRule, UcbBonus};
use autoexplore_core::{AlgoParams, Mode};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_INVALID: u8 = 2;
const EXIT_RUN_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "autoexplore", version, about = "Incremental autonomous exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded experiments and write runs.csv, summary.csv and curve.csv.
    Run(RunArgs),
    /// Print S_L, S_L→ and V*_{S_L→}(s0 -> s) for an environment.
    Oracle(OracleArgs),
    /// Recompute the AX flags of a runs.csv file.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct EnvArgs {
    /// confusing-chain, combination-lock, layered-star or file:<path>
    #[arg(long)]
    env: String,
    /// Environment parameter override, e.g. `N=9` or `p_skip=0.5`.
    #[arg(long = "env-param", value_name = "K=V")]
    env_param: Vec<String>,
}

impl EnvArgs {
    fn spec(&self) -> Result<EnvSpec, String> {
        let params = self
            .env_param
            .iter()
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| format!("--env-param expects k=v, got {kv:?}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        EnvSpec::parse(&self.env, &params).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Disco,
    Ucb,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Theoretical,
    Practical,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThetaArg {
    PerPair,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum NavigationArg {
    Sequential,
    Opportunistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum UcbBonusArg {
    Bernstein,
    Hoeffding,
    None,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long = "L")]
    l: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, value_enum, default_value = "practical")]
    mode: ModeArg,
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    #[arg(long = "base-seed", default_value_t = 0)]
    base_seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// DisCo variance aggregation (default depends on the environment).
    #[arg(long, value_enum)]
    theta: Option<ThetaArg>,
    #[arg(long, value_enum)]
    navigation: Option<NavigationArg>,
    #[arg(long = "ucb-bonus", value_enum)]
    ucb_bonus: Option<UcbBonusArg>,
    /// UcbExplore episodes per round: cubic, log-cubic or a fixed count.
    #[arg(long)]
    episodes: Option<String>,
    /// UcbExplore confidence widths on raw rather than bucketed counts.
    #[arg(long = "no-bucketing")]
    no_bucketing: bool,
    #[arg(long = "bucketing", conflicts_with = "no_bucketing")]
    bucketing: bool,
    /// Run every UcbExplore evaluation round to completion.
    #[arg(long = "no-early-stop")]
    no_early_stop: bool,
    /// Keep UcbExplore policies as found instead of re-planning on the final model.
    #[arg(long = "no-replan")]
    no_replan: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long = "L")]
    l: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    runs: PathBuf,
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long = "L")]
    l: f64,
    #[arg(long)]
    eps: f64,
}

fn parse_episodes(s: &str) -> Result<EpisodeRule, String> {
    match s {
        "cubic" => Ok(EpisodeRule::Cubic),
        "log-cubic" => Ok(EpisodeRule::LogCubic),
        n => n
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(EpisodeRule::Fixed)
            .ok_or_else(|| format!("--episodes expects cubic, log-cubic or a positive integer, got {n:?}")),
    }
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec, String> {
    let env = args.env.spec()?;
    let mode = match args.mode {
        ModeArg::Theoretical => Mode::Theoretical,
        ModeArg::Practical => Mode::Practical,
    };
    let params = AlgoParams::new(args.l, args.eps, args.delta, mode).map_err(|e| e.to_string())?;
    let algorithm = match args.algo {
        AlgoArg::Disco => Algorithm::Disco,
        AlgoArg::Ucb => Algorithm::Ucb,
    };
    let mut spec = ExperimentSpec::new(env, algorithm, params, args.seeds, args.base_seed);
    spec.workers = args.workers;
    spec.out_dir = Some(args.out_dir.clone());
    let t = &mut spec.tunings;
    if let Some(theta) = args.theta {
        t.theta = match theta {
            ThetaArg::PerPair => ThetaMode::PerPair,
            ThetaArg::Max => ThetaMode::Max,
        };
    }
    if let Some(nav) = args.navigation {
        t.navigation = match nav {
            NavigationArg::Sequential => Navigation::Sequential,
            NavigationArg::Opportunistic => Navigation::Opportunistic,
        };
    }
    if let Some(b) = args.ucb_bonus {
        t.ucb_bonus = match b {
            UcbBonusArg::Bernstein => UcbBonus::Bernstein,
            UcbBonusArg::Hoeffding => UcbBonus::Hoeffding,
            UcbBonusArg::None => UcbBonus::None,
        };
    }
    if let Some(e) = &args.episodes {
        t.episodes = parse_episodes(e)?;
    }
    if args.no_bucketing {
        t.bucketed_counts = false;
    }
    if args.bucketing {
        t.bucketed_counts = true;
    }
    if args.no_early_stop {
        t.early_stop = false;
    }
    if args.no_replan {
        t.replan_final = false;
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let spec = match build_spec(args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let records = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let summary = aggregate(&records);
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        eprintln!("error: {}: {e}", args.out_dir.display());
        return ExitCode::from(EXIT_RUN_FAILURE);
    }
    for (name, kind) in [
        ("runs.csv", CsvKind::Runs),
        ("summary.csv", CsvKind::Summary),
        ("curve.csv", CsvKind::Curve),
    ] {
        if let Err(e) = write_csv(&args.out_dir.join(name), kind, &records, &summary) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUN_FAILURE);
        }
    }
    println!("{} on {} ({} runs)", spec.algorithm, spec.env.name(), records.len());
    for row in &summary {
        println!("  {:<20} {:>14.4} ± {:.4}", row.metric, row.mean, row.ci95);
    }
    let failures: Vec<_> = records.iter().filter(|r| r.failed()).collect();
    for r in &failures {
        eprintln!("seed {} failed: {}", r.seed, r.error.as_deref().unwrap_or("unknown error"));
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUN_FAILURE)
    }
}

fn fmt_set(states: &[usize]) -> String {
    let names: Vec<String> = states.iter().map(|s| format!("s{s}")).collect();
    format!("{{{}}}", names.join(", "))
}

fn cmd_oracle(args: &OracleArgs) -> ExitCode {
    let mdp = match args.env.spec().and_then(|e| e.build().map_err(|e| e.to_string())) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let params = match AlgoParams::practical(args.l, 1.0, 0.1) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let oracle = AxOracle::new(&mdp, &params);
    println!("S_L  = {}", fmt_set(oracle.controllable_set()));
    println!("S_L→ = {}", fmt_set(oracle.incremental_set()));
    println!("state,v_star_restricted");
    for s in 0..mdp.num_states() {
        println!("s{s},{}", oracle.v_star(s));
    }
    ExitCode::SUCCESS
}

fn cmd_verify(args: &VerifyArgs) -> ExitCode {
    let setup = args
        .env
        .spec()
        .and_then(|e| e.build().map_err(|e| e.to_string()))
        .and_then(|m| {
            AlgoParams::practical(args.l, args.eps, 0.1)
                .map(|p| (m, p))
                .map_err(|e| e.to_string())
        });
    let (mdp, params) = match setup {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let records = match read_runs_file(&args.runs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUN_FAILURE);
        }
    };
    if records.iter().any(|r| r.hitting.len() != mdp.num_states()) {
        eprintln!("error: {} does not match the environment's state count", args.runs.display());
        return ExitCode::from(EXIT_INVALID);
    }
    let oracle = AxOracle::new(&mdp, &params);
    let mut mismatches = 0;
    println!("seed,ax_l,ax_prime,ax_star,matches");
    for r in &records {
        let flags = if r.failed() { r.ax } else { oracle.check(&r.hitting) };
        let same = flags == r.ax;
        mismatches += usize::from(!same);
        println!(
            "{},{},{},{},{}",
            r.seed,
            u8::from(flags.ax_l),
            u8::from(flags.ax_prime),
            u8::from(flags.ax_star),
            u8::from(same)
        );
    }
    if mismatches > 0 {
        eprintln!("{mismatches} record(s) disagree with the recorded flags");
        return ExitCode::from(EXIT_RUN_FAILURE);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Verify(args) => cmd_verify(args),
    }
}
