//! Command-line runner: tournaments, head-to-head pairings, imitation
//! training, and revisit-ratio instrumentation, all seeded end to end.
//!
//! Configuration comes from an optional TOML file plus flags; flags win.
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use simulplan::follower::{behavioral_clone, dagger_train, FollowerPolicy, TrainConfig};
use simulplan::grid::{GridConfig, FEATURE_PLANES};
use simulplan::harness::{
    parse_agent_spec, run_tournament, summary_json, write_matches_csv, write_revisits_csv,
    AgentSpec, CiMethod, EnvSpec, Pairing, RevisitTrace, SeatSummary, TournamentConfig,
    TournamentResult,
};
use simulplan::matrix::MatrixGame;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "simulplan",
    version,
    about = "Planning and imitation-learning experiments on simultaneous-move games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seat 0 against copies of an opponent and report W/D/L with CIs.
    Tournament(TournamentArgs),
    /// Two-player head-to-head; each board is played once per side.
    Pair(PairArgs),
    /// Train a follower by DAgger or behavioral cloning, then evaluate it.
    Dagger(DaggerArgs),
    /// Play one instrumented game per planner and write the revisit series.
    Revisits(RevisitsArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment: gridarena, gridarena-fast, gridarena2p,
    /// gridarena2p-fast, gridarena-duel, or matrix:<file.toml>.
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    games: Option<u64>,
    /// Worker threads (0 = automatic). SIMULPLAN_WORKERS overrides.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for matches.csv / revisits.csv / summary.json.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Report Wilson score intervals instead of the normal approximation.
    #[arg(long)]
    wilson: bool,
    /// Default per-step iteration budget for planner specs without iters=.
    #[arg(long)]
    iterations: Option<u32>,
    /// Default planning depth for planner specs without depth=.
    #[arg(long)]
    depth: Option<u32>,
}

#[derive(Args)]
struct TournamentArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Agent spec for the seat under test.
    #[arg(long)]
    seat0: Option<String>,
    /// Agent spec replicated over every remaining seat.
    #[arg(long)]
    opponents: Option<String>,
    /// Collect revisit traces for the first N games.
    #[arg(long)]
    trace_games: Option<u64>,
}

#[derive(Args)]
struct PairArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// First agent (reported seat).
    #[arg(long)]
    a: Option<String>,
    /// Second agent.
    #[arg(long)]
    b: Option<String>,
}

#[derive(Args)]
struct DaggerArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// "dagger" (follower drives collection) or "bc" (oracle drives).
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    episodes: Option<u32>,
    /// Gradient steps after each episode.
    #[arg(long)]
    grad_steps: Option<u32>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Hidden layer width; 0 keeps the policy affine.
    #[arg(long)]
    hidden: Option<usize>,
    /// Oracle planner spec labeling the collected states.
    #[arg(long)]
    oracle: Option<String>,
    /// Games played by the trained follower against rule-based opponents.
    #[arg(long)]
    eval_games: Option<u64>,
    /// Also export the aggregated sample buffer as text.
    #[arg(long)]
    export_buffer: Option<PathBuf>,
}

#[derive(Args)]
struct RevisitsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Planner spec to instrument; repeat the flag to compare several.
    #[arg(long = "planner")]
    planners: Vec<String>,
    /// Opponent spec for the remaining seats.
    #[arg(long)]
    opponents: Option<String>,
    /// Depth whose mean smoothed ratio is printed per planner.
    #[arg(long)]
    probe_depth: Option<u32>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Tournament(args) => cmd_tournament(args),
        Command::Pair(args) => cmd_pair(args),
        Command::Dagger(args) => cmd_dagger(args),
        Command::Revisits(args) => cmd_revisits(args),
    }
}

// Optional config file sections; every field can also come from a flag.

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    env: Option<EnvSection>,
    planner: Option<PlannerSection>,
    tournament: Option<TournamentSection>,
    follower: Option<FollowerSection>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EnvSection {
    name: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PlannerSection {
    iterations: Option<u32>,
    depth: Option<u32>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TournamentSection {
    games: Option<u64>,
    workers: Option<usize>,
    output: Option<PathBuf>,
    seat0: Option<String>,
    opponents: Option<String>,
    wilson: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FollowerSection {
    episodes: Option<u32>,
    grad_steps: Option<u32>,
    batch: Option<usize>,
    learning_rate: Option<f64>,
    hidden: Option<usize>,
    mode: Option<String>,
    eval_games: Option<u64>,
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    // toml's error display carries line/column information.
    toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

/// Flag value, else config value, else the built-in default.
fn pick<T: Clone>(flag: &Option<T>, file: Option<T>, default: T) -> T {
    flag.clone().or(file).unwrap_or(default)
}

struct Resolved {
    env: EnvSpec,
    games: u64,
    seed: u64,
    workers: usize,
    output: PathBuf,
    ci: CiMethod,
    iterations: u32,
    depth: u32,
}

fn resolve_common(common: &CommonArgs, file: &FileConfig) -> Result<Resolved, CliError> {
    let env_name = pick(
        &common.env,
        file.env.as_ref().and_then(|e| e.name.clone()),
        "gridarena".to_string(),
    );
    let env = parse_env(&env_name)?;
    let t = file.tournament.as_ref();
    let p = file.planner.as_ref();
    let games = pick(&common.games, t.and_then(|t| t.games), 400);
    let seed = pick(&common.seed, p.and_then(|p| p.seed), 0);
    let workers = pick(&common.workers, t.and_then(|t| t.workers), 0);
    let output = pick(
        &common.output,
        t.and_then(|t| t.output.clone()),
        PathBuf::from("out"),
    );
    let wilson = common.wilson || t.and_then(|t| t.wilson).unwrap_or(false);
    let iterations = pick(&common.iterations, p.and_then(|p| p.iterations), 100);
    let depth = pick(&common.depth, p.and_then(|p| p.depth), 20);
    if games == 0 {
        return Err(CliError::usage("--games must be at least 1"));
    }
    Ok(Resolved {
        env,
        games,
        seed,
        workers,
        output,
        ci: if wilson { CiMethod::Wilson } else { CiMethod::Normal },
        iterations,
        depth,
    })
}

fn parse_env(name: &str) -> Result<EnvSpec, CliError> {
    if let Some(path) = name.strip_prefix("matrix:") {
        let game = MatrixGame::load(Path::new(path))
            .map_err(|e| CliError::usage(format!("matrix env {path}: {e}")))?;
        let label = Path::new(path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.to_string());
        return Ok(EnvSpec::Matrix { game, label });
    }
    let profile = match name {
        "gridarena" => "standard",
        "gridarena-fast" => "fast",
        "gridarena2p" => "2p",
        "gridarena2p-fast" => "2p-fast",
        "gridarena-duel" => "duel",
        other => other,
    };
    GridConfig::by_profile(profile)
        .map(EnvSpec::Grid)
        .ok_or_else(|| CliError::usage(format!("unknown env '{name}'")))
}

/// Appends the shared iteration/depth defaults to planner specs that do
/// not pin them, leaving non-planner specs untouched.
fn with_planner_defaults(spec: &str, iterations: u32, depth: u32) -> String {
    if spec == "rule" || spec == "random" || spec.starts_with("follower:") {
        return spec.to_string();
    }
    let mut out = spec.to_string();
    if !spec.contains("iters=") && !spec.contains("iterations=") {
        out.push_str(&format!(",iters={iterations}"));
    }
    if !spec.contains("depth=") && !spec.contains("k=") {
        out.push_str(&format!(",depth={depth}"));
    }
    out
}

fn seat(spec: &str, r: &Resolved) -> Result<AgentSpec, CliError> {
    parse_agent_spec(&with_planner_defaults(spec, r.iterations, r.depth))
        .map_err(|e| CliError::usage(e.to_string()))
}

fn write_outputs(
    dir: &Path,
    config: &TournamentConfig,
    result: &TournamentResult,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let write = |name: &str, bytes: Vec<u8>| -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    };
    let mut csv = Vec::new();
    write_matches_csv(&result.records, &mut csv)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    write("matches.csv", csv)?;
    if !result.traces.is_empty() {
        let mut csv = Vec::new();
        write_revisits_csv(&result.traces, &mut csv)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        write("revisits.csv", csv)?;
    }
    let json = serde_json::to_vec_pretty(&summary_json(config, result))
        .map_err(|e| CliError::runtime(e.to_string()))?;
    write("summary.json", json)?;
    Ok(())
}

fn print_summary(env: &EnvSpec, games: u64, seed: u64, summaries: &[SeatSummary]) {
    println!("env={} games={games} seed={seed}", env.id());
    println!(
        "{:<4} {:<34} {:>6} {:>6} {:>7} {:>7} {:>7}",
        "seat", "spec", "wins", "draws", "losses", "win%", "ci95%"
    );
    for (i, s) in summaries.iter().enumerate() {
        println!(
            "{:<4} {:<34} {:>6} {:>6} {:>7} {:>6.1}% {:>6.1}%",
            i, s.spec, s.wins, s.draws, s.losses, s.win_pct, s.win_ci_pct
        );
    }
}

fn run_and_report(
    r: &Resolved,
    seats: Vec<AgentSpec>,
    pairing: Pairing,
    trace_games: u64,
) -> Result<TournamentResult, CliError> {
    let mut config = TournamentConfig::new(r.env.clone(), seats, r.games, r.seed);
    config.workers = r.workers;
    config.ci = r.ci;
    config.pairing = pairing;
    config.trace_games = trace_games;
    let result = run_tournament(&config).map_err(|e| CliError::runtime(e.to_string()))?;
    write_outputs(&r.output, &config, &result)?;
    print_summary(&r.env, r.games, r.seed, &result.summaries);
    Ok(result)
}

fn cmd_tournament(args: TournamentArgs) -> Result<(), CliError> {
    let file = load_config(&args.common.config)?;
    let r = resolve_common(&args.common, &file)?;
    let t = file.tournament.as_ref();
    let seat0 = pick(
        &args.seat0,
        t.and_then(|t| t.seat0.clone()),
        "fdts-ts".to_string(),
    );
    let opponents = pick(
        &args.opponents,
        t.and_then(|t| t.opponents.clone()),
        "rule".to_string(),
    );
    let mut seats = vec![seat(&seat0, &r)?];
    for _ in 1..r.env.players() {
        seats.push(seat(&opponents, &r)?);
    }
    run_and_report(&r, seats, Pairing::Rotate, args.trace_games.unwrap_or(0))?;
    Ok(())
}

fn cmd_pair(args: PairArgs) -> Result<(), CliError> {
    let file = load_config(&args.common.config)?;
    let mut r = resolve_common(&args.common, &file)?;
    // Pairing needs an even game count so each board is played once per
    // side; head-to-head defaults to the 2-player arena.
    if args.common.env.is_none() && file.env.as_ref().and_then(|e| e.name.as_ref()).is_none() {
        r.env = parse_env("gridarena2p")?;
    }
    if r.env.players() != 2 {
        return Err(CliError::usage(format!(
            "pair needs a 2-player env, got '{}'",
            r.env.id()
        )));
    }
    if r.games % 2 != 0 {
        return Err(CliError::usage(
            "pair needs an even --games so both sides of each board are played",
        ));
    }
    let a = args.a.as_deref().unwrap_or("fdts-ts");
    let b = args.b.as_deref().unwrap_or("rule");
    let seats = vec![seat(a, &r)?, seat(b, &r)?];
    let result = run_and_report(&r, seats, Pairing::Mirror, 0)?;
    let s = result.seat(0);
    println!(
        "{} vs {}: {:.1}% wins ({} games, ±{:.1}%)",
        a, b, s.win_pct, s.games, s.win_ci_pct
    );
    Ok(())
}

fn cmd_dagger(args: DaggerArgs) -> Result<(), CliError> {
    let file = load_config(&args.common.config)?;
    let r = resolve_common(&args.common, &file)?;
    let EnvSpec::Grid(grid) = &r.env else {
        return Err(CliError::usage("dagger requires a gridarena env"));
    };
    let f = file.follower.as_ref();
    let mode = pick(
        &args.mode,
        f.and_then(|f| f.mode.clone()),
        "dagger".to_string(),
    );
    if mode != "dagger" && mode != "bc" {
        return Err(CliError::usage(format!(
            "--mode must be 'dagger' or 'bc', got '{mode}'"
        )));
    }
    let train = TrainConfig {
        episodes: pick(&args.episodes, f.and_then(|f| f.episodes), 500),
        grad_steps_per_episode: pick(&args.grad_steps, f.and_then(|f| f.grad_steps), 200),
        batch_size: pick(&args.batch, f.and_then(|f| f.batch), 32),
        learning_rate: pick(&args.learning_rate, f.and_then(|f| f.learning_rate), 1e-3),
        seed: r.seed,
    };
    if train.episodes == 0 {
        return Err(CliError::usage("--episodes must be at least 1"));
    }
    let hidden = pick(&args.hidden, f.and_then(|f| f.hidden), 0);
    let oracle_spec = args.oracle.as_deref().unwrap_or("fdts-ts");
    let oracle = match seat(oracle_spec, &r)? {
        AgentSpec::Planner { config, .. } => config,
        _ => {
            return Err(CliError::usage(format!(
                "--oracle must be a planner spec, got '{oracle_spec}'"
            )))
        }
    };

    let dims = FEATURE_PLANES * grid.width * grid.height;
    let policy = FollowerPolicy::new(dims, hidden, r.seed);
    let outcome = if mode == "dagger" {
        dagger_train(grid, &oracle, policy, &train)
    } else {
        behavioral_clone(grid, &oracle, policy, &train)
    }
    .map_err(|e| CliError::runtime(e.to_string()))?;

    std::fs::create_dir_all(&r.output)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", r.output.display())))?;
    let ckpt = r.output.join("follower.bin");
    outcome
        .policy
        .save(&ckpt)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    if let Some(path) = &args.export_buffer {
        let mut text = Vec::new();
        outcome
            .buffer
            .export(&mut text)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        std::fs::write(path, text)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    println!(
        "trained mode={mode} episodes={} samples={} params_hash={:016x} checkpoint={}",
        train.episodes,
        outcome.buffer.len(),
        outcome.policy.param_hash(),
        ckpt.display()
    );

    let eval_games = pick(&args.eval_games, f.and_then(|f| f.eval_games), 20);
    if eval_games > 0 {
        let eval = Resolved {
            env: r.env.clone(),
            games: eval_games,
            ..r
        };
        let mut seats = vec![seat(&format!("follower:{}", ckpt.display()), &eval)?];
        for _ in 1..eval.env.players() {
            seats.push(seat("rule", &eval)?);
        }
        run_and_report(&eval, seats, Pairing::Rotate, 0)?;
    }
    Ok(())
}

fn cmd_revisits(args: RevisitsArgs) -> Result<(), CliError> {
    let file = load_config(&args.common.config)?;
    let mut r = resolve_common(&args.common, &file)?;
    if args.common.games.is_none() {
        r.games = 1;
    }
    let planners = if args.planners.is_empty() {
        vec![
            "fdts-ts".to_string(),
            "fdts-ucb".to_string(),
            "mcts-ts".to_string(),
        ]
    } else {
        args.planners.clone()
    };
    let opponents = args.opponents.as_deref().unwrap_or("rule");
    let probe_depth = args.probe_depth.unwrap_or(10);

    let mut all_traces: Vec<RevisitTrace> = Vec::new();
    let mut report = Vec::new();
    for spec_str in &planners {
        let mut seats = vec![seat(spec_str, &r)?];
        if !matches!(seats[0], AgentSpec::Planner { .. }) {
            return Err(CliError::usage(format!(
                "--planner must be a planner spec, got '{spec_str}'"
            )));
        }
        for _ in 1..r.env.players() {
            seats.push(seat(opponents, &r)?);
        }
        let mut config = TournamentConfig::new(r.env.clone(), seats, r.games, r.seed);
        config.workers = r.workers;
        config.trace_games = r.games;
        let result = run_tournament(&config).map_err(|e| CliError::runtime(e.to_string()))?;
        let mean: f64 = if result.traces.is_empty() {
            0.0
        } else {
            result
                .traces
                .iter()
                .map(|t| t.mean_smoothed_at(probe_depth))
                .sum::<f64>()
                / result.traces.len() as f64
        };
        report.push(serde_json::json!({
            "spec": spec_str,
            "games": r.games,
            "probe_depth": probe_depth,
            "mean_smoothed_ratio": mean,
        }));
        println!("{spec_str}: mean smoothed revisit ratio at depth {probe_depth} = {mean:.4}");
        all_traces.extend(result.traces);
    }

    std::fs::create_dir_all(&r.output)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", r.output.display())))?;
    let mut csv = Vec::new();
    write_revisits_csv(&all_traces, &mut csv).map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(r.output.join("revisits.csv"), csv)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let json = serde_json::json!({
        "env": r.env.id(),
        "seed": r.seed,
        "ewma_decay": simulplan::harness::REVISIT_EWMA_DECAY,
        "planners": report,
    });
    std::fs::write(
        r.output.join("revisits.json"),
        serde_json::to_vec_pretty(&json).map_err(|e| CliError::runtime(e.to_string()))?,
    )
    .map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(())
}
