//! Tournament runner and statistics: seeded parallel episodes, win/draw/
//! loss aggregation with confidence intervals, and the revisit-ratio
//! instrumentation used to compare how much planners reuse the tree.
//!
//! Episodes are fully independent: each game gets its own environment
//! instance, its own freshly built controllers, and an RNG stream derived
//! from the run seed and the game index, so results do not depend on the
//! worker count or completion order.

use crate::follower::{follower_act, FollowerError, FollowerPolicy};
use crate::game::{derive_seed, Action, GameError, GameState, JointAction, PlayerId};
use crate::grid::{featurize, generate_board, rule_based_agent, GridConfig, GridState};
use crate::matrix::{MatrixGame, MatrixState};
use crate::planners::{PlanError, PlanStepStats, Planner, PlannerConfig, SearchAlgorithm};
use crate::bandits::BanditAlgo;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad agent spec '{spec}': {reason}")]
    BadSpec { spec: String, reason: String },
    #[error("agent '{spec}' cannot play on env '{env}'")]
    UnsupportedSeat { spec: String, env: String },
    #[error("tournament needs at least 1 game")]
    NoGames,
    #[error("env '{env}' seats {expected} players, got {got} specs")]
    SeatCount {
        env: String,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Follower(#[from] FollowerError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How one seat chooses actions. Parsed from compact strings such as
/// `fdts-ts`, `mcs-ucb,c=2`, `mcts-nr-ts,iters=100,depth=20`, `rule`,
/// `random`, or `follower:<checkpoint path>`.
#[derive(Debug, Clone)]
pub enum AgentSpec {
    Planner { config: PlannerConfig, label: String },
    Rule,
    Random,
    Follower { path: PathBuf, policy: Arc<FollowerPolicy> },
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Planner { label, .. } => f.write_str(label),
            AgentSpec::Rule => f.write_str("rule"),
            AgentSpec::Random => f.write_str("random"),
            AgentSpec::Follower { path, .. } => write!(f, "follower:{}", path.display()),
        }
    }
}

/// Parses an agent spec, loading follower checkpoints eagerly so that a
/// bad path aborts before any games run.
pub fn parse_agent_spec(spec: &str) -> Result<AgentSpec, HarnessError> {
    let bad = |reason: &str| HarnessError::BadSpec {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let trimmed = spec.trim();
    if trimmed == "rule" {
        return Ok(AgentSpec::Rule);
    }
    if trimmed == "random" {
        return Ok(AgentSpec::Random);
    }
    if let Some(path) = trimmed.strip_prefix("follower:") {
        let path = PathBuf::from(path);
        let policy = FollowerPolicy::load(&path)?;
        return Ok(AgentSpec::Follower {
            path,
            policy: Arc::new(policy),
        });
    }

    // Planner spec: "<algo>-<bandit>[,key=value]*".
    let mut parts = trimmed.split(',');
    let head = parts.next().expect("split yields at least one part");
    let (algo_name, bandit_name) = head
        .rsplit_once('-')
        .ok_or_else(|| bad("expected '<algorithm>-<bandit>'"))?;
    let algorithm = match algo_name {
        "mcs" => SearchAlgorithm::Mcs,
        "mcts" => SearchAlgorithm::Mcts { rollout: true },
        "mcts-nr" => SearchAlgorithm::Mcts { rollout: false },
        "fdts" => SearchAlgorithm::Fdts,
        other => return Err(bad(&format!("unknown algorithm '{other}'"))),
    };

    let mut c = 0.7;
    let mut alpha = 1.0;
    let mut beta = 1.0;
    let mut iterations = 100u32;
    let mut depth = 20u32;
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| bad(&format!("expected key=value, got '{part}'")))?;
        let num: f64 = value
            .parse()
            .map_err(|_| bad(&format!("unparsable value for '{key}'")))?;
        match key.trim() {
            "c" => c = num,
            "alpha" => alpha = num,
            "beta" => beta = num,
            "iters" | "iterations" => iterations = num as u32,
            "depth" | "k" => depth = num as u32,
            other => return Err(bad(&format!("unknown parameter '{other}'"))),
        }
    }
    let bandit = match bandit_name {
        "ucb" | "ucb1" => BanditAlgo::ucb1(c),
        "ts" => BanditAlgo::Thompson { alpha, beta },
        "rand" | "random" => BanditAlgo::Random,
        other => return Err(bad(&format!("unknown bandit '{other}'"))),
    };
    Ok(AgentSpec::Planner {
        config: PlannerConfig::new(algorithm, bandit).with_budget(iterations, depth),
        label: trimmed.to_string(),
    })
}

/// Which environment a tournament runs on.
#[derive(Clone)]
pub enum EnvSpec {
    Grid(Arc<GridConfig>),
    Matrix { game: Arc<MatrixGame>, label: String },
}

impl EnvSpec {
    pub fn id(&self) -> String {
        match self {
            EnvSpec::Grid(config) => config.profile_name().to_string(),
            EnvSpec::Matrix { label, .. } => format!("matrix:{label}"),
        }
    }

    pub fn players(&self) -> usize {
        match self {
            EnvSpec::Grid(config) => config.players,
            EnvSpec::Matrix { game, .. } => game.num_players(),
        }
    }
}

/// Per-seat outcome of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Draw,
    Loss,
}

impl Outcome {
    fn from_reward(reward: i8) -> Outcome {
        match reward.cmp(&0) {
            std::cmp::Ordering::Greater => Outcome::Win,
            std::cmp::Ordering::Equal => Outcome::Draw,
            std::cmp::Ordering::Less => Outcome::Loss,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Win => "win",
            Outcome::Draw => "draw",
            Outcome::Loss => "loss",
        }
    }
}

/// One finished episode. `wall_ms` is kept for profiling but never
/// written to the CSV, which must be byte-identical across reruns.
#[derive(Debug, Clone)]
pub struct MatchRecord {
    pub game: u64,
    pub env: String,
    pub seats: Vec<String>,
    pub seed: u64,
    /// Seat rotation used: spec slot `i` played board player
    /// `(i + rotation) % n`.
    pub rotation: usize,
    /// Outcome per spec slot (already de-rotated).
    pub outcomes: Vec<Outcome>,
    pub length: u32,
    pub wall_ms: f64,
}

/// Revisit-ratio series for one instrumented game: one row per
/// (step, depth), with an exponentially weighted moving average
/// (decay 0.9) smoothing each depth's series across steps.
#[derive(Debug, Clone)]
pub struct RevisitTrace {
    pub label: String,
    pub rows: Vec<RevisitRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RevisitRow {
    pub step: u32,
    pub depth: u32,
    pub visits: u64,
    pub revisits: u64,
    pub ratio: f64,
    pub smoothed: f64,
}

pub const REVISIT_EWMA_DECAY: f64 = 0.9;

impl RevisitTrace {
    /// Builds the trace from one planner's per-step statistics.
    pub fn from_steps(label: &str, steps: &[PlanStepStats]) -> RevisitTrace {
        let max_depth = steps.iter().map(|s| s.visits.len()).max().unwrap_or(1);
        let mut smoothed: Vec<Option<f64>> = vec![None; max_depth];
        let mut rows = Vec::new();
        for (step, stats) in steps.iter().enumerate() {
            for depth in 1..stats.visits.len() {
                if stats.visits[depth] == 0 {
                    continue;
                }
                let ratio = stats.revisits[depth] as f64 / stats.visits[depth] as f64;
                let s = match smoothed[depth] {
                    None => ratio,
                    Some(prev) => REVISIT_EWMA_DECAY * prev + (1.0 - REVISIT_EWMA_DECAY) * ratio,
                };
                smoothed[depth] = Some(s);
                rows.push(RevisitRow {
                    step: step as u32,
                    depth: depth as u32,
                    visits: stats.visits[depth],
                    revisits: stats.revisits[depth],
                    ratio,
                    smoothed: s,
                });
            }
        }
        RevisitTrace {
            label: label.to_string(),
            rows,
        }
    }

    /// Mean smoothed ratio at one depth over the whole game.
    pub fn mean_smoothed_at(&self, depth: u32) -> f64 {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.depth == depth)
            .map(|r| r.smoothed)
            .collect();
        if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    }
}

/// Confidence-interval style for reported percentages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Normal,
    Wilson,
}

/// 95% normal-approximation half-width `1.96 * sqrt(p(1-p)/n)`.
pub fn normal_ci_half_width(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// 95% Wilson score interval, `(low, high)` on the proportion scale.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let z = 1.96f64;
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Counts and interval estimates for one seat across a tournament.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeatSummary {
    pub spec: String,
    pub games: u64,
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
    pub win_pct: f64,
    pub draw_pct: f64,
    pub loss_pct: f64,
    /// Half-width of the 95% interval on the win percentage (normal
    /// method), or the distance from the point estimate to the further
    /// Wilson bound.
    pub win_ci_pct: f64,
    pub ci_method: CiMethod,
}

/// Order-independent reduction of match records into per-seat summaries.
pub fn summarize(records: &[MatchRecord], specs: &[String], ci: CiMethod) -> Vec<SeatSummary> {
    let mut summaries: Vec<SeatSummary> = specs
        .iter()
        .map(|spec| SeatSummary {
            spec: spec.clone(),
            games: 0,
            wins: 0,
            draws: 0,
            losses: 0,
            win_pct: 0.0,
            draw_pct: 0.0,
            loss_pct: 0.0,
            win_ci_pct: 0.0,
            ci_method: ci,
        })
        .collect();
    for record in records {
        for (slot, outcome) in record.outcomes.iter().enumerate() {
            let s = &mut summaries[slot];
            s.games += 1;
            match outcome {
                Outcome::Win => s.wins += 1,
                Outcome::Draw => s.draws += 1,
                Outcome::Loss => s.losses += 1,
            }
        }
    }
    for s in &mut summaries {
        if s.games == 0 {
            continue;
        }
        let n = s.games as f64;
        let p = s.wins as f64 / n;
        s.win_pct = 100.0 * p;
        s.draw_pct = 100.0 * s.draws as f64 / n;
        s.loss_pct = 100.0 * s.losses as f64 / n;
        s.win_ci_pct = match ci {
            CiMethod::Normal => 100.0 * normal_ci_half_width(p, s.games),
            CiMethod::Wilson => {
                let (lo, hi) = wilson_interval(s.wins, s.games);
                100.0 * (hi - p).max(p - lo)
            }
        };
    }
    summaries
}

/// A live controller for one seat of one episode.
enum SeatController {
    Planner(Box<Planner>),
    Rule { seed: u64 },
    Random(ChaCha8Rng),
    Follower(Arc<FollowerPolicy>),
}

impl AgentSpec {
    fn build(&self, seed: u64) -> SeatController {
        match self {
            AgentSpec::Planner { config, .. } => {
                SeatController::Planner(Box::new(Planner::new(config.with_seed(seed))))
            }
            AgentSpec::Rule => SeatController::Rule { seed },
            AgentSpec::Random => SeatController::Random(ChaCha8Rng::seed_from_u64(seed)),
            AgentSpec::Follower { policy, .. } => SeatController::Follower(policy.clone()),
        }
    }
}

/// Environment hooks the episode driver needs beyond [`GameState`]. The
/// grid implements all controllers; other games support planner and
/// random seats only.
trait HarnessGame: GameState + Clone {
    fn rule_action(&self, _player: PlayerId, _seed: u64) -> Option<Result<Action, GameError>> {
        None
    }
    fn follower_action(
        &self,
        _policy: &FollowerPolicy,
        _player: PlayerId,
    ) -> Option<Result<Action, FollowerError>> {
        None
    }
}

impl HarnessGame for GridState {
    fn rule_action(&self, player: PlayerId, seed: u64) -> Option<Result<Action, GameError>> {
        Some(rule_based_agent(self, player, seed))
    }

    fn follower_action(
        &self,
        policy: &FollowerPolicy,
        player: PlayerId,
    ) -> Option<Result<Action, FollowerError>> {
        let mask = match self.legal_actions(player) {
            Ok(mask) => mask,
            Err(_) => return Some(Err(FollowerError::EmptyMask)),
        };
        Some(follower_act(
            policy,
            &featurize(self, player).as_input(),
            &mask,
        ))
    }
}

impl HarnessGame for MatrixState {}

impl SeatController {
    fn act<S: HarnessGame>(
        &mut self,
        state: &S,
        player: PlayerId,
        slot_in_joint: usize,
        env: &str,
        spec: &str,
    ) -> Result<(Action, Option<PlanStepStats>), HarnessError> {
        match self {
            SeatController::Planner(planner) => {
                let joint = planner.plan(state)?;
                let stats = planner.last_stats().cloned();
                Ok((joint.get(slot_in_joint), stats))
            }
            SeatController::Rule { seed } => match state.rule_action(player, *seed) {
                Some(result) => Ok((result?, None)),
                None => Err(HarnessError::UnsupportedSeat {
                    spec: spec.to_string(),
                    env: env.to_string(),
                }),
            },
            SeatController::Random(rng) => {
                let legal = state.legal_actions(player)?;
                Ok((legal[rng.gen_range(0..legal.len())], None))
            }
            SeatController::Follower(policy) => match state.follower_action(policy, player) {
                Some(result) => Ok((result?, None)),
                None => Err(HarnessError::UnsupportedSeat {
                    spec: spec.to_string(),
                    env: env.to_string(),
                }),
            },
        }
    }

    fn advance<S: GameState>(&mut self, next: &S) -> Result<(), HarnessError> {
        if let SeatController::Planner(planner) = self {
            planner.advance(next)?;
        }
        Ok(())
    }
}

/// How games map to boards and seat rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Fresh board per game, rotation cycling through all corners.
    Rotate,
    /// Two-player head-to-head: each board is played twice, once per side
    /// assignment, so swapping the two specs relabels the same games.
    Mirror,
}

impl Pairing {
    fn plan(&self, game: u64, run_seed: u64, players: usize) -> EpisodePlan {
        match self {
            Pairing::Rotate => EpisodePlan {
                game,
                board_seed: derive_seed(run_seed, game),
                rotation: (game % players as u64) as usize,
            },
            Pairing::Mirror => EpisodePlan {
                game,
                board_seed: derive_seed(run_seed, game / 2),
                rotation: (game % 2) as usize,
            },
        }
    }
}

/// Full tournament description.
#[derive(Clone)]
pub struct TournamentConfig {
    pub env: EnvSpec,
    pub seats: Vec<AgentSpec>,
    pub games: u64,
    pub seed: u64,
    /// Worker threads; 0 means rayon's default. The `SIMULPLAN_WORKERS`
    /// environment variable overrides this when set.
    pub workers: usize,
    pub ci: CiMethod,
    pub pairing: Pairing,
    /// Collect a [`RevisitTrace`] of seat 0 for the first N games.
    pub trace_games: u64,
}

impl TournamentConfig {
    pub fn new(env: EnvSpec, seats: Vec<AgentSpec>, games: u64, seed: u64) -> Self {
        TournamentConfig {
            env,
            seats,
            games,
            seed,
            workers: 0,
            ci: CiMethod::Normal,
            pairing: Pairing::Rotate,
            trace_games: 0,
        }
    }
}

/// Everything a tournament produced.
pub struct TournamentResult {
    pub records: Vec<MatchRecord>,
    pub summaries: Vec<SeatSummary>,
    pub traces: Vec<RevisitTrace>,
    pub wall_seconds: f64,
}

impl TournamentResult {
    pub fn seat(&self, slot: usize) -> &SeatSummary {
        &self.summaries[slot]
    }
}

/// Resolves the worker count: the `SIMULPLAN_WORKERS` env var wins, then
/// the configured value, then rayon's default (0 lets rayon decide).
pub fn resolve_workers(configured: usize) -> usize {
    match std::env::var("SIMULPLAN_WORKERS") {
        Ok(v) => v.trim().parse().unwrap_or(configured),
        Err(_) => configured,
    }
}

fn initial_state(env: &EnvSpec, board_seed: u64) -> EnvState {
    match env {
        EnvSpec::Grid(config) => EnvState::Grid(generate_board(config, derive_seed(board_seed, 1))),
        EnvSpec::Matrix { game, .. } => EnvState::Matrix(game.initial_state()),
    }
}

enum EnvState {
    Grid(GridState),
    Matrix(MatrixState),
}

/// Board assignment of one episode. Controller RNG streams derive from
/// `(board_seed, board player)`, not from the spec slot, so two runs that
/// assign the same agent to the same board player replay identically.
#[derive(Debug, Clone, Copy)]
pub struct EpisodePlan {
    pub game: u64,
    pub board_seed: u64,
    /// Spec slot `i` controls board player `(i + rotation) % n`.
    pub rotation: usize,
}

/// Runs one episode; outcomes are reported back in spec-slot order.
pub fn run_episode(
    env: &EnvSpec,
    seats: &[AgentSpec],
    plan: &EpisodePlan,
) -> Result<(MatchRecord, Option<RevisitTrace>), HarnessError> {
    let players = env.players();
    if seats.len() != players {
        return Err(HarnessError::SeatCount {
            env: env.id(),
            expected: players,
            got: seats.len(),
        });
    }
    let EpisodePlan {
        game,
        board_seed,
        rotation,
    } = *plan;
    let mut controllers: Vec<SeatController> = seats
        .iter()
        .enumerate()
        .map(|(slot, spec)| {
            let board_player = (slot + rotation) % players;
            spec.build(derive_seed(board_seed, 7000 + board_player as u64))
        })
        .collect();
    // slot_of[board player] -> spec slot.
    let slot_of: Vec<usize> = (0..players)
        .map(|p| (p + players - rotation) % players)
        .collect();

    let start = Instant::now();
    let mut state = initial_state(env, board_seed);
    let mut length = 0u32;
    let mut seat0_steps: Vec<PlanStepStats> = Vec::new();

    loop {
        let done = match &state {
            EnvState::Grid(s) => s.is_terminal(),
            EnvState::Matrix(s) => s.is_terminal(),
        };
        if done {
            break;
        }
        match &mut state {
            EnvState::Grid(s) => {
                drive_step(s, &mut controllers, &slot_of, seats, env, &mut seat0_steps)?;
            }
            EnvState::Matrix(s) => {
                drive_step(s, &mut controllers, &slot_of, seats, env, &mut seat0_steps)?;
            }
        }
        length += 1;
    }

    let mut outcomes = vec![Outcome::Draw; players];
    for p in 0..players {
        let reward = match &state {
            EnvState::Grid(s) => s.terminal_reward(PlayerId(p))?,
            EnvState::Matrix(s) => s.terminal_reward(PlayerId(p))?,
        };
        outcomes[slot_of[p]] = Outcome::from_reward(reward);
    }

    let record = MatchRecord {
        game,
        env: env.id(),
        seats: seats.iter().map(|s| s.to_string()).collect(),
        seed: board_seed,
        rotation,
        outcomes,
        length,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let trace = if seat0_steps.is_empty() {
        None
    } else {
        Some(RevisitTrace::from_steps(
            &seats[0].to_string(),
            &seat0_steps,
        ))
    };
    Ok((record, trace))
}

fn drive_step<S: HarnessGame>(
    state: &mut S,
    controllers: &mut [SeatController],
    slot_of: &[usize],
    seats: &[AgentSpec],
    env: &EnvSpec,
    seat0_steps: &mut Vec<PlanStepStats>,
) -> Result<(), HarnessError> {
    let actors = state.players_to_act();
    let mut joint = Vec::with_capacity(actors.len());
    for (pos, &player) in actors.iter().enumerate() {
        let slot = slot_of[player.0];
        let (action, stats) = controllers[slot].act(
            state,
            player,
            pos,
            &env.id(),
            &seats[slot].to_string(),
        )?;
        if slot == 0 {
            if let Some(stats) = stats {
                seat0_steps.push(stats);
            }
        }
        joint.push(action);
    }
    let next = state.step(&JointAction::new(joint))?;
    for controller in controllers.iter_mut() {
        controller.advance(&next)?;
    }
    *state = next;
    Ok(())
}

/// Runs `games` independent episodes in parallel and aggregates them.
/// Identical configs produce identical records and summaries regardless
/// of worker count.
pub fn run_tournament(config: &TournamentConfig) -> Result<TournamentResult, HarnessError> {
    if config.games == 0 {
        return Err(HarnessError::NoGames);
    }
    if config.seats.len() != config.env.players() {
        return Err(HarnessError::SeatCount {
            env: config.env.id(),
            expected: config.env.players(),
            got: config.seats.len(),
        });
    }
    if config.pairing == Pairing::Mirror && config.env.players() != 2 {
        return Err(HarnessError::SeatCount {
            env: config.env.id(),
            expected: 2,
            got: config.env.players(),
        });
    }
    let start = Instant::now();
    let workers = resolve_workers(config.workers);
    let players = config.env.players();
    let run_one = |game: u64| {
        let plan = config.pairing.plan(game, config.seed, players);
        run_episode(&config.env, &config.seats, &plan)
    };
    let results: Vec<Result<(MatchRecord, Option<RevisitTrace>), HarnessError>> = if workers == 1 {
        (0..config.games).map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool");
        pool.install(|| (0..config.games).into_par_iter().map(run_one).collect())
    };

    let mut records = Vec::with_capacity(config.games as usize);
    let mut traces = Vec::new();
    for (game, result) in results.into_iter().enumerate() {
        let (record, trace) = result?;
        if (game as u64) < config.trace_games {
            if let Some(trace) = trace {
                traces.push(trace);
            }
        }
        records.push(record);
    }
    let spec_names: Vec<String> = config.seats.iter().map(|s| s.to_string()).collect();
    let summaries = summarize(&records, &spec_names, config.ci);
    Ok(TournamentResult {
        records,
        summaries,
        traces,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Quotes a CSV field when it contains the delimiter, quotes, or
/// newlines (agent specs carry commas, e.g. `mcs-ucb,c=2`).
fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Writes `matches.csv`: one record per row, stable columns, and no
/// wall-clock data so reruns are byte-identical.
pub fn write_matches_csv<W: Write>(records: &[MatchRecord], mut out: W) -> std::io::Result<()> {
    let seats = records.first().map(|r| r.seats.len()).unwrap_or(0);
    write!(out, "game,env,seed,rotation,length")?;
    for i in 0..seats {
        write!(out, ",seat{i}_spec,seat{i}_outcome")?;
    }
    writeln!(out)?;
    for r in records {
        write!(
            out,
            "{},{},{},{},{}",
            r.game, r.env, r.seed, r.rotation, r.length
        )?;
        for (spec, outcome) in r.seats.iter().zip(&r.outcomes) {
            write!(out, ",{},{}", csv_field(spec), outcome.as_str())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes `revisits.csv`: `game,label,step,depth,visits,revisits,ratio,
/// smoothed` rows for every collected trace.
pub fn write_revisits_csv<W: Write>(traces: &[RevisitTrace], mut out: W) -> std::io::Result<()> {
    writeln!(out, "game,label,step,depth,visits,revisits,ratio,smoothed")?;
    for (game, trace) in traces.iter().enumerate() {
        let label = csv_field(&trace.label);
        for row in &trace.rows {
            writeln!(
                out,
                "{game},{label},{},{},{},{},{:.6},{:.6}",
                row.step, row.depth, row.visits, row.revisits, row.ratio, row.smoothed
            )?;
        }
    }
    Ok(())
}

/// JSON summary: aggregates plus a metadata block. Timestamps and wall
/// clock live only here, never in the CSVs.
pub fn summary_json(
    config: &TournamentConfig,
    result: &TournamentResult,
) -> serde_json::Value {
    let generated_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    serde_json::json!({
        "env": config.env.id(),
        "games": config.games,
        "seed": config.seed,
        "ci_method": config.ci,
        "revisit_ewma_decay": REVISIT_EWMA_DECAY,
        "seats": result.summaries,
        "metadata": {
            "generated_at_unix": generated_at,
            "wall_seconds": result.wall_seconds,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn synthetic_records(wins: u64, draws: u64, losses: u64) -> Vec<MatchRecord> {
        let mut records = Vec::new();
        let mut game = 0;
        let mut push = |outcome: Outcome, records: &mut Vec<MatchRecord>| {
            let other = match outcome {
                Outcome::Win => Outcome::Loss,
                Outcome::Draw => Outcome::Draw,
                Outcome::Loss => Outcome::Win,
            };
            records.push(MatchRecord {
                game,
                env: "synthetic".into(),
                seats: vec!["a".into(), "b".into()],
                seed: game,
                rotation: 0,
                outcomes: vec![outcome, other],
                length: 1,
                wall_ms: 0.0,
            });
            game += 1;
        };
        for _ in 0..wins {
            push(Outcome::Win, &mut records);
        }
        for _ in 0..draws {
            push(Outcome::Draw, &mut records);
        }
        for _ in 0..losses {
            push(Outcome::Loss, &mut records);
        }
        records
    }

    #[test]
    fn normal_ci_matches_the_reference_point() {
        // 200 wins in 400 games: 50.0% with a ±4.9% half-width.
        let records = synthetic_records(200, 0, 200);
        let summary = summarize(&records, &["a".into(), "b".into()], CiMethod::Normal);
        assert_eq!(summary[0].wins, 200);
        assert!((summary[0].win_pct - 50.0).abs() < 1e-12);
        assert!((summary[0].win_ci_pct - 4.9).abs() < 0.05);
        // Percentages partition.
        let total = summary[0].win_pct + summary[0].draw_pct + summary[0].loss_pct;
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate() {
        let (lo, hi) = wilson_interval(200, 400);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!((hi - lo) < 0.105);
        let (lo0, hi0) = wilson_interval(0, 50);
        // Wilson stays inside [0,1] even at the boundary.
        assert!(lo0 >= 0.0 && hi0 > 0.0 && hi0 < 0.2);
    }

    #[test]
    fn aggregation_is_order_independent() {
        let mut records = synthetic_records(37, 11, 52);
        let specs = vec!["a".to_string(), "b".to_string()];
        let before = summarize(&records, &specs, CiMethod::Normal);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        records.shuffle(&mut rng);
        let after = summarize(&records, &specs, CiMethod::Normal);
        assert_eq!(before, after);
    }

    #[test]
    fn ci_width_shrinks_like_inverse_sqrt_n() {
        let widths: Vec<f64> = [100u64, 400, 1600]
            .iter()
            .map(|&n| {
                let records = synthetic_records(n / 2, 0, n / 2);
                summarize(&records, &["a".into(), "b".into()], CiMethod::Normal)[0].win_ci_pct
            })
            .collect();
        // Quadrupling n halves the width.
        assert!((widths[0] / widths[1] - 2.0).abs() < 1e-9);
        assert!((widths[1] / widths[2] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn spec_strings_parse_and_display() {
        match parse_agent_spec("fdts-ts").unwrap() {
            AgentSpec::Planner { config, label } => {
                assert_eq!(label, "fdts-ts");
                assert!(matches!(config.algorithm, SearchAlgorithm::Fdts));
                assert!(matches!(
                    config.bandit,
                    BanditAlgo::Thompson { alpha, beta } if alpha == 1.0 && beta == 1.0
                ));
                assert_eq!(config.iterations, 100);
                assert_eq!(config.depth, 20);
            }
            other => panic!("unexpected spec {other}"),
        }
        match parse_agent_spec("mcs-ucb,c=2,iters=50,depth=10").unwrap() {
            AgentSpec::Planner { config, .. } => {
                assert!(matches!(config.bandit, BanditAlgo::Ucb1 { c } if c == 2.0));
                assert_eq!(config.iterations, 50);
                assert_eq!(config.depth, 10);
            }
            other => panic!("unexpected spec {other}"),
        }
        assert!(matches!(
            parse_agent_spec("mcts-nr-ts").unwrap(),
            AgentSpec::Planner { config, .. }
                if matches!(config.algorithm, SearchAlgorithm::Mcts { rollout: false })
        ));
        assert!(matches!(parse_agent_spec("rule").unwrap(), AgentSpec::Rule));
        assert!(matches!(
            parse_agent_spec("random").unwrap(),
            AgentSpec::Random
        ));
        for bad in ["x", "mcs-bogus", "mcs-ts,c", "mcs-ts,zzz=1", "plain"] {
            assert!(
                matches!(parse_agent_spec(bad), Err(HarnessError::BadSpec { .. })),
                "{bad} should not parse"
            );
        }
    }

    #[test]
    fn follower_specs_fail_fast_on_missing_checkpoints() {
        assert!(matches!(
            parse_agent_spec("follower:/nonexistent/ckpt.bin"),
            Err(HarnessError::Follower(_))
        ));
    }

    fn tiny_matrix_env() -> EnvSpec {
        EnvSpec::Matrix {
            game: MatrixGame::rock_paper_scissors(),
            label: "rps".into(),
        }
    }

    #[test]
    fn matrix_episodes_reject_grid_only_agents() {
        let seats = vec![parse_agent_spec("rule").unwrap(), AgentSpec::Random];
        let plan = Pairing::Rotate.plan(0, 1, 2);
        let err = run_episode(&tiny_matrix_env(), &seats, &plan).unwrap_err();
        assert!(matches!(err, HarnessError::UnsupportedSeat { .. }));
    }

    #[test]
    fn seat_rotation_cycles_through_board_players() {
        let seats = vec![AgentSpec::Random, AgentSpec::Random];
        for game in 0..4 {
            let plan = Pairing::Rotate.plan(game, 9, 2);
            assert_eq!(plan.rotation, (game % 2) as usize);
            let (record, _) = run_episode(&tiny_matrix_env(), &seats, &plan).unwrap();
            assert_eq!(record.rotation, (game % 2) as usize);
        }
        // Mirrored pairing reuses each board twice with flipped sides.
        let a = Pairing::Mirror.plan(6, 9, 2);
        let b = Pairing::Mirror.plan(7, 9, 2);
        assert_eq!(a.board_seed, b.board_seed);
        assert_eq!((a.rotation, b.rotation), (0, 1));
    }

    #[test]
    fn mirrored_pair_swap_relabels_the_same_games() {
        // Under mirrored pairing, run(a, b) and run(b, a) with one seed
        // play exactly the same set of episodes, so the per-seat counts
        // swap places. This is the symmetry audit behind the pair command.
        let env = EnvSpec::Grid(GridConfig::two_player_fast());
        let rule = parse_agent_spec("rule").unwrap();
        let mut forward =
            TournamentConfig::new(env.clone(), vec![AgentSpec::Random, rule.clone()], 6, 13);
        forward.pairing = Pairing::Mirror;
        let mut backward =
            TournamentConfig::new(env, vec![rule, AgentSpec::Random], 6, 13);
        backward.pairing = Pairing::Mirror;
        let f = run_tournament(&forward).unwrap();
        let b = run_tournament(&backward).unwrap();
        assert_eq!(f.summaries[0].wins, b.summaries[1].wins);
        assert_eq!(f.summaries[0].draws, b.summaries[1].draws);
        assert_eq!(f.summaries[0].losses, b.summaries[1].losses);
        assert_eq!(f.summaries[1].wins, b.summaries[0].wins);
    }

    #[test]
    fn tournaments_are_deterministic_and_partition_outcomes() {
        let env = EnvSpec::Grid(GridConfig::two_player_fast());
        let seats = vec![AgentSpec::Random, AgentSpec::Random];
        let mut config = TournamentConfig::new(env, seats, 6, 42);
        config.workers = 2;
        let a = run_tournament(&config).unwrap();
        let b = run_tournament(&config).unwrap();
        assert_eq!(a.records.len(), 6);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.outcomes, rb.outcomes);
            assert_eq!(ra.length, rb.length);
            assert_eq!(ra.seed, rb.seed);
        }
        for s in &a.summaries {
            assert_eq!(s.wins + s.draws + s.losses, s.games);
            assert_eq!(s.games, 6);
        }
        // At most one winner per episode; a win means everyone else lost.
        // (No-winner games happen: both agents can die on the same step.)
        for record in &a.records {
            let wins = record
                .outcomes
                .iter()
                .filter(|&&o| o == Outcome::Win)
                .count();
            assert!(wins <= 1, "{:?}", record.outcomes);
            if wins == 1 {
                assert!(record.outcomes.iter().all(|&o| o != Outcome::Draw));
            }
        }

        // CSV bodies are byte-identical across reruns.
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_matches_csv(&a.records, &mut csv_a).unwrap();
        write_matches_csv(&b.records, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        assert!(csv_a.starts_with(b"game,env,seed,rotation,length,seat0_spec"));
        let text = String::from_utf8(csv_a).unwrap();
        assert!(!text.contains("ms"), "wall clock must stay out of the CSV");
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let env = EnvSpec::Grid(GridConfig::two_player_fast());
        let seats = vec![AgentSpec::Random, AgentSpec::Random];
        let mut config = TournamentConfig::new(env, seats, 4, 11);
        config.workers = 1;
        let serial = run_tournament(&config).unwrap();
        config.workers = 4;
        let parallel = run_tournament(&config).unwrap();
        for (a, b) in serial.records.iter().zip(&parallel.records) {
            assert_eq!(a.outcomes, b.outcomes);
            assert_eq!(a.length, b.length);
        }
    }

    #[test]
    fn zero_games_is_rejected() {
        let env = EnvSpec::Grid(GridConfig::two_player_fast());
        let config = TournamentConfig::new(env, vec![AgentSpec::Random, AgentSpec::Random], 0, 1);
        assert!(matches!(
            run_tournament(&config),
            Err(HarnessError::NoGames)
        ));
    }

    #[test]
    fn seat_count_mismatch_is_rejected() {
        let env = EnvSpec::Grid(GridConfig::two_player_fast());
        let config = TournamentConfig::new(env, vec![AgentSpec::Random], 1, 1);
        assert!(matches!(
            run_tournament(&config),
            Err(HarnessError::SeatCount { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn first_planning_step_has_zero_revisit_ratio() {
        // One-action matrix game: every path is forced. The first plan
        // call grows the tree from scratch, so nothing is a revisit.
        let game = MatrixGame::new(vec![1, 1], vec![vec![0, 0]], 50).unwrap();
        let spec = parse_agent_spec("fdts-ts,iters=1,depth=5").unwrap();
        let mut planner = match &spec {
            AgentSpec::Planner { config, .. } => Planner::new(config.with_seed(1)),
            _ => unreachable!(),
        };
        let state = game.initial_state();
        planner.plan(&state).unwrap();
        let first = planner.last_stats().unwrap().clone();
        // Second call from the same root retraces the identical forced
        // path: every visit is now a revisit.
        planner.plan(&state).unwrap();
        let second = planner.last_stats().unwrap().clone();

        let trace = RevisitTrace::from_steps("fdts-ts", &[first, second]);
        for depth in 1..=5 {
            let rows: Vec<&RevisitRow> =
                trace.rows.iter().filter(|r| r.depth == depth).collect();
            assert_eq!(rows.len(), 2, "depth {depth}");
            assert_eq!(rows[0].ratio, 0.0, "fresh tree at depth {depth}");
            assert_eq!(rows[1].ratio, 1.0, "forced retrace at depth {depth}");
            assert!(rows[1].revisits <= rows[1].visits);
        }
        // EWMA: second smoothed value is 0.9 * 0.0 + 0.1 * 1.0.
        let second_row = trace
            .rows
            .iter()
            .find(|r| r.step == 1 && r.depth == 3)
            .unwrap();
        assert!((second_row.smoothed - 0.1).abs() < 1e-12);
        assert!((trace.mean_smoothed_at(3) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn tournament_collects_traces_for_planner_seat_zero() {
        let env = EnvSpec::Grid(GridConfig::two_player_fast());
        let seats = vec![
            parse_agent_spec("mcs-ts,iters=4,depth=3").unwrap(),
            AgentSpec::Random,
        ];
        let mut config = TournamentConfig::new(env, seats, 2, 5);
        config.trace_games = 1;
        let result = run_tournament(&config).unwrap();
        assert_eq!(result.traces.len(), 1);
        assert!(!result.traces[0].rows.is_empty());
        for row in &result.traces[0].rows {
            assert!(row.ratio >= 0.0 && row.ratio <= 1.0);
            assert!(row.revisits <= row.visits);
        }
        let mut csv = Vec::new();
        write_revisits_csv(&result.traces, &mut csv).unwrap();
        assert!(csv.starts_with(b"game,label,step,depth,visits"));
    }

    #[test]
    fn csv_quotes_specs_containing_commas() {
        let mut record = synthetic_records(1, 0, 0);
        record[0].seats = vec!["mcs-ucb,c=2".into(), "rule".into()];
        let mut csv = Vec::new();
        write_matches_csv(&record, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.contains("\"mcs-ucb,c=2\",win"));
        // Every row keeps the same column count as the header.
        let cols = |line: &str| {
            let mut count = 1;
            let mut quoted = false;
            for ch in line.chars() {
                match ch {
                    '"' => quoted = !quoted,
                    ',' if !quoted => count += 1,
                    _ => {}
                }
            }
            count
        };
        let mut lines = text.lines();
        let header = cols(lines.next().unwrap());
        assert!(lines.all(|l| cols(l) == header));
    }

    #[test]
    fn summary_json_carries_metadata_but_csv_stays_clean() {
        let env = EnvSpec::Grid(GridConfig::two_player_fast());
        let seats = vec![AgentSpec::Random, AgentSpec::Random];
        let config = TournamentConfig::new(env, seats, 2, 3);
        let result = run_tournament(&config).unwrap();
        let json = summary_json(&config, &result);
        assert_eq!(json["games"], 2);
        assert!(json["metadata"]["generated_at_unix"].as_u64().unwrap() > 0);
        assert_eq!(json["revisit_ewma_decay"], 0.9);
        assert_eq!(json["seats"].as_array().unwrap().len(), 2);
    }
}
