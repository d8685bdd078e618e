//! Self-play planners over a state-keyed search tree with decoupled
//! per-player bandits.
//!
//! Three algorithms share the tree machinery:
//!
//! - **MCS**: bandit selection at the root only, uniformly random joint
//!   actions below, evaluation after a fixed horizon.
//! - **MCTS**: bandit descent until a state that has no node yet, exactly
//!   one node added per iteration, then (optionally) a random rollout to
//!   the horizon before evaluating.
//! - **FDTS**: bandit selection applied exactly `k` times per iteration,
//!   inserting a node for *every* novel state encountered, so rollout
//!   trajectories stay in the tree and are re-visited by later iterations.
//!
//! Nodes are keyed by canonical state key, so transpositions share
//! statistics and a tree carried across game steps keeps everything it
//! learned near the new root.

use crate::bandits::{BanditAlgo, BanditError, BanditInstance};
use crate::game::{GameError, GameState, JointAction, PlayerId, StateKey, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("cannot plan from a terminal state")]
    TerminalRoot,
    #[error("unknown value function id `{0}`")]
    UnknownValueFn(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
}

/// Which search algorithm a planner runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchAlgorithm {
    Mcs,
    /// `rollout = true` continues with random joint actions to the horizon
    /// after expansion; `false` evaluates the new node immediately.
    Mcts { rollout: bool },
    Fdts,
}

impl SearchAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            SearchAlgorithm::Mcs => "mcs",
            SearchAlgorithm::Mcts { rollout: true } => "mcts",
            SearchAlgorithm::Mcts { rollout: false } => "mcts-nr",
            SearchAlgorithm::Fdts => "fdts",
        }
    }
}

/// State evaluation used at the end of each planning iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueFn {
    /// The environment's own reward function: terminal rewards at
    /// terminals, the reward-shaped heuristic otherwise.
    Reward,
}

impl ValueFn {
    pub fn from_id(id: &str) -> Result<Self, PlanError> {
        match id {
            "reward" => Ok(ValueFn::Reward),
            other => Err(PlanError::UnknownValueFn(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            ValueFn::Reward => "reward",
        }
    }
}

/// Evaluates a state for every player: exact ternary rewards at terminal
/// states, the environment's reward heuristic otherwise.
pub fn evaluate_state<S: GameState>(state: &S, value_fn: ValueFn) -> Result<Value, PlanError> {
    let ValueFn::Reward = value_fn;
    let n = state.num_players();
    let mut values = Vec::with_capacity(n);
    if state.is_terminal() {
        for p in 0..n {
            values.push(state.terminal_reward(PlayerId(p))? as f64);
        }
    } else {
        for p in 0..n {
            values.push(state.heuristic_value(PlayerId(p)));
        }
    }
    Ok(Value::new(values))
}

/// Planner configuration: algorithm, bandit, per-step iteration budget and
/// planning depth/horizon `k`.
#[derive(Debug, Clone, Copy)]
pub struct PlannerConfig {
    pub algorithm: SearchAlgorithm,
    pub bandit: BanditAlgo,
    pub iterations: u32,
    pub depth: u32,
    pub value_fn: ValueFn,
    pub seed: u64,
}

impl PlannerConfig {
    /// Defaults matching the grid-arena experimental protocol: 100
    /// iterations per step at depth 20.
    pub fn new(algorithm: SearchAlgorithm, bandit: BanditAlgo) -> Self {
        PlannerConfig {
            algorithm,
            bandit,
            iterations: 100,
            depth: 20,
            value_fn: ValueFn::Reward,
            seed: 0,
        }
    }

    pub fn with_budget(mut self, iterations: u32, depth: u32) -> Self {
        self.iterations = iterations;
        self.depth = depth;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Per-visited-state bundle of independent bandits, one per acting player.
pub struct DecoupledNode {
    /// `(player, bandit)` pairs in ascending player order; players that do
    /// not act in this state (dead) have no entry.
    bandits: Vec<(PlayerId, BanditInstance)>,
}

impl DecoupledNode {
    fn new<S: GameState>(state: &S, algo: BanditAlgo) -> Result<Self, GameError> {
        let mut bandits = Vec::new();
        for player in state.players_to_act() {
            let actions = state.legal_actions(player)?;
            bandits.push((player, BanditInstance::new(algo, &actions)));
        }
        Ok(DecoupledNode { bandits })
    }

    /// Each acting player selects independently from its own bandit; the
    /// result is the joint action in acting order.
    fn select<R: Rng>(&self, rng: &mut R) -> Result<JointAction, BanditError> {
        let mut actions = Vec::with_capacity(self.bandits.len());
        for (_, bandit) in &self.bandits {
            actions.push(bandit.select(rng)?);
        }
        Ok(JointAction::new(actions))
    }

    fn update(&mut self, joint: &JointAction, value: &Value) -> Result<(), BanditError> {
        for ((player, bandit), action) in self.bandits.iter_mut().zip(joint.iter()) {
            bandit.update(action, value.get(*player))?;
        }
        Ok(())
    }

    pub fn bandit(&self, player: PlayerId) -> Option<&BanditInstance> {
        self.bandits
            .iter()
            .find(|(p, _)| *p == player)
            .map(|(_, b)| b)
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> + '_ {
        self.bandits.iter().map(|(p, _)| *p)
    }
}

/// Depth-indexed visit counters for one planning call. Index 0 is unused;
/// depth `d` is the state reached after `d` selections from the root.
#[derive(Debug, Clone, Default)]
pub struct PlanStepStats {
    pub visits: Vec<u64>,
    pub revisits: Vec<u64>,
    pub tree_size: usize,
    pub iterations: u32,
}

impl PlanStepStats {
    fn new(depth: u32) -> Self {
        PlanStepStats {
            visits: vec![0; depth as usize + 1],
            revisits: vec![0; depth as usize + 1],
            tree_size: 0,
            iterations: 0,
        }
    }

    fn record(&mut self, depth: u32, revisit: bool) {
        let d = depth as usize;
        if d < self.visits.len() {
            self.visits[d] += 1;
            if revisit {
                self.revisits[d] += 1;
            }
        }
    }

    /// Raw revisit ratio at `depth`, 0 when nothing was visited there.
    pub fn ratio(&self, depth: u32) -> f64 {
        let d = depth as usize;
        if d >= self.visits.len() || self.visits[d] == 0 {
            0.0
        } else {
            self.revisits[d] as f64 / self.visits[d] as f64
        }
    }
}

/// Map from canonical state key to [`DecoupledNode`], shared across the
/// planning steps of an episode. Nodes are never removed.
pub struct SearchTree {
    nodes: HashMap<StateKey, DecoupledNode>,
    root_key: StateKey,
    algo: BanditAlgo,
    /// Cumulative per-depth visit/revisit counters over the tree lifetime.
    visits_at_depth: Vec<u64>,
    revisits_at_depth: Vec<u64>,
}

impl SearchTree {
    /// Builds a tree rooted at `root`, creating the root node.
    pub fn new<S: GameState>(root: &S, algo: BanditAlgo) -> Result<Self, PlanError> {
        if root.is_terminal() {
            return Err(PlanError::TerminalRoot);
        }
        let root_key = root.canonical_key();
        let mut nodes = HashMap::new();
        nodes.insert(root_key, DecoupledNode::new(root, algo)?);
        Ok(SearchTree {
            nodes,
            root_key,
            algo,
            visits_at_depth: Vec::new(),
            revisits_at_depth: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_key(&self) -> StateKey {
        self.root_key
    }

    pub fn contains(&self, key: StateKey) -> bool {
        self.nodes.contains_key(&key)
    }

    pub fn node(&self, key: StateKey) -> Option<&DecoupledNode> {
        self.nodes.get(&key)
    }

    pub fn root_node(&self) -> &DecoupledNode {
        self.nodes
            .get(&self.root_key)
            .expect("root node always present")
    }

    /// Moves the root to the actual game successor, keeping all statistics.
    /// A node is created for the successor if it was never visited.
    pub fn advance_root<S: GameState>(&mut self, new_state: &S) -> Result<(), PlanError> {
        let key = new_state.canonical_key();
        if !self.nodes.contains_key(&key) && !new_state.is_terminal() {
            self.nodes
                .insert(key, DecoupledNode::new(new_state, self.algo)?);
        }
        self.root_key = key;
        Ok(())
    }

    /// Deepest depth at which any already-known state was re-visited, over
    /// the whole lifetime of the tree. `None` before the first revisit.
    pub fn max_revisit_depth(&self) -> Option<u32> {
        self.revisits_at_depth
            .iter()
            .rposition(|&r| r > 0)
            .map(|d| d as u32)
    }

    pub fn lifetime_depth_counts(&self) -> (&[u64], &[u64]) {
        (&self.visits_at_depth, &self.revisits_at_depth)
    }

    fn record(&mut self, stats: &mut PlanStepStats, depth: u32, revisit: bool) {
        stats.record(depth, revisit);
        let d = depth as usize;
        if self.visits_at_depth.len() <= d {
            self.visits_at_depth.resize(d + 1, 0);
            self.revisits_at_depth.resize(d + 1, 0);
        }
        self.visits_at_depth[d] += 1;
        if revisit {
            self.revisits_at_depth[d] += 1;
        }
    }
}

fn random_joint<S: GameState, R: Rng>(state: &S, rng: &mut R) -> Result<JointAction, GameError> {
    let mut actions = Vec::new();
    for player in state.players_to_act() {
        let legal = state.legal_actions(player)?;
        actions.push(legal[rng.gen_range(0..legal.len())]);
    }
    Ok(JointAction::new(actions))
}

fn best_joint(node: &DecoupledNode) -> Result<JointAction, BanditError> {
    let mut actions = Vec::with_capacity(node.bandits.len());
    for (_, bandit) in &node.bandits {
        actions.push(bandit.best_action()?);
    }
    Ok(JointAction::new(actions))
}

/// Monte Carlo search: bandit selection at the root, uniformly random
/// joint actions for `k - 1` further steps (or until terminal), evaluation
/// of the reached state, updates to the root bandits only. Root statistics
/// reset on every call; MCS plans from scratch at each game step.
pub fn plan_mcs<S: GameState, R: Rng>(
    tree: &mut SearchTree,
    root: &S,
    config: &PlannerConfig,
    rng: &mut R,
) -> Result<(JointAction, PlanStepStats), PlanError> {
    if root.is_terminal() {
        return Err(PlanError::TerminalRoot);
    }
    let mut stats = PlanStepStats::new(config.depth);
    // Fresh root statistics every step: MCS carries nothing over.
    let root_key = root.canonical_key();
    tree.root_key = root_key;
    tree.nodes
        .insert(root_key, DecoupledNode::new(root, config.bandit)?);
    for _ in 0..config.iterations {
        let joint = tree
            .nodes
            .get(&root_key)
            .expect("root node inserted above")
            .select(rng)?;
        let mut state = root.step(&joint)?;
        let mut depth = 1;
        tree.record(&mut stats, depth, false);
        while depth < config.depth && !state.is_terminal() {
            let rollout = random_joint(&state, rng)?;
            state = state.step(&rollout)?;
            depth += 1;
            tree.record(&mut stats, depth, false);
        }
        let value = evaluate_state(&state, config.value_fn)?;
        tree.nodes
            .get_mut(&root_key)
            .expect("root node inserted above")
            .update(&joint, &value)?;
        stats.iterations += 1;
    }
    stats.tree_size = tree.len();
    Ok((best_joint(tree.root_node())?, stats))
}

/// MCTS: descend with decoupled bandit selection until a state absent from
/// the tree, add exactly one node for it, optionally continue with a
/// uniformly random rollout to depth `k`, evaluate, and back the value up
/// into every node an action was selected from. The new node receives its
/// first rollout action so it is updated along with its ancestors.
pub fn plan_mcts<S: GameState, R: Rng>(
    tree: &mut SearchTree,
    root: &S,
    config: &PlannerConfig,
    rng: &mut R,
) -> Result<(JointAction, PlanStepStats), PlanError> {
    let rollout = match config.algorithm {
        SearchAlgorithm::Mcts { rollout } => rollout,
        _ => true,
    };
    plan_tree_search(tree, root, config, rng, TreeMode::Mcts { rollout })
}

/// FDTS: bandit selection applied exactly `k` times per iteration,
/// inserting a node for every novel state on the way, breaking early only
/// at terminal states. Every node an action was selected from is updated
/// with the evaluation of the reached state.
pub fn plan_fdts<S: GameState, R: Rng>(
    tree: &mut SearchTree,
    root: &S,
    config: &PlannerConfig,
    rng: &mut R,
) -> Result<(JointAction, PlanStepStats), PlanError> {
    plan_tree_search(tree, root, config, rng, TreeMode::Fdts)
}

#[derive(Clone, Copy)]
enum TreeMode {
    Mcts { rollout: bool },
    Fdts,
}

fn plan_tree_search<S: GameState, R: Rng>(
    tree: &mut SearchTree,
    root: &S,
    config: &PlannerConfig,
    rng: &mut R,
    mode: TreeMode,
) -> Result<(JointAction, PlanStepStats), PlanError> {
    if root.is_terminal() {
        return Err(PlanError::TerminalRoot);
    }
    let root_key = root.canonical_key();
    if tree.root_key != root_key || !tree.contains(root_key) {
        tree.advance_root(root)?;
    }
    let mut stats = PlanStepStats::new(config.depth);

    for _ in 0..config.iterations {
        let mut state = root.clone();
        let mut key = root_key;
        let mut path: Vec<(StateKey, JointAction)> = Vec::with_capacity(config.depth as usize);
        let mut depth = 0u32;

        // Selection (and, for FDTS, fused expansion): descend while nodes
        // exist, stepping the game with decoupled bandit choices.
        'descent: while depth < config.depth && !state.is_terminal() {
            let joint = tree
                .nodes
                .get(&key)
                .expect("path keys always have nodes")
                .select(rng)?;
            state = state.step(&joint)?;
            path.push((key, joint));
            depth += 1;
            let next_key = state.canonical_key();
            let existed = tree.contains(next_key);
            tree.record(&mut stats, depth, existed);
            if state.is_terminal() {
                break 'descent;
            }
            if !existed {
                match mode {
                    TreeMode::Fdts => {
                        // Novel states join the tree and selection simply
                        // continues from their fresh bandits.
                        let node = DecoupledNode::new(&state, config.bandit)?;
                        tree.nodes.insert(next_key, node);
                    }
                    TreeMode::Mcts { rollout } => {
                        // Exactly one new node per iteration, then leave
                        // the tree. The first rollout action below is
                        // attributed to this node.
                        let node = DecoupledNode::new(&state, config.bandit)?;
                        tree.nodes.insert(next_key, node);
                        if rollout {
                            let mut attributed = false;
                            while depth < config.depth && !state.is_terminal() {
                                let joint = random_joint(&state, rng)?;
                                state = state.step(&joint)?;
                                if !attributed {
                                    path.push((next_key, joint.clone()));
                                    attributed = true;
                                }
                                depth += 1;
                                tree.record(&mut stats, depth, tree.contains(state.canonical_key()));
                            }
                        }
                        break 'descent;
                    }
                }
            }
            key = next_key;
        }

        let value = evaluate_state(&state, config.value_fn)?;
        for (node_key, joint) in &path {
            tree.nodes
                .get_mut(node_key)
                .expect("path keys always have nodes")
                .update(joint, &value)?;
        }
        stats.iterations += 1;
    }
    stats.tree_size = tree.len();
    Ok((best_joint(tree.root_node())?, stats))
}

/// Owns a tree, a config, and an RNG stream for one planning seat across
/// an episode.
pub struct Planner {
    config: PlannerConfig,
    tree: Option<SearchTree>,
    rng: ChaCha8Rng,
    last_stats: Option<PlanStepStats>,
}

impl Planner {
    pub fn new(config: PlannerConfig) -> Self {
        Planner {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            tree: None,
            last_stats: None,
        }
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    /// Runs the configured search from `state` and returns the planned
    /// joint action (one best action per acting player).
    pub fn plan<S: GameState>(&mut self, state: &S) -> Result<JointAction, PlanError> {
        if self.tree.is_none() {
            self.tree = Some(SearchTree::new(state, self.config.bandit)?);
        }
        let tree = self.tree.as_mut().expect("tree initialized above");
        let (joint, stats) = match self.config.algorithm {
            SearchAlgorithm::Mcs => plan_mcs(tree, state, &self.config, &mut self.rng)?,
            SearchAlgorithm::Mcts { .. } => plan_mcts(tree, state, &self.config, &mut self.rng)?,
            SearchAlgorithm::Fdts => plan_fdts(tree, state, &self.config, &mut self.rng)?,
        };
        self.last_stats = Some(stats);
        Ok(joint)
    }

    /// Moves the tree root to the actual game successor.
    pub fn advance<S: GameState>(&mut self, next: &S) -> Result<(), PlanError> {
        if let Some(tree) = self.tree.as_mut() {
            if !next.is_terminal() {
                tree.advance_root(next)?;
            }
        }
        Ok(())
    }

    pub fn tree(&self) -> Option<&SearchTree> {
        self.tree.as_ref()
    }

    pub fn last_stats(&self) -> Option<&PlanStepStats> {
        self.last_stats.as_ref()
    }

    /// Drops the search tree, e.g. between episodes.
    pub fn reset(&mut self) {
        self.tree = None;
        self.last_stats = None;
    }
}
