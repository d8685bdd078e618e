//! The partially-observable stochastic game contract shared by all
//! environments and consumed by every planner.
//!
//! Games are simultaneous-move: each step every acting player commits one
//! action and the environment applies the joint action atomically. States
//! are immutable; [`GameState::step`] returns a fresh successor so planners
//! can branch freely. Terminal rewards are ternary: win `+1`, draw `0`,
//! loss `-1`.

use thiserror::Error;

/// Index of a player seat, stable across an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlayerId(pub usize);

impl std::fmt::Display for PlayerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// An environment-defined action id. Meaning is local to the environment;
/// planners and bandits treat actions as opaque tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(pub u8);

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One action per acting player, ordered like [`GameState::players_to_act`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointAction(pub Vec<Action>);

impl JointAction {
    pub fn new(actions: Vec<Action>) -> Self {
        JointAction(actions)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Action in slot `idx` (acting-player order, not player id).
    pub fn get(&self, idx: usize) -> Action {
        self.0[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        self.0.iter().copied()
    }
}

/// Per-player value estimates, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Value(Vec<f64>);

impl Value {
    /// Wraps per-player values. Debug builds assert the `[-1, 1]` range.
    pub fn new(per_player: Vec<f64>) -> Self {
        debug_assert!(
            per_player.iter().all(|v| (-1.0..=1.0).contains(v)),
            "value outside [-1, 1]: {per_player:?}"
        );
        Value(per_player)
    }

    pub fn get(&self, player: PlayerId) -> f64 {
        self.0[player.0]
    }

    pub fn per_player(&self) -> &[f64] {
        &self.0
    }
}

/// 64-bit canonical state key. Equal keys identify behaviorally identical
/// states (same legal actions, same transition behavior).
pub type StateKey = u64;

/// Contract violations raised by environments.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GameError {
    #[error("operation requires a non-terminal state")]
    TerminalState,
    #[error("operation requires a terminal state")]
    NotTerminal,
    #[error("illegal action {action} for player {player}")]
    IllegalAction { player: PlayerId, action: Action },
    #[error("player {0} is dead")]
    DeadPlayer(PlayerId),
    #[error("joint action has {got} entries, {expected} players must act")]
    JointArity { expected: usize, got: usize },
    #[error("player index {0} out of range")]
    NoSuchPlayer(PlayerId),
}

/// Full environment state of a simultaneous-move game.
///
/// Implementations must be deterministic: stepping the same state with the
/// same joint action always yields the same successor. Values are immutable
/// after construction and safe to move between threads.
pub trait GameState: Clone + Send {
    /// Per-player observation exposed to imitation learners. Environments
    /// without hidden information may return the state itself.
    type Observation;

    fn num_players(&self) -> usize;

    /// Whether `player` must act in the current state (alive, in range).
    fn acts(&self, player: PlayerId) -> bool;

    /// Acting players in ascending id order.
    fn players_to_act(&self) -> Vec<PlayerId> {
        (0..self.num_players())
            .map(PlayerId)
            .filter(|&p| self.acts(p))
            .collect()
    }

    /// Legal action set for an acting player. Errors on terminal states and
    /// on players that do not act.
    fn legal_actions(&self, player: PlayerId) -> Result<Vec<Action>, GameError>;

    fn is_terminal(&self) -> bool;

    /// Applies one action per acting player and returns the successor.
    /// Never mutates `self`.
    fn step(&self, joint: &JointAction) -> Result<Self, GameError>;

    /// Ternary reward in `{-1, 0, +1}`. Errors on non-terminal states.
    fn terminal_reward(&self, player: PlayerId) -> Result<i8, GameError>;

    /// Heuristic per-player value of a non-terminal state, used when a
    /// planner evaluates before reaching a terminal. The convention mirrors
    /// the reward function: dead/losing `-1`, sole leader `+1`, `0` else.
    fn heuristic_value(&self, player: PlayerId) -> f64;

    /// Appends the canonical byte serialization of the state. Two states
    /// serialize identically iff they are behaviorally identical.
    fn canonical_bytes(&self, out: &mut Vec<u8>);

    /// 64-bit hash of the canonical serialization.
    fn canonical_key(&self) -> StateKey {
        let mut buf = Vec::with_capacity(192);
        self.canonical_bytes(&mut buf);
        fnv1a64(&buf)
    }

    fn observation(&self, player: PlayerId) -> Self::Observation;
}

/// FNV-1a, 64-bit. Stable across platforms and builds, which keeps state
/// keys (and everything seeded from them) reproducible.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Splits one master seed into independent per-stream seeds (SplitMix64).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_is_stable() {
        // Reference vectors for the 64-bit FNV-1a parameters.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn derive_seed_separates_streams() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        let c = derive_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, 0));
    }

    #[test]
    fn value_accessors() {
        let v = Value::new(vec![0.0, -1.0, 1.0]);
        assert_eq!(v.get(PlayerId(1)), -1.0);
        assert_eq!(v.per_player().len(), 3);
    }
}
