//! GridArena: a Pommerman-style free-for-all on an 11x11 board.
//!
//! Two to four agents spawn in the corners, lay bombs to destroy wooden
//! walls and each other, and collect power-ups hidden inside the wood. All
//! moves are simultaneous. The last player standing wins; everyone who
//! reaches the step limit alive draws.
//!
//! Rules live in [`rules`], board generation in [`gen`], the scripted
//! baseline opponent in [`agent`], observation planes in [`features`] and
//! the replay text format in [`replay`].

pub mod agent;
pub mod features;
pub mod gen;
pub mod replay;
pub mod rules;

use crate::game::{fnv1a64, Action, GameError, GameState, JointAction, PlayerId};
use std::sync::{Arc, OnceLock};

pub use agent::rule_based_agent;
pub use features::{featurize, GridObservation, FEATURE_PLANES};
pub use gen::generate_board;
pub use replay::{replay_states, Replay, ReplayError};
pub use rules::masked_actions;

/// Move/act vocabulary. Actions are dense ids `0..=5`.
pub const STOP: Action = Action(0);
pub const UP: Action = Action(1);
pub const DOWN: Action = Action(2);
pub const LEFT: Action = Action(3);
pub const RIGHT: Action = Action(4);
pub const BOMB: Action = Action(5);

pub const NUM_ACTIONS: usize = 6;

/// Unit displacement of a movement action; `None` for Stop and Bomb.
pub fn action_delta(action: Action) -> Option<(i32, i32)> {
    match action {
        UP => Some((0, -1)),
        DOWN => Some((0, 1)),
        LEFT => Some((-1, 0)),
        RIGHT => Some((1, 0)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Tile {
    Passage = 0,
    Rigid = 1,
    Wood = 2,
}

/// Power-up kinds, stored both hidden inside wood and revealed on tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Item {
    None = 0,
    ExtraBomb = 1,
    BlastRange = 2,
}

impl Item {
    fn from_u8(v: u8) -> Item {
        match v {
            1 => Item::ExtraBomb,
            2 => Item::BlastRange,
            _ => Item::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bomb {
    pub x: u8,
    pub y: u8,
    pub owner: u8,
    /// Steps until detonation; the bomb explodes during the step in which
    /// this would reach zero.
    pub fuse: u8,
    pub strength: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentState {
    pub x: u8,
    pub y: u8,
    pub alive: bool,
    pub bomb_capacity: u8,
    pub blast_strength: u8,
    pub bombs_in_play: u8,
}

/// Static rule parameters. Everything a board and its dynamics depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub players: usize,
    pub bomb_fuse: u8,
    pub flame_lifetime: u8,
    pub initial_blast: u8,
    pub initial_capacity: u8,
    /// Probability that a generated (non-spawn) tile orbit is rigid.
    pub rigid_density: f64,
    /// Probability that a generated (non-spawn) tile orbit is wood.
    pub wood_density: f64,
    /// Fraction of wooden walls hiding a power-up.
    pub powerup_ratio: f64,
    pub step_limit: u32,
}

impl GridConfig {
    /// Full-length four-player game.
    pub fn standard() -> Arc<Self> {
        Arc::new(GridConfig {
            width: 11,
            height: 11,
            players: 4,
            bomb_fuse: 9,
            flame_lifetime: 2,
            initial_blast: 2,
            initial_capacity: 1,
            rigid_density: 0.18,
            wood_density: 0.32,
            powerup_ratio: 0.5,
            step_limit: 800,
        })
    }

    /// Four players with a short step limit, for quick experiments and CI.
    pub fn fast() -> Arc<Self> {
        let mut cfg = (*GridConfig::standard()).clone();
        cfg.step_limit = 200;
        Arc::new(cfg)
    }

    /// Head-to-head variant: two players in diagonally opposite corners.
    pub fn two_player() -> Arc<Self> {
        let mut cfg = (*GridConfig::standard()).clone();
        cfg.players = 2;
        Arc::new(cfg)
    }

    pub fn two_player_fast() -> Arc<Self> {
        let mut cfg = (*GridConfig::standard()).clone();
        cfg.players = 2;
        cfg.step_limit = 200;
        Arc::new(cfg)
    }

    /// Cramped two-player arena. On the full-size board two competent
    /// players can evade each other indefinitely and almost every game is
    /// a draw; the tight board and stronger starting blast force
    /// engagements and produce enough decisive games for head-to-head
    /// comparisons.
    pub fn duel() -> Arc<Self> {
        let mut cfg = (*GridConfig::standard()).clone();
        cfg.players = 2;
        cfg.width = 7;
        cfg.height = 7;
        cfg.wood_density = 0.45;
        cfg.initial_blast = 3;
        cfg.step_limit = 300;
        Arc::new(cfg)
    }

    /// Named profiles used by config files and replays.
    pub fn by_profile(name: &str) -> Option<Arc<Self>> {
        match name {
            "standard" => Some(GridConfig::standard()),
            "fast" => Some(GridConfig::fast()),
            "2p" => Some(GridConfig::two_player()),
            "2p-fast" => Some(GridConfig::two_player_fast()),
            "duel" => Some(GridConfig::duel()),
            _ => None,
        }
    }

    pub fn profile_name(&self) -> &'static str {
        if self.width == 7 && self.players == 2 {
            return "duel";
        }
        match (self.players, self.step_limit) {
            (2, 200) => "2p-fast",
            (2, _) => "2p",
            (_, 200) => "fast",
            _ => "standard",
        }
    }

    /// Spawn corners in player order: clockwise from the top-left for four
    /// players, diagonally opposite for two.
    pub fn spawn_corners(&self) -> Vec<(usize, usize)> {
        let (w, h) = (self.width - 1, self.height - 1);
        match self.players {
            2 => vec![(0, 0), (w, h)],
            _ => vec![(0, 0), (w, 0), (w, h), (0, h)],
        }
    }

    fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(64);
        for v in [
            self.width as u64,
            self.height as u64,
            self.players as u64,
            self.bomb_fuse as u64,
            self.flame_lifetime as u64,
            self.initial_blast as u64,
            self.initial_capacity as u64,
            self.step_limit as u64,
        ] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.rigid_density, self.wood_density, self.powerup_ratio] {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        fnv1a64(&bytes)
    }
}

/// Full (oracle-visible) game state, including power-ups still hidden
/// inside wooden walls. Immutable: stepping returns a fresh state.
#[derive(Debug)]
pub struct GridState {
    pub(crate) config: Arc<GridConfig>,
    /// Tile types, row-major `y * width + x`.
    pub(crate) tiles: Box<[u8]>,
    /// Power-ups hidden inside wood, aligned with `tiles`.
    pub(crate) hidden: Box<[u8]>,
    /// Revealed, collectable power-ups on the floor.
    pub(crate) items: Box<[u8]>,
    /// Remaining flame ticks per tile, 0 = no flame.
    pub(crate) flames: Box<[u8]>,
    pub(crate) bombs: Vec<Bomb>,
    pub(crate) agents: Vec<AgentState>,
    pub(crate) step: u32,
    /// Lazily computed "lethal next step" tile set (see
    /// [`rules::danger_next_tick`]); derived data, never serialized.
    pub(crate) danger: OnceLock<Box<[bool]>>,
}

impl Clone for GridState {
    fn clone(&self) -> Self {
        let danger = OnceLock::new();
        if let Some(d) = self.danger.get() {
            let _ = danger.set(d.clone());
        }
        GridState {
            config: Arc::clone(&self.config),
            tiles: self.tiles.clone(),
            hidden: self.hidden.clone(),
            items: self.items.clone(),
            flames: self.flames.clone(),
            bombs: self.bombs.clone(),
            agents: self.agents.clone(),
            step: self.step,
            danger,
        }
    }
}

impl GridState {
    pub fn config(&self) -> &Arc<GridConfig> {
        &self.config
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn height(&self) -> usize {
        self.config.height
    }

    #[inline]
    pub(crate) fn idx(&self, x: usize, y: usize) -> usize {
        y * self.config.width + x
    }

    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.config.width && (y as usize) < self.config.height
    }

    pub fn tile(&self, x: usize, y: usize) -> Tile {
        match self.tiles[self.idx(x, y)] {
            1 => Tile::Rigid,
            2 => Tile::Wood,
            _ => Tile::Passage,
        }
    }

    pub fn item(&self, x: usize, y: usize) -> Item {
        Item::from_u8(self.items[self.idx(x, y)])
    }

    pub fn flame_ticks(&self, x: usize, y: usize) -> u8 {
        self.flames[self.idx(x, y)]
    }

    pub fn bombs(&self) -> &[Bomb] {
        &self.bombs
    }

    pub fn bomb_at(&self, x: usize, y: usize) -> Option<&Bomb> {
        self.bombs
            .iter()
            .find(|b| b.x as usize == x && b.y as usize == y)
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn agent(&self, player: PlayerId) -> Result<&AgentState, GameError> {
        self.agents
            .get(player.0)
            .ok_or(GameError::NoSuchPlayer(player))
    }

    pub fn step_count(&self) -> u32 {
        self.step
    }

    pub fn alive_count(&self) -> usize {
        self.agents.iter().filter(|a| a.alive).count()
    }

    pub fn agent_at(&self, x: usize, y: usize) -> Option<PlayerId> {
        self.agents
            .iter()
            .position(|a| a.alive && a.x as usize == x && a.y as usize == y)
            .map(PlayerId)
    }

    /// Legal-and-not-suicidal action set; see [`rules::masked_actions`].
    pub fn masked_actions(&self, player: PlayerId) -> Result<Vec<Action>, GameError> {
        rules::masked_actions(self, player)
    }

    /// Tiles that will burn during the next step: every current flame plus
    /// the blast footprint of every bomb due to detonate (with chains).
    pub fn danger_next_tick(&self) -> &[bool] {
        self.danger.get_or_init(|| rules::danger_next_tick(self))
    }
}

impl GameState for GridState {
    type Observation = features::GridObservation;

    fn num_players(&self) -> usize {
        self.config.players
    }

    fn acts(&self, player: PlayerId) -> bool {
        !self.is_terminal()
            && self
                .agents
                .get(player.0)
                .map(|a| a.alive)
                .unwrap_or(false)
    }

    fn legal_actions(&self, player: PlayerId) -> Result<Vec<Action>, GameError> {
        if self.is_terminal() {
            return Err(GameError::TerminalState);
        }
        rules::masked_actions(self, player)
    }

    fn is_terminal(&self) -> bool {
        self.alive_count() <= 1 || self.step >= self.config.step_limit
    }

    fn step(&self, joint: &JointAction) -> Result<Self, GameError> {
        rules::resolve_step(self, joint)
    }

    fn terminal_reward(&self, player: PlayerId) -> Result<i8, GameError> {
        if !self.is_terminal() {
            return Err(GameError::NotTerminal);
        }
        let agent = self.agent(player)?;
        if !agent.alive {
            Ok(-1)
        } else if self.alive_count() == 1 {
            Ok(1)
        } else {
            // Step limit reached with several players standing: a draw.
            Ok(0)
        }
    }

    fn heuristic_value(&self, player: PlayerId) -> f64 {
        match self.agents.get(player.0) {
            Some(a) if a.alive => 0.0,
            _ => -1.0,
        }
    }

    fn canonical_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(b"GA1");
        out.extend_from_slice(&self.config.fingerprint().to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.tiles);
        out.extend_from_slice(&self.hidden);
        out.extend_from_slice(&self.items);
        out.extend_from_slice(&self.flames);
        // Bombs in board order so the key ignores list bookkeeping.
        let mut bombs = self.bombs.clone();
        bombs.sort_by_key(|b| (b.y, b.x));
        out.push(bombs.len() as u8);
        for b in &bombs {
            out.extend_from_slice(&[b.x, b.y, b.owner, b.fuse, b.strength]);
        }
        for a in &self.agents {
            out.extend_from_slice(&[
                a.x,
                a.y,
                a.alive as u8,
                a.bomb_capacity,
                a.blast_strength,
                a.bombs_in_play,
            ]);
        }
    }

    fn observation(&self, player: PlayerId) -> Self::Observation {
        features::featurize(self, player)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_round_trip_by_name() {
        for name in ["standard", "fast", "2p", "2p-fast", "duel"] {
            let cfg = GridConfig::by_profile(name).unwrap();
            assert_eq!(cfg.profile_name(), name);
        }
        assert!(GridConfig::by_profile("huge").is_none());
    }

    #[test]
    fn spawn_corners_match_player_count() {
        assert_eq!(
            GridConfig::standard().spawn_corners(),
            vec![(0, 0), (10, 0), (10, 10), (0, 10)]
        );
        assert_eq!(
            GridConfig::two_player().spawn_corners(),
            vec![(0, 0), (10, 10)]
        );
    }

    #[test]
    fn terminal_rewards_cover_win_loss_and_draw() {
        let mut state = testutil::open_board(GridConfig::fast());
        assert!(!state.is_terminal());

        // Sole survivor wins, the dead lose.
        testutil::kill_agent(&mut state, 1);
        testutil::kill_agent(&mut state, 2);
        testutil::kill_agent(&mut state, 3);
        assert!(state.is_terminal());
        assert_eq!(state.terminal_reward(PlayerId(0)).unwrap(), 1);
        assert_eq!(state.terminal_reward(PlayerId(1)).unwrap(), -1);

        // Step limit with several players alive: survivors draw.
        let mut state = testutil::open_board(GridConfig::fast());
        testutil::kill_agent(&mut state, 3);
        state.step = state.config.step_limit;
        assert!(state.is_terminal());
        assert_eq!(state.terminal_reward(PlayerId(0)).unwrap(), 0);
        assert_eq!(state.terminal_reward(PlayerId(3)).unwrap(), -1);
    }

    #[test]
    fn reward_query_requires_a_terminal_state() {
        let state = testutil::open_board(GridConfig::fast());
        assert_eq!(
            state.terminal_reward(PlayerId(0)),
            Err(GameError::NotTerminal)
        );
    }

    #[test]
    fn heuristic_value_marks_dead_players() {
        let mut state = testutil::open_board(GridConfig::fast());
        assert_eq!(state.heuristic_value(PlayerId(2)), 0.0);
        testutil::kill_agent(&mut state, 2);
        assert_eq!(state.heuristic_value(PlayerId(2)), -1.0);
    }

    #[test]
    fn players_to_act_skips_the_dead() {
        let mut state = testutil::open_board(GridConfig::fast());
        testutil::kill_agent(&mut state, 1);
        assert_eq!(
            state.players_to_act(),
            vec![PlayerId(0), PlayerId(2), PlayerId(3)]
        );
    }

    #[test]
    fn canonical_key_tracks_every_state_component() {
        let base = testutil::open_board(GridConfig::fast());
        let key = base.canonical_key();
        assert_eq!(key, base.clone().canonical_key());

        let mut moved = base.clone();
        testutil::place_agent(&mut moved, 0, 1, 0);
        assert_ne!(key, moved.canonical_key());

        let mut bombed = base.clone();
        testutil::place_bomb(&mut bombed, 5, 5, 0, 9);
        assert_ne!(key, bombed.canonical_key());

        let mut burnt = base.clone();
        testutil::place_flame(&mut burnt, 5, 5, 2);
        assert_ne!(key, burnt.canonical_key());

        let mut hid = base.clone();
        testutil::set_tile(&mut hid, 5, 5, Tile::Wood);
        let wood_key = hid.canonical_key();
        testutil::set_hidden(&mut hid, 5, 5, Item::ExtraBomb);
        assert_ne!(wood_key, hid.canonical_key());

        let mut stepped = base.clone();
        stepped.step += 1;
        assert_ne!(key, stepped.canonical_key());
    }

    #[test]
    fn bomb_order_does_not_change_the_key() {
        let mut a = testutil::open_board(GridConfig::fast());
        testutil::place_bomb(&mut a, 3, 3, 0, 5);
        testutil::place_bomb(&mut a, 7, 7, 1, 6);
        let mut b = testutil::open_board(GridConfig::fast());
        testutil::place_bomb(&mut b, 7, 7, 1, 6);
        testutil::place_bomb(&mut b, 3, 3, 0, 5);
        assert_eq!(a.canonical_key(), b.canonical_key());
    }
}
