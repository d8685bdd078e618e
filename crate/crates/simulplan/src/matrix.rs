//! One-shot and repeated simultaneous matrix games with exact brute-force
//! value oracles. These environments are small enough to enumerate, which
//! makes them the ground truth for verifying planners.

use crate::game::{fnv1a64, Action, GameError, GameState, JointAction, PlayerId};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("payoff table must cover every joint action ({expected} entries, got {got})")]
    PayoffShape { expected: usize, got: usize },
    #[error("payoffs must lie in {{-1, 0, +1}}")]
    PayoffRange,
    #[error("every player needs at least one action")]
    EmptyActionSet,
    #[error("horizon must be >= 1")]
    BadHorizon,
    #[error("opponent policy for player {player} must be a distribution over {arms} actions")]
    BadPolicy { player: usize, arms: usize },
    #[error("need one policy per player ({expected}, got {got})")]
    PolicyCount { expected: usize, got: usize },
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
}

/// A simultaneous matrix game: a ternary payoff per player for every joint
/// action, played once or repeated for a fixed horizon. Repeated games
/// accumulate payoffs and score the *sign* of the cumulative payoff as the
/// ternary outcome, keeping rewards in `{-1, 0, +1}`.
#[derive(Debug)]
pub struct MatrixGame {
    action_counts: Vec<usize>,
    /// Row-major over joint actions (player 0 slowest); one ternary payoff
    /// per player per entry.
    payoffs: Vec<Vec<i8>>,
    horizon: u32,
    /// Fingerprint folded into state keys so states of different games
    /// never collide.
    fingerprint: u64,
}

impl MatrixGame {
    pub fn new(
        action_counts: Vec<usize>,
        payoffs: Vec<Vec<i8>>,
        horizon: u32,
    ) -> Result<Arc<Self>, MatrixError> {
        if action_counts.iter().any(|&n| n == 0) || action_counts.is_empty() {
            return Err(MatrixError::EmptyActionSet);
        }
        if horizon == 0 {
            return Err(MatrixError::BadHorizon);
        }
        let expected: usize = action_counts.iter().product();
        if payoffs.len() != expected {
            return Err(MatrixError::PayoffShape {
                expected,
                got: payoffs.len(),
            });
        }
        for entry in &payoffs {
            if entry.len() != action_counts.len() {
                return Err(MatrixError::PayoffShape {
                    expected,
                    got: payoffs.len(),
                });
            }
            if entry.iter().any(|&p| !(-1..=1).contains(&p)) {
                return Err(MatrixError::PayoffRange);
            }
        }
        let mut bytes = Vec::new();
        for &n in &action_counts {
            bytes.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for entry in &payoffs {
            bytes.extend(entry.iter().map(|&p| p as u8));
        }
        bytes.extend_from_slice(&horizon.to_le_bytes());
        let fingerprint = fnv1a64(&bytes);
        Ok(Arc::new(MatrixGame {
            action_counts,
            payoffs,
            horizon,
            fingerprint,
        }))
    }

    /// Two-player zero-sum game from player 0's payoff matrix
    /// (`rows[i][j]` = payoff to player 0 when p0 plays `i`, p1 plays `j`).
    pub fn zero_sum(rows: Vec<Vec<i8>>, horizon: u32) -> Result<Arc<Self>, MatrixError> {
        let n0 = rows.len();
        let n1 = rows.first().map_or(0, |r| r.len());
        let mut payoffs = Vec::with_capacity(n0 * n1);
        for row in &rows {
            if row.len() != n1 {
                return Err(MatrixError::PayoffShape {
                    expected: n0 * n1,
                    got: payoffs.len(),
                });
            }
            for &p in row {
                payoffs.push(vec![p, -p]);
            }
        }
        MatrixGame::new(vec![n0, n1], payoffs, horizon)
    }

    /// Rock-paper-scissors: actions 0=Rock, 1=Paper, 2=Scissors.
    pub fn rock_paper_scissors() -> Arc<Self> {
        MatrixGame::zero_sum(
            vec![vec![0, -1, 1], vec![1, 0, -1], vec![-1, 1, 0]],
            1,
        )
        .expect("static game definition is valid")
    }

    /// Loads a two-player zero-sum game from a TOML file:
    ///
    /// ```toml
    /// horizon = 1
    /// payoffs = [[0, -1, 1], [1, 0, -1], [-1, 1, 0]]
    /// ```
    pub fn load(path: &Path) -> Result<Arc<Self>, MatrixError> {
        #[derive(Deserialize)]
        struct FileGame {
            #[serde(default = "default_horizon")]
            horizon: u32,
            payoffs: Vec<Vec<i8>>,
        }
        fn default_horizon() -> u32 {
            1
        }
        let text = std::fs::read_to_string(path).map_err(|source| MatrixError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let parsed: FileGame = toml::from_str(&text).map_err(|source| MatrixError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        MatrixGame::zero_sum(parsed.payoffs, parsed.horizon)
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn num_actions(&self, player: PlayerId) -> usize {
        self.action_counts[player.0]
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    fn joint_index(&self, joint: &JointAction) -> usize {
        let mut idx = 0;
        for (player, action) in joint.iter().enumerate() {
            idx = idx * self.action_counts[player] + action.0 as usize;
        }
        idx
    }

    pub fn payoff(&self, joint: &JointAction) -> &[i8] {
        &self.payoffs[self.joint_index(joint)]
    }

    pub fn initial_state(self: &Arc<Self>) -> MatrixState {
        MatrixState {
            game: Arc::clone(self),
            steps_played: 0,
            cumulative: vec![0; self.num_players()],
        }
    }

    /// Exact per-action values `Q_i(s, a_i)` for `player`, by enumerating
    /// every joint action of the one-shot game weighted by the opponents'
    /// mixed policies. `opponent_policy[j]` is the distribution over player
    /// `j`'s actions; the entry for `player` itself is ignored.
    pub fn brute_force_q(
        &self,
        player: PlayerId,
        opponent_policy: &[Vec<f64>],
    ) -> Result<Vec<f64>, MatrixError> {
        if opponent_policy.len() != self.num_players() {
            return Err(MatrixError::PolicyCount {
                expected: self.num_players(),
                got: opponent_policy.len(),
            });
        }
        for (j, policy) in opponent_policy.iter().enumerate() {
            if j == player.0 {
                continue;
            }
            let arms = self.action_counts[j];
            let total: f64 = policy.iter().sum();
            let ok = policy.len() == arms
                && policy.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p))
                && (total - 1.0).abs() <= 1e-9;
            if !ok {
                return Err(MatrixError::BadPolicy { player: j, arms });
            }
        }

        let mut q = vec![0.0; self.action_counts[player.0]];
        let mut joint = vec![0usize; self.num_players()];
        loop {
            // Probability of the opponents' part of this joint action.
            let mut prob = 1.0;
            for (j, &a) in joint.iter().enumerate() {
                if j != player.0 {
                    prob *= opponent_policy[j][a];
                }
            }
            if prob > 0.0 {
                let actions = JointAction::new(joint.iter().map(|&a| Action(a as u8)).collect());
                let payoff = self.payoff(&actions)[player.0] as f64;
                q[joint[player.0]] += prob * payoff;
            }
            // Odometer increment over the joint action space.
            let mut pos = self.num_players();
            loop {
                if pos == 0 {
                    return Ok(q);
                }
                pos -= 1;
                joint[pos] += 1;
                if joint[pos] < self.action_counts[pos] {
                    break;
                }
                joint[pos] = 0;
            }
        }
    }
}

/// State of a (possibly repeated) matrix game.
#[derive(Debug, Clone)]
pub struct MatrixState {
    game: Arc<MatrixGame>,
    steps_played: u32,
    cumulative: Vec<i32>,
}

impl MatrixState {
    pub fn game(&self) -> &Arc<MatrixGame> {
        &self.game
    }

    pub fn cumulative(&self) -> &[i32] {
        &self.cumulative
    }
}

impl GameState for MatrixState {
    // Matrix games are perfect information; the observation is the state.
    type Observation = MatrixState;

    fn num_players(&self) -> usize {
        self.game.num_players()
    }

    fn acts(&self, player: PlayerId) -> bool {
        !self.is_terminal() && player.0 < self.num_players()
    }

    fn legal_actions(&self, player: PlayerId) -> Result<Vec<Action>, GameError> {
        if self.is_terminal() {
            return Err(GameError::TerminalState);
        }
        if player.0 >= self.num_players() {
            return Err(GameError::NoSuchPlayer(player));
        }
        Ok((0..self.game.num_actions(player) as u8).map(Action).collect())
    }

    fn is_terminal(&self) -> bool {
        self.steps_played >= self.game.horizon
    }

    fn step(&self, joint: &JointAction) -> Result<Self, GameError> {
        if self.is_terminal() {
            return Err(GameError::TerminalState);
        }
        if joint.len() != self.num_players() {
            return Err(GameError::JointArity {
                expected: self.num_players(),
                got: joint.len(),
            });
        }
        for (player, action) in joint.iter().enumerate() {
            if (action.0 as usize) >= self.game.action_counts[player] {
                return Err(GameError::IllegalAction {
                    player: PlayerId(player),
                    action,
                });
            }
        }
        let payoff = self.game.payoff(joint);
        let mut next = self.clone();
        next.steps_played += 1;
        for (c, &p) in next.cumulative.iter_mut().zip(payoff) {
            *c += p as i32;
        }
        Ok(next)
    }

    fn terminal_reward(&self, player: PlayerId) -> Result<i8, GameError> {
        if !self.is_terminal() {
            return Err(GameError::NotTerminal);
        }
        if player.0 >= self.num_players() {
            return Err(GameError::NoSuchPlayer(player));
        }
        Ok(self.cumulative[player.0].signum() as i8)
    }

    fn heuristic_value(&self, player: PlayerId) -> f64 {
        self.cumulative[player.0].signum() as f64
    }

    fn canonical_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.game.fingerprint.to_le_bytes());
        out.extend_from_slice(&self.steps_played.to_le_bytes());
        for &c in &self.cumulative {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }

    fn observation(&self, _player: PlayerId) -> MatrixState {
        self.clone()
    }
}
