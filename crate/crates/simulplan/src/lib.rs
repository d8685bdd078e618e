//! Planning and imitation learning for simultaneous-move multi-player games.
//!
//! The library provides:
//!
//! - a [`game`] contract for partially-observable stochastic games with
//!   simultaneous moves and ternary terminal rewards,
//! - two environments: brute-force-verifiable [`matrix`] games and a
//!   Bomberman-style [`grid`] arena with suicide masking,
//! - decoupled multi-armed [`bandits`] (UCB1, Beta-Bernoulli Thompson
//!   sampling, uniform random),
//! - three self-play [`planners`] over a state-keyed search tree: Monte
//!   Carlo search, MCTS, and fixed-depth tree search,
//! - a DAgger / behavioral-cloning [`follower`] policy trained to imitate
//!   the full-state oracle planner from partial observations,
//! - a tournament [`harness`] with win/draw/loss confidence intervals and
//!   search-tree revisit instrumentation.

pub mod bandits;
pub mod follower;
pub mod game;
pub mod grid;
pub mod harness;
pub mod matrix;
pub mod planners;

pub use bandits::{ArmStats, BanditAlgo, BanditError, BanditInstance};
pub use game::{Action, GameError, GameState, JointAction, PlayerId, StateKey, Value};
pub use grid::{GridConfig, GridObservation, GridState};
pub use matrix::{MatrixGame, MatrixState};
pub use planners::{Planner, PlannerConfig, SearchAlgorithm, SearchTree, ValueFn};
