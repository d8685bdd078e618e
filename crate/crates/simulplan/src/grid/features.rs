//! Observation planes for learned policies.
//!
//! A player sees the board as 14 stacked planes of board-sized floats in
//! `[0, 1]`. The view hides exactly the hidden information: power-ups
//! still inside wooden walls and the other players' collected upgrades.
//!
//! Plane layout:
//!
//! | idx | contents                                             |
//! |-----|------------------------------------------------------|
//! | 0   | rigid walls                                          |
//! | 1   | wooden walls                                         |
//! | 2   | bombs                                                |
//! | 3   | flames                                               |
//! | 4   | extra-bomb power-ups lying on the floor              |
//! | 5   | blast-range power-ups lying on the floor             |
//! | 6   | the observer (when alive)                            |
//! | 7-9 | the other agents in ascending id (when alive)        |
//! | 10  | blast footprint of every live bomb                   |
//! | 11  | bomb lifetime: fuse / max fuse at each bomb tile     |
//! | 12  | observer bomb capacity / 10, constant                |
//! | 13  | observer blast strength / 10, constant               |

use super::rules::blast_footprint;
use super::{GridState, Item, Tile};
use crate::game::PlayerId;

pub const FEATURE_PLANES: usize = 14;

/// A stack of `FEATURE_PLANES` normalized planes, row-major within each
/// plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GridObservation {
    pub width: usize,
    pub height: usize,
    planes: Vec<f32>,
}

impl GridObservation {
    pub fn plane(&self, idx: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.planes[idx * n..(idx + 1) * n]
    }

    pub fn value(&self, plane: usize, x: usize, y: usize) -> f32 {
        self.plane(plane)[y * self.width + x]
    }

    /// Flattened planes as policy-network input.
    pub fn as_input(&self) -> Vec<f64> {
        self.planes.iter().map(|&v| v as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }
}

/// Renders `player`'s view of the state. Callable for dead observers too
/// (their self plane is empty), so terminal transitions can be labeled.
pub fn featurize(state: &GridState, player: PlayerId) -> GridObservation {
    let (w, h) = (state.width(), state.height());
    let n = w * h;
    let mut planes = vec![0f32; FEATURE_PLANES * n];
    let mut set = |plane: usize, i: usize, v: f32| planes[plane * n + i] = v;

    for i in 0..n {
        match state.tiles[i] {
            t if t == Tile::Rigid as u8 => set(0, i, 1.0),
            t if t == Tile::Wood as u8 => set(1, i, 1.0),
            _ => {}
        }
        if state.flames[i] > 0 {
            set(3, i, 1.0);
        }
        match state.items[i] {
            v if v == Item::ExtraBomb as u8 => set(4, i, 1.0),
            v if v == Item::BlastRange as u8 => set(5, i, 1.0),
            _ => {}
        }
    }

    let observer = &state.agents()[player.0];
    if observer.alive {
        set(6, (observer.y as usize) * w + observer.x as usize, 1.0);
    }
    let mut enemy_plane = 7;
    for (id, agent) in state.agents().iter().enumerate() {
        if id == player.0 {
            continue;
        }
        if agent.alive {
            set(
                enemy_plane,
                (agent.y as usize) * w + agent.x as usize,
                1.0,
            );
        }
        enemy_plane += 1;
    }

    let mut footprint = vec![false; n];
    for bomb in state.bombs() {
        set(2, (bomb.y as usize) * w + bomb.x as usize, 1.0);
        set(
            11,
            (bomb.y as usize) * w + bomb.x as usize,
            bomb.fuse as f32 / state.config.bomb_fuse as f32,
        );
        blast_footprint(state, bomb.x as usize, bomb.y as usize, bomb.strength, &mut footprint);
    }
    for (i, &hit) in footprint.iter().enumerate() {
        if hit {
            set(10, i, 1.0);
        }
    }

    let capacity = (observer.bomb_capacity as f32 / 10.0).min(1.0);
    let strength = (observer.blast_strength as f32 / 10.0).min(1.0);
    for i in 0..n {
        set(12, i, capacity);
        set(13, i, strength);
    }

    GridObservation {
        width: w,
        height: h,
        planes,
    }
}
