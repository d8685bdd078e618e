//! Random board generation.
//!
//! Tile types are sampled per mirror orbit so the board is symmetric
//! across all four corners, spawn pockets are carved out, and candidate
//! boards are rejected until every corner can reach every other corner
//! without crossing rigid walls (wood is destructible and counts as
//! traversable for this check). Power-ups are then hidden inside a
//! configured fraction of the wooden walls.

use super::{AgentState, GridConfig, GridState, Item, Tile};
use crate::game::derive_seed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

const MAX_ATTEMPTS: u64 = 64;

/// Deterministically generates a playable board for `seed`: same seed,
/// same board, bit for bit.
pub fn generate_board(config: &Arc<GridConfig>, seed: u64) -> GridState {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
        let mut tiles = sample_tiles(config, &mut rng);
        carve_spawn_pockets(config, &mut tiles);
        if corners_connected(config, &tiles) {
            return finalize(config, tiles, &mut rng);
        }
    }
    // Statistically unreachable at the default densities, but generation
    // must never fail: soften every rigid wall on the border ring into
    // wood, which connects all corners along the edge.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, MAX_ATTEMPTS));
    let mut tiles = sample_tiles(config, &mut rng);
    carve_spawn_pockets(config, &mut tiles);
    let (w, h) = (config.width, config.height);
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            if border && tiles[y * w + x] == Tile::Rigid as u8 {
                tiles[y * w + x] = Tile::Wood as u8;
            }
        }
    }
    debug_assert!(corners_connected(config, &tiles));
    finalize(config, tiles, &mut rng)
}

/// Samples one tile type per four-way mirror orbit and writes it to all
/// orbit members, giving every corner the same local terrain.
fn sample_tiles(config: &GridConfig, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let (w, h) = (config.width, config.height);
    let mut tiles = vec![Tile::Passage as u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let orbit = [(x, y), (w - 1 - x, y), (x, h - 1 - y), (w - 1 - x, h - 1 - y)];
            if (x, y) != *orbit.iter().min().unwrap() {
                continue;
            }
            let u: f64 = rng.gen();
            let tile = if u < config.rigid_density {
                Tile::Rigid
            } else if u < config.rigid_density + config.wood_density {
                Tile::Wood
            } else {
                Tile::Passage
            };
            for (ox, oy) in orbit {
                tiles[oy * w + ox] = tile as u8;
            }
        }
    }
    tiles
}

/// Clears each corner and its two orthogonal neighbors so agents always
/// spawn with room to move. All four corners are carved even in the
/// two-player variant, keeping the board fully symmetric.
fn carve_spawn_pockets(config: &GridConfig, tiles: &mut [u8]) {
    let (w, h) = (config.width, config.height);
    for (cx, cy) in [(0, 0), (w - 1, 0), (w - 1, h - 1), (0, h - 1)] {
        let step_x = if cx == 0 { 1i32 } else { -1 };
        let step_y = if cy == 0 { 1i32 } else { -1 };
        for (x, y) in [
            (cx, cy),
            ((cx as i32 + step_x) as usize, cy),
            (cx, (cy as i32 + step_y) as usize),
        ] {
            tiles[y * w + x] = Tile::Passage as u8;
        }
    }
}

/// BFS over non-rigid tiles from the first corner; true when every other
/// corner is reached.
fn corners_connected(config: &GridConfig, tiles: &[u8]) -> bool {
    let (w, h) = (config.width, config.height);
    let corners = [(0, 0), (w - 1, 0), (w - 1, h - 1), (0, h - 1)];
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    seen[0] = true;
    queue.push_back(corners[0]);
    while let Some((x, y)) = queue.pop_front() {
        for (dx, dy) in [(0i32, -1i32), (0, 1), (-1, 0), (1, 0)] {
            let (nx, ny) = (x as i32 + dx, y as i32 + dy);
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            let i = ny * w + nx;
            if !seen[i] && tiles[i] != Tile::Rigid as u8 {
                seen[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    corners.iter().all(|&(x, y)| seen[y * w + x])
}

/// Hides power-ups in a seeded sample of the wooden walls and places the
/// agents in their corners.
fn finalize(config: &Arc<GridConfig>, tiles: Vec<u8>, rng: &mut ChaCha8Rng) -> GridState {
    let n = config.width * config.height;
    let mut hidden = vec![Item::None as u8; n];
    let mut wood: Vec<usize> = (0..n).filter(|&i| tiles[i] == Tile::Wood as u8).collect();
    wood.shuffle(rng);
    let count = (wood.len() as f64 * config.powerup_ratio).round() as usize;
    for &i in wood.iter().take(count) {
        hidden[i] = if rng.gen_bool(0.5) {
            Item::ExtraBomb as u8
        } else {
            Item::BlastRange as u8
        };
    }

    let agents = config
        .spawn_corners()
        .into_iter()
        .map(|(x, y)| AgentState {
            x: x as u8,
            y: y as u8,
            alive: true,
            bomb_capacity: config.initial_capacity,
            blast_strength: config.initial_blast,
            bombs_in_play: 0,
        })
        .collect();

    GridState {
        config: Arc::clone(config),
        tiles: tiles.into_boxed_slice(),
        hidden: hidden.into_boxed_slice(),
        items: vec![Item::None as u8; n].into_boxed_slice(),
        flames: vec![0; n].into_boxed_slice(),
        bombs: Vec::new(),
        agents,
        step: 0,
        danger: OnceLock::new(),
    }
}
