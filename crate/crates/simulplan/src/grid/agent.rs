//! The scripted baseline opponent.
//!
//! A priority list over the masked action set: get out of blast danger,
//! grab an adjacent power-up, lay a bomb next to wood or an enemy when a
//! retreat exists, otherwise approach the nearest wood or enemy, otherwise
//! stand still. Deterministic for a given `(state, seed)` pair; the seed
//! only breaks ties between equally good directions.

use super::rules::blast_footprint;
use super::{action_delta, masked_actions, GridState, Item, Tile, BOMB, DOWN, LEFT, RIGHT, STOP, UP};
use crate::game::{derive_seed, Action, GameError, GameState, PlayerId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// Slack, in steps, stacked on travel time when judging whether a bomb
/// is a problem. Flames linger for two ticks after the fuse runs out;
/// the extra steps make the agent clear out well before a crossing gets
/// tight instead of loitering in a footprint until the last moment.
const ETA_MARGIN: u8 = 5;

/// Per tile, the soonest fuse among bombs whose blast will cover it,
/// `u8::MAX` where no live bomb reaches and zero where fire already
/// burns. Danger is time-scaled: a tile only matters for a walk that
/// arrives around the moment it burns, so fresh footprints stay
/// crossable while short fuses push the agent out.
fn danger_eta(state: &GridState) -> Vec<u8> {
    let mut eta = vec![u8::MAX; state.tiles.len()];
    let mut footprint = vec![false; state.tiles.len()];
    for bomb in state.bombs() {
        footprint.iter_mut().for_each(|t| *t = false);
        blast_footprint(state, bomb.x as usize, bomb.y as usize, bomb.strength, &mut footprint);
        for (i, &hit) in footprint.iter().enumerate() {
            if hit && bomb.fuse < eta[i] {
                eta[i] = bomb.fuse;
            }
        }
    }
    for (i, &ticks) in state.flames.iter().enumerate() {
        if ticks > 0 {
            eta[i] = 0;
        }
    }
    eta
}

/// Walkable for pathing: a passage tile without a bomb or fire on it.
fn walkable(state: &GridState, x: usize, y: usize) -> bool {
    state.tile(x, y) == Tile::Passage
        && state.bomb_at(x, y).is_none()
        && state.flame_ticks(x, y) == 0
}

/// BFS from `start` over walkable tiles. Returns, for every reached tile,
/// the index of the first move (into `dirs`) that starts its shortest
/// path, the tiles in visit order, and the distance to each.
fn bfs_first_moves(
    state: &GridState,
    start: (usize, usize),
    dirs: &[Action],
    max_depth: usize,
) -> (Vec<Option<usize>>, Vec<usize>, Vec<usize>) {
    let w = state.width();
    let mut first = vec![None; state.tiles.len()];
    let mut depth = vec![usize::MAX; state.tiles.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    depth[start.1 * w + start.0] = 0;
    queue.push_back(start);
    order.push(start.1 * w + start.0);
    while let Some((x, y)) = queue.pop_front() {
        let here = y * w + x;
        if depth[here] >= max_depth {
            continue;
        }
        for (d, &dir) in dirs.iter().enumerate() {
            let (dx, dy) = action_delta(dir).expect("movement direction");
            let (nx, ny) = (x as i32 + dx, y as i32 + dy);
            if !state.in_bounds(nx, ny) {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            let i = ny * w + nx;
            if depth[i] != usize::MAX || !walkable(state, nx, ny) {
                continue;
            }
            depth[i] = depth[here] + 1;
            first[i] = if here == start.1 * w + start.0 {
                Some(d)
            } else {
                first[here]
            };
            queue.push_back((nx, ny));
            order.push(i);
        }
    }
    (first, order, depth)
}

/// True when an enemy stands in this bomb's line of fire: same row or
/// column within blast range, with no wall in between.
fn enemy_in_blast_line(state: &GridState, player: PlayerId) -> bool {
    let agent = &state.agents()[player.0];
    let (x, y) = (agent.x as i32, agent.y as i32);
    for (dx, dy) in [(0, -1), (0, 1), (-1, 0), (1, 0)] {
        for dist in 1..agent.blast_strength as i32 {
            let (tx, ty) = (x + dx * dist, y + dy * dist);
            if !state.in_bounds(tx, ty) || state.tile(tx as usize, ty as usize) != Tile::Passage {
                break;
            }
            if let Some(other) = state.agent_at(tx as usize, ty as usize) {
                if other != player {
                    return true;
                }
            }
        }
    }
    false
}

/// True when, after laying a bomb here, some tile outside the new
/// footprint is reachable within the fuse time. Other bombs' footprints
/// do not veto the retreat; the time-scaled flee logic deals with those
/// as their fuses run down.
fn safe_retreat_exists(state: &GridState, player: PlayerId) -> bool {
    let agent = &state.agents()[player.0];
    let (x, y) = (agent.x as usize, agent.y as usize);
    let mut own = vec![false; state.tiles.len()];
    blast_footprint(state, x, y, agent.blast_strength, &mut own);
    let dirs = [UP, DOWN, LEFT, RIGHT];
    let (_, order, _) = bfs_first_moves(state, (x, y), &dirs, state.config.bomb_fuse as usize);
    order.into_iter().any(|i| !own[i])
}

/// Picks the baseline agent's action. Always a member of the masked set.
pub fn rule_based_agent(
    state: &GridState,
    player: PlayerId,
    seed: u64,
) -> Result<Action, GameError> {
    let agent = state.agent(player)?;
    if !agent.alive {
        return Err(GameError::DeadPlayer(player));
    }
    let masked = masked_actions(state, player)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed ^ state.canonical_key(),
        player.0 as u64,
    ));
    let mut dirs = [UP, DOWN, LEFT, RIGHT];
    dirs.shuffle(&mut rng);

    let eta = danger_eta(state);
    let (x, y) = (agent.x as usize, agent.y as usize);
    let here = y * state.width() + x;
    let (first, order, depth) = bfs_first_moves(state, (x, y), &dirs, state.tiles.len());

    // Priority 1: standing inside a footprint with the fuse closing in on
    // the escape time, leave by the shortest path to a clear tile. A long
    // fuse is not an emergency yet; later priorities may walk, bomb, or
    // loiter here, and the next tick re-checks.
    if eta[here] < u8::MAX {
        let mut flee = None;
        let mut urgent = true;
        for &i in &order {
            if eta[i] < u8::MAX {
                continue;
            }
            if let Some(d) = first[i] {
                if masked.contains(&dirs[d]) {
                    flee = Some(dirs[d]);
                    urgent = eta[here] as usize <= depth[i] + ETA_MARGIN as usize;
                    break;
                }
            }
        }
        if urgent {
            if let Some(dir) = flee {
                return Ok(dir);
            }
            // Nothing fully clear in reach: buy time toward the latest
            // fuse that beats the one underfoot.
            let mut best: Option<(u8, Action)> = None;
            for &i in &order {
                if let Some(d) = first[i] {
                    if masked.contains(&dirs[d])
                        && eta[i] > eta[here]
                        && best.map(|(e, _)| eta[i] > e).unwrap_or(true)
                    {
                        best = Some((eta[i], dirs[d]));
                    }
                }
            }
            if let Some((_, dir)) = best {
                return Ok(dir);
            }
        }
    }

    // Priority 2: a power-up one step away.
    for &dir in &dirs {
        let (dx, dy) = action_delta(dir).expect("movement direction");
        let (nx, ny) = (x as i32 + dx, y as i32 + dy);
        if state.in_bounds(nx, ny)
            && state.item(nx as usize, ny as usize) != Item::None
            && masked.contains(&dir)
        {
            return Ok(dir);
        }
    }

    // Priority 3: bomb an enemy in the blast line outright, or wood when a
    // way out exists. Attacks deliberately skip the retreat check; the
    // agent overcommits in close combat and sometimes dies to its own
    // bomb, which is what keeps free-for-alls decisive.
    if masked.contains(&BOMB) {
        let near_wood = dirs.iter().any(|&dir| {
            let (dx, dy) = action_delta(dir).expect("movement direction");
            let (nx, ny) = (x as i32 + dx, y as i32 + dy);
            state.in_bounds(nx, ny) && state.tile(nx as usize, ny as usize) == Tile::Wood
        });
        if enemy_in_blast_line(state, player)
            || (near_wood && safe_retreat_exists(state, player))
        {
            return Ok(BOMB);
        }
    }

    // Priority 4: walk toward the nearest wall to blow up or enemy to
    // corner. Tiles are fair game unless they burn around arrival time,
    // so a fresh footprint across the route does not stall the walk.
    for &i in &order {
        if i == here || eta[i] as usize <= depth[i] + ETA_MARGIN as usize {
            continue;
        }
        let (tx, ty) = (i % state.width(), i / state.width());
        let interesting = dirs.iter().any(|&dir| {
            let (dx, dy) = action_delta(dir).expect("movement direction");
            let (nx, ny) = (tx as i32 + dx, ty as i32 + dy);
            if !state.in_bounds(nx, ny) {
                return false;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            state.tile(nx, ny) == Tile::Wood
                || state
                    .agent_at(nx, ny)
                    .map(|p| p != player)
                    .unwrap_or(false)
        });
        if interesting {
            if let Some(d) = first[i] {
                let step = order_first_tile(state, (x, y), dirs[d]);
                if masked.contains(&dirs[d]) && eta[step] as usize > 1 + ETA_MARGIN as usize {
                    return Ok(dirs[d]);
                }
            }
        }
    }

    // Priority 5: nothing better to do.
    if masked.contains(&STOP) {
        Ok(STOP)
    } else {
        Ok(masked[0])
    }
}

fn order_first_tile(state: &GridState, from: (usize, usize), dir: Action) -> usize {
    let (dx, dy) = action_delta(dir).expect("movement direction");
    ((from.1 as i32 + dy) as usize) * state.width() + (from.0 as i32 + dx) as usize
}
