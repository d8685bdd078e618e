//! Step resolution and action masking.
//!
//! A step resolves in a fixed order: bomb fuses tick down, bombs at zero
//! explode (with chains), flames spawn, agents move simultaneously, flames
//! kill, power-ups are collected, old flames burn down, the step counter
//! advances. Masking mirrors this order to predict which tiles are lethal
//! one step ahead.

use super::{
    action_delta, AgentState, Bomb, GridState, Item, Tile, BOMB, DOWN, LEFT, NUM_ACTIONS, RIGHT,
    STOP, UP,
};
use crate::game::{Action, GameError, GameState, JointAction, PlayerId};
use std::sync::OnceLock;

/// Tiles covered by this bomb's blast if it detonated on the current
/// board: the bomb tile plus rays of `strength - 1` tiles in the four
/// cardinal directions. Rigid walls stop a ray outright; wood catches the
/// blast and stops it; bombs and everything else let it pass.
pub(crate) fn blast_footprint(state: &GridState, x: usize, y: usize, strength: u8, out: &mut [bool]) {
    out[state.idx(x, y)] = true;
    for (dx, dy) in [(0, -1), (0, 1), (-1, 0), (1, 0)] {
        for dist in 1..strength as i32 {
            let (tx, ty) = (x as i32 + dx * dist, y as i32 + dy * dist);
            if !state.in_bounds(tx, ty) {
                break;
            }
            let (tx, ty) = (tx as usize, ty as usize);
            match state.tile(tx, ty) {
                Tile::Rigid => break,
                Tile::Wood => {
                    out[state.idx(tx, ty)] = true;
                    break;
                }
                Tile::Passage => out[state.idx(tx, ty)] = true,
            }
        }
    }
}

/// Blast footprints of the given bombs plus every bomb they chain into.
/// Returns the burnt-tile set and marks which bombs detonated.
fn chained_footprint(state: &GridState, initial: &[bool], exploded: &mut [bool]) -> Vec<bool> {
    let mut burnt = vec![false; state.tiles.len()];
    exploded.copy_from_slice(initial);
    let mut frontier: Vec<usize> = (0..state.bombs.len()).filter(|&i| exploded[i]).collect();
    while let Some(i) = frontier.pop() {
        let b = state.bombs[i];
        blast_footprint(state, b.x as usize, b.y as usize, b.strength, &mut burnt);
        for (j, other) in state.bombs.iter().enumerate() {
            if !exploded[j] && burnt[state.idx(other.x as usize, other.y as usize)] {
                exploded[j] = true;
                frontier.push(j);
            }
        }
    }
    burnt
}

/// Tiles lethal during the *next* resolution: every tile currently on
/// fire (deaths are applied before flames burn down, so even one-tick
/// flames still kill) plus the chained blast footprint of every bomb whose
/// fuse runs out next step.
pub(crate) fn danger_next_tick(state: &GridState) -> Box<[bool]> {
    let due: Vec<bool> = state.bombs.iter().map(|b| b.fuse <= 1).collect();
    let mut exploded = vec![false; state.bombs.len()];
    let mut danger = if due.iter().any(|&d| d) {
        chained_footprint(state, &due, &mut exploded)
    } else {
        vec![false; state.tiles.len()]
    };
    for (i, &ticks) in state.flames.iter().enumerate() {
        if ticks > 0 {
            danger[i] = true;
        }
    }
    danger.into_boxed_slice()
}

/// Movement actions that are physically possible: in bounds and not into
/// a wall or a bomb. Stop is always possible; Bomb needs spare capacity
/// and a bomb-free tile.
fn hard_legal(state: &GridState, agent: &AgentState) -> Vec<Action> {
    let mut actions = Vec::with_capacity(NUM_ACTIONS);
    actions.push(STOP);
    for action in [UP, DOWN, LEFT, RIGHT] {
        let (dx, dy) = action_delta(action).expect("movement action");
        let (tx, ty) = (agent.x as i32 + dx, agent.y as i32 + dy);
        if state.in_bounds(tx, ty)
            && state.tile(tx as usize, ty as usize) == Tile::Passage
            && state.bomb_at(tx as usize, ty as usize).is_none()
        {
            actions.push(action);
        }
    }
    if agent.bombs_in_play < agent.bomb_capacity
        && state.bomb_at(agent.x as usize, agent.y as usize).is_none()
    {
        actions.push(BOMB);
    }
    actions
}

/// The action set planners and baselines draw from: hard-legal actions
/// minus those that would put the agent on a tile that burns next step.
/// If everything is lethal the agent is doomed anyway and the full
/// hard-legal set is returned, so the set is never empty.
pub fn masked_actions(state: &GridState, player: PlayerId) -> Result<Vec<Action>, GameError> {
    let agent = state.agent(player)?;
    if !agent.alive {
        return Err(GameError::DeadPlayer(player));
    }
    let hard = hard_legal(state, agent);
    let danger = state.danger_next_tick();
    let safe: Vec<Action> = hard
        .iter()
        .copied()
        .filter(|&action| {
            let (tx, ty) = match action_delta(action) {
                Some((dx, dy)) => (agent.x as i32 + dx, agent.y as i32 + dy),
                None => (agent.x as i32, agent.y as i32),
            };
            !danger[state.idx(tx as usize, ty as usize)]
        })
        .collect();
    if safe.is_empty() {
        Ok(hard)
    } else {
        Ok(safe)
    }
}

fn validate_action(state: &GridState, player: PlayerId, action: Action) -> Result<(), GameError> {
    let agent = state.agent(player)?;
    let illegal = || GameError::IllegalAction { player, action };
    match action {
        STOP => Ok(()),
        UP | DOWN | LEFT | RIGHT => {
            let (dx, dy) = action_delta(action).expect("movement action");
            let (tx, ty) = (agent.x as i32 + dx, agent.y as i32 + dy);
            if !state.in_bounds(tx, ty)
                || state.tile(tx as usize, ty as usize) != Tile::Passage
                || state.bomb_at(tx as usize, ty as usize).is_some()
            {
                return Err(illegal());
            }
            Ok(())
        }
        BOMB => {
            if agent.bombs_in_play >= agent.bomb_capacity
                || state
                    .bomb_at(agent.x as usize, agent.y as usize)
                    .is_some()
            {
                return Err(illegal());
            }
            Ok(())
        }
        _ => Err(illegal()),
    }
}

/// Applies one simultaneous joint action. `joint` holds one action per
/// *alive* player in ascending player order. Moving into walls or bombs is
/// an error; moving into fire is legal and fatal.
pub(crate) fn resolve_step(state: &GridState, joint: &JointAction) -> Result<GridState, GameError> {
    if state.is_terminal() {
        return Err(GameError::TerminalState);
    }
    let actors = state.players_to_act();
    if joint.len() != actors.len() {
        return Err(GameError::JointArity {
            expected: actors.len(),
            got: joint.len(),
        });
    }
    for (slot, &player) in actors.iter().enumerate() {
        validate_action(state, player, joint.get(slot))?;
    }

    let mut next = state.clone();
    next.danger = OnceLock::new();

    // Fuses tick down; bombs that reach zero detonate together with every
    // bomb caught in a blast.
    for bomb in &mut next.bombs {
        bomb.fuse -= 1;
    }
    let due: Vec<bool> = next.bombs.iter().map(|b| b.fuse == 0).collect();
    let mut new_flames = vec![false; next.tiles.len()];
    if due.iter().any(|&d| d) {
        let mut exploded = vec![false; next.bombs.len()];
        let burnt = chained_footprint(&next, &due, &mut exploded);
        for i in (0..next.bombs.len()).rev() {
            if exploded[i] {
                let owner = next.bombs[i].owner as usize;
                next.agents[owner].bombs_in_play -= 1;
                next.bombs.swap_remove(i);
            }
        }
        for (i, &hit) in burnt.iter().enumerate() {
            if !hit {
                continue;
            }
            if next.tiles[i] == Tile::Wood as u8 {
                // The wall burns away; whatever hid inside becomes
                // collectable once the fire is out.
                next.tiles[i] = Tile::Passage as u8;
                next.items[i] = next.hidden[i];
                next.hidden[i] = Item::None as u8;
            }
            next.flames[i] = next.config.flame_lifetime;
            new_flames[i] = true;
        }
    }

    // Simultaneous movement. Wanted targets first, then bounce-backs:
    // swaps, shared targets and walks into stationary agents all cancel,
    // repeatedly, until no move conflicts remain.
    let num = next.agents.len();
    let mut origin = vec![(0i32, 0i32); num];
    let mut target = vec![(0i32, 0i32); num];
    for (p, agent) in next.agents.iter().enumerate() {
        origin[p] = (agent.x as i32, agent.y as i32);
        target[p] = origin[p];
    }
    let mut lay_bomb = vec![false; num];
    for (slot, &player) in actors.iter().enumerate() {
        let action = joint.get(slot);
        if action == BOMB {
            lay_bomb[player.0] = true;
        } else if let Some((dx, dy)) = action_delta(action) {
            target[player.0] = (origin[player.0].0 + dx, origin[player.0].1 + dy);
        }
    }
    loop {
        // Decide every bounce from the same snapshot before applying any,
        // so that two agents contesting one tile both cancel.
        let bounced: Vec<bool> = (0..num)
            .map(|p| {
                next.agents[p].alive
                    && target[p] != origin[p]
                    && (0..num).any(|q| {
                        q != p
                            && next.agents[q].alive
                            && (
                                // Someone else wants the same tile.
                                target[q] == target[p]
                                // Head-on swap.
                                || (target[q] == origin[p] && target[p] == origin[q])
                                // Walking into an agent that stays put.
                                || (target[p] == origin[q] && target[q] == origin[q])
                            )
                    })
            })
            .collect();
        if !bounced.iter().any(|&b| b) {
            break;
        }
        for p in 0..num {
            if bounced[p] {
                target[p] = origin[p];
            }
        }
    }
    for p in 0..num {
        next.agents[p].x = target[p].0 as u8;
        next.agents[p].y = target[p].1 as u8;
    }

    // Bombs are laid on the owner's tile (laying implies standing still).
    for p in 0..num {
        if lay_bomb[p] {
            next.bombs.push(Bomb {
                x: next.agents[p].x,
                y: next.agents[p].y,
                owner: p as u8,
                fuse: next.config.bomb_fuse,
                strength: next.agents[p].blast_strength,
            });
            next.agents[p].bombs_in_play += 1;
        }
    }

    // Fire kills anyone standing in it, old or new.
    for agent in &mut next.agents {
        if agent.alive && next.flames[(agent.y as usize) * next.config.width + agent.x as usize] > 0
        {
            agent.alive = false;
        }
    }

    // Survivors pick up what they are standing on.
    for agent in &mut next.agents {
        if !agent.alive {
            continue;
        }
        let i = (agent.y as usize) * next.config.width + agent.x as usize;
        match Item::from_u8(next.items[i]) {
            Item::ExtraBomb => {
                agent.bomb_capacity += 1;
                next.items[i] = Item::None as u8;
            }
            Item::BlastRange => {
                agent.blast_strength += 1;
                next.items[i] = Item::None as u8;
            }
            Item::None => {}
        }
    }

    // Flames that existed before this step burn down; the ones that just
    // spawned keep their full lifetime until next step.
    for (i, ticks) in next.flames.iter_mut().enumerate() {
        if *ticks > 0 && !new_flames[i] {
            *ticks -= 1;
        }
    }

    next.step += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::*;
    use crate::game::GameState;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Joint action helper: everyone stops except the listed overrides.
    fn joint(state: &GridState, overrides: &[(usize, Action)]) -> JointAction {
        let actions = state
            .players_to_act()
            .into_iter()
            .map(|p| {
                overrides
                    .iter()
                    .find(|(q, _)| *q == p.0)
                    .map(|(_, a)| *a)
                    .unwrap_or(STOP)
            })
            .collect();
        JointAction::new(actions)
    }

    fn flame_tiles(state: &GridState) -> Vec<(usize, usize)> {
        let mut tiles = Vec::new();
        for y in 0..state.height() {
            for x in 0..state.width() {
                if state.flame_ticks(x, y) > 0 {
                    tiles.push((x, y));
                }
            }
        }
        tiles
    }

    #[test]
    fn strength_two_bomb_burns_a_plus_shape() {
        let mut state = open_board(GridConfig::fast());
        place_bomb(&mut state, 5, 5, 0, 1);
        let next = state.step(&joint(&state, &[])).unwrap();
        let mut expected = vec![(5, 5), (4, 5), (6, 5), (5, 4), (5, 6)];
        expected.sort();
        let mut got = flame_tiles(&next);
        got.sort();
        assert_eq!(got, expected);
        assert!(next.bombs().is_empty());
        assert_eq!(next.agents()[0].bombs_in_play, 0);
    }

    #[test]
    fn blast_rays_stop_at_rigid_and_consume_wood() {
        let mut state = open_board(GridConfig::fast());
        state.agents[0].blast_strength = 4;
        set_tile(&mut state, 5, 4, Tile::Rigid);
        set_tile(&mut state, 6, 5, Tile::Wood);
        set_hidden(&mut state, 6, 5, Item::BlastRange);
        place_bomb(&mut state, 5, 5, 0, 1);

        let next = state.step(&joint(&state, &[])).unwrap();
        // Up blocked outright, right stops in the wood it destroys, the
        // other rays run the full three tiles.
        assert_eq!(next.flame_ticks(5, 4), 0);
        assert_eq!(next.flame_ticks(6, 5), 2);
        assert_eq!(next.flame_ticks(7, 5), 0);
        assert_eq!(next.flame_ticks(2, 5), 2);
        assert_eq!(next.flame_ticks(5, 8), 2);
        assert_eq!(next.tile(6, 5), Tile::Passage);
        // The hidden power-up is now on the floor, waiting under the fire.
        assert_eq!(next.item(6, 5), Item::BlastRange);
    }

    #[test]
    fn bombs_chain_when_caught_in_a_blast() {
        let mut state = open_board(GridConfig::fast());
        place_bomb(&mut state, 5, 5, 0, 1);
        place_bomb(&mut state, 6, 5, 1, 9);
        place_bomb(&mut state, 7, 5, 2, 9);
        let next = state.step(&joint(&state, &[])).unwrap();
        // 5,5 catches 6,5 which catches 7,5 in the same tick.
        assert!(next.bombs().is_empty());
        assert!(next.flame_ticks(8, 5) > 0);
        assert_eq!(next.agents()[1].bombs_in_play, 0);
        assert_eq!(next.agents()[2].bombs_in_play, 0);
    }

    #[test]
    fn flames_burn_for_two_steps_then_clear() {
        let mut state = open_board(GridConfig::fast());
        place_bomb(&mut state, 5, 5, 0, 1);
        let s1 = state.step(&joint(&state, &[])).unwrap();
        assert_eq!(s1.flame_ticks(5, 5), 2);
        let s2 = s1.step(&joint(&s1, &[])).unwrap();
        assert_eq!(s2.flame_ticks(5, 5), 1);
        let s3 = s2.step(&joint(&s2, &[])).unwrap();
        assert_eq!(s3.flame_ticks(5, 5), 0);
    }

    #[test]
    fn fuses_tick_down_every_step() {
        let mut state = open_board(GridConfig::fast());
        place_bomb(&mut state, 5, 5, 0, 3);
        let s1 = state.step(&joint(&state, &[])).unwrap();
        assert_eq!(s1.bomb_at(5, 5).unwrap().fuse, 2);
        let s2 = s1.step(&joint(&s1, &[])).unwrap();
        assert_eq!(s2.bomb_at(5, 5).unwrap().fuse, 1);
        let s3 = s2.step(&joint(&s2, &[])).unwrap();
        assert!(s3.bomb_at(5, 5).is_none());
        assert!(s3.flame_ticks(5, 5) > 0);
    }

    #[test]
    fn laying_a_bomb_sets_the_full_fuse_and_tracks_capacity() {
        let state = open_board(GridConfig::fast());
        let next = state.step(&joint(&state, &[(0, BOMB)])).unwrap();
        let bomb = next.bomb_at(0, 0).unwrap();
        assert_eq!(bomb.fuse, 9);
        assert_eq!(bomb.owner, 0);
        assert_eq!(next.agents()[0].bombs_in_play, 1);
        // Capacity 1 is now exhausted: laying again is masked and illegal.
        assert!(!next.masked_actions(PlayerId(0)).unwrap().contains(&BOMB));
        assert!(matches!(
            next.step(&joint(&next, &[(0, BOMB)])),
            Err(GameError::IllegalAction { player, .. }) if player == PlayerId(0)
        ));
    }

    #[test]
    fn swapping_agents_bounce_back() {
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        place_agent(&mut state, 1, 6, 5);
        let next = state
            .step(&joint(&state, &[(0, RIGHT), (1, LEFT)]))
            .unwrap();
        assert_eq!((next.agents()[0].x, next.agents()[0].y), (5, 5));
        assert_eq!((next.agents()[1].x, next.agents()[1].y), (6, 5));
    }

    #[test]
    fn shared_target_bounces_both_movers() {
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 4, 5);
        place_agent(&mut state, 1, 6, 5);
        let next = state
            .step(&joint(&state, &[(0, RIGHT), (1, LEFT)]))
            .unwrap();
        assert_eq!((next.agents()[0].x, next.agents()[0].y), (4, 5));
        assert_eq!((next.agents()[1].x, next.agents()[1].y), (6, 5));
    }

    #[test]
    fn bounces_cascade_through_blocked_chains() {
        // 0 walks into stationary 1; 2 walks into 0's tile. Both must stay.
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        place_agent(&mut state, 1, 6, 5);
        place_agent(&mut state, 2, 4, 5);
        let next = state
            .step(&joint(&state, &[(0, RIGHT), (2, RIGHT)]))
            .unwrap();
        assert_eq!((next.agents()[0].x, next.agents()[0].y), (5, 5));
        assert_eq!((next.agents()[2].x, next.agents()[2].y), (4, 5));
    }

    #[test]
    fn fire_kills_and_the_victim_stops_acting() {
        let mut state = open_board(GridConfig::two_player_fast());
        place_agent(&mut state, 0, 5, 5);
        place_flame(&mut state, 6, 5, 2);
        // Walking into fire is legal (not masked-legal) and fatal.
        let next = state.step(&joint(&state, &[(0, RIGHT)])).unwrap();
        assert!(!next.agents()[0].alive);
        assert!(next.is_terminal());
        assert_eq!(next.terminal_reward(PlayerId(0)).unwrap(), -1);
        assert_eq!(next.terminal_reward(PlayerId(1)).unwrap(), 1);
    }

    #[test]
    fn escaping_a_detonating_bomb_survives() {
        // Flames spawn before moves but deaths check positions after
        // moves: stepping out of the blast in the detonation tick works.
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 6, 5);
        place_bomb(&mut state, 5, 5, 1, 1);
        let escaped = state.step(&joint(&state, &[(0, RIGHT)])).unwrap();
        assert!(escaped.agents()[0].alive);
        assert_eq!((escaped.agents()[0].x, escaped.agents()[0].y), (7, 5));
        // Standing still in the same spot is fatal.
        let stayed = state.step(&joint(&state, &[(0, STOP)])).unwrap();
        assert!(!stayed.agents()[0].alive);
    }

    #[test]
    fn survivors_collect_power_ups() {
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        set_item(&mut state, 6, 5, Item::ExtraBomb);
        let next = state.step(&joint(&state, &[(0, RIGHT)])).unwrap();
        assert_eq!(next.agents()[0].bomb_capacity, 2);
        assert_eq!(next.item(6, 5), Item::None);
    }

    #[test]
    fn the_dead_do_not_collect() {
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        set_item(&mut state, 6, 5, Item::ExtraBomb);
        place_flame(&mut state, 6, 5, 2);
        let next = state.step(&joint(&state, &[(0, RIGHT)])).unwrap();
        assert!(!next.agents()[0].alive);
        assert_eq!(next.agents()[0].bomb_capacity, 1);
        assert_eq!(next.item(6, 5), Item::ExtraBomb);
    }

    #[test]
    fn blast_range_power_up_grows_the_footprint() {
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        set_item(&mut state, 5, 5, Item::BlastRange);
        let next = state.step(&joint(&state, &[])).unwrap();
        assert_eq!(next.agents()[0].blast_strength, 3);
        assert_eq!(next.item(5, 5), Item::None);
    }

    #[test]
    fn arity_and_range_violations_are_rejected() {
        let state = open_board(GridConfig::fast());
        assert!(matches!(
            state.step(&JointAction::new(vec![STOP; 3])),
            Err(GameError::JointArity {
                expected: 4,
                got: 3
            })
        ));
        assert!(matches!(
            state.step(&joint(&state, &[(0, Action(6))])),
            Err(GameError::IllegalAction { .. })
        ));
    }

    #[test]
    fn walking_off_board_or_into_walls_is_an_error() {
        let mut state = open_board(GridConfig::fast());
        // Agent 0 sits in the top-left corner: Up and Left leave the board.
        assert!(matches!(
            state.step(&joint(&state, &[(0, UP)])),
            Err(GameError::IllegalAction { .. })
        ));
        set_tile(&mut state, 1, 0, Tile::Wood);
        assert!(matches!(
            state.step(&joint(&state, &[(0, RIGHT)])),
            Err(GameError::IllegalAction { .. })
        ));
        place_bomb(&mut state, 0, 1, 1, 9);
        assert!(matches!(
            state.step(&joint(&state, &[(0, DOWN)])),
            Err(GameError::IllegalAction { .. })
        ));
    }

    #[test]
    fn stepping_a_terminal_state_is_an_error() {
        let mut state = open_board(GridConfig::fast());
        kill_agent(&mut state, 1);
        kill_agent(&mut state, 2);
        kill_agent(&mut state, 3);
        assert!(matches!(
            state.step(&JointAction::new(vec![STOP])),
            Err(GameError::TerminalState)
        ));
    }

    #[test]
    fn masked_center_of_open_board_allows_everything() {
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        let mut actions = state.masked_actions(PlayerId(0)).unwrap();
        actions.sort();
        assert_eq!(actions, vec![STOP, UP, DOWN, LEFT, RIGHT, BOMB]);
    }

    #[test]
    fn masking_blocks_moves_into_standing_flames() {
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        place_flame(&mut state, 6, 5, 2);
        let actions = state.masked_actions(PlayerId(0)).unwrap();
        assert!(!actions.contains(&RIGHT));
        assert!(actions.contains(&LEFT));

        // Even a flame on its last tick still burns movers next step.
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        place_flame(&mut state, 6, 5, 1);
        let actions = state.masked_actions(PlayerId(0)).unwrap();
        assert!(!actions.contains(&RIGHT));
    }

    #[test]
    fn masking_predicts_detonations_and_chains() {
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        // A fuse-1 bomb two tiles right chains into a fuse-9 bomb next to
        // the agent; its blast reaches (6,5) and the agent's own tile.
        state.agents[1].bomb_capacity = 2;
        place_bomb(&mut state, 8, 5, 1, 1);
        place_bomb(&mut state, 7, 5, 1, 9);
        state.bombs[1].strength = 3;
        let actions = state.masked_actions(PlayerId(0)).unwrap();
        assert!(!actions.contains(&RIGHT), "tile (6,5) burns next tick");
        assert!(actions.contains(&UP));
        // A fuse-2 bomb alone threatens nothing yet.
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        place_bomb(&mut state, 6, 5, 1, 2);
        // Right is blocked by the bomb itself (hard rule) but Up stays open
        // even though the bomb will explode in two steps.
        let actions = state.masked_actions(PlayerId(0)).unwrap();
        assert!(!actions.contains(&RIGHT));
        assert!(actions.contains(&UP));
        assert!(actions.contains(&STOP));
    }

    #[test]
    fn masking_drops_stop_only_when_an_escape_exists() {
        // Agent on a detonating bomb with a safe neighbor: Stop and Bomb
        // masked, the escape stays.
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        place_bomb(&mut state, 5, 5, 0, 1);
        state.bombs[0].strength = 2;
        // (6,5) and (4,5), (5,4), (5,6) all burn; no safe neighbor exists
        // for a plus-shaped blast, so the whole hard-legal set comes back.
        let doomed = state.masked_actions(PlayerId(0)).unwrap();
        assert!(doomed.contains(&STOP));

        // Fence three sides with fire and put a one-tick flame under the
        // agent's feet: the only safe tile left is (6,5), so Stop and Bomb
        // are dropped and Right survives alone.
        let mut state = open_board(GridConfig::fast());
        place_agent(&mut state, 0, 5, 5);
        set_tile(&mut state, 4, 5, Tile::Rigid);
        place_flame(&mut state, 5, 4, 2);
        place_flame(&mut state, 5, 6, 2);
        place_flame(&mut state, 5, 5, 1);
        let actions = state.masked_actions(PlayerId(0)).unwrap();
        assert_eq!(actions, vec![RIGHT]);
    }

    #[test]
    fn masked_queries_for_dead_players_error() {
        let mut state = open_board(GridConfig::fast());
        kill_agent(&mut state, 2);
        assert_eq!(
            state.masked_actions(PlayerId(2)),
            Err(GameError::DeadPlayer(PlayerId(2)))
        );
    }

    #[test]
    fn alive_count_never_increases() {
        let mut state = open_board(GridConfig::fast());
        place_bomb(&mut state, 1, 0, 0, 1);
        let mut current = state;
        let mut alive = current.alive_count();
        for _ in 0..20 {
            if current.is_terminal() {
                break;
            }
            let next = current.step(&joint(&current, &[])).unwrap();
            assert!(next.alive_count() <= alive);
            alive = next.alive_count();
            current = next;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        /// Masking soundness: an agent that plays any masked action cannot
        /// die to already-scheduled fire on the very next step. Other
        /// agents stand still (and far away), so no bounce-back can shove
        /// the mover onto a burning tile.
        #[test]
        fn masked_actions_never_walk_into_scheduled_fire(
            seed in 0u64..500,
            agent_x in 2usize..9,
            agent_y in 2usize..9,
            pick in 0usize..6,
        ) {
            let mut state = open_board(GridConfig::fast());
            place_agent(&mut state, 0, agent_x, agent_y);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Scatter hazards around the agent's neighborhood.
            for _ in 0..rng.gen_range(1..6) {
                let x = rng.gen_range(1..10);
                let y = rng.gen_range(1..10);
                if (x, y) == (agent_x, agent_y) || state.agent_at(x, y).is_some() {
                    continue;
                }
                if rng.gen_bool(0.5) {
                    if state.bomb_at(x, y).is_none() {
                        state.agents[3].bomb_capacity = 10;
                        place_bomb(&mut state, x, y, 3, rng.gen_range(1..4));
                        let n = state.bombs.len();
                        state.bombs[n - 1].strength = rng.gen_range(2..5);
                    }
                } else {
                    place_flame(&mut state, x, y, rng.gen_range(1..3));
                }
            }
            prop_assume!(state.agents[0].alive && !state.is_terminal());
            let masked = state.masked_actions(PlayerId(0)).unwrap();
            let action = masked[pick % masked.len()];
            // Doomed corner case: if even the full hard-legal set is
            // lethal, masking cannot help; skip those.
            let danger = state.danger_next_tick().to_vec();
            let all_lethal = masked.iter().all(|&a| {
                let (dx, dy) = action_delta(a).unwrap_or((0, 0));
                danger[state.idx((agent_x as i32 + dx) as usize, (agent_y as i32 + dy) as usize)]
            });
            prop_assume!(!all_lethal);
            let next = state.step(&joint(&state, &[(0, action)])).unwrap();
            prop_assert!(next.agents()[0].alive);
        }
    }
}
