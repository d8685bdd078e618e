//! Microbenchmarks for the planning stack: environment stepping, feature
//! extraction, bandit arithmetic, and full planning calls per algorithm.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simulplan::bandits::{BanditAlgo, BanditInstance};
use simulplan::grid::{featurize, generate_board, masked_actions, GridConfig};
use simulplan::{
    Action, GameState, JointAction, Planner, PlannerConfig, PlayerId, SearchAlgorithm,
};

fn grid_benches(c: &mut Criterion) {
    let config = GridConfig::by_profile("standard").unwrap();
    let state = generate_board(&config, 1);
    let joint = JointAction::new(
        (0..config.players)
            .map(|p| masked_actions(&state, PlayerId(p)).unwrap()[0])
            .collect(),
    );

    let mut group = c.benchmark_group("grid");
    group.bench_function("generate_board", |b| {
        b.iter(|| generate_board(black_box(&config), black_box(1)))
    });
    group.bench_function("step", |b| {
        b.iter(|| black_box(&state).step(black_box(&joint)).unwrap())
    });
    group.bench_function("featurize", |b| {
        b.iter(|| featurize(black_box(&state), PlayerId(0)))
    });
    group.bench_function("canonical_key", |b| {
        b.iter(|| black_box(&state).canonical_key())
    });
    group.finish();
}

fn bandit_benches(c: &mut Criterion) {
    let actions: Vec<Action> = (0..6).map(Action).collect();
    let mut group = c.benchmark_group("bandit");
    for (name, algo) in [
        ("ucb1", BanditAlgo::ucb1(2.0)),
        ("thompson", BanditAlgo::thompson()),
    ] {
        group.bench_function(format!("{name}_select_update"), |b| {
            let mut bandit = BanditInstance::new(algo, &actions);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            b.iter(|| {
                let arm = bandit.select(&mut rng).unwrap();
                bandit.update(arm, 1.0).unwrap();
                arm
            })
        });
    }
    group.finish();
}

/// One full planning call (100 iterations, depth 10) from a fresh tree on
/// the fast two-player board.
fn planner_benches(c: &mut Criterion) {
    let config = GridConfig::by_profile("2p-fast").unwrap();
    let state = generate_board(&config, 3);

    let mut group = c.benchmark_group("plan_100it");
    group.sample_size(20);
    for (name, algorithm) in [
        ("mcs", SearchAlgorithm::Mcs),
        ("mcts", SearchAlgorithm::Mcts { rollout: true }),
        ("mcts_nr", SearchAlgorithm::Mcts { rollout: false }),
        ("fdts", SearchAlgorithm::Fdts),
    ] {
        group.bench_function(name, |b| {
            let planner_config = PlannerConfig::new(algorithm, BanditAlgo::thompson())
                .with_budget(100, 10)
                .with_seed(5);
            b.iter_batched(
                || Planner::new(planner_config.clone()),
                |mut planner| planner.plan(black_box(&state)).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, grid_benches, bandit_benches, planner_benches);
criterion_main!(benches);
