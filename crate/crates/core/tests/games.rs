use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use tsproc_core::distributions::{check_order_compatibility, mix, OrderCondition};
use tsproc_core::inequalities::{
    classical_bound, evaluate, DeterministicStrategy, Direction, EvalOptions, Game, Order, SettingConvention,
};

fn condition_for(direction: Direction, order: Order) -> OrderCondition {
    match (direction, order) {
        (Direction::Forward, Order::AliceFirst) => OrderCondition::ABForward,
        (Direction::Forward, Order::BobFirst) => OrderCondition::BAForward,
        (Direction::Backward, Order::AliceFirst) => OrderCondition::ABBackward,
        (Direction::Backward, Order::BobFirst) => OrderCondition::BABackward,
    }
}

fn strategy() -> impl Strategy<Value = DeterministicStrategy> {
    (
        prop_oneof![Just(Direction::Forward), Just(Direction::Backward)],
        prop_oneof![Just(Order::AliceFirst), Just(Order::BobFirst)],
        1usize..=2,
        1usize..=2,
        any::<u64>(),
        any::<u64>(),
    )
        .prop_map(|(direction, order, n_alpha, n_beta, f, g)| {
            let (df, dg) = DeterministicStrategy::domain_sizes(direction, order, n_alpha, n_beta);
            DeterministicStrategy { direction, order, n_alpha, n_beta, f: f & ((1 << df) - 1), g: g & ((1 << dg) - 1) }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn strategy_tables_respect_their_order(s in strategy()) {
        let t = s.table();
        prop_assert!(t.normalization_error() < 1e-12);
        let report = check_order_compatibility(&t, 1e-9).unwrap();
        let cond = condition_for(s.direction, s.order);
        prop_assert!(report.passed(cond), "{} failed", cond.name());
    }

    #[test]
    fn table_value_matches_win_count(s in strategy()) {
        let t = s.table();
        for game in [Game::Gyni, Game::Lgyni] {
            let v = evaluate(&t, game, s.direction, &EvalOptions::default()).unwrap().value;
            let rounds = (s.n_alpha * s.n_beta * 4) as f64;
            let wins = s.wins(game, SettingConvention::default()) as f64;
            prop_assert!((v - wins / rounds).abs() < 1e-12);
        }
    }

    #[test]
    fn swapping_roles_swaps_directions(s in strategy()) {
        let t = s.table();
        let swapped = t.swap_incomes_and_outcomes();
        let other = match s.direction {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        };
        for game in [Game::Gyni, Game::Lgyni] {
            let here = evaluate(&t, game, s.direction, &EvalOptions::default()).unwrap().value;
            let there = evaluate(&swapped, game, other, &EvalOptions::default()).unwrap().value;
            prop_assert!((here - there).abs() < 1e-12);
        }
    }
}

/// Random mixtures of vertices from both orders stay below the oracle bound.
#[test]
fn causal_mixtures_respect_the_bound() {
    let mut rng = StdRng::seed_from_u64(99);
    for game in [Game::Gyni, Game::Lgyni] {
        for direction in [Direction::Forward, Direction::Backward] {
            let bound = classical_bound(game, direction, 2, 2, SettingConvention::default()).unwrap();
            for _ in 0..250 {
                let mut acc = None;
                for k in 0..4u32 {
                    let order = if rng.random_bool(0.5) { Order::AliceFirst } else { Order::BobFirst };
                    let (df, dg) = DeterministicStrategy::domain_sizes(direction, order, 2, 2);
                    let s = DeterministicStrategy {
                        direction,
                        order,
                        n_alpha: 2,
                        n_beta: 2,
                        f: rng.random::<u64>() & ((1 << df) - 1),
                        g: rng.random::<u64>() & ((1 << dg) - 1),
                    };
                    let t = s.table();
                    acc = Some(match acc {
                        None => t,
                        // weight 1/(k+1) for the newest keeps the running mixture uniform
                        Some(prev) => mix(&t, &prev, 1.0 / (k as f64 + 1.0)).unwrap(),
                    });
                }
                let v = evaluate(&acc.unwrap(), game, direction, &EvalOptions::default()).unwrap().value;
                assert!(v <= bound + 1e-12, "{game} {direction:?}: {v} > {bound}");
            }
        }
    }
}
