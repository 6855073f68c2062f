//! Forward and backward GYNI / LGYNI game values and their classical bounds.
//!
//! Forward games score how well outcomes guess the neighbour's income,
//! conditioned on incomes; backward games score how well incomes match the
//! neighbour's outcome, conditioned on outcomes. All alphabets for `a, b, x,
//! y` are binary.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use crate::distributions::{JointDistribution, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Game {
    Gyni,
    Lgyni,
}

impl Game {
    pub fn name(self) -> &'static str {
        match self {
            Game::Gyni => "gyni",
            Game::Lgyni => "lgyni",
        }
    }

    pub fn parse(s: &str) -> Option<Game> {
        [Game::Gyni, Game::Lgyni].into_iter().find(|g| g.name() == s)
    }
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        [Direction::Forward, Direction::Backward]
            .into_iter()
            .find(|d| d.name() == s)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How LGYNI gates are assigned when only one party holds a binary setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SettingConvention {
    /// The holder's setting picks who must guess: setting `1` makes the
    /// holder guess, setting `0` makes the neighbour guess.
    #[default]
    AlternatingGuesser,
    /// The missing setting is fixed at `1`, so the holder's neighbour must
    /// always guess.
    MissingSettingIsOne,
}

/// `(A guesses, B guesses)` gates for one setting pair.
///
/// In a forward game "A guesses" means `x = b` must hold and "B guesses"
/// means `y = a`; in a backward game they are `a = y` and `b = x`. The
/// neighbour's setting gates each guess.
pub fn lgyni_gates(
    alpha: usize,
    beta: usize,
    n_alpha: usize,
    n_beta: usize,
    convention: SettingConvention,
) -> (bool, bool) {
    // (α', β') weights as they enter δ_{α'(y⊕a),0} δ_{β'(x⊕b),0}
    let (ga, gb) = match (n_alpha, n_beta, convention) {
        (2, 2, _) => (alpha, beta),
        (1, 1, _) => (1, 1),
        (1, 2, SettingConvention::AlternatingGuesser) => (beta, 1 - beta),
        (2, 1, SettingConvention::AlternatingGuesser) => (1 - alpha, alpha),
        (1, 2, SettingConvention::MissingSettingIsOne) => (1, beta),
        (2, 1, SettingConvention::MissingSettingIsOne) => (alpha, 1),
        _ => unreachable!("setting alphabets are checked before gating"),
    };
    // α' gates Bob's guess and β' gates Alice's guess
    (gb == 1, ga == 1)
}

/// Whether one deterministic round wins. `(a, b, x, y)` are the values of
/// the round; for backward games the roles of guess and target swap.
fn round_wins(
    game: Game,
    direction: Direction,
    gates: (bool, bool),
    a: usize,
    b: usize,
    x: usize,
    y: usize,
) -> bool {
    let (alice_must, bob_must) = match game {
        Game::Gyni => (true, true),
        Game::Lgyni => gates,
    };
    let alice_ok = !alice_must || match direction {
        Direction::Forward => x == b,
        Direction::Backward => a == y,
    };
    let bob_ok = !bob_must || match direction {
        Direction::Forward => y == a,
        Direction::Backward => b == x,
    };
    alice_ok && bob_ok
}

fn check_binary(d: &JointDistribution) -> Result<()> {
    for v in [Var::A, Var::B, Var::X, Var::Y] {
        if d.size(v) != 2 {
            return Err(Error::InvalidArgument(format!(
                "games need binary `{v}`, alphabet has size {}",
                d.size(v)
            )));
        }
    }
    Ok(())
}

fn check_settings(game: Game, n_alpha: usize, n_beta: usize) -> Result<()> {
    let limit = match game {
        Game::Gyni => usize::MAX,
        Game::Lgyni => 2,
    };
    if n_alpha == 0 || n_beta == 0 || n_alpha > limit || n_beta > limit {
        return Err(Error::InvalidArgument(format!(
            "{game} is defined for 1 or 2 settings per party, got ({n_alpha}, {n_beta})"
        )));
    }
    Ok(())
}

/// Game value on a table whose selection variables are already fixed
/// (`N_u = N_v = 1`).
pub fn game_value(
    d: &JointDistribution,
    game: Game,
    direction: Direction,
    convention: SettingConvention,
) -> Result<f64> {
    check_binary(d)?;
    if d.size(Var::U) != 1 || d.size(Var::V) != 1 {
        return Err(Error::InvalidArgument(
            "condition on the selection variables before scoring".into(),
        ));
    }
    let (na, nb) = (d.size(Var::Alpha), d.size(Var::Beta));
    check_settings(game, na, nb)?;
    let mut total = 0.0;
    for alpha in 0..na {
        for beta in 0..nb {
            let gates = lgyni_gates_or_all(game, alpha, beta, na, nb, convention);
            for c0 in 0..2 {
                for c1 in 0..2 {
                    // (c0, c1) are the conditioned pair: incomes forward, outcomes backward
                    let at = |o0: usize, o1: usize| match direction {
                        Direction::Forward => [alpha, beta, c0, c1, o0, o1, 0, 0],
                        Direction::Backward => [alpha, beta, o0, o1, c0, c1, 0, 0],
                    };
                    let z: f64 = (0..4).map(|k| d.get(&at(k / 2, k % 2))).sum();
                    if z <= 0.0 {
                        return Err(Error::ZeroProbability(format!(
                            "alpha={alpha}, beta={beta}, conditioning pair ({c0}, {c1})"
                        )));
                    }
                    for o0 in 0..2 {
                        for o1 in 0..2 {
                            let idx = at(o0, o1);
                            let (a, b, x, y) = (idx[2], idx[3], idx[4], idx[5]);
                            if round_wins(game, direction, gates, a, b, x, y) {
                                total += d.get(&idx) / z;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(total / (na * nb * 4) as f64)
}

fn lgyni_gates_or_all(
    game: Game,
    alpha: usize,
    beta: usize,
    na: usize,
    nb: usize,
    convention: SettingConvention,
) -> (bool, bool) {
    match game {
        Game::Gyni => (true, true),
        Game::Lgyni => lgyni_gates(alpha, beta, na, nb, convention),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameResult {
    pub game: Game,
    pub direction: Direction,
    pub value: f64,
    /// Classical bound from strategy enumeration at the table's settings.
    pub bound: f64,
    pub violated: bool,
}

/// A value must exceed the bound by more than this to count as a violation.
pub const VIOLATION_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    /// Pre-selection value to condition on; required when `N_u > 1`.
    pub u: Option<usize>,
    /// Post-selection value to condition on; required when `N_v > 1`.
    pub v: Option<usize>,
    pub convention: SettingConvention,
}

fn select(d: &JointDistribution, opts: &EvalOptions) -> Result<JointDistribution> {
    let mut assignment = Vec::new();
    for (var, value) in [(Var::U, opts.u), (Var::V, opts.v)] {
        match value {
            Some(k) => assignment.push((var, k)),
            None if d.size(var) == 1 => {}
            None => {
                return Err(Error::InvalidArgument(format!(
                    "`{var}` has {} values; choose one to condition on",
                    d.size(var)
                )))
            }
        }
    }
    if assignment.is_empty() {
        Ok(d.clone())
    } else {
        d.condition(&assignment)
    }
}

pub fn evaluate(
    d: &JointDistribution,
    game: Game,
    direction: Direction,
    opts: &EvalOptions,
) -> Result<GameResult> {
    let selected = select(d, opts)?;
    let value = game_value(&selected, game, direction, opts.convention)?;
    let bound = classical_bound(
        game,
        direction,
        selected.size(Var::Alpha),
        selected.size(Var::Beta),
        opts.convention,
    )?;
    Ok(GameResult {
        game,
        direction,
        value,
        bound,
        violated: value > bound + VIOLATION_MARGIN,
    })
}

pub fn eval_gyni(d: &JointDistribution, direction: Direction) -> Result<GameResult> {
    evaluate(d, Game::Gyni, direction, &EvalOptions::default())
}

pub fn eval_lgyni(d: &JointDistribution, direction: Direction) -> Result<GameResult> {
    evaluate(d, Game::Lgyni, direction, &EvalOptions::default())
}

/// Definite causal order of a deterministic strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    AliceFirst,
    BobFirst,
}

/// A vertex of the causal polytope. Two response tables `f` (Alice) and `g`
/// (Bob) are stored as bit masks.
///
/// Forward, Alice first: `x = f(α, a)`, `y = g(β, b, α, a)`.
/// Forward, Bob first: `y = g(β, b)`, `x = f(α, a, β, b)`.
/// Backward, Alice first: `b = g(β, y)`, `a = f(α, x, β, y)`.
/// Backward, Bob first: `a = f(α, x)`, `b = g(β, y, α, x)`.
///
/// The free variables (incomes forward, outcomes backward) are uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeterministicStrategy {
    pub direction: Direction,
    pub order: Order,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub f: u64,
    pub g: u64,
}

/// Whose response is independent of the other party. Backward, the later
/// party in time answers first.
fn responder_first(direction: Direction, order: Order) -> Order {
    match (direction, order) {
        (Direction::Forward, o) => o,
        (Direction::Backward, Order::AliceFirst) => Order::BobFirst,
        (Direction::Backward, Order::BobFirst) => Order::AliceFirst,
    }
}

fn bit(mask: u64, k: usize) -> usize {
    ((mask >> k) & 1) as usize
}

impl DeterministicStrategy {
    /// `(|f domain|, |g domain|)`.
    pub fn domain_sizes(direction: Direction, order: Order, n_alpha: usize, n_beta: usize) -> (usize, usize) {
        match responder_first(direction, order) {
            Order::AliceFirst => (2 * n_alpha, 4 * n_alpha * n_beta),
            Order::BobFirst => (4 * n_alpha * n_beta, 2 * n_beta),
        }
    }

    /// Responses `(r_A, r_B)` given settings and free variables `(c_A, c_B)`.
    pub fn respond(&self, alpha: usize, beta: usize, c_a: usize, c_b: usize) -> (usize, usize) {
        let (na, nb) = (self.n_alpha, self.n_beta);
        match responder_first(self.direction, self.order) {
            Order::AliceFirst => {
                let ra = bit(self.f, alpha * 2 + c_a);
                let rb = bit(self.g, ((beta * 2 + c_b) * na + alpha) * 2 + c_a);
                (ra, rb)
            }
            Order::BobFirst => {
                let rb = bit(self.g, beta * 2 + c_b);
                let ra = bit(self.f, ((alpha * 2 + c_a) * nb + beta) * 2 + c_b);
                (ra, rb)
            }
        }
    }

    /// Number of winning `(α, β, c_A, c_B)` rounds.
    pub fn wins(&self, game: Game, convention: SettingConvention) -> u64 {
        let mut count = 0;
        for alpha in 0..self.n_alpha {
            for beta in 0..self.n_beta {
                let gates = lgyni_gates_or_all(game, alpha, beta, self.n_alpha, self.n_beta, convention);
                for c_a in 0..2 {
                    for c_b in 0..2 {
                        let (ra, rb) = self.respond(alpha, beta, c_a, c_b);
                        let (a, b, x, y) = match self.direction {
                            Direction::Forward => (c_a, c_b, ra, rb),
                            Direction::Backward => (ra, rb, c_a, c_b),
                        };
                        if round_wins(game, self.direction, gates, a, b, x, y) {
                            count += 1;
                        }
                    }
                }
            }
        }
        count
    }

    /// Outcome table with uniform free variables; `N_u = N_v = 1`.
    pub fn table(&self) -> JointDistribution {
        JointDistribution::from_fn([self.n_alpha, self.n_beta, 2, 2, 2, 2, 1, 1], |i| {
            let (alpha, beta, a, b, x, y) = (i[0], i[1], i[2], i[3], i[4], i[5]);
            let (c_a, c_b, r_a, r_b) = match self.direction {
                Direction::Forward => (a, b, x, y),
                Direction::Backward => (x, y, a, b),
            };
            if self.respond(alpha, beta, c_a, c_b) == (r_a, r_b) {
                0.25
            } else {
                0.0
            }
        })
        .expect("alphabets are non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub game: Game,
    pub direction: Direction,
    pub n_alpha: usize,
    pub n_beta: usize,
    /// Best number of winning rounds out of `rounds`.
    pub wins: u64,
    pub rounds: u64,
    pub bound: f64,
    pub strategies: u128,
    pub best: DeterministicStrategy,
}

/// Default enumeration cap, in strategies summed over both orders.
pub const DEFAULT_STRATEGY_CAP: u128 = 1 << 26;

/// Exact maximum of the game over every deterministic strategy of both
/// causal orders.
pub fn classical_bound_oracle(
    game: Game,
    direction: Direction,
    n_alpha: usize,
    n_beta: usize,
    convention: SettingConvention,
    cap: u128,
) -> Result<OracleResult> {
    check_settings(game, n_alpha, n_beta)?;
    let orders = [Order::AliceFirst, Order::BobFirst];
    let mut strategies: u128 = 0;
    for order in orders {
        let (df, dg) = DeterministicStrategy::domain_sizes(direction, order, n_alpha, n_beta);
        if df + dg >= 127 {
            return Err(Error::EnumerationCap { strategies: u128::MAX, cap });
        }
        strategies += 1u128 << (df + dg);
    }
    if strategies > cap {
        return Err(Error::EnumerationCap { strategies, cap });
    }
    let rounds = (n_alpha * n_beta * 4) as u64;
    let mut best: Option<(u64, DeterministicStrategy)> = None;
    for order in orders {
        let (df, dg) = DeterministicStrategy::domain_sizes(direction, order, n_alpha, n_beta);
        for f in 0..(1u64 << df) {
            for g in 0..(1u64 << dg) {
                let s = DeterministicStrategy { direction, order, n_alpha, n_beta, f, g };
                let w = s.wins(game, convention);
                if best.is_none_or(|(bw, _)| w > bw) {
                    best = Some((w, s));
                }
            }
        }
    }
    let (wins, best) = best.expect("at least one strategy");
    Ok(OracleResult {
        game,
        direction,
        n_alpha,
        n_beta,
        wins,
        rounds,
        bound: wins as f64 / rounds as f64,
        strategies,
        best,
    })
}

type BoundKey = (Game, Direction, usize, usize, SettingConvention);

/// Memoized oracle bound.
pub fn classical_bound(
    game: Game,
    direction: Direction,
    n_alpha: usize,
    n_beta: usize,
    convention: SettingConvention,
) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<BoundKey, f64>>> = OnceLock::new();
    let key = (game, direction, n_alpha, n_beta, convention);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(b) = cache.lock().expect("cache lock").get(&key) {
        return Ok(*b);
    }
    let bound = classical_bound_oracle(game, direction, n_alpha, n_beta, convention, DEFAULT_STRATEGY_CAP)?.bound;
    cache.lock().expect("cache lock").insert(key, bound);
    Ok(bound)
}
