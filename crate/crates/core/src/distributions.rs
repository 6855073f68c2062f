//! Outcome tables `p(a,b,x,y,u,v | α,β)` and the definite-order
//! no-signalling checks.
//!
//! Values are stored flat in the order `(α, β, a, b, x, y, u, v)`, row-major.
//! Settings are always conditioned on: every `(α, β)` slice is a distribution
//! of its own.

use std::fmt;

use crate::algebra::LabeledOperator;
use crate::error::{Error, Result};
use crate::operations::OperationFamily;
use crate::processes::{ProcessFamily, A_I, A_O, B_I, B_O};

/// Table variables in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Alpha,
    Beta,
    A,
    B,
    X,
    Y,
    U,
    V,
}

impl Var {
    pub const ALL: [Var; 8] = [
        Var::Alpha,
        Var::Beta,
        Var::A,
        Var::B,
        Var::X,
        Var::Y,
        Var::U,
        Var::V,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::Alpha => "alpha",
            Var::Beta => "beta",
            Var::A => "a",
            Var::B => "b",
            Var::X => "x",
            Var::Y => "y",
            Var::U => "u",
            Var::V => "v",
        }
    }

    pub fn parse(s: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn is_setting(self) -> bool {
        matches!(self, Var::Alpha | Var::Beta)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Alphabet sizes in storage order.
pub type Alphabets = [usize; 8];

/// Entries may be slightly negative only through rounding.
pub const NONNEGATIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    alphabets: Alphabets,
    values: Vec<f64>,
}

fn strides(alphabets: &Alphabets) -> [usize; 8] {
    let mut s = [1; 8];
    for k in (0..7).rev() {
        s[k] = s[k + 1] * alphabets[k + 1];
    }
    s
}

fn unflatten(alphabets: &Alphabets, mut k: usize) -> [usize; 8] {
    let mut idx = [0; 8];
    for p in (0..8).rev() {
        idx[p] = k % alphabets[p];
        k /= alphabets[p];
    }
    idx
}

impl JointDistribution {
    pub fn new(alphabets: Alphabets, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = Var::ALL.iter().find(|v| alphabets[v.index()] == 0) {
            return Err(Error::InvalidArgument(format!("alphabet of `{v}` is empty")));
        }
        let n: usize = alphabets.iter().product();
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} values for alphabets {alphabets:?}",
                values.len()
            )));
        }
        Ok(Self { alphabets, values })
    }

    pub fn from_fn(alphabets: Alphabets, mut f: impl FnMut(&[usize; 8]) -> f64) -> Result<Self> {
        let n: usize = alphabets.iter().product();
        let values = (0..n).map(|k| f(&unflatten(&alphabets, k))).collect();
        Self::new(alphabets, values)
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn size(&self, var: Var) -> usize {
        self.alphabets[var.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn flat(&self, idx: &[usize; 8]) -> usize {
        let st = strides(&self.alphabets);
        idx.iter()
            .zip(&self.alphabets)
            .zip(&st)
            .map(|((&i, &n), &s)| {
                assert!(i < n, "index {i} out of range {n}");
                i * s
            })
            .sum()
    }

    /// Entry at `(α, β, a, b, x, y, u, v)`.
    pub fn get(&self, idx: &[usize; 8]) -> f64 {
        self.values[self.flat(idx)]
    }

    pub fn iter(&self) -> impl Iterator<Item = ([usize; 8], f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (unflatten(&self.alphabets, k), v))
    }

    pub fn slice_total(&self, alpha: usize, beta: usize) -> f64 {
        self.iter()
            .filter(|(i, _)| i[0] == alpha && i[1] == beta)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|Σ slice − 1|` over all `(α, β)`.
    pub fn normalization_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for alpha in 0..self.size(Var::Alpha) {
            for beta in 0..self.size(Var::Beta) {
                worst = worst.max((self.slice_total(alpha, beta) - 1.0).abs());
            }
        }
        worst
    }

    /// Nonnegative within [`NONNEGATIVITY_TOL`] and normalized within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.min_entry() >= -NONNEGATIVITY_TOL && self.normalization_error() <= tol
    }

    /// Sums out `vars`; their alphabets become size 1. Settings are rejected.
    pub fn marginalize(&self, vars: &[Var]) -> Result<Self> {
        if let Some(v) = vars.iter().find(|v| v.is_setting()) {
            return Err(Error::InvalidArgument(format!(
                "setting `{v}` cannot be marginalized"
            )));
        }
        let mut alphabets = self.alphabets;
        for v in vars {
            alphabets[v.index()] = 1;
        }
        let n: usize = alphabets.iter().product();
        let mut out = Self {
            alphabets,
            values: vec![0.0; n],
        };
        for (mut idx, p) in self.iter() {
            for v in vars {
                idx[v.index()] = 0;
            }
            let k = out.flat(&idx);
            out.values[k] += p;
        }
        Ok(out)
    }

    /// Bayes conditioning on `assignment` within each `(α, β)` slice. The
    /// assigned variables are removed (alphabet size 1).
    pub fn condition(&self, assignment: &[(Var, usize)]) -> Result<Self> {
        for (v, value) in assignment {
            if v.is_setting() {
                return Err(Error::InvalidArgument(format!(
                    "setting `{v}` is already conditioned on in every slice"
                )));
            }
            if *value >= self.size(*v) {
                return Err(Error::IndexOutOfRange(format!(
                    "`{v}` = {value} with alphabet size {}",
                    self.size(*v)
                )));
            }
        }
        let mut alphabets = self.alphabets;
        for (v, _) in assignment {
            alphabets[v.index()] = 1;
        }
        let n: usize = alphabets.iter().product();
        let mut out = Self {
            alphabets,
            values: vec![0.0; n],
        };
        for (mut idx, p) in self.iter() {
            if assignment.iter().all(|(v, value)| idx[v.index()] == *value) {
                for (v, _) in assignment {
                    idx[v.index()] = 0;
                }
                let k = out.flat(&idx);
                out.values[k] = p;
            }
        }
        for alpha in 0..self.size(Var::Alpha) {
            for beta in 0..self.size(Var::Beta) {
                let z = out.slice_total(alpha, beta);
                if z <= 0.0 {
                    return Err(Error::ZeroProbability(format!("alpha={alpha}, beta={beta}")));
                }
                for (k, idx) in (0..n).map(|k| (k, unflatten(&alphabets, k))) {
                    if idx[0] == alpha && idx[1] == beta {
                        out.values[k] /= z;
                    }
                }
            }
        }
        Ok(out)
    }
}

impl JointDistribution {
    /// Exchanges incomes with outcomes (`a ↔ x`, `b ↔ y`), turning forward
    /// game statistics into backward ones.
    pub fn swap_incomes_and_outcomes(&self) -> Self {
        let mut alphabets = self.alphabets;
        alphabets.swap(Var::A.index(), Var::X.index());
        alphabets.swap(Var::B.index(), Var::Y.index());
        let mut out = Self {
            alphabets,
            values: vec![0.0; self.values.len()],
        };
        for (mut idx, p) in self.iter() {
            idx.swap(Var::A.index(), Var::X.index());
            idx.swap(Var::B.index(), Var::Y.index());
            let k = out.flat(&idx);
            out.values[k] = p;
        }
        out
    }
}

/// `q·d1 + (1−q)·d2` entrywise.
pub fn mix(d1: &JointDistribution, d2: &JointDistribution, q: f64) -> Result<JointDistribution> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("mixing weight {q} outside [0, 1]")));
    }
    if d1.alphabets != d2.alphabets {
        return Err(Error::DimensionMismatch(format!(
            "alphabets differ: {:?} vs {:?}",
            d1.alphabets, d2.alphabets
        )));
    }
    let values = d1
        .values
        .iter()
        .zip(&d2.values)
        .map(|(a, b)| q * a + (1.0 - q) * b)
        .collect();
    JointDistribution::new(d1.alphabets, values)
}

fn party_block(op: &OperationFamily, party: &str) -> Result<()> {
    let labels = op.factors();
    let expected = [format!("{party}_I"), format!("{party}_O")];
    if labels[0].label() != expected[0] || labels[1].label() != expected[1] {
        return Err(Error::DimensionMismatch(format!(
            "operation acts on {}/{}, expected {}/{}",
            labels[0].label(),
            labels[1].label(),
            expected[0],
            expected[1]
        )));
    }
    Ok(())
}

/// `p(a,b,x,y,u,v|α,β) = Tr[W_{u,v} (M_{a,x}[α] ⊗ M_{b,y}[β])] / (N_a N_b)`.
///
/// The result is returned even if it is not a valid distribution; a negative
/// entry or a broken slice total is evidence against the inputs and is
/// exposed through [`JointDistribution::is_valid`].
pub fn joint_from_process(
    w: &ProcessFamily,
    op_a: &OperationFamily,
    op_b: &OperationFamily,
) -> Result<JointDistribution> {
    party_block(op_a, "A")?;
    party_block(op_b, "B")?;
    if op_a.dim() != w.d_a() || op_b.dim() != w.d_b() {
        return Err(Error::DimensionMismatch(format!(
            "operation dims ({}, {}) do not match process dims ({}, {})",
            op_a.dim(),
            op_b.dim(),
            w.d_a(),
            w.d_b()
        )));
    }
    debug_assert_eq!(w.factors()[0].label(), A_I);
    debug_assert_eq!(w.factors()[1].label(), A_O);
    debug_assert_eq!(w.factors()[2].label(), B_I);
    debug_assert_eq!(w.factors()[3].label(), B_O);
    let alphabets = [
        op_a.n_settings(),
        op_b.n_settings(),
        op_a.n_incomes(),
        op_b.n_incomes(),
        op_a.n_outcomes(),
        op_b.n_outcomes(),
        w.n_pre(),
        w.n_post(),
    ];
    let na = w.d_a() * w.d_a();
    let nb = w.d_b() * w.d_b();
    let norm = 1.0 / (op_a.n_incomes() * op_b.n_incomes()) as f64;
    let mut values = vec![0.0; alphabets.iter().product()];
    let st = strides(&alphabets);
    for u in 0..w.n_pre() {
        for v in 0..w.n_post() {
            let wm = w.element(u, v).matrix();
            for alpha in 0..alphabets[0] {
                for a in 0..alphabets[2] {
                    for x in 0..alphabets[4] {
                        let ma = op_a.element(alpha, a, x).matrix();
                        // R = Tr_A[W (M_A ⊗ 1)], an operator on Bob's block
                        let reduced = nalgebra::DMatrix::from_fn(nb, nb, |k, l| {
                            let mut acc = num_complex::Complex64::new(0.0, 0.0);
                            for i in 0..na {
                                for j in 0..na {
                                    acc += wm[(i * nb + k, j * nb + l)] * ma[(j, i)];
                                }
                            }
                            acc
                        });
                        let r = LabeledOperator::new(
                            op_b.element(0, 0, 0).factors().to_vec(),
                            reduced,
                        )?;
                        for beta in 0..alphabets[1] {
                            for b in 0..alphabets[3] {
                                for y in 0..alphabets[5] {
                                    let p = r.hs_inner(op_b.element(beta, b, y))? * norm;
                                    let idx = [alpha, beta, a, b, x, y, u, v];
                                    let k: usize = idx.iter().zip(&st).map(|(i, s)| i * s).sum();
                                    values[k] = p;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    JointDistribution::new(alphabets, values)
}

/// One of the four definite-order no-signalling factorizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderCondition {
    /// A⪯B, `y, v` summed: Bob's variables cannot reach Alice.
    ABForward,
    /// A⪯B, `a, u` summed: Alice's outcome is uniform and independent of her setting.
    ABBackward,
    /// B⪯A, `x, v` summed: Alice's variables cannot reach Bob.
    BAForward,
    /// B⪯A, `b, u` summed: Bob's outcome is uniform and independent of his setting.
    BABackward,
}

impl OrderCondition {
    pub const ALL: [OrderCondition; 4] = [
        Self::ABForward,
        Self::ABBackward,
        Self::BAForward,
        Self::BABackward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ABForward => "A<=B forward",
            Self::ABBackward => "A<=B backward",
            Self::BAForward => "B<=A forward",
            Self::BABackward => "B<=A backward",
        }
    }

    /// `(summed variables, uniform variable, setting the reference keeps)`.
    fn shape(self) -> ([Var; 2], Var, Var) {
        match self {
            Self::ABForward => ([Var::Y, Var::V], Var::B, Var::Alpha),
            Self::ABBackward => ([Var::A, Var::U], Var::X, Var::Beta),
            Self::BAForward => ([Var::X, Var::V], Var::A, Var::Beta),
            Self::BABackward => ([Var::B, Var::U], Var::Y, Var::Alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCheck {
    pub condition: OrderCondition,
    /// Largest entrywise deviation from the factorized form.
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub checks: Vec<OrderCheck>,
}

impl OrderReport {
    pub fn get(&self, condition: OrderCondition) -> &OrderCheck {
        self.checks
            .iter()
            .find(|c| c.condition == condition)
            .expect("all four conditions are checked")
    }

    pub fn passed(&self, condition: OrderCondition) -> bool {
        self.get(condition).passed
    }
}

/// Largest deviation of `p(K | α, β)` from `(1/N_F) Σ_F p(K | s)` where `K`
/// are the remaining variables, `F` is the uniform variable, and the
/// reference depends only on setting `s` (averaged over the other setting).
fn order_residual(d: &JointDistribution, condition: OrderCondition) -> Result<f64> {
    let (summed, uniform, kept_setting) = condition.shape();
    let m = d.marginalize(&summed)?;
    let reduced = m.marginalize(&[uniform])?;
    let other = if kept_setting == Var::Alpha { Var::Beta } else { Var::Alpha };
    let n_uniform = d.size(uniform) as f64;
    let n_other = d.size(other) as f64;
    let mut reference = vec![0.0; reduced.values.len()];
    for (mut idx, p) in reduced.iter() {
        idx[other.index()] = 0;
        let k = reduced.flat(&idx);
        reference[k] += p / n_other;
    }
    let mut worst = 0.0f64;
    for (idx, p) in m.iter() {
        let mut r = idx;
        r[uniform.index()] = 0;
        r[other.index()] = 0;
        let expected = reference[reduced.flat(&r)] / n_uniform;
        worst = worst.max((p - expected).abs());
    }
    Ok(worst)
}

pub fn check_order_compatibility(d: &JointDistribution, tol: f64) -> Result<OrderReport> {
    let checks = OrderCondition::ALL
        .into_iter()
        .map(|condition| {
            let residual = order_residual(d, condition)?;
            Ok(OrderCheck {
                condition,
                residual,
                passed: residual <= tol,
            })
        })
        .collect::<Result<_>>()?;
    Ok(OrderReport { checks })
}
