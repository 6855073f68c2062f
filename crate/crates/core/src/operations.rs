//! Time-symmetric local operations in the Choi-Jamiolkowski representation.
//!
//! An operation family for one party holds `M[s][a][x]` on `X_I ⊗ X_O`, indexed
//! by setting `s`, income `a` and outcome `x`. It is physical when every
//! element is positive semi-definite and both causality conditions hold:
//!
//! * forward: `Tr_O Σ_x M_{a,x} = 1_I` for every setting and income;
//! * backward: `(1/N_a) Tr_I Σ_a M_{a,x} = (1/N_x) 1_O` for every setting and outcome.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{mats, HilbertFactor, LabeledOperator};
use crate::error::{Error, Result};
use crate::report::ValidationReport;
use crate::sampling;

pub const FORWARD_CAUSALITY: &str = "forward-causality";
pub const BACKWARD_CAUSALITY: &str = "backward-causality";

/// Input and output factor labels of a party, e.g. `A_I`, `A_O`.
pub fn party_factors(party: &str, dim: usize) -> Result<[HilbertFactor; 2]> {
    Ok([
        HilbertFactor::new(format!("{party}_I"), dim)?,
        HilbertFactor::new(format!("{party}_O"), dim)?,
    ])
}

fn check_alphabet(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument(format!("{name} alphabet must be non-empty")))
    } else {
        Ok(())
    }
}

fn check_element(el: &LabeledOperator, factors: &[HilbertFactor; 2]) -> Result<()> {
    if el.factors() != factors.as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "element acts on {:?}, expected {:?}",
            el.labels(),
            factors.iter().map(|f| f.label()).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationFamily {
    party: String,
    dim: usize,
    n_settings: usize,
    n_incomes: usize,
    n_outcomes: usize,
    elements: Vec<LabeledOperator>,
}

impl OperationFamily {
    /// `elements` are ordered by `(setting, income, outcome)`, outcome fastest.
    pub fn new(
        party: &str,
        dim: usize,
        n_settings: usize,
        n_incomes: usize,
        n_outcomes: usize,
        elements: Vec<LabeledOperator>,
    ) -> Result<Self> {
        check_alphabet("setting", n_settings)?;
        check_alphabet("income", n_incomes)?;
        check_alphabet("outcome", n_outcomes)?;
        let expected = n_settings * n_incomes * n_outcomes;
        if elements.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} elements supplied, alphabets require {expected}",
                elements.len()
            )));
        }
        let factors = party_factors(party, dim)?;
        for el in &elements {
            check_element(el, &factors)?;
        }
        Ok(Self {
            party: party.to_string(),
            dim,
            n_settings,
            n_incomes,
            n_outcomes,
            elements,
        })
    }

    /// Builds each element from a `d² × d²` matrix returned by `f(s, a, x)`.
    pub fn from_fn(
        party: &str,
        dim: usize,
        n_settings: usize,
        n_incomes: usize,
        n_outcomes: usize,
        mut f: impl FnMut(usize, usize, usize) -> DMatrix<Complex64>,
    ) -> Result<Self> {
        let factors = party_factors(party, dim)?.to_vec();
        let mut elements = Vec::with_capacity(n_settings * n_incomes * n_outcomes);
        for s in 0..n_settings {
            for a in 0..n_incomes {
                for x in 0..n_outcomes {
                    elements.push(LabeledOperator::new(factors.clone(), f(s, a, x))?);
                }
            }
        }
        Self::new(party, dim, n_settings, n_incomes, n_outcomes, elements)
    }

    pub fn party(&self) -> &str {
        &self.party
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn n_incomes(&self) -> usize {
        self.n_incomes
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn input_label(&self) -> String {
        format!("{}_I", self.party)
    }

    pub fn output_label(&self) -> String {
        format!("{}_O", self.party)
    }

    pub fn factors(&self) -> Vec<HilbertFactor> {
        self.elements[0].factors().to_vec()
    }

    fn index(&self, s: usize, a: usize, x: usize) -> usize {
        (s * self.n_incomes + a) * self.n_outcomes + x
    }

    pub fn element(&self, s: usize, a: usize, x: usize) -> &LabeledOperator {
        assert!(
            s < self.n_settings && a < self.n_incomes && x < self.n_outcomes,
            "element ({s}, {a}, {x}) out of range"
        );
        &self.elements[self.index(s, a, x)]
    }

    pub fn elements(&self) -> &[LabeledOperator] {
        &self.elements
    }

    /// Same operation attributed to another party (factor labels renamed).
    pub fn with_party(&self, party: &str) -> Result<Self> {
        let (i, o) = (self.input_label(), self.output_label());
        let (ni, no) = (format!("{party}_I"), format!("{party}_O"));
        let elements = self
            .elements
            .iter()
            .map(|el| el.relabel(&[(&i, &ni), (&o, &no)]))
            .collect::<Result<_>>()?;
        Self::new(
            party,
            self.dim,
            self.n_settings,
            self.n_incomes,
            self.n_outcomes,
            elements,
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            elements: self.elements.iter().map(|e| e.scale(c)).collect(),
            ..self.clone()
        }
    }
}

/// Key used in reports and artifacts, e.g. `s0/a1/x0`.
pub fn element_key(s: usize, a: usize, x: usize) -> String {
    format!("s{s}/a{a}/x{x}")
}

/// A time-forward instrument family `M̄[s][x]` with no income index.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperationFamily {
    party: String,
    dim: usize,
    n_settings: usize,
    n_outcomes: usize,
    elements: Vec<LabeledOperator>,
}

impl ForwardOperationFamily {
    /// `elements` are ordered by `(setting, outcome)`, outcome fastest.
    pub fn new(
        party: &str,
        dim: usize,
        n_settings: usize,
        n_outcomes: usize,
        elements: Vec<LabeledOperator>,
    ) -> Result<Self> {
        check_alphabet("setting", n_settings)?;
        check_alphabet("outcome", n_outcomes)?;
        if elements.len() != n_settings * n_outcomes {
            return Err(Error::DimensionMismatch(format!(
                "{} elements supplied, alphabets require {}",
                elements.len(),
                n_settings * n_outcomes
            )));
        }
        let factors = party_factors(party, dim)?;
        for el in &elements {
            check_element(el, &factors)?;
        }
        Ok(Self {
            party: party.to_string(),
            dim,
            n_settings,
            n_outcomes,
            elements,
        })
    }

    pub fn party(&self) -> &str {
        &self.party
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn element(&self, s: usize, x: usize) -> &LabeledOperator {
        assert!(s < self.n_settings && x < self.n_outcomes, "element ({s}, {x}) out of range");
        &self.elements[s * self.n_outcomes + x]
    }

    pub fn elements(&self) -> &[LabeledOperator] {
        &self.elements
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            elements: self.elements.iter().map(|e| e.scale(c)).collect(),
            ..self.clone()
        }
    }
}

fn sum(ops: impl IntoIterator<Item = LabeledOperator>) -> Result<LabeledOperator> {
    let mut it = ops.into_iter();
    let first = it
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty sum".into()))?;
    it.try_fold(first, |acc, op| acc.add(&op))
}

/// Complete positivity plus both causality conditions.
pub fn validate_physical(op: &OperationFamily, tol: f64) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(format!("operation {}", op.party), tol);
    let (i, o) = (op.input_label(), op.output_label());
    for s in 0..op.n_settings {
        for a in 0..op.n_incomes {
            for x in 0..op.n_outcomes {
                report.push_element(&element_key(s, a, x), op.element(s, a, x));
            }
        }
    }
    let id_i = LabeledOperator::identity(vec![HilbertFactor::new(&i, op.dim)?])?;
    let id_o = LabeledOperator::identity(vec![HilbertFactor::new(&o, op.dim)?])?;
    for s in 0..op.n_settings {
        for a in 0..op.n_incomes {
            let total = sum((0..op.n_outcomes).map(|x| op.element(s, a, x).clone()))?;
            let residual = total.partial_trace(&[&o])?.sub(&id_i)?;
            report.push_operator(FORWARD_CAUSALITY, &format!("s{s}/a{a}"), &residual);
        }
        for x in 0..op.n_outcomes {
            let total = sum((0..op.n_incomes).map(|a| op.element(s, a, x).clone()))?;
            let residual = total
                .partial_trace(&[&i])?
                .scale(1.0 / op.n_incomes as f64)
                .sub(&id_o.scale(1.0 / op.n_outcomes as f64))?;
            report.push_operator(BACKWARD_CAUSALITY, &format!("s{s}/x{x}"), &residual);
        }
    }
    Ok(report)
}

/// Complete positivity plus forward causality.
pub fn validate_forward(op: &ForwardOperationFamily, tol: f64) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(format!("forward operation {}", op.party), tol);
    let o = format!("{}_O", op.party);
    let id_i = LabeledOperator::identity(vec![HilbertFactor::new(format!("{}_I", op.party), op.dim)?])?;
    for s in 0..op.n_settings {
        for x in 0..op.n_outcomes {
            report.push_element(&format!("s{s}/x{x}"), op.element(s, x));
        }
        let total = sum((0..op.n_outcomes).map(|x| op.element(s, x).clone()))?;
        let residual = total.partial_trace(&[&o])?.sub(&id_i)?;
        report.push_operator(FORWARD_CAUSALITY, &format!("s{s}"), &residual);
    }
    Ok(report)
}

/// Averaged operation `(1/N_a) Σ_{a,x} M_{a,x}` for each setting.
pub fn average(op: &OperationFamily) -> Result<Vec<LabeledOperator>> {
    (0..op.n_settings)
        .map(|s| {
            let total = sum((0..op.n_incomes).flat_map(|a| {
                (0..op.n_outcomes).map(move |x| op.element(s, a, x).clone())
            }))?;
            Ok(total.scale(1.0 / op.n_incomes as f64))
        })
        .collect()
}

/// The trivial operation `(1/d) 1` with singleton alphabets.
pub fn identity_operation(party: &str, d: usize) -> Result<OperationFamily> {
    OperationFamily::from_fn(party, d, 1, 1, 1, |_, _, _| {
        mats::identity(d * d).map(|z| z / d as f64)
    })
}

/// Measure `z` with outcome `x`, then prepare `|a⟩`:
/// `M_{a,x} = |x⟩⟨x| ⊗ |a⟩⟨a|`.
pub fn build_measure_prepare_z(party: &str) -> Result<OperationFamily> {
    OperationFamily::from_fn(party, 2, 1, 2, 2, |_, a, x| {
        mats::ket_bra(x, x, 2).kronecker(&mats::ket_bra(a, a, 2))
    })
}

/// State prepared by the gated operation on its `β = 1` branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GatedPreparation {
    /// The unit-trace maximally mixed state `1/2`.
    #[default]
    MaximallyMixed,
    /// The unnormalized operator `1`, which violates both causality conditions.
    UnitOperator,
}

/// Two-setting qubit operation with income `b` and outcome `y`.
///
/// * `β = 0`: measure `x` with outcome `y`, prepare `|b ⊕ y⟩`.
/// * `β = 1`: measure `z` with outcome `y`, prepare a state independent of `b`.
pub fn build_bob_gated(party: &str, preparation: GatedPreparation) -> Result<OperationFamily> {
    let prep_scale = match preparation {
        GatedPreparation::MaximallyMixed => 0.5,
        GatedPreparation::UnitOperator => 1.0,
    };
    OperationFamily::from_fn(party, 2, 2, 2, 2, |beta, b, y| {
        let sign = if y == 0 { 1.0 } else { -1.0 };
        if beta == 0 {
            mats::half_plus(&mats::pauli_x(), sign).kronecker(&mats::ket_bra(b ^ y, b ^ y, 2))
        } else {
            mats::ket_bra(y, y, 2).kronecker(&mats::identity(2).map(|z| z * prep_scale))
        }
    })
}

/// CJ operator `Σ_k Σ_{i,i'} |i⟩⟨i'| ⊗ K_k|i⟩⟨i'|K_k†` on `I ⊗ O`.
pub fn channel_to_cj(
    kraus: &[DMatrix<Complex64>],
    in_dim: usize,
    out_dim: usize,
) -> Result<LabeledOperator> {
    channel_to_cj_on(kraus, &HilbertFactor::new("I", in_dim)?, &HilbertFactor::new("O", out_dim)?)
}

/// [`channel_to_cj`] on caller-chosen factors.
pub fn channel_to_cj_on(
    kraus: &[DMatrix<Complex64>],
    input: &HilbertFactor,
    output: &HilbertFactor,
) -> Result<LabeledOperator> {
    let (din, dout) = (input.dim(), output.dim());
    for (k, m) in kraus.iter().enumerate() {
        if m.nrows() != dout || m.ncols() != din {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator {k} is {}x{}, expected {dout}x{din}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let n = din * dout;
    let mut matrix = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for m in kraus {
        for i in 0..din {
            for o in 0..dout {
                for ip in 0..din {
                    for op in 0..dout {
                        matrix[(i * dout + o, ip * dout + op)] += m[(o, i)] * m[(op, ip)].conj();
                    }
                }
            }
        }
    }
    LabeledOperator::new(vec![input.clone(), output.clone()], matrix)
}

/// How [`tf_to_ts`] fills the incomes other than the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LiftMode {
    /// First income carries `M̄_x` itself; fillers are
    /// `1/(d(N_a-1)) · 1 ⊗ [(N_a/N_x) 1 - Tr_I M̄_x]`. Physical for `N_a ≥ d N_x`.
    #[default]
    Repaired,
    /// First income carries `M̄_x / N_a`; fillers are
    /// `1/(d N_x (N_a-1)) · 1 ⊗ [N_a 1 - Tr_I M̄_x]`. Kept for comparison; it
    /// breaks causality whenever `N_a ≠ N_x`.
    Verbatim,
}

/// Lifts a forward instrument family to a time-symmetric family whose
/// income `0` reproduces the input.
pub fn tf_to_ts(
    tf: &ForwardOperationFamily,
    n_incomes: usize,
    mode: LiftMode,
) -> Result<OperationFamily> {
    let (d, nx, na) = (tf.dim, tf.n_outcomes, n_incomes);
    check_alphabet("income", na)?;
    if mode == LiftMode::Repaired && na < d * nx {
        return Err(Error::InvalidArgument(format!(
            "income alphabet {na} is smaller than d * N_x = {}",
            d * nx
        )));
    }
    let i = format!("{}_I", tf.party);
    let o = format!("{}_O", tf.party);
    let [fi, fo] = party_factors(&tf.party, d)?;
    let id_i = LabeledOperator::identity(vec![fi])?;
    let id_o = LabeledOperator::identity(vec![fo])?;
    let mut elements = Vec::with_capacity(tf.n_settings * na * nx);
    for s in 0..tf.n_settings {
        for a in 0..na {
            for x in 0..nx {
                let mbar = tf.element(s, x);
                let el = if a == 0 {
                    match mode {
                        LiftMode::Repaired => mbar.clone(),
                        LiftMode::Verbatim => mbar.scale(1.0 / na as f64),
                    }
                } else {
                    let marginal = mbar.partial_trace(&[&i])?;
                    let (prefactor, weight) = match mode {
                        LiftMode::Repaired => {
                            (1.0 / (d * (na - 1)) as f64, na as f64 / nx as f64)
                        }
                        LiftMode::Verbatim => (1.0 / (d * nx * (na - 1)) as f64, na as f64),
                    };
                    let bracket = id_o.scale(weight).sub(&marginal)?;
                    id_i.tensor(&bracket)?.scale(prefactor).permute_factors(&[&i, &o])?
                };
                elements.push(el);
            }
        }
    }
    OperationFamily::new(&tf.party, d, tf.n_settings, na, nx, elements)
}

/// The forward family obtained by fixing the income.
pub fn ts_to_tf(op: &OperationFamily, income: usize) -> Result<ForwardOperationFamily> {
    if income >= op.n_incomes {
        return Err(Error::IndexOutOfRange(format!(
            "income {income} with alphabet size {}",
            op.n_incomes
        )));
    }
    let elements = (0..op.n_settings)
        .flat_map(|s| (0..op.n_outcomes).map(move |x| op.element(s, income, x).clone()))
        .collect();
    ForwardOperationFamily::new(&op.party, op.dim, op.n_settings, op.n_outcomes, elements)
}

/// Exchanges input and output factors and the roles of income and outcome.
///
/// Element `(s, a, x)` of the result is `(N_x/N_a) · swap(M_{s, x, a})`, the
/// scale that keeps both causality conditions when `N_a ≠ N_x`.
pub fn time_reverse_operation(op: &OperationFamily) -> Result<OperationFamily> {
    let (i, o) = (op.input_label(), op.output_label());
    let k = op.n_incomes as f64 / op.n_outcomes as f64;
    let (na, nx) = (op.n_outcomes, op.n_incomes);
    let mut elements = Vec::with_capacity(op.elements.len());
    for s in 0..op.n_settings {
        for a in 0..na {
            for x in 0..nx {
                let swapped = op.element(s, x, a).relabel_swap(&[(&i, &o)])?;
                elements.push(if na == nx { swapped } else { swapped.scale(1.0 / k) });
            }
        }
    }
    OperationFamily::new(&op.party, op.dim, op.n_settings, na, nx, elements)
}

/// Random instrument: `n_outcomes` CJ operators summing to a CPTP map, each
/// built from `d` Kraus blocks of one Haar isometry.
fn random_instrument(
    party: &str,
    d: usize,
    n_outcomes: usize,
    rng: &mut sampling::SeededRng,
) -> Result<Vec<LabeledOperator>> {
    let [fi, fo] = party_factors(party, d)?;
    let kraus_per_outcome = d;
    let v = sampling::random_isometry(n_outcomes * kraus_per_outcome * d, d, rng);
    (0..n_outcomes)
        .map(|x| {
            let kraus: Vec<DMatrix<Complex64>> = (0..kraus_per_outcome)
                .map(|k| {
                    let row = (x * kraus_per_outcome + k) * d;
                    v.rows(row, d).into_owned()
                })
                .collect();
            channel_to_cj_on(&kraus, &fi, &fo)
        })
        .collect()
}

/// Random forward-causal family with one setting, deterministic per seed.
pub fn random_forward_operation(
    party: &str,
    d: usize,
    n_outcomes: usize,
    seed: u64,
) -> Result<ForwardOperationFamily> {
    check_alphabet("outcome", n_outcomes)?;
    let mut rng = sampling::rng(seed);
    let elements = random_instrument(party, d, n_outcomes, &mut rng)?;
    ForwardOperationFamily::new(party, d, 1, n_outcomes, elements)
}

/// Share of white noise mixed in beyond the minimum needed for positivity.
const NOISE_MARGIN: f64 = 0.05;

/// Random physical family with one setting, deterministic per seed.
///
/// Each income gets an independent random instrument. The income average is
/// then corrected on the output factor to meet backward causality, which
/// leaves forward causality intact, and the result is mixed with the
/// physical white-noise family `1/(d N_x)` by the smallest weight that makes
/// every element positive, plus a fixed margin.
pub fn random_physical_operation(
    party: &str,
    d: usize,
    n_incomes: usize,
    n_outcomes: usize,
    seed: u64,
) -> Result<OperationFamily> {
    check_alphabet("income", n_incomes)?;
    check_alphabet("outcome", n_outcomes)?;
    let mut rng = sampling::rng(seed);
    let (i, o) = (format!("{party}_I"), format!("{party}_O"));
    let [fi, fo] = party_factors(party, d)?;
    let factors = vec![fi.clone(), fo.clone()];
    let mut raw = Vec::with_capacity(n_incomes);
    for _ in 0..n_incomes {
        raw.push(random_instrument(party, d, n_outcomes, &mut rng)?);
    }
    let id_i = LabeledOperator::identity(vec![fi])?;
    let id_o = LabeledOperator::identity(vec![fo])?;
    let mut corrections = Vec::with_capacity(n_outcomes);
    for x in 0..n_outcomes {
        let total = sum(raw.iter().map(|inst| inst[x].clone()))?;
        let r = total
            .partial_trace(&[&i])?
            .scale(1.0 / n_incomes as f64)
            .sub(&id_o.scale(1.0 / n_outcomes as f64))?;
        corrections.push(id_i.tensor(&r)?.scale(1.0 / d as f64).permute_factors(&[&i, &o])?);
    }
    let mut corrected = Vec::with_capacity(n_incomes * n_outcomes);
    let mut lowest = f64::INFINITY;
    for inst in &raw {
        for (x, el) in inst.iter().enumerate() {
            let c = el.sub(&corrections[x])?;
            lowest = lowest.min(c.min_eigenvalue()?);
            corrected.push(c);
        }
    }
    let noise_level = 1.0 / (d * n_outcomes) as f64;
    let needed = if lowest < 0.0 {
        -lowest / (noise_level - lowest)
    } else {
        0.0
    };
    let lambda = needed + (1.0 - needed) * NOISE_MARGIN;
    let noise = LabeledOperator::identity(factors)?.scale(noise_level);
    let elements = corrected
        .iter()
        .map(|c| c.scale(1.0 - lambda).add(&noise.scale(lambda)))
        .collect::<Result<_>>()?;
    OperationFamily::new(party, d, 1, n_incomes, n_outcomes, elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::mats::{c, identity, pauli_x, pauli_z};

    const TOL: f64 = 1e-9;

    fn assert_close(a: &LabeledOperator, b: &DMatrix<Complex64>, tol: f64) {
        let err = (a.matrix() - b).norm();
        assert!(err <= tol, "differ by {err:e}");
    }

    #[test]
    fn identity_operation_is_physical() {
        for d in [2, 3] {
            let op = identity_operation("A", d).unwrap();
            assert!(validate_physical(&op, TOL).unwrap().passed());
            assert_close(op.element(0, 0, 0), &identity(d * d).map(|z| z / d as f64), 0.0);
            assert_eq!(&average(&op).unwrap()[0], op.element(0, 0, 0));
        }
    }

    #[test]
    fn measure_prepare_elements() {
        let op = build_measure_prepare_z("A").unwrap();
        // (1 + σz)/2 ⊗ (1 + σz)/2 = |0⟩⟨0| ⊗ |0⟩⟨0|
        let oracle = mats::half_plus(&pauli_z(), 1.0).kronecker(&mats::half_plus(&pauli_z(), 1.0));
        assert_close(op.element(0, 0, 0), &oracle, 0.0);
        for a in 0..2 {
            for x in 0..2 {
                let ev = op.element(0, a, x).eigenvalues().unwrap();
                assert!((ev[3] - 1.0).abs() < 1e-12 && ev[..3].iter().all(|e| e.abs() < 1e-12));
            }
        }
        let report = validate_physical(&op, TOL).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_close(&average(&op).unwrap()[0], &identity(4).map(|z| z * 0.5), 1e-15);
    }

    #[test]
    fn gated_operation_branches() {
        let op = build_bob_gated("B", GatedPreparation::MaximallyMixed).unwrap();
        let plus_zero = mats::half_plus(&pauli_x(), 1.0).kronecker(&mats::ket_bra(0, 0, 2));
        assert_close(op.element(0, 0, 0), &plus_zero, 1e-15);
        for y in 0..2 {
            assert_eq!(op.element(1, 0, y), op.element(1, 1, y));
        }
        assert!(validate_physical(&op, TOL).unwrap().passed());
    }

    #[test]
    fn gated_unit_operator_fails_both_conditions() {
        let op = build_bob_gated("B", GatedPreparation::UnitOperator).unwrap();
        let report = validate_physical(&op, TOL).unwrap();
        assert!(!report.passed());
        let back = report.find(BACKWARD_CAUSALITY, "s1/x0").unwrap();
        // residual is (1/2)|0⟩⟨0| ... on B_O: 1/2·1 - 0 entries of size 1/2
        assert!((back.max_abs - 0.5).abs() < 1e-12);
        assert!((back.residual - 0.5f64.sqrt()).abs() < 1e-12);
        let fwd = report.find(FORWARD_CAUSALITY, "s1/a0").unwrap();
        assert!((fwd.residual - 2f64.sqrt()).abs() < 1e-12);
        assert!(report.find(BACKWARD_CAUSALITY, "s0/x0").unwrap().passed);
    }

    #[test]
    fn forward_family_scaled_by_two_fails() {
        let op = ts_to_tf(&build_measure_prepare_z("A").unwrap(), 0).unwrap();
        assert!(validate_forward(&op, TOL).unwrap().passed());
        let report = validate_forward(&op.scale(2.0), TOL).unwrap();
        let check = report.find(FORWARD_CAUSALITY, "s0").unwrap();
        assert!(!check.passed);
        // residual operator is the identity on A_I
        assert!((check.max_abs - 1.0).abs() < 1e-15);
        assert!((check.residual - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_channel_cj() {
        let m = channel_to_cj(&[identity(2)], 2, 2).unwrap();
        let mut phi = DMatrix::from_element(4, 4, c(0.0, 0.0));
        for i in [0, 3] {
            for j in [0, 3] {
                phi[(i, j)] = c(1.0, 0.0);
            }
        }
        assert_close(&m, &phi, 0.0);
        assert_eq!(m.trace().re, 2.0);
    }

    #[test]
    fn depolarizing_channel_cj() {
        let k: Vec<DMatrix<Complex64>> = (0..2)
            .flat_map(|i| (0..2).map(move |j| mats::ket_bra(i, j, 2).map(|z| z * 0.5f64.sqrt())))
            .collect();
        let m = channel_to_cj(&k, 2, 2).unwrap();
        assert_close(&m, &identity(4).map(|z| z * 0.5), 1e-15);
        assert_close(&m.partial_trace(&["O"]).unwrap(), &identity(2), 1e-15);
    }

    #[test]
    fn bit_flip_channel_cj() {
        let m = channel_to_cj(&[pauli_x()], 2, 2).unwrap();
        assert_close(&m.partial_trace(&["O"]).unwrap(), &identity(2), 0.0);
        let ev = m.eigenvalues().unwrap();
        assert!((ev[3] - 2.0).abs() < 1e-12 && ev[..3].iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn channel_to_cj_shape_mismatch() {
        assert!(matches!(
            channel_to_cj(&[identity(3)], 2, 2),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn lift_measure_z_with_four_incomes() {
        let tf = ts_to_tf(&build_measure_prepare_z("A").unwrap(), 0).unwrap();
        let ts = tf_to_ts(&tf, 4, LiftMode::Repaired).unwrap();
        assert!(validate_physical(&ts, TOL).unwrap().passed());
        assert_eq!(ts_to_tf(&ts, 0).unwrap(), tf);
    }

    #[test]
    fn lift_single_channel_two_incomes() {
        let m = channel_to_cj_on(
            &[identity(2)],
            &HilbertFactor::new("A_I", 2).unwrap(),
            &HilbertFactor::new("A_O", 2).unwrap(),
        )
        .unwrap();
        let tf = ForwardOperationFamily::new("A", 2, 1, 1, vec![m]).unwrap();
        let ts = tf_to_ts(&tf, 2, LiftMode::Repaired).unwrap();
        // filler: (1/2) 1 ⊗ (2·1 - 1) = 1/2
        assert_close(ts.element(0, 1, 0), &identity(4).map(|z| z * 0.5), 1e-15);
        assert!(ts.element(0, 1, 0).min_eigenvalue().unwrap() >= 0.0);
        assert!(validate_physical(&ts, TOL).unwrap().passed());
    }

    #[test]
    fn lift_degenerate_single_income() {
        let m = LabeledOperator::identity(party_factors("A", 1).unwrap().to_vec()).unwrap();
        let tf = ForwardOperationFamily::new("A", 1, 1, 1, vec![m.clone()]).unwrap();
        let ts = tf_to_ts(&tf, 1, LiftMode::Repaired).unwrap();
        assert_eq!(ts.elements(), &[m]);
    }

    #[test]
    fn lift_rejects_small_income_alphabet() {
        let tf = ts_to_tf(&build_measure_prepare_z("A").unwrap(), 0).unwrap();
        assert!(matches!(
            tf_to_ts(&tf, 3, LiftMode::Repaired),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn verbatim_lift_breaks_causality_off_balance() {
        let tf = ts_to_tf(&build_measure_prepare_z("A").unwrap(), 0).unwrap();
        let ts = tf_to_ts(&tf, 4, LiftMode::Verbatim).unwrap();
        let report = validate_physical(&ts, TOL).unwrap();
        assert!(!report.passed());
        assert!(report.worst(FORWARD_CAUSALITY).unwrap().residual > 0.1);
    }

    #[test]
    fn ts_to_tf_cases() {
        let op = build_measure_prepare_z("A").unwrap();
        let tf = ts_to_tf(&op, 0).unwrap();
        for x in 0..2 {
            let oracle = mats::ket_bra(x, x, 2).kronecker(&mats::ket_bra(0, 0, 2));
            assert_close(tf.element(0, x), &oracle, 0.0);
        }
        assert!(validate_forward(&tf, TOL).unwrap().passed());
        let id = identity_operation("A", 2).unwrap();
        assert_eq!(ts_to_tf(&id, 0).unwrap().elements(), id.elements());
        assert!(matches!(ts_to_tf(&op, 2), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn time_reversal_cases() {
        let id = identity_operation("A", 2).unwrap();
        assert_eq!(time_reverse_operation(&id).unwrap(), id);
        for op in [
            build_measure_prepare_z("A").unwrap(),
            build_bob_gated("B", GatedPreparation::MaximallyMixed).unwrap(),
        ] {
            let rev = time_reverse_operation(&op).unwrap();
            assert!(validate_physical(&rev, TOL).unwrap().passed());
            assert_eq!(time_reverse_operation(&rev).unwrap(), op);
        }
    }

    #[test]
    fn time_reversal_unbalanced_alphabets() {
        let op = random_physical_operation("A", 2, 3, 2, 5).unwrap();
        let rev = time_reverse_operation(&op).unwrap();
        assert_eq!((rev.n_incomes(), rev.n_outcomes()), (2, 3));
        assert!(validate_physical(&rev, TOL).unwrap().passed());
        let back = time_reverse_operation(&rev).unwrap();
        for (p, q) in back.elements().iter().zip(op.elements()) {
            assert!(p.sub(q).unwrap().max_abs() < 1e-15);
        }
    }

    #[test]
    fn random_operation_is_physical_and_deterministic() {
        for (d, na, nx) in [(2, 2, 2), (2, 1, 3), (3, 2, 2), (2, 4, 1)] {
            let op = random_physical_operation("A", d, na, nx, 11).unwrap();
            let report = validate_physical(&op, TOL).unwrap();
            assert!(report.passed(), "{d} {na} {nx}: {:?}", report.failures().collect::<Vec<_>>());
            assert_eq!(op, random_physical_operation("A", d, na, nx, 11).unwrap());
        }
    }

    #[test]
    fn with_party_renames_factors() {
        let op = build_measure_prepare_z("A").unwrap().with_party("B").unwrap();
        assert_eq!(op.element(0, 0, 0).labels(), vec!["B_I", "B_O"]);
        assert!(validate_physical(&op, TOL).unwrap().passed());
    }

    #[test]
    fn family_rejects_wrong_element_count() {
        let el = identity_operation("A", 2).unwrap().element(0, 0, 0).clone();
        assert!(OperationFamily::new("A", 2, 1, 2, 1, vec![el]).is_err());
    }
}
