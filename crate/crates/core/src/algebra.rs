//! Dense Hermitian operator algebra over labeled tensor factors.
//!
//! Operators are stored as dense complex matrices in row-major order over an
//! ordered list of [`HilbertFactor`]s; the first factor is the most
//! significant index digit (the usual Kronecker convention). Every operation
//! is a pure function returning a fresh operator.

use std::collections::HashSet;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Entrywise absolute tolerance for Hermiticity checks.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// A positive semi-definite operator may have eigenvalues down to `-PSD_TOL`.
pub const PSD_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// A labeled tensor factor, e.g. `A_I` of dimension 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HilbertFactor {
    label: String,
    dim: usize,
}

impl HilbertFactor {
    pub fn new(label: impl Into<String>, dim: usize) -> Result<Self> {
        let label = label.into();
        if dim == 0 {
            return Err(Error::ZeroDimension(label));
        }
        Ok(Self { label, dim })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Which half of the trace / traceless split to keep on a factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// `(1/d) 1 ⊗ Tr_X[·]`
    Trace,
    /// `· - (1/d) 1 ⊗ Tr_X[·]`
    Traceless,
}

/// A square complex matrix acting on an ordered tensor product of labeled
/// factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOperator {
    factors: Vec<HilbertFactor>,
    matrix: DMatrix<Complex64>,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Flat offsets of every multi-index over `positions`, enumerated row-major
/// with the first listed position most significant.
fn offsets(dims: &[usize], strides: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &base in &out {
            for digit in 0..dims[p] {
                next.push(base + digit * strides[p]);
            }
        }
        out = next;
    }
    out
}

impl LabeledOperator {
    pub fn new(factors: Vec<HilbertFactor>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &factors {
            if !seen.insert(f.label.as_str()) {
                return Err(Error::DuplicateLabel(f.label.clone()));
            }
        }
        let side: usize = factors.iter().map(|f| f.dim).product();
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but factors require side {side}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { factors, matrix })
    }

    pub fn identity(factors: Vec<HilbertFactor>) -> Result<Self> {
        let side: usize = factors.iter().map(|f| f.dim).product();
        Self::new(factors, DMatrix::identity(side, side))
    }

    pub fn zeros(factors: Vec<HilbertFactor>) -> Result<Self> {
        let side: usize = factors.iter().map(|f| f.dim).product();
        Self::new(factors, DMatrix::zeros(side, side))
    }

    /// Operator on a single factor.
    pub fn single(label: &str, matrix: DMatrix<Complex64>) -> Result<Self> {
        let f = HilbertFactor::new(label, matrix.nrows())?;
        Self::new(vec![f], matrix)
    }

    pub fn factors(&self) -> &[HilbertFactor] {
        &self.factors
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.label.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    /// Side length of the matrix.
    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            factors: self.factors.clone(),
            matrix: self.matrix.map(|z| z * c),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            factors: self.factors.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Returns `other` reindexed into this operator's factor order.
    fn aligned(&self, other: &Self) -> Result<Self> {
        if self.factors == other.factors {
            return Ok(other.clone());
        }
        let mine: HashSet<_> = self.factors.iter().collect();
        let theirs: HashSet<_> = other.factors.iter().collect();
        if mine != theirs {
            return Err(Error::DimensionMismatch(format!(
                "factor sets differ: {:?} vs {:?}",
                self.labels(),
                other.labels()
            )));
        }
        other.permute_factors(&self.labels())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let other = self.aligned(other)?;
        Ok(Self {
            factors: self.factors.clone(),
            matrix: &self.matrix + other.matrix,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let other = self.aligned(other)?;
        Ok(Self {
            factors: self.factors.clone(),
            matrix: &self.matrix - other.matrix,
        })
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let other = self.aligned(other)?;
        Ok(Self {
            factors: self.factors.clone(),
            matrix: &self.matrix * other.matrix,
        })
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.side();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self {
            factors: self.factors.clone(),
            matrix: (&self.matrix + self.matrix.adjoint()).map(|z| z * 0.5),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_residual() <= HERMITICITY_TOL
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Kronecker product with concatenated factor list.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        for f in &other.factors {
            if self.factors.iter().any(|g| g.label == f.label) {
                return Err(Error::DuplicateLabel(f.label.clone()));
            }
        }
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Ok(Self {
            factors,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// Reorders the factors; the underlying operator is unchanged.
    pub fn permute_factors(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.factors.len() {
            return Err(Error::InvalidArgument(format!(
                "order {order:?} is not a permutation of {:?}",
                self.labels()
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for label in order {
            let p = self.position(label)?;
            if perm.contains(&p) {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
            perm.push(p);
        }
        let dims = self.dims();
        let st = strides(&dims);
        let off = offsets(&dims, &st, &perm);
        let n = self.side();
        let matrix = DMatrix::from_fn(n, n, |i, j| self.matrix[(off[i], off[j])]);
        let factors = perm.iter().map(|&p| self.factors[p].clone()).collect();
        Ok(Self { factors, matrix })
    }

    fn split_positions(&self, over: &[&str]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut traced = Vec::new();
        for label in over {
            let p = self.position(label)?;
            if traced.contains(&p) {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
            traced.push(p);
        }
        traced.sort_unstable();
        let kept = (0..self.factors.len())
            .filter(|p| !traced.contains(p))
            .collect();
        Ok((kept, traced))
    }

    /// Traces out the listed factors.
    pub fn partial_trace(&self, over: &[&str]) -> Result<Self> {
        let (kept, traced) = self.split_positions(over)?;
        let dims = self.dims();
        let st = strides(&dims);
        let koff = offsets(&dims, &st, &kept);
        let toff = offsets(&dims, &st, &traced);
        let n = koff.len();
        let matrix = DMatrix::from_fn(n, n, |i, j| {
            toff.iter()
                .map(|&t| self.matrix[(koff[i] + t, koff[j] + t)])
                .sum()
        });
        let factors = kept.iter().map(|&p| self.factors[p].clone()).collect();
        Ok(Self { factors, matrix })
    }

    /// `(1/d_S) 1_S ⊗ Tr_S[A]`, kept on the original factor list.
    pub fn trace_part(&self, over: &[&str]) -> Result<Self> {
        let (kept, traced) = self.split_positions(over)?;
        let dims = self.dims();
        let st = strides(&dims);
        let koff = offsets(&dims, &st, &kept);
        let toff = offsets(&dims, &st, &traced);
        let d_traced = toff.len() as f64;
        let n = self.side();
        let mut matrix = DMatrix::from_element(n, n, ZERO);
        for i in 0..koff.len() {
            for j in 0..koff.len() {
                let v: Complex64 = toff
                    .iter()
                    .map(|&t| self.matrix[(koff[i] + t, koff[j] + t)])
                    .sum::<Complex64>()
                    / d_traced;
                for &t in &toff {
                    matrix[(koff[i] + t, koff[j] + t)] = v;
                }
            }
        }
        Ok(Self {
            factors: self.factors.clone(),
            matrix,
        })
    }

    pub fn traceless_part(&self, over: &[&str]) -> Result<Self> {
        let tp = self.trace_part(over)?;
        Ok(Self {
            factors: self.factors.clone(),
            matrix: &self.matrix - tp.matrix,
        })
    }

    /// Composes single-factor trace / traceless projectors, e.g.
    /// `[(B_I, Trace), (B_O, Trace), (A_I, Traceless), (A_O, Traceless)]`.
    pub fn project(&self, parts: &[(&str, Part)]) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = self.clone();
        for &(label, part) in parts {
            if !seen.insert(label) {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
            out = match part {
                Part::Trace => out.trace_part(&[label])?,
                Part::Traceless => out.traceless_part(&[label])?,
            };
        }
        Ok(out)
    }

    /// Complex `Tr[A·B]`.
    pub fn hs_inner_complex(&self, other: &Self) -> Result<Complex64> {
        let other = self.aligned(other)?;
        let n = self.side();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * other.matrix[(j, i)];
            }
        }
        Ok(acc)
    }

    /// `Tr[A·B]`, real for Hermitian arguments.
    pub fn hs_inner(&self, other: &Self) -> Result<f64> {
        Ok(self.hs_inner_complex(other)?.re)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let dev = self.hermiticity_residual();
        if dev > HERMITICITY_TOL {
            return Err(Error::NotHermitian(dev));
        }
        // symmetrize to remove sub-tolerance noise before the solver
        let h = (&self.matrix + self.matrix.adjoint()).map(|z| z * 0.5);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Renames factors; `mapping` holds `(old, new)` pairs.
    pub fn relabel(&self, mapping: &[(&str, &str)]) -> Result<Self> {
        let mut factors = self.factors.clone();
        for &(old, new) in mapping {
            let p = self.position(old)?;
            factors[p].label = new.to_string();
        }
        Self::new(factors, self.matrix.clone())
    }

    /// Exchanges the contents of each listed factor pair while keeping the
    /// factor list (labels and order) fixed. Applied with `(A_O, B_I)` and
    /// `(A_I, B_O)` this is the time reversal of a process matrix.
    pub fn relabel_swap(&self, pairs: &[(&str, &str)]) -> Result<Self> {
        let labels = self.labels();
        let mut order: Vec<&str> = labels.clone();
        let mut touched = HashSet::new();
        for &(p, q) in pairs {
            let i = self.position(p)?;
            let j = self.position(q)?;
            if !touched.insert(i) || !touched.insert(j) {
                return Err(Error::InvalidArgument(format!(
                    "factor appears in more than one swap pair: ({p}, {q})"
                )));
            }
            if self.factors[i].dim != self.factors[j].dim {
                return Err(Error::DimensionMismatch(format!(
                    "cannot swap `{p}` (dim {}) with `{q}` (dim {})",
                    self.factors[i].dim, self.factors[j].dim
                )));
            }
            order.swap(i, j);
        }
        let moved = self.permute_factors(&order)?;
        Ok(Self {
            factors: self.factors.clone(),
            matrix: moved.matrix,
        })
    }

    /// Tensors with identities on the factors of `full` missing here and
    /// returns the result in `full`'s order.
    pub fn embed(&self, full: &[HilbertFactor]) -> Result<Self> {
        for f in &self.factors {
            if !full.contains(f) {
                return Err(Error::UnknownLabel(f.label.clone()));
            }
        }
        let missing: Vec<HilbertFactor> = full
            .iter()
            .filter(|f| !self.factors.contains(f))
            .cloned()
            .collect();
        let extended = if missing.is_empty() {
            self.clone()
        } else {
            self.tensor(&Self::identity(missing)?)?
        };
        let order: Vec<&str> = full.iter().map(|f| f.label.as_str()).collect();
        extended.permute_factors(&order)
    }
}

/// Free-function forms of the core algebra, mirroring the method API.
pub fn tensor(a: &LabeledOperator, b: &LabeledOperator) -> Result<LabeledOperator> {
    a.tensor(b)
}

pub fn partial_trace(a: &LabeledOperator, over: &[&str]) -> Result<LabeledOperator> {
    a.partial_trace(over)
}

pub fn hs_inner(a: &LabeledOperator, b: &LabeledOperator) -> Result<f64> {
    a.hs_inner(b)
}

/// Small dense matrices used throughout: Paulis, projectors, SWAP.
pub mod mats {
    use super::{Complex64, DMatrix, ONE, ZERO};

    pub fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn identity(d: usize) -> DMatrix<Complex64> {
        DMatrix::identity(d, d)
    }

    pub fn pauli_x() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    pub fn pauli_y() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])
    }

    pub fn pauli_z() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    /// `|i⟩⟨j|` in dimension `d`.
    pub fn ket_bra(i: usize, j: usize, d: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(d, d, ZERO);
        m[(i, j)] = ONE;
        m
    }

    /// `Σ_{ij} |i⟩⟨j| ⊗ |j⟩⟨i|` on `C^d ⊗ C^d`.
    pub fn swap(d: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(d * d, d * d, ZERO);
        for i in 0..d {
            for j in 0..d {
                m[(i * d + j, j * d + i)] = ONE;
            }
        }
        m
    }

    /// `(1 + s·P)/2` for a Pauli `P` and sign `s = ±1`.
    pub fn half_plus(p: &DMatrix<Complex64>, sign: f64) -> DMatrix<Complex64> {
        (identity(2) + p.map(|z| z * sign)).map(|z| z * 0.5)
    }
}

/// Hermitian operator basis `σ_0 = 1, σ_1 .. σ_{d²-1}` with
/// `Tr[σ_μ σ_ν] = d δ_{μν}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBasis {
    dim: usize,
    elements: Vec<DMatrix<Complex64>>,
}

/// Generalized Gell-Mann matrices rescaled by `sqrt(d/2)`, ordered as
/// identity, symmetric off-diagonals, antisymmetric off-diagonals, then
/// diagonals. At `d = 2` this is `{1, σ_x, σ_y, σ_z}`.
pub fn make_basis(d: usize) -> Result<HermitianBasis> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "basis dimension must be at least 2, got {d}"
        )));
    }
    let scale = (d as f64 / 2.0).sqrt();
    let mut elements = vec![mats::identity(d)];
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| ((j + 1)..d).map(move |k| (j, k)))
        .collect();
    for &(j, k) in &pairs {
        let mut m = DMatrix::from_element(d, d, ZERO);
        m[(j, k)] = Complex64::new(scale, 0.0);
        m[(k, j)] = Complex64::new(scale, 0.0);
        elements.push(m);
    }
    for &(j, k) in &pairs {
        let mut m = DMatrix::from_element(d, d, ZERO);
        m[(j, k)] = Complex64::new(0.0, -scale);
        m[(k, j)] = Complex64::new(0.0, scale);
        elements.push(m);
    }
    for l in 1..d {
        let norm = scale * (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = DMatrix::from_element(d, d, ZERO);
        for i in 0..l {
            m[(i, i)] = Complex64::new(norm, 0.0);
        }
        m[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
        elements.push(m);
    }
    Ok(HermitianBasis { dim: d, elements })
}

impl HermitianBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, mu: usize) -> &DMatrix<Complex64> {
        &self.elements[mu]
    }

    pub fn elements(&self) -> &[DMatrix<Complex64>] {
        &self.elements
    }

    pub fn operator(&self, mu: usize, label: &str) -> Result<LabeledOperator> {
        LabeledOperator::single(label, self.elements[mu].clone())
    }

    /// `G[μ][ν] = Tr[σ_μ σ_ν]`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |m, v| {
            (&self.elements[m] * &self.elements[v]).trace().re
        })
    }
}

/// Real expansion coefficients, one index of size `d²` per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl CoefficientTensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} values for shape {shape:?}",
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn flat(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        index.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            assert!(i < n, "index {i} out of range {n}");
            acc * n + i
        })
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.flat(index)]
    }

    pub fn set(&mut self, index: &[usize], v: f64) {
        let k = self.flat(index);
        self.values[k] = v;
    }

    /// Multi-index of flat position `k`.
    pub fn unflatten(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for p in (0..self.shape.len()).rev() {
            idx[p] = k % self.shape[p];
            k /= self.shape[p];
        }
        idx
    }

    /// Iterates `(multi-index, value)` over every entry.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.unflatten(k), v))
    }
}

/// Maps matrix entry `(r, c)` to the flat index of the tensor whose modes are
/// the interleaved pairs `(i_k, j_k)`.
fn interleave_parts(dims: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let n: usize = dims.iter().product();
    let mode_sizes: Vec<usize> = dims.iter().map(|d| d * d).collect();
    let mode_strides = strides(&mode_sizes);
    let st = strides(dims);
    let mut row_part = vec![0; n];
    let mut col_part = vec![0; n];
    for r in 0..n {
        let mut rem = r;
        for k in 0..dims.len() {
            let digit = rem / st[k];
            rem %= st[k];
            row_part[r] += digit * dims[k] * mode_strides[k];
            col_part[r] += digit * mode_strides[k];
        }
    }
    (row_part, col_part)
}

/// Applies `m` (rows: new mode size, cols: old mode size) along `mode`.
fn mode_product(
    data: &[Complex64],
    sizes: &[usize],
    mode: usize,
    m: &DMatrix<Complex64>,
) -> Vec<Complex64> {
    let pre: usize = sizes[..mode].iter().product();
    let post: usize = sizes[mode + 1..].iter().product();
    let old = sizes[mode];
    let new = m.nrows();
    let mut out = vec![ZERO; pre * new * post];
    for p in 0..pre {
        for mu in 0..new {
            for s in 0..old {
                let coef = m[(mu, s)];
                if coef == ZERO {
                    continue;
                }
                let src = (p * old + s) * post;
                let dst = (p * new + mu) * post;
                for q in 0..post {
                    out[dst + q] += coef * data[src + q];
                }
            }
        }
    }
    out
}

fn check_bases(dims: &[usize], bases: &[HermitianBasis]) -> Result<()> {
    if dims.len() != bases.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} factors but {} bases",
            dims.len(),
            bases.len()
        )));
    }
    for (k, (d, b)) in dims.iter().zip(bases).enumerate() {
        if *d != b.dim {
            return Err(Error::DimensionMismatch(format!(
                "factor {k} has dim {d} but basis has dim {}",
                b.dim
            )));
        }
    }
    Ok(())
}

/// `w_{μν…} = Tr[A (σ_μ ⊗ σ_ν ⊗ …)] / Π d`.
pub fn decompose(a: &LabeledOperator, bases: &[HermitianBasis]) -> Result<CoefficientTensor> {
    let dims = a.dims();
    check_bases(&dims, bases)?;
    let (row_part, col_part) = interleave_parts(&dims);
    let n = a.side();
    let sizes: Vec<usize> = dims.iter().map(|d| d * d).collect();
    let mut data = vec![ZERO; n * n];
    for r in 0..n {
        for c in 0..n {
            data[row_part[r] + col_part[c]] = a.matrix[(r, c)];
        }
    }
    for (k, b) in bases.iter().enumerate() {
        let d = b.dim;
        let m = DMatrix::from_fn(d * d, d * d, |mu, s| {
            b.elements[mu][(s % d, s / d)] / d as f64
        });
        data = mode_product(&data, &sizes, k, &m);
    }
    Ok(CoefficientTensor {
        shape: sizes,
        values: data.iter().map(|z| z.re).collect(),
    })
}

/// `Σ c_{μν…} σ_μ ⊗ σ_ν ⊗ …` on the given factors.
pub fn reconstruct(
    c: &CoefficientTensor,
    factors: &[HilbertFactor],
    bases: &[HermitianBasis],
) -> Result<LabeledOperator> {
    let dims: Vec<usize> = factors.iter().map(|f| f.dim).collect();
    check_bases(&dims, bases)?;
    let sizes: Vec<usize> = dims.iter().map(|d| d * d).collect();
    if c.shape != sizes {
        return Err(Error::DimensionMismatch(format!(
            "coefficient shape {:?} does not match bases {sizes:?}",
            c.shape
        )));
    }
    let mut data: Vec<Complex64> = c.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for (k, b) in bases.iter().enumerate() {
        let d = b.dim;
        let m = DMatrix::from_fn(d * d, d * d, |s, mu| b.elements[mu][(s / d, s % d)]);
        data = mode_product(&data, &sizes, k, &m);
    }
    let (row_part, col_part) = interleave_parts(&dims);
    let n: usize = dims.iter().product();
    let matrix = DMatrix::from_fn(n, n, |r, col| data[row_part[r] + col_part[col]]);
    LabeledOperator::new(factors.to_vec(), matrix)
}

/// One basis per factor of `a`, in factor order.
pub fn bases_for(a: &LabeledOperator) -> Result<Vec<HermitianBasis>> {
    a.dims().into_iter().map(make_basis).collect()
}
