//! Bipartite process-matrix families `W[u][v]` on `A_I ⊗ A_O ⊗ B_I ⊗ B_O`,
//! indexed by pre-selection `u` and post-selection `v`.
//!
//! Every constraint is phrased through trace / traceless projectors. A basis
//! term `σ_i ⊗ σ_j ⊗ σ_k ⊗ σ_l` is classified by which factors carry a
//! traceless element; the resulting 4-bit pattern fixes its sector.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{
    decompose, make_basis, mats, reconstruct, CoefficientTensor, HermitianBasis, HilbertFactor,
    LabeledOperator, Part,
};
use crate::error::{Error, Result};
use crate::report::ValidationReport;

pub const A_I: &str = "A_I";
pub const A_O: &str = "A_O";
pub const B_I: &str = "B_I";
pub const B_O: &str = "B_O";
/// Canonical factor order.
pub const PROCESS_LABELS: [&str; 4] = [A_I, A_O, B_I, B_O];

pub fn process_factors(d_a: usize, d_b: usize) -> Result<Vec<HilbertFactor>> {
    Ok(vec![
        HilbertFactor::new(A_I, d_a)?,
        HilbertFactor::new(A_O, d_a)?,
        HilbertFactor::new(B_I, d_b)?,
        HilbertFactor::new(B_O, d_b)?,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessFamily {
    d_a: usize,
    d_b: usize,
    n_pre: usize,
    n_post: usize,
    elements: Vec<LabeledOperator>,
    preselection_present: bool,
    postselection_present: bool,
}

impl ProcessFamily {
    /// `elements` are ordered by `(u, v)`, `v` fastest, and are permuted into
    /// canonical factor order. A non-singleton alphabet always sets its marker.
    pub fn new(
        d_a: usize,
        d_b: usize,
        n_pre: usize,
        n_post: usize,
        elements: Vec<LabeledOperator>,
        preselection_present: bool,
        postselection_present: bool,
    ) -> Result<Self> {
        if n_pre == 0 || n_post == 0 {
            return Err(Error::InvalidArgument(
                "selection alphabets must be non-empty".into(),
            ));
        }
        if elements.len() != n_pre * n_post {
            return Err(Error::DimensionMismatch(format!(
                "{} elements supplied, alphabets require {}",
                elements.len(),
                n_pre * n_post
            )));
        }
        let factors = process_factors(d_a, d_b)?;
        let elements = elements
            .into_iter()
            .map(|el| {
                let el = el.permute_factors(&PROCESS_LABELS)?;
                if el.factors() != factors.as_slice() {
                    return Err(Error::DimensionMismatch(format!(
                        "element spaces {:?} do not match process spaces {factors:?}",
                        el.factors()
                    )));
                }
                Ok(el)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            d_a,
            d_b,
            n_pre,
            n_post,
            elements,
            preselection_present: preselection_present || n_pre > 1,
            postselection_present: postselection_present || n_post > 1,
        })
    }

    /// Singleton family around one operator.
    pub fn single(w: LabeledOperator, preselection: bool, postselection: bool) -> Result<Self> {
        let d_a = w.factors()[w.position(A_I)?].dim();
        let d_b = w.factors()[w.position(B_I)?].dim();
        Self::new(d_a, d_b, 1, 1, vec![w], preselection, postselection)
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn preselection_present(&self) -> bool {
        self.preselection_present
    }

    pub fn postselection_present(&self) -> bool {
        self.postselection_present
    }

    pub fn factors(&self) -> Vec<HilbertFactor> {
        self.elements[0].factors().to_vec()
    }

    pub fn element(&self, u: usize, v: usize) -> &LabeledOperator {
        assert!(u < self.n_pre && v < self.n_post, "element ({u}, {v}) out of range");
        &self.elements[u * self.n_post + v]
    }

    pub fn elements(&self) -> &[LabeledOperator] {
        &self.elements
    }

    pub fn with_markers(&self, preselection: bool, postselection: bool) -> Self {
        Self {
            preselection_present: preselection || self.n_pre > 1,
            postselection_present: postselection || self.n_post > 1,
            ..self.clone()
        }
    }

    /// Replaces one element, e.g. to inject a perturbation.
    pub fn with_element(&self, u: usize, v: usize, w: LabeledOperator) -> Result<Self> {
        let mut elements = self.elements.clone();
        elements[u * self.n_post + v] = w;
        Self::new(
            self.d_a,
            self.d_b,
            self.n_pre,
            self.n_post,
            elements,
            self.preselection_present,
            self.postselection_present,
        )
    }

    pub fn total(&self) -> LabeledOperator {
        self.sum_where(|_, _| true)
    }

    /// `Σ_v W_{u,v}`.
    pub fn sum_over_post(&self, u: usize) -> LabeledOperator {
        self.sum_where(|uu, _| uu == u)
    }

    /// `Σ_u W_{u,v}`.
    pub fn sum_over_pre(&self, v: usize) -> LabeledOperator {
        self.sum_where(|_, vv| vv == v)
    }

    fn sum_where(&self, keep: impl Fn(usize, usize) -> bool) -> LabeledOperator {
        let mut acc = LabeledOperator::zeros(self.factors()).expect("canonical factors");
        for u in 0..self.n_pre {
            for v in 0..self.n_post {
                if keep(u, v) {
                    acc = acc.add(self.element(u, v)).expect("same factors");
                }
            }
        }
        acc
    }
}

pub fn element_key(u: usize, v: usize) -> String {
    format!("u{u}/v{v}")
}

/// Which constraint families to enforce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    /// Pre- and post-selection both available.
    General,
    /// No post-selection: every `Σ_v W_{u,v}` must be time-forward compatible.
    NoPost,
    /// No pre-selection: every `Σ_u W_{u,v}` must be time-backward compatible.
    NoPre,
    /// Neither pre- nor post-selection.
    Isolated,
}

impl ConstraintMode {
    pub const ALL: [ConstraintMode; 4] = [Self::General, Self::NoPost, Self::NoPre, Self::Isolated];

    pub fn name(self) -> &'static str {
        match self {
            Self::General => "general",
            Self::NoPost => "no_post",
            Self::NoPre => "no_pre",
            Self::Isolated => "isolated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    fn checks_post(self) -> bool {
        matches!(self, Self::NoPost | Self::Isolated)
    }

    fn checks_pre(self) -> bool {
        matches!(self, Self::NoPre | Self::Isolated)
    }
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A projector product, e.g. `[(B_I, Trace), (A_O, Traceless)]`.
pub type ProjectorSpec = &'static [(&'static str, Part)];

use Part::{Trace as T, Traceless as L};

/// Must vanish on `Σ_{u,v} W`.
pub const NORMALIZATION_PROJECTORS: [ProjectorSpec; 3] = [
    &[(B_I, T), (B_O, T), (A_I, L), (A_O, L)],
    &[(A_I, T), (A_O, T), (B_I, L), (B_O, L)],
    &[(A_I, L), (A_O, L), (B_I, L), (B_O, L)],
];

/// Must vanish on `Σ_v W_{u,v}` for every `u` when there is no post-selection.
pub const NO_POST_PROJECTORS: [ProjectorSpec; 3] = [
    &[(A_I, T), (B_O, L)],
    &[(B_I, T), (A_O, L)],
    &[(A_O, L), (B_O, L)],
];

/// Must vanish on `Σ_u W_{u,v}` for every `v` when there is no pre-selection.
pub const NO_PRE_PROJECTORS: [ProjectorSpec; 3] = [
    &[(A_O, T), (B_I, L)],
    &[(B_O, T), (A_I, L)],
    &[(A_I, L), (B_I, L)],
];

/// Readable tag such as `[B_I,B_O,~A_I,~A_O]` (`~` marks traceless).
pub fn projector_name(proj: &[(&str, Part)]) -> String {
    let parts: Vec<String> = proj
        .iter()
        .map(|(l, p)| match p {
            Part::Trace => l.to_string(),
            Part::Traceless => format!("~{l}"),
        })
        .collect();
    format!("[{}]", parts.join(","))
}

pub const TRACE_NORMALIZATION: &str = "trace-normalization";

pub fn normalization_constraint(proj: &[(&str, Part)]) -> String {
    format!("normalization{}", projector_name(proj))
}

pub fn no_post_constraint(proj: &[(&str, Part)]) -> String {
    format!("no-postselection{}", projector_name(proj))
}

pub fn no_pre_constraint(proj: &[(&str, Part)]) -> String {
    format!("no-preselection{}", projector_name(proj))
}

/// Non-gating per-pattern breakdowns attached to the report.
pub const NORMALIZATION_SECTOR: &str = "normalization-forbidden-sector";
pub const NO_POST_SECTOR: &str = "no-postselection-forbidden-sector";
pub const NO_PRE_SECTOR: &str = "no-preselection-forbidden-sector";

/// Bitmask over factors that carry a traceless basis element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern(pub u8);

impl Pattern {
    pub const A_I: u8 = 0b1000;
    pub const A_O: u8 = 0b0100;
    pub const B_I: u8 = 0b0010;
    pub const B_O: u8 = 0b0001;

    pub fn all() -> impl Iterator<Item = Pattern> {
        (0u8..16).map(Pattern)
    }

    pub fn of_index(index: &[usize]) -> Pattern {
        let mut bits = 0;
        for (k, &mu) in index.iter().enumerate() {
            if mu != 0 {
                bits |= 1 << (3 - k);
            }
        }
        Pattern(bits)
    }

    pub fn contains(self, bit: u8) -> bool {
        self.0 & bit != 0
    }

    /// `A_IB_IB_O`-style name; `1` for the identity pattern.
    pub fn label(self) -> String {
        if self.0 == 0 {
            return "1".into();
        }
        PROCESS_LABELS
            .iter()
            .enumerate()
            .filter(|(k, _)| self.0 & (1 << (3 - k)) != 0)
            .map(|(_, l)| *l)
            .collect()
    }

    pub fn parse(s: &str) -> Option<Pattern> {
        Pattern::all().find(|p| p.label() == s)
    }

    pub fn sector(self) -> Sector {
        match self.0 {
            0b0000 => Sector::Identity,
            0b1100 | 0b0011 | 0b1111 => Sector::TimeSymmetric,
            0b1000 | 0b0010 | 0b1010 | 0b1110 | 0b1011 => Sector::TimeForward,
            0b0100 | 0b0001 | 0b0101 | 0b1101 | 0b0111 => Sector::TimeBackward,
            0b1001 | 0b0110 => Sector::Isolated,
            _ => unreachable!("pattern has four bits"),
        }
    }

    /// Letter naming the bucket's coefficient family.
    pub fn bucket(self) -> char {
        match self.0 {
            0b0000 => '0',
            0b1100 => 'a',
            0b0011 => 'b',
            0b1111 => 'c',
            0b1000 => 'd',
            0b0010 => 'e',
            0b1010 => 'f',
            0b1110 => 'g',
            0b1011 => 'h',
            0b0100 => 'm',
            0b0001 => 'n',
            0b0101 => 'o',
            0b1101 => 'q',
            0b0111 => 'r',
            0b1001 => 's',
            0b0110 => 't',
            _ => unreachable!("pattern has four bits"),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    Identity,
    /// Needs both pre- and post-selection.
    TimeSymmetric,
    /// Needs pre-selection.
    TimeForward,
    /// Needs post-selection.
    TimeBackward,
    /// Needs neither.
    Isolated,
}

impl Sector {
    /// Forbidden on `Σ_v W` without post-selection.
    pub fn needs_post(self) -> bool {
        matches!(self, Self::TimeSymmetric | Self::TimeBackward)
    }

    /// Forbidden on `Σ_u W` without pre-selection.
    pub fn needs_pre(self) -> bool {
        matches!(self, Self::TimeSymmetric | Self::TimeForward)
    }
}

/// One basis per factor in canonical order.
fn process_bases(d_a: usize, d_b: usize) -> Result<Vec<HermitianBasis>> {
    let ba = make_basis(d_a)?;
    let bb = make_basis(d_b)?;
    Ok(vec![ba.clone(), ba, bb.clone(), bb])
}

/// Frobenius norm of each pattern component; `Tr[(σ⊗σ⊗σ⊗σ)²]` is the side length.
fn pattern_norms(c: &CoefficientTensor, dims_product: f64) -> [f64; 16] {
    let mut sq = [0.0; 16];
    for (idx, v) in c.iter() {
        sq[Pattern::of_index(&idx).0 as usize] += v * v;
    }
    sq.map(|s| (s * dims_product).sqrt())
}

fn push_sector_diagnostics(
    report: &mut ValidationReport,
    constraint: &str,
    key: &str,
    op: &LabeledOperator,
    bases: &[HermitianBasis],
    forbidden: impl Fn(Pattern) -> bool,
) -> Result<()> {
    let c = decompose(op, bases)?;
    let side = op.side() as f64;
    let norms = pattern_norms(&c, side);
    for p in Pattern::all().filter(|p| forbidden(*p)) {
        let n = norms[p.0 as usize];
        report.push_diagnostic(constraint, &format!("{key}/{p}"), n, n <= report.tolerance);
    }
    Ok(())
}

/// Positivity, trace normalization and the projector constraints of `mode`.
pub fn validate_process(
    w: &ProcessFamily,
    mode: ConstraintMode,
    tol: f64,
) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(format!("process ({mode})"), tol);
    let bases = process_bases(w.d_a, w.d_b)?;
    for u in 0..w.n_pre {
        for v in 0..w.n_post {
            report.push_element(&element_key(u, v), w.element(u, v));
        }
    }
    let total = w.total();
    report.push_scalar(
        TRACE_NORMALIZATION,
        "total",
        total.trace().re - (w.d_a * w.d_b) as f64,
    );
    for proj in NORMALIZATION_PROJECTORS {
        report.push_operator(&normalization_constraint(proj), "total", &total.project(proj)?);
    }
    push_sector_diagnostics(&mut report, NORMALIZATION_SECTOR, "total", &total, &bases, |p| {
        p.sector() == Sector::TimeSymmetric
    })?;
    if mode.checks_post() {
        for u in 0..w.n_pre {
            let s = w.sum_over_post(u);
            let key = format!("u{u}");
            for proj in NO_POST_PROJECTORS {
                report.push_operator(&no_post_constraint(proj), &key, &s.project(proj)?);
            }
            push_sector_diagnostics(&mut report, NO_POST_SECTOR, &key, &s, &bases, |p| {
                p.sector().needs_post()
            })?;
        }
    }
    if mode.checks_pre() {
        for v in 0..w.n_post {
            let s = w.sum_over_pre(v);
            let key = format!("v{v}");
            for proj in NO_PRE_PROJECTORS {
                report.push_operator(&no_pre_constraint(proj), &key, &s.project(proj)?);
            }
            push_sector_diagnostics(&mut report, NO_PRE_SECTOR, &key, &s, &bases, |p| {
                p.sector().needs_pre()
            })?;
        }
    }
    Ok(report)
}

/// Basis expansion of every element with coefficients scaled by `d_A d_B`,
/// so that the identity coefficient `p0(u,v)` sums to one over a valid family.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDecomposition {
    d_a: usize,
    d_b: usize,
    n_pre: usize,
    n_post: usize,
    coefficients: Vec<CoefficientTensor>,
}

impl SectorDecomposition {
    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn coefficients(&self, u: usize, v: usize) -> &CoefficientTensor {
        &self.coefficients[u * self.n_post + v]
    }

    pub fn p0(&self, u: usize, v: usize) -> f64 {
        self.coefficients(u, v).get(&[0, 0, 0, 0])
    }

    /// Coefficient at basis index `(μ, ν, α, β)`.
    pub fn coefficient(&self, u: usize, v: usize, index: [usize; 4]) -> f64 {
        self.coefficients(u, v).get(&index)
    }

    /// Nonzero entries (beyond `tol`) of one pattern bucket.
    pub fn bucket(&self, u: usize, v: usize, pattern: Pattern, tol: f64) -> Vec<([usize; 4], f64)> {
        self.coefficients(u, v)
            .iter()
            .filter(|(idx, c)| Pattern::of_index(idx) == pattern && c.abs() > tol)
            .map(|(idx, c)| ([idx[0], idx[1], idx[2], idx[3]], c))
            .collect()
    }

    /// Euclidean norm of the scaled coefficients in one sector.
    pub fn sector_norm(&self, u: usize, v: usize, sector: Sector) -> f64 {
        self.coefficients(u, v)
            .iter()
            .filter(|(idx, _)| Pattern::of_index(idx).sector() == sector)
            .map(|(_, c)| c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Norm of `Σ_{(u,v) ∈ keep}` restricted to `sectors`.
    fn summed_norm(&self, keep: impl Fn(usize, usize) -> bool, sectors: &[Sector]) -> f64 {
        let shape = self.coefficients[0].shape().to_vec();
        let mut acc = vec![0.0; self.coefficients[0].values().len()];
        for u in 0..self.n_pre {
            for v in 0..self.n_post {
                if keep(u, v) {
                    for (a, c) in acc.iter_mut().zip(self.coefficients(u, v).values()) {
                        *a += c;
                    }
                }
            }
        }
        let t = CoefficientTensor::from_values(shape, acc).expect("shape preserved");
        t.iter()
            .filter(|(idx, _)| sectors.contains(&Pattern::of_index(idx).sector()))
            .map(|(_, c)| c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Rebuilds element `(u, v)` from the coefficients.
    pub fn reassemble(&self, u: usize, v: usize) -> Result<LabeledOperator> {
        let bases = process_bases(self.d_a, self.d_b)?;
        let scaled = CoefficientTensor::from_values(
            self.coefficients(u, v).shape().to_vec(),
            self.coefficients(u, v)
                .values()
                .iter()
                .map(|c| c / (self.d_a * self.d_b) as f64)
                .collect(),
        )?;
        reconstruct(&scaled, &process_factors(self.d_a, self.d_b)?, &bases)
    }
}

pub fn sector_decompose(w: &ProcessFamily) -> Result<SectorDecomposition> {
    let bases = process_bases(w.d_a, w.d_b)?;
    let scale = (w.d_a * w.d_b) as f64;
    let coefficients = w
        .elements
        .iter()
        .map(|el| {
            let c = decompose(el, &bases)?;
            CoefficientTensor::from_values(
                c.shape().to_vec(),
                c.values().iter().map(|x| x * scale).collect(),
            )
        })
        .collect::<Result<_>>()?;
    Ok(SectorDecomposition {
        d_a: w.d_a,
        d_b: w.d_b,
        n_pre: w.n_pre,
        n_post: w.n_post,
        coefficients,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Iso,
    Tf,
    Tb,
    Ts,
}

impl ClassLabel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Iso => "ISO",
            Self::Tf => "TF",
            Self::Tb => "TB",
            Self::Ts => "TS",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessClass {
    pub class: ClassLabel,
    pub requires_preselection: bool,
    pub requires_postselection: bool,
}

impl ProcessClass {
    pub fn from_flags(pre: bool, post: bool) -> Self {
        let class = match (pre, post) {
            (false, false) => ClassLabel::Iso,
            (true, false) => ClassLabel::Tf,
            (false, true) => ClassLabel::Tb,
            (true, true) => ClassLabel::Ts,
        };
        Self {
            class,
            requires_preselection: pre,
            requires_postselection: post,
        }
    }
}

/// Smallest class consistent with the sector content: pre-selection is needed
/// iff some `Σ_u W_{u,v}` has a time-forward or time-symmetric component, and
/// post-selection iff some `Σ_v W_{u,v}` has a time-backward or
/// time-symmetric component.
pub fn classify(w: &ProcessFamily, tol: f64) -> Result<ProcessClass> {
    let dec = sector_decompose(w)?;
    let pre_sectors = [Sector::TimeForward, Sector::TimeSymmetric];
    let post_sectors = [Sector::TimeBackward, Sector::TimeSymmetric];
    let pre = (0..w.n_post).any(|v| dec.summed_norm(|_, vv| vv == v, &pre_sectors) > tol);
    let post = (0..w.n_pre).any(|u| dec.summed_norm(|uu, _| uu == u, &post_sectors) > tol);
    Ok(ProcessClass::from_flags(pre, post))
}

/// Factor pairs exchanged by time reversal.
pub const TIME_REVERSAL_PAIRS: [(&str, &str); 2] = [(A_O, B_I), (A_I, B_O)];

/// Swaps `A_O ↔ B_I` and `A_I ↔ B_O` in every element and exchanges the roles
/// of pre- and post-selection.
pub fn time_reverse_process(w: &ProcessFamily) -> Result<ProcessFamily> {
    if w.d_a != w.d_b {
        return Err(Error::DimensionMismatch(format!(
            "time reversal needs d_A = d_B, got {} and {}",
            w.d_a, w.d_b
        )));
    }
    let mut elements = Vec::with_capacity(w.elements.len());
    for u in 0..w.n_post {
        for v in 0..w.n_pre {
            elements.push(w.element(v, u).relabel_swap(&TIME_REVERSAL_PAIRS)?);
        }
    }
    ProcessFamily::new(
        w.d_a,
        w.d_b,
        w.n_post,
        w.n_pre,
        elements,
        w.postselection_present,
        w.preselection_present,
    )
}

/// `σ_μ ⊗ σ_ν ⊗ σ_α ⊗ σ_β` in canonical order.
pub fn basis_term(d_a: usize, d_b: usize, index: [usize; 4]) -> Result<LabeledOperator> {
    let bases = process_bases(d_a, d_b)?;
    let mut op: Option<LabeledOperator> = None;
    for (k, (mu, label)) in index.iter().zip(PROCESS_LABELS).enumerate() {
        if *mu >= bases[k].len() {
            return Err(Error::IndexOutOfRange(format!(
                "basis index {mu} on {label} with {} elements",
                bases[k].len()
            )));
        }
        let f = bases[k].operator(*mu, label)?;
        op = Some(match op {
            None => f,
            Some(acc) => acc.tensor(&f)?,
        });
    }
    Ok(op.expect("four factors"))
}

/// `1/(d_A d_B)` with singleton alphabets and no selection.
pub fn trivial_process(d_a: usize, d_b: usize) -> Result<ProcessFamily> {
    let w = LabeledOperator::identity(process_factors(d_a, d_b)?)?.scale(1.0 / (d_a * d_b) as f64);
    ProcessFamily::single(w, false, false)
}

const X: usize = 1;
const Z: usize = 3;

/// Qubit process `(1/4)[1 + (σz^{A_O} σz^{B_I} + σz^{A_I} σx^{B_I} σz^{B_O})/√2]`
/// with one-way signalling from Alice to Bob plus a Bob-to-Alice term that
/// needs pre-selection.
pub fn build_ocb() -> Result<ProcessFamily> {
    let k = 1.0 / 2f64.sqrt();
    let w = basis_term(2, 2, [0, 0, 0, 0])?
        .add(&basis_term(2, 2, [0, Z, Z, 0])?.scale(k))?
        .add(&basis_term(2, 2, [Z, 0, X, Z])?.scale(k))?
        .scale(0.25);
    ProcessFamily::single(w, true, false)
}

/// `(1/4)(1 + w σz^{A_O})`, valid only with post-selection; `0 < w ≤ 1`.
pub fn build_inequivalence_w(weight: f64) -> Result<ProcessFamily> {
    if !(weight > 0.0 && weight <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "weight must lie in (0, 1], got {weight}"
        )));
    }
    let w = basis_term(2, 2, [0, 0, 0, 0])?
        .add(&basis_term(2, 2, [0, Z, 0, 0])?.scale(weight))?
        .scale(0.25);
    ProcessFamily::single(w, false, true)
}

/// Quantum time flip driven by a control qubit on `B_I`:
/// `W = S (ρ ⊗ 1^{A_O}) S† ⊗ 1^{B_O}` with `S = 1 ⊗ |0⟩⟨0| + SWAP_U ⊗ |1⟩⟨1|`
/// and `SWAP_U = (1 ⊗ U) SWAP (1 ⊗ U†)` identifying the bases of `A_I` and
/// `A_O`. `rho` acts on `A_I ⊗ B_I` with `B_I` a qubit.
pub fn build_qtf(
    rho: &LabeledOperator,
    identification: Option<&DMatrix<Complex64>>,
) -> Result<ProcessFamily> {
    let d_a = rho.factors()[rho.position(A_I)?].dim();
    let d_c = rho.factors()[rho.position(B_I)?].dim();
    if rho.factors().len() != 2 || d_c != 2 {
        return Err(Error::DimensionMismatch(
            "state must act on A_I ⊗ B_I with a qubit B_I".into(),
        ));
    }
    let dev = rho.hermiticity_residual();
    if dev > crate::algebra::HERMITICITY_TOL {
        return Err(Error::NotHermitian(dev));
    }
    if (rho.trace().re - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "state trace is {}, expected 1",
            rho.trace().re
        )));
    }
    if rho.min_eigenvalue()? < -crate::algebra::PSD_TOL {
        return Err(Error::InvalidArgument("state is not positive semi-definite".into()));
    }
    let mut swap = mats::swap(d_a);
    if let Some(u) = identification {
        if u.nrows() != d_a || u.ncols() != d_a {
            return Err(Error::DimensionMismatch(format!(
                "identification unitary must be {d_a}x{d_a}"
            )));
        }
        let lift = mats::identity(d_a).kronecker(u);
        swap = &lift * swap * lift.adjoint();
    }
    let three = vec![
        HilbertFactor::new(A_I, d_a)?,
        HilbertFactor::new(A_O, d_a)?,
        HilbertFactor::new(B_I, 2)?,
    ];
    let s_mat = mats::identity(d_a * d_a).kronecker(&mats::ket_bra(0, 0, 2))
        + swap.kronecker(&mats::ket_bra(1, 1, 2));
    let s = LabeledOperator::new(three.clone(), s_mat)?;
    let state = rho.embed(&three)?;
    let inner = s.matmul(&state)?.matmul(&s.adjoint())?;
    let w = inner.tensor(&LabeledOperator::identity(vec![HilbertFactor::new(B_O, 2)?])?)?;
    ProcessFamily::single(w, true, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::mats::{c, ket_bra, pauli_z};

    const TOL: f64 = 1e-9;

    fn passes(w: &ProcessFamily, mode: ConstraintMode) -> bool {
        validate_process(w, mode, TOL).unwrap().passed()
    }

    #[test]
    fn buckets_partition_all_patterns() {
        let mut seen = std::collections::HashSet::new();
        for p in Pattern::all() {
            assert!(seen.insert(p.bucket()));
        }
        assert_eq!(seen.len(), 16);
        let count = |s| Pattern::all().filter(|p| p.sector() == s).count();
        assert_eq!(count(Sector::Identity), 1);
        assert_eq!(count(Sector::TimeSymmetric), 3);
        assert_eq!(count(Sector::TimeForward), 5);
        assert_eq!(count(Sector::TimeBackward), 5);
        assert_eq!(count(Sector::Isolated), 2);
        assert_eq!(Pattern(0b1011).label(), "A_IB_IB_O");
        assert_eq!(Pattern::parse("A_OB_I"), Some(Pattern(0b0110)));
    }

    /// Each projector triple must annihilate exactly the patterns its sector
    /// rule forbids; checked term by term on basis operators.
    #[test]
    fn projector_triples_match_sector_rules() {
        for p in Pattern::all() {
            let idx: Vec<usize> = (0..4).map(|k| if p.0 & (1 << (3 - k)) != 0 { Z } else { 0 }).collect();
            let term = basis_term(2, 2, [idx[0], idx[1], idx[2], idx[3]]).unwrap();
            let hit = |specs: &[ProjectorSpec]| {
                specs.iter().any(|s| term.project(s).unwrap().frobenius_norm() > 1e-12)
            };
            assert_eq!(hit(&NORMALIZATION_PROJECTORS), p.sector() == Sector::TimeSymmetric, "{p}");
            assert_eq!(hit(&NO_POST_PROJECTORS), p.sector().needs_post(), "{p}");
            assert_eq!(hit(&NO_PRE_PROJECTORS), p.sector().needs_pre(), "{p}");
        }
    }

    #[test]
    fn trivial_passes_everything() {
        let w = trivial_process(2, 3).unwrap();
        for m in ConstraintMode::ALL {
            assert!(passes(&w, m), "{m}");
        }
        let dec = sector_decompose(&w).unwrap();
        assert!((dec.p0(0, 0) - 1.0).abs() < 1e-14);
        for s in [Sector::TimeSymmetric, Sector::TimeForward, Sector::TimeBackward, Sector::Isolated] {
            assert!(dec.sector_norm(0, 0, s) < 1e-14);
        }
        assert_eq!(classify(&w, TOL).unwrap().class, ClassLabel::Iso);
    }

    #[test]
    fn ocb_sector_content() {
        let w = build_ocb().unwrap();
        assert!((w.total().trace().re - 4.0).abs() < 1e-14);
        assert!(w.element(0, 0).min_eigenvalue().unwrap() >= -1e-10);
        let dec = sector_decompose(&w).unwrap();
        let k = 1.0 / 2f64.sqrt();
        assert!((dec.p0(0, 0) - 1.0).abs() < 1e-14);
        assert!((dec.coefficient(0, 0, [0, Z, Z, 0]) - k).abs() < 1e-14);
        assert!((dec.coefficient(0, 0, [Z, 0, X, Z]) - k).abs() < 1e-14);
        for p in Pattern::all() {
            let n = dec.bucket(0, 0, p, 1e-12).len();
            let expect = usize::from(matches!(p.0, 0b0000 | 0b0110 | 0b1011));
            assert_eq!(n, expect, "{p}");
        }
        let raw = decompose(w.element(0, 0), &process_bases(2, 2).unwrap()).unwrap();
        assert!((raw.get(&[0, 0, 0, 0]) - 0.25).abs() < 1e-15);
        assert!((raw.get(&[0, Z, Z, 0]) - 1.0 / (4.0 * 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn ocb_validation_pattern() {
        let w = build_ocb().unwrap();
        assert!(passes(&w, ConstraintMode::General));
        assert!(passes(&w, ConstraintMode::NoPost));
        let report = validate_process(&w, ConstraintMode::NoPre, TOL).unwrap();
        assert!(!report.passed());
        let sector = report.find(NO_PRE_SECTOR, "v0/A_IB_IB_O").unwrap();
        assert!((sector.residual - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        let c = report.find(&no_pre_constraint(NO_PRE_PROJECTORS[0]), "v0").unwrap();
        assert!((c.residual - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        let cls = classify(&w, TOL).unwrap();
        assert_eq!(cls.class, ClassLabel::Tf);
        assert!(cls.requires_preselection && !cls.requires_postselection);
    }

    #[test]
    fn ocb_reversal_matches_display() {
        let w = build_ocb().unwrap();
        let rev = time_reverse_process(&w).unwrap();
        let k = 1.0 / 2f64.sqrt();
        let expected = basis_term(2, 2, [0, 0, 0, 0])
            .unwrap()
            .add(&basis_term(2, 2, [0, Z, Z, 0]).unwrap().scale(k))
            .unwrap()
            .add(&basis_term(2, 2, [Z, X, 0, Z]).unwrap().scale(k))
            .unwrap()
            .scale(0.25);
        assert!(rev.element(0, 0).sub(&expected).unwrap().max_abs() < 1e-15);
        assert!(passes(&rev, ConstraintMode::General));
        assert!(passes(&rev, ConstraintMode::NoPre));
        assert!(!passes(&rev, ConstraintMode::NoPost));
        assert_eq!(classify(&rev, TOL).unwrap().class, ClassLabel::Tb);
        assert!(!rev.preselection_present() && rev.postselection_present());
        assert_eq!(time_reverse_process(&rev).unwrap(), w);
    }

    #[test]
    fn reversal_rejects_unequal_dims() {
        assert!(matches!(
            time_reverse_process(&trivial_process(2, 3).unwrap()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn inequivalence_w_properties() {
        for weight in [0.25, 0.5, 1.0] {
            let w = build_inequivalence_w(weight).unwrap();
            let ev = w.element(0, 0).eigenvalues().unwrap();
            assert!((ev[0] - (1.0 - weight) / 4.0).abs() < 1e-14);
            assert!((ev[15] - (1.0 + weight) / 4.0).abs() < 1e-14);
            assert!(passes(&w, ConstraintMode::General));
            assert!(!passes(&w, ConstraintMode::NoPost));
            let cls = classify(&w, TOL).unwrap();
            assert!(cls.requires_postselection);
            let dec = sector_decompose(&w).unwrap();
            assert!((dec.coefficient(0, 0, [0, Z, 0, 0]) - weight).abs() < 1e-14);
            assert!((dec.p0(0, 0) - 1.0).abs() < 1e-14);
        }
        assert!(build_inequivalence_w(0.0).is_err());
        assert!(build_inequivalence_w(1.5).is_err());
        let tiny = build_inequivalence_w(1e-300).unwrap();
        let trivial = trivial_process(2, 2).unwrap();
        assert!(tiny.element(0, 0).sub(trivial.element(0, 0)).unwrap().max_abs() < 1e-15);
    }

    fn rho_product(rho_t: DMatrix<Complex64>, control: DMatrix<Complex64>) -> LabeledOperator {
        LabeledOperator::single(A_I, rho_t)
            .unwrap()
            .tensor(&LabeledOperator::single(B_I, control).unwrap())
            .unwrap()
    }

    #[test]
    fn qtf_pure_controls() {
        let rho_t = DMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(0.3, 0.0)]);
        let fs = process_factors(2, 2).unwrap();
        let w0 = build_qtf(&rho_product(rho_t.clone(), ket_bra(0, 0, 2)), None).unwrap();
        let expect0 = LabeledOperator::single(A_I, rho_t.clone())
            .unwrap()
            .tensor(&LabeledOperator::single(B_I, ket_bra(0, 0, 2)).unwrap())
            .unwrap()
            .embed(&fs)
            .unwrap();
        assert!(w0.element(0, 0).sub(&expect0).unwrap().max_abs() < 1e-15);
        let w1 = build_qtf(&rho_product(rho_t.clone(), ket_bra(1, 1, 2)), None).unwrap();
        let expect1 = LabeledOperator::single(A_O, rho_t)
            .unwrap()
            .tensor(&LabeledOperator::single(B_I, ket_bra(1, 1, 2)).unwrap())
            .unwrap()
            .embed(&fs)
            .unwrap();
        assert!(w1.element(0, 0).sub(&expect1).unwrap().max_abs() < 1e-15);
        for w in [&w0, &w1] {
            assert!(passes(w, ConstraintMode::General));
            assert!((w.total().trace().re - 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn qtf_superposed_control_is_time_symmetric() {
        let plus = mats::half_plus(&mats::pauli_x(), 1.0);
        let w = build_qtf(&rho_product(ket_bra(0, 0, 2), plus), None).unwrap();
        assert!(passes(&w, ConstraintMode::General));
        assert_eq!(classify(&w, TOL).unwrap().class, ClassLabel::Ts);
    }

    #[test]
    fn qtf_rejects_bad_state() {
        let bad = rho_product(mats::identity(2), ket_bra(0, 0, 2));
        assert!(build_qtf(&bad, None).is_err());
        // unit trace but eigenvalues (1.5, -0.5)
        let neg = rho_product(
            mats::identity(2).map(|z| z * 0.5) + pauli_z(),
            ket_bra(0, 0, 2),
        );
        assert!(matches!(build_qtf(&neg, None), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn decomposition_reassembles() {
        let w = build_ocb().unwrap();
        let dec = sector_decompose(&w).unwrap();
        let back = dec.reassemble(0, 0).unwrap();
        assert!(back.sub(w.element(0, 0)).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn trace_violation_detected() {
        let w = trivial_process(2, 2).unwrap();
        let bad = w.with_element(0, 0, w.element(0, 0).scale(1.1)).unwrap();
        let report = validate_process(&bad, ConstraintMode::General, TOL).unwrap();
        let check = report.find(TRACE_NORMALIZATION, "total").unwrap();
        assert!(!check.passed && (check.residual - 0.4).abs() < 1e-12);
    }
}
