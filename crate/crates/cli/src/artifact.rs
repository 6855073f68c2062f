//! JSON artifact files for operators, operation families, process families
//! and outcome tables.
//!
//! Complex entries are `[re, im]` pairs, matrices are arrays of rows in the
//! order of `spaces`, and family elements are keyed by slash-joined indices.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use tsproc_core::distributions::{JointDistribution, Var};
use tsproc_core::operations::{self, OperationFamily};
use tsproc_core::processes::{self, ProcessFamily, A_I, B_I};
use tsproc_core::{HilbertFactor, LabeledOperator};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Operator(LabeledOperator),
    Operation(OperationFamily),
    Process(ProcessFamily),
    Distribution(JointDistribution),
}

impl Artifact {
    pub fn kind(&self) -> &'static str {
        match self {
            Artifact::Operator(_) => "operator",
            Artifact::Operation(_) => "operation",
            Artifact::Process(_) => "process",
            Artifact::Distribution(_) => "distribution",
        }
    }
}

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
struct Space {
    label: String,
    dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    kind: String,
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    party: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spaces: Option<Vec<Space>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alphabets: Option<BTreeMap<String, usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preselection_present: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    postselection_present: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<RawMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elements: Option<BTreeMap<String, RawMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

impl RawFile {
    fn new(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            schema_version: SCHEMA_VERSION,
            party: None,
            spaces: None,
            alphabets: None,
            preselection_present: None,
            postselection_present: None,
            matrix: None,
            elements: None,
            values: None,
        }
    }
}

fn spaces_of(factors: &[HilbertFactor]) -> Vec<Space> {
    factors
        .iter()
        .map(|f| Space { label: f.label().into(), dim: f.dim() })
        .collect()
}

fn raw_matrix(m: &DMatrix<Complex64>) -> RawMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn alphabets(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn to_raw(a: &Artifact) -> RawFile {
    let mut raw = RawFile::new(a.kind());
    match a {
        Artifact::Operator(op) => {
            raw.spaces = Some(spaces_of(op.factors()));
            raw.matrix = Some(raw_matrix(op.matrix()));
        }
        Artifact::Operation(op) => {
            raw.party = Some(op.party().into());
            raw.spaces = Some(spaces_of(&op.factors()));
            raw.alphabets = Some(alphabets(&[
                ("settings", op.n_settings()),
                ("incomes", op.n_incomes()),
                ("outcomes", op.n_outcomes()),
            ]));
            let mut elements = BTreeMap::new();
            for s in 0..op.n_settings() {
                for x_a in 0..op.n_incomes() {
                    for x in 0..op.n_outcomes() {
                        elements.insert(
                            operations::element_key(s, x_a, x),
                            raw_matrix(op.element(s, x_a, x).matrix()),
                        );
                    }
                }
            }
            raw.elements = Some(elements);
        }
        Artifact::Process(w) => {
            raw.spaces = Some(spaces_of(&w.factors()));
            raw.alphabets = Some(alphabets(&[("pre", w.n_pre()), ("post", w.n_post())]));
            raw.preselection_present = Some(w.preselection_present());
            raw.postselection_present = Some(w.postselection_present());
            let mut elements = BTreeMap::new();
            for u in 0..w.n_pre() {
                for v in 0..w.n_post() {
                    elements.insert(processes::element_key(u, v), raw_matrix(w.element(u, v).matrix()));
                }
            }
            raw.elements = Some(elements);
        }
        Artifact::Distribution(d) => {
            let pairs: Vec<(&str, usize)> = Var::ALL.iter().map(|v| (v.name(), d.size(*v))).collect();
            raw.alphabets = Some(alphabets(&pairs));
            raw.values = Some(d.values().to_vec());
        }
    }
    raw
}

pub fn to_json(a: &Artifact, pretty: bool) -> String {
    let raw = to_raw(a);
    let out = if pretty {
        serde_json::to_string_pretty(&raw)
    } else {
        serde_json::to_string(&raw)
    };
    out.expect("artifact serialization is infallible")
}

pub fn save(a: &Artifact, path: &Path, pretty: bool) -> Result<(), CliError> {
    let mut text = to_json(a, pretty);
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

pub fn load(path: &Path) -> Result<Artifact, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    from_json(&text).map_err(|e| e.at(path))
}

/// Byte offset of a 1-based `(line, column)` position reported by the parser.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn from_json(text: &str) -> Result<Artifact, CliError> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| {
        let offset = if e.is_eof() { text.len() } else { byte_offset(text, e.line(), e.column()) };
        CliError::Parse { path: String::new(), offset, message: e.to_string() }
    })?;
    from_raw(raw)
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema { path: String::new(), message: msg.into() }
}

fn require<T>(field: Option<T>, name: &str, kind: &str) -> Result<T, CliError> {
    field.ok_or_else(|| schema(format!("{kind} artifact is missing `{name}`")))
}

fn forbid<T>(field: &Option<T>, name: &str, kind: &str) -> Result<(), CliError> {
    match field {
        Some(_) => Err(schema(format!("`{name}` is not a field of a {kind} artifact"))),
        None => Ok(()),
    }
}

fn matrix_from_raw(raw: &RawMatrix, side: usize, key: &str) -> Result<DMatrix<Complex64>, CliError> {
    if raw.len() != side || raw.iter().any(|row| row.len() != side) {
        let cols = raw.first().map_or(0, Vec::len);
        return Err(schema(format!(
            "matrix `{key}` is {}x{cols}, spaces require {side}x{side}",
            raw.len()
        )));
    }
    if raw.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(schema(format!("matrix `{key}` has a non-finite entry")));
    }
    Ok(DMatrix::from_fn(side, side, |i, j| Complex64::new(raw[i][j][0], raw[i][j][1])))
}

fn factors_from(spaces: &[Space]) -> Result<Vec<HilbertFactor>, CliError> {
    Ok(spaces
        .iter()
        .map(|s| HilbertFactor::new(&s.label, s.dim))
        .collect::<Result<_, _>>()?)
}

fn alphabet(map: &BTreeMap<String, usize>, names: &[&str], kind: &str) -> Result<Vec<usize>, CliError> {
    if let Some(extra) = map.keys().find(|k| !names.contains(&k.as_str())) {
        return Err(schema(format!("unknown alphabet `{extra}` for a {kind} artifact")));
    }
    names
        .iter()
        .map(|n| {
            map.get(*n)
                .copied()
                .ok_or_else(|| schema(format!("{kind} alphabets are missing `{n}`")))
        })
        .collect()
}

/// Elements in the order given by `keys`; every key must be present and no
/// other key may appear.
fn ordered_elements(
    mut elements: BTreeMap<String, RawMatrix>,
    keys: &[String],
    factors: &[HilbertFactor],
) -> Result<Vec<LabeledOperator>, CliError> {
    let side: usize = factors.iter().map(HilbertFactor::dim).product();
    let mut out = Vec::with_capacity(keys.len());
    for key in keys {
        let raw = elements
            .remove(key)
            .ok_or_else(|| schema(format!("element `{key}` is missing")))?;
        let m = matrix_from_raw(&raw, side, key)?;
        out.push(LabeledOperator::new(factors.to_vec(), m)?);
    }
    if let Some(extra) = elements.keys().next() {
        return Err(schema(format!("element `{extra}` is outside the alphabets")));
    }
    Ok(out)
}

fn from_raw(raw: RawFile) -> Result<Artifact, CliError> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(schema(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            raw.schema_version
        )));
    }
    let kind = raw.kind.as_str();
    match kind {
        "operator" => {
            for (present, name) in [
                (raw.party.is_some(), "party"),
                (raw.alphabets.is_some(), "alphabets"),
                (raw.elements.is_some(), "elements"),
                (raw.values.is_some(), "values"),
                (raw.preselection_present.is_some(), "preselection_present"),
                (raw.postselection_present.is_some(), "postselection_present"),
            ] {
                if present {
                    return Err(schema(format!("`{name}` is not a field of an operator artifact")));
                }
            }
            let factors = factors_from(&require(raw.spaces, "spaces", kind)?)?;
            let side = factors.iter().map(HilbertFactor::dim).product();
            let m = matrix_from_raw(&require(raw.matrix, "matrix", kind)?, side, "matrix")?;
            Ok(Artifact::Operator(LabeledOperator::new(factors, m)?))
        }
        "operation" => {
            forbid(&raw.matrix, "matrix", kind)?;
            forbid(&raw.values, "values", kind)?;
            forbid(&raw.preselection_present, "preselection_present", kind)?;
            forbid(&raw.postselection_present, "postselection_present", kind)?;
            let party = require(raw.party, "party", kind)?;
            let spaces = require(raw.spaces, "spaces", kind)?;
            let dim = spaces.first().map_or(0, |s| s.dim);
            let expected = spaces_of(&operations::party_factors(&party, dim.max(1))?);
            if spaces != expected {
                return Err(schema(format!(
                    "operation spaces must be [{party}_I, {party}_O] of equal dimension"
                )));
            }
            let n = alphabet(&require(raw.alphabets, "alphabets", kind)?, &["settings", "incomes", "outcomes"], kind)?;
            let mut keys = Vec::new();
            for s in 0..n[0] {
                for a in 0..n[1] {
                    for x in 0..n[2] {
                        keys.push(operations::element_key(s, a, x));
                    }
                }
            }
            let factors = factors_from(&spaces)?;
            let elements = ordered_elements(require(raw.elements, "elements", kind)?, &keys, &factors)?;
            Ok(Artifact::Operation(OperationFamily::new(&party, dim, n[0], n[1], n[2], elements)?))
        }
        "process" => {
            forbid(&raw.party, "party", kind)?;
            forbid(&raw.matrix, "matrix", kind)?;
            forbid(&raw.values, "values", kind)?;
            let factors = factors_from(&require(raw.spaces, "spaces", kind)?)?;
            let dim_of = |label: &str| factors.iter().find(|f| f.label() == label).map(HilbertFactor::dim);
            let (d_a, d_b) = match (dim_of(A_I), dim_of(B_I)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(schema("process spaces must include A_I, A_O, B_I and B_O")),
            };
            let n = alphabet(&require(raw.alphabets, "alphabets", kind)?, &["pre", "post"], kind)?;
            let mut keys = Vec::new();
            for u in 0..n[0] {
                for v in 0..n[1] {
                    keys.push(processes::element_key(u, v));
                }
            }
            let elements = ordered_elements(require(raw.elements, "elements", kind)?, &keys, &factors)?;
            Ok(Artifact::Process(ProcessFamily::new(
                d_a,
                d_b,
                n[0],
                n[1],
                elements,
                raw.preselection_present.unwrap_or(false),
                raw.postselection_present.unwrap_or(false),
            )?))
        }
        "distribution" => {
            forbid(&raw.party, "party", kind)?;
            forbid(&raw.spaces, "spaces", kind)?;
            forbid(&raw.matrix, "matrix", kind)?;
            forbid(&raw.elements, "elements", kind)?;
            forbid(&raw.preselection_present, "preselection_present", kind)?;
            forbid(&raw.postselection_present, "postselection_present", kind)?;
            let names: Vec<&str> = Var::ALL.iter().map(|v| v.name()).collect();
            let n = alphabet(&require(raw.alphabets, "alphabets", kind)?, &names, kind)?;
            let values = require(raw.values, "values", kind)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(schema("distribution has a non-finite value"));
            }
            let mut alph = [0; 8];
            alph.copy_from_slice(&n);
            Ok(Artifact::Distribution(JointDistribution::new(alph, values)?))
        }
        other => Err(schema(format!(
            "unknown kind `{other}` (expected operator, operation, process or distribution)"
        ))),
    }
}
