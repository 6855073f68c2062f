//! Reproducible worked examples. Each demo fills a report, compares its
//! numbers with the expected values and sets the verdict.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;
use tsproc_core::algebra::mats;
use tsproc_core::distributions::{check_order_compatibility, joint_from_process, JointDistribution};
use tsproc_core::inequalities::{evaluate, Direction, EvalOptions, Game};
use tsproc_core::operations::{
    build_bob_gated, build_measure_prepare_z, identity_operation, random_forward_operation,
    random_physical_operation, time_reverse_operation, tf_to_ts, ts_to_tf, validate_forward,
    validate_physical, GatedPreparation, LiftMode, OperationFamily, BACKWARD_CAUSALITY,
    FORWARD_CAUSALITY,
};
use tsproc_core::processes::{
    basis_term, build_inequivalence_w, build_ocb, build_qtf, classify, time_reverse_process,
    trivial_process, validate_process, ConstraintMode, Pattern, ProcessFamily, Sector, A_I, B_I,
};
use tsproc_core::sampling;
use tsproc_core::{HilbertFactor, LabeledOperator};

use crate::report::Report;
use crate::CliError;

pub const DEMOS: [&str; 6] = ["ocb", "reversed-ocb", "timeflip", "inequivalence", "tf-to-ts", "probability-rule"];

/// Agreement required between a computed value and its closed form.
pub const VALUE_TOL: f64 = 1e-9;

/// `(2 + √2)/4`.
pub const OCB_VALUE: f64 = (2.0 + SQRT_2) / 4.0;

#[derive(Debug, Clone, Copy)]
pub struct DemoConfig {
    pub seed: u64,
    pub tol: f64,
}

pub fn run(name: &str, cfg: DemoConfig, report: &mut Report) -> Result<(), CliError> {
    match name {
        "ocb" => ocb(cfg, report, false),
        "reversed-ocb" => ocb(cfg, report, true),
        "timeflip" => timeflip(cfg, report),
        "inequivalence" => inequivalence(cfg, report),
        "tf-to-ts" => tf_to_ts_demo(cfg, report),
        "probability-rule" => probability_rule(cfg, report),
        other => Err(CliError::Usage(format!(
            "unknown demo `{other}` (expected one of {})",
            DEMOS.join(", ")
        ))),
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALUE_TOL
}

/// The OCB experiment: the process, Alice's measure-prepare operation and
/// Bob's gated operation.
pub fn ocb_experiment() -> Result<(ProcessFamily, OperationFamily, OperationFamily), CliError> {
    Ok((
        build_ocb()?,
        build_measure_prepare_z("A")?,
        build_bob_gated("B", GatedPreparation::MaximallyMixed)?,
    ))
}

/// Reversal sends Bob's reversed operation to Alice's slot and vice versa.
pub fn reversed_ocb_experiment() -> Result<(ProcessFamily, OperationFamily, OperationFamily), CliError> {
    let (w, a, b) = ocb_experiment()?;
    Ok((
        time_reverse_process(&w)?,
        time_reverse_operation(&b)?.with_party("A")?,
        time_reverse_operation(&a)?.with_party("B")?,
    ))
}

/// Validates `w` in every constraint mode; returns the per-mode verdicts.
fn process_modes(
    report: &mut Report,
    prefix: &str,
    w: &ProcessFamily,
    tol: f64,
) -> Result<BTreeMap<&'static str, bool>, CliError> {
    let mut modes = BTreeMap::new();
    for mode in ConstraintMode::ALL {
        let v = validate_process(w, mode, tol)?;
        modes.insert(mode.name(), report.add_validation(&format!("{prefix}{mode}"), &v));
    }
    let class = classify(w, tol)?;
    report.detail(format!("{prefix}modes"), &modes);
    report.detail(
        format!("{prefix}class"),
        json!({
            "class": class.class.name(),
            "requires_preselection": class.requires_preselection,
            "requires_postselection": class.requires_postselection,
        }),
    );
    Ok(modes)
}

fn score_games(report: &mut Report, d: &JointDistribution) -> Result<BTreeMap<String, bool>, CliError> {
    let mut violated = BTreeMap::new();
    for game in [Game::Gyni, Game::Lgyni] {
        for dir in [Direction::Forward, Direction::Backward] {
            let r = evaluate(d, game, dir, &EvalOptions::default())?;
            let name = format!("{game}/{dir}");
            report.value(name.clone(), r.value);
            report.value(format!("{name}/bound"), r.bound);
            violated.insert(name, r.violated);
        }
    }
    report.detail("violated", &violated);
    Ok(violated)
}

fn ocb(cfg: DemoConfig, report: &mut Report, reversed: bool) -> Result<(), CliError> {
    let (w, op_a, op_b) = if reversed { reversed_ocb_experiment()? } else { ocb_experiment()? };
    let ops_ok = report.add_validation("operation-A", &validate_physical(&op_a, cfg.tol)?)
        & report.add_validation("operation-B", &validate_physical(&op_b, cfg.tol)?);
    let modes = process_modes(report, "process-", &w, cfg.tol)?;
    let d = joint_from_process(&w, &op_a, &op_b)?;
    let dist_ok = d.is_valid(cfg.tol);
    report.value("distribution/normalization-error", d.normalization_error());
    report.value("distribution/min-entry", d.min_entry());
    let orders = check_order_compatibility(&d, cfg.tol)?;
    let order_map: BTreeMap<_, _> = orders.checks.iter().map(|c| (c.condition.name(), c.residual)).collect();
    report.detail("order-residuals", &order_map);
    let violated = score_games(report, &d)?;

    let (fwd, bwd) = if reversed { (0.5, OCB_VALUE) } else { (OCB_VALUE, 0.5) };
    let v = &report.values;
    let values_ok = close(v["lgyni/forward"], fwd)
        && close(v["lgyni/backward"], bwd)
        && violated["lgyni/forward"] == !reversed
        && violated["lgyni/backward"] == reversed;
    report.detail("expected", json!({ "lgyni/forward": fwd, "lgyni/backward": bwd }));
    report.passed = ops_ok && modes["general"] && dist_ok && values_ok;
    Ok(())
}

/// Alice's `(a, x)` statistics computed from Kraus operators `K_{a,x} = |a⟩⟨x|`
/// acting on `rho`, traversed forward or, via `K^T`, backward; the income is
/// uniform. Entry `[a][x]`.
pub fn kraus_statistics(rho: &DMatrix<Complex64>, backward: bool) -> [[f64; 2]; 2] {
    let mut p = [[0.0; 2]; 2];
    for (a, row) in p.iter_mut().enumerate() {
        for (x, entry) in row.iter_mut().enumerate() {
            let k = mats::ket_bra(a, x, 2);
            let k = if backward { k.transpose() } else { k };
            *entry = 0.5 * (&k * rho * k.adjoint()).trace().re;
        }
    }
    p
}

fn qtf_state(rho_t: &DMatrix<Complex64>, control: &DMatrix<Complex64>) -> Result<LabeledOperator, CliError> {
    Ok(LabeledOperator::single(A_I, rho_t.clone())?.tensor(&LabeledOperator::single(B_I, control.clone())?)?)
}

fn timeflip(cfg: DemoConfig, report: &mut Report) -> Result<(), CliError> {
    let mut rng = sampling::rng(cfg.seed);
    let rho_t = sampling::random_density_matrix(2, &mut rng);
    report.detail(
        "target-state",
        (0..2)
            .map(|i| (0..2).map(|j| [rho_t[(i, j)].re, rho_t[(i, j)].im]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    );
    let alice = build_measure_prepare_z("A")?;
    let bob = identity_operation("B", 2)?;
    let mut ok = true;
    let controls = [
        ("control-0", mats::ket_bra(0, 0, 2), Some(false)),
        ("control-1", mats::ket_bra(1, 1, 2), Some(true)),
        ("control-plus", mats::half_plus(&mats::pauli_x(), 1.0), None),
    ];
    for (name, control, direction) in controls {
        let w = build_qtf(&qtf_state(&rho_t, &control)?, None)?;
        let general = validate_process(&w, ConstraintMode::General, cfg.tol)?;
        ok &= report.add_validation(&format!("{name}:process-general"), &general);
        let class = classify(&w, cfg.tol)?;
        report.detail(format!("{name}:class"), class.class.name());
        let d = joint_from_process(&w, &alice, &bob)?;
        let p_ax = |a: usize, x: usize| d.get(&[0, 0, a, 0, x, 0, 0, 0]);
        let p_x: Vec<f64> = (0..2).map(|x| p_ax(0, x) + p_ax(1, x)).collect();
        let p_a: Vec<f64> = (0..2).map(|a| p_ax(a, 0) + p_ax(a, 1)).collect();
        for k in 0..2 {
            report.value(format!("{name}/p(x={k})"), p_x[k]);
            report.value(format!("{name}/p(a={k})"), p_a[k]);
        }
        match direction {
            Some(backward) => {
                let oracle = kraus_statistics(&rho_t, backward);
                let (observed, predicted): (&[f64], Vec<f64>) = if backward {
                    (&p_a, (0..2).map(|a| oracle[a][0] + oracle[a][1]).collect())
                } else {
                    (&p_x, (0..2).map(|x| oracle[0][x] + oracle[1][x]).collect())
                };
                let var = if backward { "a" } else { "x" };
                for k in 0..2 {
                    // Tr[ρ (1 + (-1)^k σz)/2]
                    let closed_form = rho_t[(k, k)].re;
                    report.value(format!("{name}/oracle p({var}={k})"), predicted[k]);
                    ok &= close(observed[k], predicted[k]) && close(predicted[k], closed_form);
                }
            }
            None => ok &= class.class == tsproc_core::processes::ClassLabel::Ts,
        }
    }

    // random joint states of target and control
    let mut worst_trace = 0.0f64;
    let mut all_valid = true;
    let factors = vec![HilbertFactor::new(A_I, 2)?, HilbertFactor::new(B_I, 2)?];
    for _ in 0..20 {
        let rho = LabeledOperator::new(factors.clone(), sampling::random_density_matrix(4, &mut rng))?;
        let w = build_qtf(&rho, None)?;
        all_valid &= validate_process(&w, ConstraintMode::General, cfg.tol)?.passed();
        worst_trace = worst_trace.max((w.total().trace().re - 4.0).abs());
    }
    report.value("random-states/count", 20.0);
    report.value("random-states/max-trace-error", worst_trace);
    report.detail("random-states/all-valid", all_valid);
    report.passed = ok && all_valid && worst_trace <= VALUE_TOL;
    Ok(())
}

/// Alice's two-income family `(1/2)(1 ± c σz^{A_O})` with a single outcome.
pub fn inequivalence_alice(c: f64) -> Result<OperationFamily, CliError> {
    let id = mats::identity(2);
    let z = mats::pauli_z();
    Ok(OperationFamily::from_fn("A", 2, 1, 2, 1, |_, a, _| {
        let sign = if a == 0 { 1.0 } else { -1.0 };
        id.kronecker(&(&id + &z * Complex64::new(sign * c, 0.0))).map(|e| e * 0.5)
    })?)
}

fn inequivalence(cfg: DemoConfig, report: &mut Report) -> Result<(), CliError> {
    let bob = identity_operation("B", 2)?;
    let tf_reference = trivial_process(2, 2)?;
    let mut ok = true;
    for c in [0.0, 0.5, 1.0] {
        let alice = inequivalence_alice(c)?;
        ok &= report.add_validation(&format!("operation-A[c={c}]"), &validate_physical(&alice, cfg.tol)?);
        // without the σz^{A_O} term the value cannot depend on c
        let p_tf = joint_from_process(&tf_reference, &alice, &bob)?.get(&[0; 8]);
        report.value(format!("tf-reference[c={c}]"), p_tf);
        ok &= close(p_tf, 0.5);
        for weight in [0.25, 0.5, 1.0] {
            let w = build_inequivalence_w(weight)?;
            let p = joint_from_process(&w, &alice, &bob)?.get(&[0; 8]);
            let expected = 0.5 * (1.0 + c * weight);
            report.value(format!("p(1,1,1,1)[c={c},w={weight}]"), p);
            ok &= close(p, expected);
        }
    }
    let modes = process_modes(report, "process-", &build_inequivalence_w(1.0)?, cfg.tol)?;
    report.passed = ok && modes["general"] && !modes["no_post"];
    Ok(())
}

fn tf_to_ts_demo(cfg: DemoConfig, report: &mut Report) -> Result<(), CliError> {
    const FAMILIES: u64 = 50;
    let d = 2;
    let mut ok = true;
    let mut verbatim_fwd = 0.0f64;
    let mut verbatim_bwd = 0.0f64;
    let mut recovered = 0u32;
    for k in 0..FAMILIES {
        let nx = 1 + (k % 2) as usize;
        let tf = random_forward_operation("A", d, nx, cfg.seed.wrapping_add(k))?;
        ok &= validate_forward(&tf, cfg.tol)?.passed();
        let lift = tf_to_ts(&tf, d * nx, LiftMode::Repaired)?;
        ok &= validate_physical(&lift, cfg.tol)?.passed();
        if ts_to_tf(&lift, 0)? == tf {
            recovered += 1;
        }
        let verbatim = validate_physical(&tf_to_ts(&tf, d * nx, LiftMode::Verbatim)?, cfg.tol)?;
        let worst = |name| verbatim.worst(name).map_or(0.0, |c| c.residual);
        verbatim_fwd = verbatim_fwd.max(worst(FORWARD_CAUSALITY));
        verbatim_bwd = verbatim_bwd.max(worst(BACKWARD_CAUSALITY));
    }
    report.value("families", FAMILIES as f64);
    report.value("repaired/recovered-exactly", recovered as f64);
    report.value(format!("verbatim/{FORWARD_CAUSALITY}"), verbatim_fwd);
    report.value(format!("verbatim/{BACKWARD_CAUSALITY}"), verbatim_bwd);
    report.detail("seeds", json!({ "first": cfg.seed, "count": FAMILIES }));
    report.passed = ok && recovered as u64 == FAMILIES;
    Ok(())
}

/// The processes exercised by the probability-rule property suite.
pub fn suite_processes(seed: u64) -> Result<Vec<(&'static str, ProcessFamily)>, CliError> {
    let mut rng = sampling::rng(seed);
    let factors = vec![HilbertFactor::new(A_I, 2)?, HilbertFactor::new(B_I, 2)?];
    let rho = LabeledOperator::new(factors, sampling::random_density_matrix(4, &mut rng))?;
    Ok(vec![
        ("trivial", trivial_process(2, 2)?),
        ("ocb", build_ocb()?),
        ("reversed-ocb", time_reverse_process(&build_ocb()?)?),
        ("qtf", build_qtf(&rho, None)?),
        ("inequivalence", build_inequivalence_w(0.5)?),
    ])
}

/// Random operation pair `k`; alphabets cycle through `{1, 2}²` per party.
pub fn suite_pair(seed: u64, k: u64) -> Result<(OperationFamily, OperationFamily), CliError> {
    let na = 1 + (k & 1) as usize;
    let nx = 1 + ((k >> 1) & 1) as usize;
    let nb = 1 + ((k >> 2) & 1) as usize;
    let ny = 1 + ((k >> 3) & 1) as usize;
    let base = seed.wrapping_add(2 * k);
    Ok((
        random_physical_operation("A", 2, na, nx, base)?,
        random_physical_operation("B", 2, nb, ny, base.wrapping_add(1))?,
    ))
}

/// Basis indices of every term on the sectors forbidden by normalization.
pub fn forbidden_indices(d: usize) -> Vec<[usize; 4]> {
    let n = d * d;
    let mut out = Vec::new();
    for k in 0..n.pow(4) {
        let idx = [k / n.pow(3), (k / n.pow(2)) % n, (k / n) % n, k % n];
        if Pattern::of_index(&idx).sector() == Sector::TimeSymmetric {
            out.push(idx);
        }
    }
    out
}

/// Deviation that counts as broken normalization after an injection.
const BREAK_THRESHOLD: f64 = 1e-6;
/// Coefficient of an injected term, relative to the identity coefficient.
const INJECTION: f64 = 0.2;

fn probability_rule(cfg: DemoConfig, report: &mut Report) -> Result<(), CliError> {
    const PAIRS: u64 = 200;
    let pairs: Vec<_> = (0..PAIRS).map(|k| suite_pair(cfg.seed, k)).collect::<Result<_, _>>()?;
    let mut ok = true;
    for (name, w) in suite_processes(cfg.seed)? {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut norm_err = 0.0f64;
        for (a, b) in &pairs {
            let d = joint_from_process(&w, a, b)?;
            min = min.min(d.min_entry());
            max = max.max(d.max_entry());
            norm_err = norm_err.max(d.normalization_error());
        }
        ok &= min >= -1e-12 && max <= 1.0 + 1e-12 && norm_err <= VALUE_TOL;
        report.value(format!("{name}/min-probability"), min);
        report.value(format!("{name}/max-probability"), max);
        report.value(format!("{name}/normalization-error"), norm_err);

        let scale = INJECTION / (w.d_a() * w.d_b()) as f64;
        let mut unbroken = Vec::new();
        let terms = forbidden_indices(w.d_a());
        for idx in &terms {
            let term = basis_term(w.d_a(), w.d_b(), *idx)?.scale(scale);
            let injected = w.with_element(0, 0, w.element(0, 0).add(&term)?)?;
            let mut broken = false;
            for (a, b) in &pairs {
                if joint_from_process(&injected, a, b)?.normalization_error() > BREAK_THRESHOLD {
                    broken = true;
                    break;
                }
            }
            if !broken {
                unbroken.push(Pattern::of_index(idx).label() + &format!("{idx:?}"));
            }
        }
        ok &= unbroken.is_empty();
        report.value(format!("{name}/injected-terms"), terms.len() as f64);
        report.value(format!("{name}/injected-detected"), (terms.len() - unbroken.len()) as f64);
        report.detail(format!("{name}/undetected"), &unbroken);
    }
    report.value("pairs", PAIRS as f64);
    report.passed = ok;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kraus_oracle_is_normalized() {
        let rho = DMatrix::from_row_slice(2, 2, &[mats::c(0.6, 0.0), mats::c(0.2, 0.1), mats::c(0.2, -0.1), mats::c(0.4, 0.0)]);
        for backward in [false, true] {
            let p = kraus_statistics(&rho, backward);
            let total: f64 = p.iter().flatten().sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn forbidden_terms_for_qubits() {
        // 9 + 9 + 81 terms on the three time-symmetric patterns
        assert_eq!(forbidden_indices(2).len(), 99);
    }
}
