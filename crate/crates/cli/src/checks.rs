//! The `verify` subcommand: every module-level invariant exercised against
//! one concrete problem. Each check prints one `ok`/`FAIL` line; failures
//! also emit a JSON record on stderr.

use num_complex::Complex64;

use ptq_core::builders::build_term_circuit;
use ptq_core::circuit::{Circuit, RegisterLayout};
use ptq_core::complexity::{ue_cost, CostModel};
use ptq_core::estimator::{estimate_all_terms, first_order_state, EstimateMode};
use ptq_core::oracle::{self, PTCorrections};
use ptq_core::sim;
use ptq_core::synthesis::{build_ue, solve_alpha, theta_angles, UeVariant, UvBackend};
use ptq_core::system::PerturbedSystem;
use ptq_core::terms::TermKind;

type CheckResult = Result<(), String>;
type NamedCheck<'a> = (&'static str, Box<dyn FnOnce() -> CheckResult + 'a>);

/// Runs the whole suite, printing one line per check; returns the number of
/// failures.
pub fn run_all(sys: &PerturbedSystem, seed: u64) -> usize {
    let checks: Vec<NamedCheck> = vec![
        ("oracle-assembly", Box::new(|| oracle_assembly(sys))),
        ("spectrum-matching", Box::new(|| spectrum_matching(sys))),
        ("ue-variants-agree", Box::new(|| ue_variants_agree(sys))),
        ("alpha-constraints", Box::new(|| alpha_constraints(sys))),
        ("term-circuits-validate", Box::new(|| term_circuits_validate(sys))),
        ("simulator-unitarity", Box::new(|| simulator_unitarity(sys))),
        ("stage-marks", Box::new(|| stage_marks(sys))),
        ("linearized-exactness", Box::new(|| linearized_exactness(sys))),
        ("first-order-state", Box::new(|| first_order_state_exact(sys))),
        ("sampling-determinism", Box::new(move || sampling_determinism(sys, seed))),
        ("cost-identities", Box::new(cost_identities)),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
                eprintln!(
                    "{}",
                    serde_json::json!({ "kind": "check-failure", "check": name, "error": msg })
                );
            }
        }
    }
    failed
}

fn oracle_assembly(sys: &PerturbedSystem) -> CheckResult {
    let c = PTCorrections::compute(sys).map_err(|e| e.to_string())?;
    let scale = [c.e1, c.e2, c.e3, c.e4, c.eps3, c.eps4, c.m_a, c.m_b, c.m_c]
        .iter()
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let (r3, r4) = c.assembly_residuals();
    if r3 > 1e-12 * scale || r4 > 1e-12 * scale {
        return Err(format!("assembly residuals ({r3:.3e}, {r4:.3e}) exceed 1e-12·scale"));
    }
    Ok(())
}

fn spectrum_matching(sys: &PerturbedSystem) -> CheckResult {
    oracle::exact_spectrum(sys).map(|_| ()).map_err(|e| e.to_string())
}

fn ue_variants_agree(sys: &PerturbedSystem) -> CheckResult {
    let n_qubits = sys.n_qubits() as usize;
    let n = sys.target_level();
    let basis_cap = sys.num_levels().min(64);
    for p in 1..=3u32 {
        let states: Vec<Vec<Complex64>> = [UeVariant::Standard, UeVariant::Improved]
            .iter()
            .map(|&variant| {
                let gates = build_ue(sys, n, p, variant, n_qubits).map_err(|e| e.to_string())?;
                let circuit = Circuit::new(RegisterLayout::with_ancillas(n_qubits, 1), gates, vec![]);
                let mut amps = Vec::new();
                for k in 0..basis_cap {
                    let state = sim::run(&circuit, k).map_err(|e| e.to_string())?.state;
                    amps.extend_from_slice(state.amplitudes());
                }
                Ok::<_, String>(amps)
            })
            .collect::<Result<_, _>>()?;
        let diff = states[0]
            .iter()
            .zip(&states[1])
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if diff > 1e-12 {
            return Err(format!("variants differ by {diff:.3e} at p = {p}"));
        }
    }
    Ok(())
}

fn alpha_constraints(sys: &PerturbedSystem) -> CheckResult {
    for p in 1..=3u32 {
        let thetas = theta_angles(sys, sys.target_level(), p).map_err(|e| e.to_string())?;
        let residual = solve_alpha(&thetas)
            .map_err(|e| e.to_string())?
            .max_constraint_residual(&thetas);
        if residual > 1e-12 {
            return Err(format!("α residual {residual:.3e} at p = {p}"));
        }
    }
    Ok(())
}

fn term_circuits_validate(sys: &PerturbedSystem) -> CheckResult {
    let mut backends = vec![UvBackend::Exact, UvBackend::Linearized];
    if sys.pauli_terms().is_some() {
        backends.push(UvBackend::Trotter(4));
    }
    for kind in TermKind::all_scalar().into_iter().chain([TermKind::State1]) {
        for &backend in &backends {
            for variant in [UeVariant::Standard, UeVariant::Improved] {
                build_term_circuit(sys, kind, variant, backend)
                    .map_err(|e| format!("{kind} ({variant}, {backend}): {e}"))?;
            }
        }
    }
    Ok(())
}

fn simulator_unitarity(sys: &PerturbedSystem) -> CheckResult {
    let tc = build_term_circuit(sys, TermKind::Eps(3), UeVariant::Improved, UvBackend::Exact)
        .map_err(|e| e.to_string())?;
    let run = sim::run(&tc.circuit, tc.initial_level).map_err(|e| e.to_string())?;
    let drift = (run.state.norm() - 1.0).abs();
    if drift > 1e-10 {
        return Err(format!("norm drifted by {drift:.3e} through a unitary circuit"));
    }
    Ok(())
}

fn stage_marks(sys: &PerturbedSystem) -> CheckResult {
    for (kind, want) in [(TermKind::Eps(3), 5usize), (TermKind::Eps(4), 7)] {
        let tc = build_term_circuit(sys, kind, UeVariant::Improved, UvBackend::Exact)
            .map_err(|e| e.to_string())?;
        let marks = &tc.circuit.stage_marks;
        if marks.len() != want {
            return Err(format!("{kind}: {} stage marks, expected {want}", marks.len()));
        }
        if marks.last().map(|m| m.position) != Some(tc.circuit.gates.len()) {
            return Err(format!("{kind}: final stage mark is not at the end"));
        }
    }
    Ok(())
}

fn linearized_exactness(sys: &PerturbedSystem) -> CheckResult {
    let report = estimate_all_terms(
        sys,
        EstimateMode::Linearized,
        UeVariant::Improved,
        UvBackend::Linearized,
        None,
        None,
    )
    .map_err(|e| e.to_string())?;
    for est in &report.estimates {
        let truth = report.oracle.term(est.term).unwrap_or(f64::NAN);
        if (est.value - truth).abs() > 1e-9 * truth.abs().max(1.0) {
            return Err(format!("{}: {} vs oracle {}", est.term, est.value, truth));
        }
    }
    let (e3, e4) = (report.oracle.e3, report.oracle.e4);
    if (report.assembled_e3 - e3).abs() > 1e-9 * e3.abs().max(1.0)
        || (report.assembled_e4 - e4).abs() > 1e-9 * e4.abs().max(1.0)
    {
        return Err(format!(
            "assembled ({}, {}) vs oracle ({e3}, {e4})",
            report.assembled_e3, report.assembled_e4
        ));
    }
    Ok(())
}

fn first_order_state_exact(sys: &PerturbedSystem) -> CheckResult {
    let n = sys.target_level();
    for (k, coeff) in
        first_order_state(sys, UeVariant::Improved).map_err(|e| e.to_string())?
    {
        let want = sys.v(k, n) / Complex64::new(sys.energy(n) - sys.energy(k), 0.0);
        if (coeff - want).norm() > 1e-10 {
            return Err(format!("level {k}: {coeff} vs {want}"));
        }
    }
    Ok(())
}

fn sampling_determinism(sys: &PerturbedSystem, seed: u64) -> CheckResult {
    let tc = build_term_circuit(sys, TermKind::Eps(3), UeVariant::Improved, UvBackend::Exact)
        .map_err(|e| e.to_string())?;
    let state = sim::run(&tc.circuit, tc.initial_level)
        .map_err(|e| e.to_string())?
        .state;
    let draw = || sim::sample(&state, 20_000, seed).map_err(|e| e.to_string());
    let (a, b) = (draw()?, draw()?);
    if a.len() != b.len()
        || a.iter()
            .zip(&b)
            .any(|(x, y)| x.index != y.index || x.count != y.count)
    {
        return Err("identical seeds produced different samples".into());
    }
    Ok(())
}

fn cost_identities() -> CheckResult {
    let model = CostModel::default();
    let got = (
        ue_cost(3, UeVariant::Standard, &model).map_err(|e| e.to_string())?,
        ue_cost(3, UeVariant::Improved, &model).map_err(|e| e.to_string())?,
    );
    if got != (72, 25) {
        return Err(format!("N=3 U_E costs {got:?}, expected (72, 25)"));
    }
    for n in 2u32..=12 {
        let improved = ue_cost(n, UeVariant::Improved, &model).map_err(|e| e.to_string())?;
        let standard = ue_cost(n, UeVariant::Standard, &model).map_err(|e| e.to_string())?;
        let closed = 1 + u64::from(n) * u64::from(n + 1) * (1u64 << (n - 2));
        if improved != closed || improved >= standard {
            return Err(format!("cost identities broken at N = {n}"));
        }
    }
    Ok(())
}
