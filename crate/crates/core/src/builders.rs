//! Assembles complete term-estimation circuits from `U_V` and `U_{E^p}`
//! fragments.
//!
//! Every scalar-term circuit has the same skeleton: starting from |n⟩ with
//! all ancillas at |0⟩, apply `U_V`, then for each stage apply `U_{E^p}` on a
//! fresh ancilla followed by another `U_V`. Post-selecting the outcome
//! (system = n, every ancilla = 1) leaves an amplitude whose λ^order
//! coefficient is the target sum times `i^order · Π C_p`. The first-order
//! state circuit stops after its single `U_E`, reading amplitudes on (k, 1)
//! instead of post-selecting a single outcome.

use num_complex::Complex64;
use serde::Serialize;

use crate::circuit::{Circuit, Gate, RegisterLayout, StageMark};
use crate::error::{PtqError, Result};
use crate::synthesis::{build_ue, build_uv, UeVariant, UvBackend};
use crate::system::PerturbedSystem;
use crate::terms::{term_prefactor, TermKind};

/// Cap on total amplitudes a built circuit may need when simulated.
const STATE_BUDGET: u128 = 1 << 26;

/// Which measurement outcomes are kept after the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PostSelection {
    /// System register width in qubits.
    pub n_system: usize,
    /// Number of ancillas, all required to read 1.
    pub num_ancillas: usize,
    /// Required system outcome: `Some(n)` for scalar terms, `None` when all
    /// system levels are read out (first-order state).
    pub system_level: Option<usize>,
}

impl PostSelection {
    /// Basis index with the ancillas at 1 and the system register at `k`.
    pub fn index_for_level(&self, k: usize) -> usize {
        let ones = (1usize << self.num_ancillas) - 1;
        (ones << self.n_system) | k
    }

    /// The single accepted basis index, when one exists.
    pub fn accepted_index(&self) -> Option<usize> {
        self.system_level.map(|n| self.index_for_level(n))
    }
}

/// A runnable circuit together with everything needed to turn its
/// post-selected amplitude into a physical term estimate.
#[derive(Debug, Clone)]
pub struct TermCircuit {
    pub circuit: Circuit,
    pub term: TermKind,
    pub post_select: PostSelection,
    /// Power of λ carrying the target term (= number of U_V applications).
    pub signal_order: u32,
    /// `i^order · Π_p C_p`: divides the extracted λ^order coefficient to
    /// recover the physical sum.
    pub prefactor: Complex64,
    /// Level the system register starts in (basis index of the initial
    /// state, since all ancillas start at 0).
    pub initial_level: usize,
    pub ue_variant: UeVariant,
    pub uv_backend: UvBackend,
}

impl TermCircuit {
    /// Structural self-checks beyond plain circuit validity: the ancilla
    /// count must equal the number of `U_E` applications, and `U_V` must
    /// appear `signal_order` times (one more than the stages, except for the
    /// state circuit which stops after its `U_E`).
    pub fn validate(&self) -> Vec<String> {
        let mut violations = self.circuit.validate();
        let uv_count = self
            .circuit
            .gates
            .iter()
            .filter(|g| matches!(g, Gate::SystemUnitary { .. }))
            .count() as u32;
        if uv_count != self.signal_order {
            violations.push(format!(
                "{} U_V applications but signal order {}",
                uv_count, self.signal_order
            ));
        }
        let mut ue_targets: Vec<usize> = self
            .circuit
            .gates
            .iter()
            .filter_map(|g| match g {
                Gate::Ry { target, .. } => Some(*target),
                Gate::MultiControlledRy { target, .. } => Some(*target),
                Gate::SystemUnitary { .. } => None,
            })
            .collect();
        ue_targets.sort_unstable();
        ue_targets.dedup();
        if ue_targets.len() != self.post_select.num_ancillas {
            violations.push(format!(
                "{} distinct U_E targets but {} ancillas",
                ue_targets.len(),
                self.post_select.num_ancillas
            ));
        }
        let expected_uv = if self.term == TermKind::State1 {
            self.post_select.num_ancillas as u32
        } else {
            self.post_select.num_ancillas as u32 + 1
        };
        if self.signal_order != expected_uv {
            violations.push(format!(
                "signal order {} does not match {} ancillas for term {}",
                self.signal_order, self.post_select.num_ancillas, self.term
            ));
        }
        violations
    }

    /// JSON rendering (used by the CLI's circuit dump).
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            term: String,
            signal_order: u32,
            prefactor: [f64; 2],
            initial_level: usize,
            post_select: &'a PostSelection,
            ue_variant: UeVariant,
            uv_backend: UvBackend,
            circuit: &'a Circuit,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            term: self.term.to_string(),
            signal_order: self.signal_order,
            prefactor: [self.prefactor.re, self.prefactor.im],
            initial_level: self.initial_level,
            post_select: &self.post_select,
            ue_variant: self.ue_variant,
            uv_backend: self.uv_backend,
            circuit: &self.circuit,
        })?)
    }
}

/// Roman numeral for a (small, positive) stage number.
fn roman(k: usize) -> String {
    const ONES: [&str; 10] = ["", "I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX"];
    const TENS: [&str; 3] = ["", "X", "XX"];
    debug_assert!((1..30).contains(&k));
    format!("{}{}", TENS[k / 10], ONES[k % 10])
}

/// Builds the circuit for any term. The gate list is flat (each `U_{E^p}`
/// contributes one rotation per level), with stage marks at the dashed-line
/// checkpoints: after initialization, after the first `U_V`, after the first
/// `U_E`, and then after every further fragment — the boundary between each
/// later `U_V` and its following `U_E` is not marked.
pub fn build_term_circuit(
    sys: &PerturbedSystem,
    kind: TermKind,
    variant: UeVariant,
    backend: UvBackend,
) -> Result<TermCircuit> {
    let n = sys.target_level();
    let powers = kind.stage_powers();
    let num_ancillas = powers.len();
    let total_qubits = sys.n_qubits() as usize + num_ancillas;
    if (1u128 << total_qubits) > STATE_BUDGET {
        return Err(PtqError::BudgetExceeded {
            required: 1u128 << total_qubits,
            limit: STATE_BUDGET,
        });
    }
    let layout = RegisterLayout::with_ancillas(sys.n_qubits() as usize, num_ancillas);
    let uv = build_uv(sys, backend)?;

    let mut gates = vec![uv.clone()];
    let mut unit_bounds = vec![0, 1];
    for (i, &p) in powers.iter().enumerate() {
        gates.extend(build_ue(sys, n, p, variant, layout.ancilla_qubit(i))?);
        unit_bounds.push(gates.len());
        let last_stage = i + 1 == num_ancillas;
        if !(kind == TermKind::State1 && last_stage) {
            gates.push(uv.clone());
            unit_bounds.push(gates.len());
        }
    }

    // Units are the U_V / U_E fragments; marks sit at unit boundaries. Short
    // circuits (≤ 3 units) are marked everywhere; longer ones skip the
    // boundary between each later U_V and the U_E after it (boundary 3, 5, …
    // — only 3 matters up to fourth order, where the checkpoints are
    // I, II, III, IV after the second U_E, V, VI, VII).
    let num_units = unit_bounds.len() - 1;
    let marked_units: Vec<usize> = if num_units <= 3 {
        (0..=num_units).collect()
    } else {
        (0..=2).chain(4..=num_units).collect()
    };
    let stage_marks = marked_units
        .iter()
        .enumerate()
        .map(|(i, &u)| StageMark {
            name: format!("phi_{}", roman(i + 1)),
            position: unit_bounds[u],
        })
        .collect();

    let circuit = Circuit::new(layout, gates, stage_marks).validated()?;
    let term_circuit = TermCircuit {
        circuit,
        term: kind,
        post_select: PostSelection {
            n_system: sys.n_qubits() as usize,
            num_ancillas,
            system_level: if kind == TermKind::State1 { None } else { Some(n) },
        },
        signal_order: kind.signal_order(),
        prefactor: term_prefactor(sys, kind),
        initial_level: n,
        ue_variant: variant,
        uv_backend: backend,
    };
    let violations = term_circuit.validate();
    if !violations.is_empty() {
        return Err(PtqError::InvalidCircuit { violations });
    }
    Ok(term_circuit)
}

/// The order-m nested-sum circuit: m applications of `U_V` interleaved with
/// m−1 single-power `U_E` stages.
pub fn build_eps_circuit(
    sys: &PerturbedSystem,
    m: u32,
    variant: UeVariant,
    backend: UvBackend,
) -> Result<TermCircuit> {
    if m < 3 {
        return Err(PtqError::InvalidInput(format!(
            "nested-sum circuits start at third order, got m = {m}"
        )));
    }
    build_term_circuit(sys, TermKind::Eps(m), variant, backend)
}

/// The auxiliary-term circuits (and the first-order state circuit).
pub fn build_aux_circuit(
    sys: &PerturbedSystem,
    kind: TermKind,
    variant: UeVariant,
    backend: UvBackend,
) -> Result<TermCircuit> {
    if matches!(kind, TermKind::Eps(_)) {
        return Err(PtqError::InvalidInput(format!(
            "{kind} is a nested-sum term; use the order-m builder"
        )));
    }
    build_term_circuit(sys, kind, variant, backend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run, RunResult};
    use crate::synthesis::select_c;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_level(lambda: f64) -> PerturbedSystem {
        let v = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        PerturbedSystem::new(vec![0.0, 1.0], v, lambda, 0).unwrap()
    }

    fn random_system(m: usize, lambda: f64, seed: u64) -> PerturbedSystem {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let energies: Vec<f64> = (0..m)
            .map(|k| k as f64 + 0.3 * rng.random_range(-1.0..1.0))
            .collect();
        let raw = DMatrix::from_fn(m, m, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let herm = (&raw + raw.adjoint()) * c(0.5, 0.0);
        let v = &herm * c(1.0 / crate::linalg::hermitian_spectral_norm(&herm), 0.0);
        PerturbedSystem::new(energies, v, lambda, m / 2).unwrap()
    }

    fn uv_matrix(tc: &TermCircuit) -> DMatrix<Complex64> {
        tc.circuit
            .gates
            .iter()
            .find_map(|g| match g {
                Gate::SystemUnitary { matrix, .. } => Some(matrix.clone()),
                _ => None,
            })
            .expect("circuit contains U_V")
    }

    fn run_tc(tc: &TermCircuit) -> RunResult {
        run(&tc.circuit, tc.initial_level).unwrap()
    }

    #[test]
    fn shapes_follow_the_term_structure() {
        let sys = random_system(4, 0.1, 1);
        for (kind, ancillas, uv_count) in [
            (TermKind::Eps(3), 2usize, 3u32),
            (TermKind::Eps(4), 3, 4),
            (TermKind::Eps(5), 4, 5),
            (TermKind::MA, 2, 3),
            (TermKind::MB, 1, 2),
            (TermKind::MC, 1, 2),
            (TermKind::E2, 1, 2),
            (TermKind::State1, 1, 1),
        ] {
            let tc =
                build_term_circuit(&sys, kind, UeVariant::Improved, UvBackend::Exact).unwrap();
            assert!(tc.validate().is_empty(), "{kind}");
            assert_eq!(tc.post_select.num_ancillas, ancillas, "{kind}");
            assert_eq!(tc.signal_order, uv_count, "{kind}");
            assert_eq!(
                tc.circuit
                    .gates
                    .iter()
                    .filter(|g| matches!(g, Gate::SystemUnitary { .. }))
                    .count() as u32,
                uv_count,
                "{kind}"
            );
            assert_eq!(tc.prefactor, term_prefactor(&sys, kind), "{kind}");
        }
    }

    #[test]
    fn eps_builder_rejects_low_orders() {
        let sys = two_level(0.1);
        assert!(build_eps_circuit(&sys, 2, UeVariant::Improved, UvBackend::Exact).is_err());
        assert!(build_aux_circuit(&sys, TermKind::Eps(3), UeVariant::Improved, UvBackend::Exact)
            .is_err());
    }

    #[test]
    fn stage_marks_sit_at_fragment_boundaries() {
        // 2-qubit system: each U_E contributes 4 rotation gates, U_V one
        // gate, so the third-order circuit has fragments at 0,1,5,6,10,11.
        let sys = random_system(4, 0.1, 2);
        let tc = build_eps_circuit(&sys, 3, UeVariant::Standard, UvBackend::Exact).unwrap();
        let marks: Vec<(String, usize)> = tc
            .circuit
            .stage_marks
            .iter()
            .map(|m| (m.name.clone(), m.position))
            .collect();
        assert_eq!(
            marks,
            vec![
                ("phi_I".to_string(), 0),
                ("phi_II".to_string(), 1),
                ("phi_III".to_string(), 5),
                ("phi_IV".to_string(), 10),
                ("phi_V".to_string(), 11),
            ]
        );

        let tc4 = build_eps_circuit(&sys, 4, UeVariant::Standard, UvBackend::Exact).unwrap();
        let names: Vec<&str> = tc4
            .circuit
            .stage_marks
            .iter()
            .map(|m| m.name.as_str())
            .collect();
        assert_eq!(
            names,
            ["phi_I", "phi_II", "phi_III", "phi_IV", "phi_V", "phi_VI", "phi_VII"]
        );
    }

    #[test]
    fn third_order_midpoint_state_matches_the_contract() {
        // After [U_V, U_E] on a two-level system the state should be
        //   ⟨0|U_V|0⟩|0⟩|00⟩ + ⟨1|U_V|0⟩|1⟩(√(1−C²/E²)|0⟩ + (C/E_01)|1⟩)|0⟩.
        let sys = two_level(0.1);
        let tc = build_eps_circuit(&sys, 3, UeVariant::Improved, UvBackend::Exact).unwrap();
        let result = run_tc(&tc);
        let snap = result.snapshot("phi_III").unwrap();
        let u = uv_matrix(&tc);
        let c0 = select_c(&sys, 0, 1);
        let gap = sys.energy(0) - sys.energy(1);
        // Qubit order: system bit 0, ancillas at bits 1 and 2.
        assert!((snap.amplitude_at(0b000) - u[(0, 0)]).norm() < 1e-12);
        let residue = (1.0 - (c0 / gap) * (c0 / gap)).sqrt();
        assert!((snap.amplitude_at(0b001) - u[(1, 0)] * residue).norm() < 1e-12);
        assert!((snap.amplitude_at(0b011) - u[(1, 0)] * (c0 / gap)).norm() < 1e-12);
        assert!(snap.amplitude_at(0b010).norm() < 1e-15);
    }

    #[test]
    fn third_order_amplitude_equals_the_double_chain() {
        let sys = random_system(4, 0.1, 3);
        let n = sys.target_level();
        for variant in [UeVariant::Standard, UeVariant::Improved] {
            let tc = build_eps_circuit(&sys, 3, variant, UvBackend::Exact).unwrap();
            let result = run_tc(&tc);
            let measured = result.state.amplitude_at(tc.post_select.accepted_index().unwrap());

            let u = uv_matrix(&tc);
            let cc = select_c(&sys, n, 1);
            let mut expect = Complex64::default();
            for k1 in (0..4).filter(|&k| k != n) {
                for k2 in (0..4).filter(|&k| k != n) {
                    expect += u[(n, k2)] * u[(k2, k1)] * u[(k1, n)] * (cc * cc)
                        / ((sys.energy(n) - sys.energy(k1)) * (sys.energy(n) - sys.energy(k2)));
                }
            }
            assert!(
                (measured - expect).norm() < 1e-12,
                "{variant}: {measured} vs {expect}"
            );
        }
    }

    #[test]
    fn fourth_order_amplitude_equals_the_triple_chain() {
        let sys = random_system(4, 0.1, 4);
        let n = sys.target_level();
        let tc = build_eps_circuit(&sys, 4, UeVariant::Improved, UvBackend::Exact).unwrap();
        let result = run_tc(&tc);
        let measured = result.state.amplitude_at(tc.post_select.accepted_index().unwrap());

        let u = uv_matrix(&tc);
        let cc = select_c(&sys, n, 1);
        let e = |k: usize| sys.energy(n) - sys.energy(k);
        let mut expect = Complex64::default();
        for k1 in (0..4).filter(|&k| k != n) {
            for k2 in (0..4).filter(|&k| k != n) {
                for k3 in (0..4).filter(|&k| k != n) {
                    expect += u[(n, k3)] * u[(k3, k2)] * u[(k2, k1)] * u[(k1, n)]
                        * (cc * cc * cc)
                        / (e(k1) * e(k2) * e(k3));
                }
            }
        }
        assert!((measured - expect).norm() < 1e-12);
    }

    #[test]
    fn mixed_power_amplitude_uses_the_right_stage_constants() {
        // The two stages carry different powers (2 then 1), so their C
        // constants and denominators differ; the amplitude must pair C_2
        // with the squared gap of the first hop.
        let sys = random_system(4, 0.1, 5);
        let n = sys.target_level();
        let tc = build_aux_circuit(&sys, TermKind::MA, UeVariant::Improved, UvBackend::Exact)
            .unwrap();
        let result = run_tc(&tc);
        let measured = result.state.amplitude_at(tc.post_select.accepted_index().unwrap());

        let u = uv_matrix(&tc);
        let c2 = select_c(&sys, n, 2);
        let c1 = select_c(&sys, n, 1);
        let e = |k: usize| sys.energy(n) - sys.energy(k);
        let mut expect = Complex64::default();
        for k2 in (0..4).filter(|&k| k != n) {
            for k3 in (0..4).filter(|&k| k != n) {
                expect += u[(n, k3)] * u[(k3, k2)] * u[(k2, n)] * c1 * c2
                    / (e(k2) * e(k2) * e(k3));
            }
        }
        assert!((measured - expect).norm() < 1e-12);
    }

    #[test]
    fn state_circuit_reads_first_order_amplitudes() {
        let sys = two_level(0.1);
        let tc = build_aux_circuit(&sys, TermKind::State1, UeVariant::Improved, UvBackend::Exact)
            .unwrap();
        assert_eq!(tc.post_select.system_level, None);
        let result = run_tc(&tc);
        let last = tc.circuit.stage_marks.last().unwrap();
        assert_eq!(last.name, "phi_III");
        assert_eq!(last.position, tc.circuit.gates.len());
        let u = uv_matrix(&tc);
        let cc = select_c(&sys, 0, 1);
        let expect = u[(1, 0)] * cc / (sys.energy(0) - sys.energy(1));
        let measured = result.state.amplitude_at(tc.post_select.index_for_level(1));
        assert!((measured - expect).norm() < 1e-13);
    }

    #[test]
    fn post_selection_probability_matches_run_statistics() {
        // Self-consistency: |amplitude|² at the accepted outcome matches the
        // total probability the sampler assigns to it.
        let sys = random_system(4, 0.4, 6);
        let tc = build_eps_circuit(&sys, 3, UeVariant::Improved, UvBackend::Exact).unwrap();
        let result = run_tc(&tc);
        let idx = tc.post_select.accepted_index().unwrap();
        let p = result.state.amplitude_at(idx).norm_sqr();
        let shots = 2_000_000u64;
        let outcomes = crate::sim::sample(&result.state, shots, 11).unwrap();
        let hits = outcomes
            .iter()
            .find(|o| o.index == idx)
            .map(|o| o.count)
            .unwrap_or(0) as f64;
        let sigma = (shots as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (hits - shots as f64 * p).abs() <= 5.0 * sigma.max(1.0),
            "Pr = {p:.3e}, hits = {hits}"
        );
    }

    #[test]
    fn budget_guard_refuses_oversized_layouts() {
        // 2^24 levels would need more amplitudes than the budget; the guard
        // must fire before any allocation. Construct the request directly.
        let sys = random_system(16, 0.1, 7);
        // 16 levels → 4 system qubits; eps with m = 24 needs 23 ancillas.
        let err = build_term_circuit(&sys, TermKind::Eps(24), UeVariant::Improved, UvBackend::Exact)
            .unwrap_err();
        assert!(matches!(err, PtqError::BudgetExceeded { .. }));
    }
}
