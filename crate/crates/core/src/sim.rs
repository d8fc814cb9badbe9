//! Dense statevector simulation of circuits.
//!
//! Amplitudes are indexed little-endian: qubit j is bit j of the basis
//! index, so the system register occupies the low `N` bits and ancillas the
//! high ones. Bitstring text (outcome labels, [`amplitude`] queries) is the
//! ordinary binary rendering of the index — leftmost character is the
//! highest qubit.
//!
//! The norm (Σ|amp|², cached on the state) is recomputed after every gate
//! and never silently restored: non-unitary gates such as the linearized
//! `U_V` legitimately shrink it, and downstream consumers decide what that
//! means (sampling refuses, amplitude readout doesn't care).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{Circuit, Gate};
use crate::error::{PtqError, Result};

/// Amplitude-array length above which system-unitary application fans out
/// across threads.
const PAR_THRESHOLD: usize = 1 << 14;

/// Maximum |norm − 1| tolerated when sampling.
const SAMPLING_NORM_TOL: f64 = 1e-10;

/// Dense state over all qubits of a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    norm: f64,
}

impl StateVector {
    /// Basis state |index⟩ over `num_qubits` qubits.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(PtqError::DimensionMismatch { expected: dim, actual: index });
        }
        let mut amps = vec![Complex64::default(); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amps, norm: 1.0 })
    }

    /// State with explicit amplitudes (length must be a power of two). The
    /// norm is computed, not assumed.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(PtqError::DimensionMismatch {
                expected: amps.len().next_power_of_two(),
                actual: amps.len(),
            });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum();
        Ok(Self { amps, norm })
    }

    pub fn num_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Σ|amp|²; 1 within 1e-10 under purely unitary evolution.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Amplitude of one basis index.
    pub fn amplitude_at(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    fn recompute_norm(&mut self) {
        self.norm = self.amps.iter().map(|a| a.norm_sqr()).sum();
    }
}

/// The amplitude of `outcome`, a bitstring with one character per qubit,
/// highest qubit first (ordinary binary rendering of the basis index).
pub fn amplitude(state: &StateVector, outcome: &str) -> Result<Complex64> {
    if outcome.len() != state.num_qubits() {
        return Err(PtqError::DimensionMismatch {
            expected: state.num_qubits(),
            actual: outcome.len(),
        });
    }
    let mut index = 0usize;
    for ch in outcome.chars() {
        index <<= 1;
        match ch {
            '0' => {}
            '1' => index |= 1,
            other => {
                return Err(PtqError::Parse(format!(
                    "bitstring may only contain 0/1, found {other:?}"
                )))
            }
        }
    }
    Ok(state.amplitude_at(index))
}

/// One measured basis state and how often it occurred.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasurementOutcome {
    pub bitstring: String,
    pub index: usize,
    pub count: u64,
}

/// Final state plus the snapshots requested via stage marks.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: StateVector,
    pub snapshots: Vec<(String, StateVector)>,
}

impl RunResult {
    /// Snapshot by stage-mark name.
    pub fn snapshot(&self, name: &str) -> Option<&StateVector> {
        self.snapshots
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }
}

/// Runs a circuit from the basis state |initial⟩.
pub fn run(circuit: &Circuit, initial: usize) -> Result<RunResult> {
    run_from_state(
        circuit,
        StateVector::basis(circuit.layout.total_qubits(), initial)?,
    )
}

/// Runs a circuit from an arbitrary initial state, recording snapshots at
/// every stage mark (positions count gate boundaries: 0 is before the first
/// gate).
pub fn run_from_state(circuit: &Circuit, mut state: StateVector) -> Result<RunResult> {
    let violations = circuit.validate();
    if !violations.is_empty() {
        return Err(PtqError::InvalidCircuit { violations });
    }
    let expected = 1usize << circuit.layout.total_qubits();
    if state.amps.len() != expected {
        return Err(PtqError::DimensionMismatch { expected, actual: state.amps.len() });
    }

    let mut snapshots = Vec::with_capacity(circuit.stage_marks.len());
    let mut marks = circuit.stage_marks.iter().peekable();
    for (pos, gate) in circuit.gates.iter().enumerate() {
        while let Some(mark) = marks.next_if(|m| m.position == pos) {
            snapshots.push((mark.name.clone(), state.clone()));
        }
        apply_gate(&mut state, gate, circuit.layout.n_system());
    }
    for mark in marks {
        snapshots.push((mark.name.clone(), state.clone()));
    }
    Ok(RunResult { state, snapshots })
}

fn apply_gate(state: &mut StateVector, gate: &Gate, n_system: usize) {
    match gate {
        Gate::Ry { target, angle } => {
            apply_rotation(&mut state.amps, *target, *angle, 0, 0);
        }
        Gate::MultiControlledRy { target, angle, control_mask, control_values } => {
            apply_rotation(&mut state.amps, *target, *angle, *control_mask, *control_values);
        }
        Gate::SystemUnitary { matrix, .. } => {
            apply_system_operator(&mut state.amps, matrix, n_system);
        }
    }
    state.recompute_norm();
}

/// In-place Ry on `target` over every basis pair whose control bits match.
/// Enumerates only the matching patterns: the free bits (everything outside
/// controls and target) are scattered around the fixed control values, and
/// each pattern touches exactly two amplitudes.
fn apply_rotation(
    amps: &mut [Complex64],
    target: usize,
    angle: f64,
    control_mask: u64,
    control_values: u64,
) {
    if angle == 0.0 {
        return; // identity by construction (e.g. the k = n branch of U_E)
    }
    let (cos, sin) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let num_qubits = amps.len().trailing_zeros() as usize;
    let tbit = 1usize << target;
    let free_positions: Vec<usize> = (0..num_qubits)
        .filter(|&q| q != target && control_mask & (1 << q) == 0)
        .collect();
    for s in 0..(1usize << free_positions.len()) {
        let mut base = control_values as usize;
        for (i, &q) in free_positions.iter().enumerate() {
            if s & (1 << i) != 0 {
                base |= 1 << q;
            }
        }
        let (i0, i1) = (base, base | tbit);
        let (a0, a1) = (amps[i0], amps[i1]);
        amps[i0] = a0 * cos - a1 * sin;
        amps[i1] = a0 * sin + a1 * cos;
    }
}

/// Applies a dense operator on the system register (the low `n_system`
/// qubits). For each ancilla pattern the affected amplitudes form one
/// contiguous chunk, so this is a batched dense mat-vec.
fn apply_system_operator(
    amps: &mut [Complex64],
    matrix: &nalgebra::DMatrix<Complex64>,
    n_system: usize,
) {
    let dim = 1usize << n_system;
    debug_assert_eq!(matrix.nrows(), dim);
    let matvec = |chunk: &mut [Complex64]| {
        let x: Vec<Complex64> = chunk.to_vec();
        for (i, out) in chunk.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for (j, xj) in x.iter().enumerate() {
                acc += matrix[(i, j)] * xj;
            }
            *out = acc;
        }
    };
    if amps.len() >= PAR_THRESHOLD {
        amps.par_chunks_mut(dim).for_each(matvec);
    } else {
        amps.chunks_mut(dim).for_each(matvec);
    }
}

/// Draws `shots` multinomial samples from |amplitudes|². Deterministic for a
/// fixed seed; refuses states whose norm strays from 1 (sampling
/// probabilities would silently misrepresent a non-unitary evolution).
pub fn sample(state: &StateVector, shots: u64, seed: u64) -> Result<Vec<MeasurementOutcome>> {
    if (state.norm() - 1.0).abs() > SAMPLING_NORM_TOL {
        return Err(PtqError::UnnormalizedState { norm: state.norm() });
    }
    let mut cumulative = Vec::with_capacity(state.amps.len());
    let mut total = 0.0;
    for a in &state.amps {
        total += a.norm_sqr();
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; state.amps.len()];
    for _ in 0..shots {
        let r: f64 = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= r).min(counts.len() - 1);
        counts[idx] += 1;
    }
    let width = state.num_qubits();
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(index, count)| MeasurementOutcome {
            bitstring: format!("{index:0width$b}"),
            index,
            count,
        })
        .collect())
}
