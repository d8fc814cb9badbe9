//! Shared fixtures for the integration tests: a seed-fixed corpus of random
//! perturbed systems and independent reference computations (Taylor-series
//! matrix exponential, first-principles gate assembly, classical chain
//! amplitudes) that deliberately avoid the library's own numerics.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use ptq_core::circuit::Gate;
use ptq_core::linalg::hermitian_spectral_norm;
use ptq_core::system::PerturbedSystem;
use rand::{Rng, SeedableRng};

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Random Hermitian perturbation with unit spectral norm on a mildly jittered
/// energy ladder; fully determined by the seed.
pub fn corpus_system(levels: usize, lambda: f64, seed: u64) -> PerturbedSystem {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let energies: Vec<f64> = (0..levels)
        .map(|k| k as f64 + 0.3 * rng.random_range(-1.0..1.0))
        .collect();
    let raw = DMatrix::from_fn(levels, levels, |_, _| {
        c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let herm = (&raw + raw.adjoint()) * c64(0.5, 0.0);
    let v = &herm * c64(1.0 / hermitian_spectral_norm(&herm), 0.0);
    PerturbedSystem::new(energies, v, lambda, levels / 2).unwrap()
}

/// Four-level corpus seeds. Seed 2 is skipped: its fifth-order energy
/// coefficient at the target level is accidentally tiny, so the λ⁵ scaling
/// of the Taylor remainder cannot be observed before the λ⁶ term takes over.
pub const CORPUS_SEEDS_4: [u64; 10] = [0, 1, 3, 4, 5, 6, 7, 8, 9, 10];
pub const CORPUS_SEEDS_8: [u64; 10] = [10, 11, 12, 13, 14, 15, 16, 17, 18, 19];

/// Twenty seed-fixed systems, half with 4 levels and half with 8.
pub fn corpus(lambda: f64) -> Vec<PerturbedSystem> {
    CORPUS_SEEDS_4
        .iter()
        .map(|&seed| corpus_system(4, lambda, seed))
        .chain(CORPUS_SEEDS_8.iter().map(|&seed| corpus_system(8, lambda, seed)))
        .collect()
}

/// The same spectrum and perturbation, retargeted at level `n`.
pub fn with_target(sys: &PerturbedSystem, n: usize) -> PerturbedSystem {
    PerturbedSystem::new(
        sys.energies().to_vec(),
        sys.perturbation().clone(),
        sys.lambda(),
        n,
    )
    .unwrap()
}

/// The two-level benchmark: energies [0, 1], v = 0.5 off-diagonal, target 0.
pub fn two_level(lambda: f64) -> PerturbedSystem {
    let v = DMatrix::from_row_slice(
        2,
        2,
        &[c64(0.0, 0.0), c64(0.5, 0.0), c64(0.5, 0.0), c64(0.0, 0.0)],
    );
    PerturbedSystem::new(vec![0.0, 1.0], v, lambda, 0).unwrap()
}

/// e^{iλV} by direct Taylor summation — an implementation independent of the
/// library's eigendecomposition route. Converges quickly for ‖λV‖ ≲ 1.
pub fn taylor_exp_i(v: &DMatrix<Complex64>, lambda: f64) -> DMatrix<Complex64> {
    let dim = v.nrows();
    let mut sum = DMatrix::<Complex64>::identity(dim, dim);
    let mut term = DMatrix::<Complex64>::identity(dim, dim);
    for k in 1..60 {
        term = &term * v * (c64(0.0, lambda) / c64(k as f64, 0.0));
        sum += &term;
        if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-18 {
            break;
        }
    }
    sum
}

/// Dense matrix of a rotation-gate sequence, built from the textbook
/// definition of a controlled Ry (first gate acts first).
pub fn fragment_matrix(gates: &[Gate], total_qubits: usize) -> DMatrix<Complex64> {
    let dim = 1usize << total_qubits;
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for gate in gates {
        let (target, angle, mask, values) = match gate {
            Gate::Ry { target, angle } => (*target, *angle, 0u64, 0u64),
            Gate::MultiControlledRy { target, angle, control_mask, control_values } => {
                (*target, *angle, *control_mask, *control_values)
            }
            Gate::SystemUnitary { .. } => panic!("not a rotation fragment"),
        };
        let (cos, sin) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let mut g = DMatrix::<Complex64>::zeros(dim, dim);
        for b in 0..dim as u64 {
            if b & mask != values {
                g[(b as usize, b as usize)] = c64(1.0, 0.0);
                continue;
            }
            let flipped = (b ^ (1 << target)) as usize;
            let b = b as usize;
            if b & (1 << target) == 0 {
                g[(b, b)] = c64(cos, 0.0);
                g[(flipped, b)] = c64(sin, 0.0);
            } else {
                g[(b, b)] = c64(cos, 0.0);
                g[(flipped, b)] = c64(-sin, 0.0);
            }
        }
        u = g * u;
    }
    u
}

/// Classical value of the post-selected amplitude of an order-m term
/// circuit with exact e^{iλV}: the alternating chain
/// ⟨n| U · D_{p_last} · U · … · D_{p_1} · U |n⟩, where D_p is diagonal with
/// C_p/E_nk^p off the target level and 0 on it.
pub fn chain_amplitude(sys: &PerturbedSystem, stage_powers: &[u32]) -> Complex64 {
    let n = sys.target_level();
    let m = sys.num_levels();
    let u = taylor_exp_i(sys.perturbation(), sys.lambda());
    let mut state = DMatrix::<Complex64>::zeros(m, 1);
    state[(n, 0)] = c64(1.0, 0.0);
    state = &u * state;
    for &p in stage_powers {
        let c = (0..m)
            .filter(|&k| k != n)
            .map(|k| (sys.energy(n) - sys.energy(k)).abs().powi(p as i32))
            .fold(f64::INFINITY, f64::min);
        for k in 0..m {
            state[(k, 0)] *= if k == n {
                c64(0.0, 0.0)
            } else {
                let gap_p = (sys.energy(n) - sys.energy(k)).powi(p as i32);
                c64(c / gap_p, 0.0)
            };
        }
        state = &u * state;
    }
    state[(n, 0)]
}
