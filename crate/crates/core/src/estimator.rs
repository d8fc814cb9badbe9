//! Turns circuit runs into numbers: coefficient extraction in three modes,
//! the first-order state readout, and assembly of the full third- and
//! fourth-order corrections.
//!
//! The post-selected amplitude of a term circuit is a function A(λ) whose
//! λ^order coefficient is `prefactor · term`. With the linearized `U_V`
//! (each application exactly `I + iλV`), A is a polynomial of degree
//! `order`, so sampling it at `order+1` geometric nodes `λ·2^{−j}` and
//! solving the Vandermonde system recovers the term to round-off. With a
//! unitary `U_V` the same fit (one node and one degree more) removes the
//! lower-order contaminants — e.g. the λ² contribution a third-order circuit
//! picks up through diagonal middle elements — leaving the term plus the
//! same-order series bias that [`crate::oracle::uv_series_bias`] predicts.
//! Sampling mode is magnitude-only: Pr(accepted outcome) determines |A|, not
//! its sign.

use num_complex::Complex64;
use serde::Serialize;

use crate::builders::build_term_circuit;
use crate::builders::TermCircuit;
use crate::error::{PtqError, Result};
use crate::oracle::{self, PTCorrections};
use crate::sim;
use crate::synthesis::{select_c, UeVariant, UvBackend};
use crate::system::PerturbedSystem;
use crate::terms::TermKind;

/// How a term estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMode {
    /// `U_V = I + iλV`; polynomial extraction, exact up to round-off.
    Linearized,
    /// Unitary `U_V`; amplitude read from the statevector, series-biased.
    UnitaryAmplitude,
    /// Unitary `U_V`; probability estimated from counted shots.
    Sampling,
}

impl std::fmt::Display for EstimateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimateMode::Linearized => write!(f, "linearized"),
            EstimateMode::UnitaryAmplitude => write!(f, "unitary-amplitude"),
            EstimateMode::Sampling => write!(f, "sampling"),
        }
    }
}

impl std::str::FromStr for EstimateMode {
    type Err = PtqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linearized" => Ok(EstimateMode::Linearized),
            "unitary" | "unitary-amplitude" => Ok(EstimateMode::UnitaryAmplitude),
            "sampling" => Ok(EstimateMode::Sampling),
            other => Err(PtqError::Parse(format!(
                "unknown mode {other:?} (expected linearized|unitary-amplitude|sampling)"
            ))),
        }
    }
}

/// One extracted term value with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct TermEstimate {
    pub term: TermKind,
    pub mode: EstimateMode,
    /// The estimate. Sign-carrying except in sampling mode.
    pub value: f64,
    /// True when only |term| was determined (sampling mode).
    pub magnitude_only: bool,
    /// Series bias of the unitary realization (0 in linearized mode, where
    /// the circuit realizes the ideal matrix elements exactly).
    pub predicted_bias: f64,
    /// λ values at which the circuit was evaluated.
    pub lambda_nodes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
}

/// Echo of the configuration a report was produced under.
#[derive(Debug, Clone, Serialize)]
pub struct ReportConfig {
    pub lambda: f64,
    pub target_level: usize,
    pub mode: EstimateMode,
    pub ue_variant: UeVariant,
    pub uv_backend: UvBackend,
    /// The amplitude constants per gap power in use.
    pub c_values: Vec<CValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CValue {
    pub power: u32,
    pub c: f64,
}

/// Full estimation result: classical oracle, per-term estimates, and the
/// corrections assembled from them.
#[derive(Debug, Clone, Serialize)]
pub struct PTReport {
    pub oracle: PTCorrections,
    pub estimates: Vec<TermEstimate>,
    pub assembled_e3: f64,
    pub assembled_e4: f64,
    /// assembled − oracle, per correction.
    pub deviation_e3: f64,
    pub deviation_e4: f64,
    pub config: ReportConfig,
}

impl PTReport {
    fn estimate(&self, kind: TermKind) -> Option<&TermEstimate> {
        self.estimates.iter().find(|e| e.term == kind)
    }

    /// Re-derives the assembled corrections from the stored estimates; the
    /// stored fields must reproduce these exactly.
    pub fn recompute_assembled(&self) -> Result<(f64, f64)> {
        let value = |kind: TermKind| -> Result<f64> {
            self.estimate(kind)
                .map(|e| e.value)
                .ok_or_else(|| PtqError::MissingEstimate { term: kind.to_string() })
        };
        let e1 = self.oracle.e1;
        let e3 = value(TermKind::Eps(3))? - e1 * value(TermKind::MB)?;
        let e4 = value(TermKind::Eps(4))? - value(TermKind::MB)? * value(TermKind::E2)?
            - 2.0 * e1 * value(TermKind::MA)?
            + e1 * e1 * value(TermKind::MC)?;
        Ok((e3, e4))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per term: `term,mode,value,oracle,bias,deviation`. The
    /// deviation is vs the signed oracle value, except for magnitude-only
    /// rows, which deviate from |oracle|.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,mode,value,oracle,bias,deviation\n");
        for est in &self.estimates {
            let oracle = self.oracle.term(est.term).unwrap_or(f64::NAN);
            let reference = if est.magnitude_only { oracle.abs() } else { oracle };
            out.push_str(&format!(
                "{},{},{:.11e},{:.11e},{:.11e},{:.11e}\n",
                est.term,
                est.mode,
                est.value,
                oracle,
                est.predicted_bias,
                est.value - reference,
            ));
        }
        out
    }
}

/// Runs one term circuit at the given λ and returns the post-selected
/// amplitude.
fn accepted_amplitude(
    sys: &PerturbedSystem,
    lambda: f64,
    kind: TermKind,
    variant: UeVariant,
    backend: UvBackend,
) -> Result<Complex64> {
    let scaled = sys.with_lambda(lambda)?;
    let tc = build_term_circuit(&scaled, kind, variant, backend)?;
    let index = tc.post_select.accepted_index().ok_or_else(|| {
        PtqError::InvalidInput(format!(
            "{kind} has no single accepted outcome; use the state readout"
        ))
    })?;
    let result = sim::run(&tc.circuit, tc.initial_level)?;
    Ok(result.state.amplitude_at(index))
}

/// Solves for the polynomial coefficients c_k of degree `degree` through the
/// points (t_j, y_j), t_j = 2^{−j}.
fn fit_geometric_nodes(values: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = values.len();
    let v = nalgebra::DMatrix::<Complex64>::from_fn(n, n, |j, k| {
        Complex64::new(2f64.powi(-((j * k) as i32)), 0.0)
    });
    let y = nalgebra::DVector::<Complex64>::from_column_slice(values);
    v.lu()
        .solve(&y)
        .map(|d| d.iter().copied().collect())
        .ok_or_else(|| PtqError::Internal("geometric Vandermonde system is singular".into()))
}

/// Extracts the λ^order coefficient of the post-selected amplitude by
/// evaluating the circuit at `degree+1` geometric λ nodes.
fn extract_coefficient(
    sys: &PerturbedSystem,
    kind: TermKind,
    variant: UeVariant,
    backend: UvBackend,
    degree: usize,
) -> Result<(Vec<f64>, Complex64)> {
    let lambda = sys.lambda();
    if lambda <= 0.0 {
        return Err(PtqError::InvalidInput(
            "coefficient extraction needs λ > 0".into(),
        ));
    }
    let order = kind.signal_order() as usize;
    debug_assert!(degree >= order);
    let nodes: Vec<f64> = (0..=degree).map(|j| lambda * 2f64.powi(-(j as i32))).collect();
    let values = nodes
        .iter()
        .map(|&l| accepted_amplitude(sys, l, kind, variant, backend))
        .collect::<Result<Vec<_>>>()?;
    // In the scaled variable t = λ_j/λ the fit returns d_k = c_k·λ^k.
    let scaled_coeffs = fit_geometric_nodes(&values)?;
    Ok((nodes, scaled_coeffs[order] / lambda.powi(order as i32)))
}

fn require_backend(tc: &TermCircuit, want_linear: bool) -> Result<()> {
    let is_linear = tc.uv_backend == UvBackend::Linearized;
    if is_linear != want_linear {
        return Err(PtqError::InvalidInput(format!(
            "term circuit uses the {} backend; this extractor needs a {} one",
            tc.uv_backend,
            if want_linear { "linearized" } else { "unitary" }
        )));
    }
    Ok(())
}

/// Exact extraction: with the linearized `U_V` the amplitude is a polynomial
/// of degree exactly `signal_order`, so the fitted coefficient reproduces
/// the classical term to round-off.
pub fn extract_term_linearized(sys: &PerturbedSystem, tc: &TermCircuit) -> Result<TermEstimate> {
    require_backend(tc, true)?;
    let order = tc.signal_order as usize;
    let (nodes, coeff) = extract_coefficient(sys, tc.term, tc.ue_variant, tc.uv_backend, order)?;
    Ok(TermEstimate {
        term: tc.term,
        mode: EstimateMode::Linearized,
        value: (coeff / tc.prefactor).re,
        magnitude_only: false,
        predicted_bias: 0.0,
        lambda_nodes: nodes,
        shots: None,
        seed: None,
        standard_error: None,
    })
}

/// Unitary-amplitude extraction: one extra node and fit degree, so the
/// lower-order contaminants of the exponential are absorbed by the fit. The
/// result converges to `term + predicted_bias` as λ → 0.
pub fn extract_term_unitary(sys: &PerturbedSystem, tc: &TermCircuit) -> Result<TermEstimate> {
    require_backend(tc, false)?;
    let order = tc.signal_order as usize;
    let (nodes, coeff) =
        extract_coefficient(sys, tc.term, tc.ue_variant, tc.uv_backend, order + 1)?;
    Ok(TermEstimate {
        term: tc.term,
        mode: EstimateMode::UnitaryAmplitude,
        value: (coeff / tc.prefactor).re,
        magnitude_only: false,
        predicted_bias: oracle::uv_series_bias(sys, tc.term)?,
        lambda_nodes: nodes,
        shots: None,
        seed: None,
        standard_error: None,
    })
}

/// Sampling extraction at the configured λ: counts the accepted outcome,
/// converts the empirical probability to a magnitude estimate
/// `√Pr / (λ^order·|prefactor|)`. Sign information is not recoverable from
/// probabilities; zero accepted shots yields value 0 with no error bar.
pub fn extract_term_sampling(
    sys: &PerturbedSystem,
    tc: &TermCircuit,
    shots: u64,
    seed: u64,
) -> Result<TermEstimate> {
    require_backend(tc, false)?;
    if shots == 0 {
        return Err(PtqError::InvalidInput("sampling needs shots ≥ 1".into()));
    }
    let lambda = sys.lambda();
    if lambda <= 0.0 {
        return Err(PtqError::InvalidInput("sampling needs λ > 0".into()));
    }
    let index = tc.post_select.accepted_index().ok_or_else(|| {
        PtqError::InvalidInput(format!(
            "{} has no single accepted outcome; use the state readout",
            tc.term
        ))
    })?;
    let result = sim::run(&tc.circuit, tc.initial_level)?;
    let outcomes = sim::sample(&result.state, shots, seed)?;
    let hits = outcomes
        .iter()
        .find(|o| o.index == index)
        .map(|o| o.count)
        .unwrap_or(0);
    let pr = hits as f64 / shots as f64;
    let denom = lambda.powi(tc.signal_order as i32) * tc.prefactor.norm();
    let value = pr.sqrt() / denom;
    // δ(√Pr) = δPr / (2√Pr), with the binomial δPr = √(Pr(1−Pr)/shots).
    let standard_error = if hits == 0 {
        None
    } else {
        Some((pr * (1.0 - pr) / shots as f64).sqrt() / (2.0 * pr.sqrt()) / denom)
    };
    Ok(TermEstimate {
        term: tc.term,
        mode: EstimateMode::Sampling,
        value,
        magnitude_only: true,
        predicted_bias: oracle::uv_series_bias(sys, tc.term)?,
        lambda_nodes: vec![lambda],
        shots: Some(shots),
        seed: Some(seed),
        standard_error,
    })
}

/// First-order eigenstate coefficients from the state circuit: the amplitude
/// on (k, ancilla=1) divided by `iλC` equals `V_kn/E_nk` exactly with the
/// linearized backend.
pub fn first_order_state(
    sys: &PerturbedSystem,
    variant: UeVariant,
) -> Result<Vec<(usize, Complex64)>> {
    let lambda = sys.lambda();
    if lambda <= 0.0 {
        return Err(PtqError::InvalidInput("state readout needs λ > 0".into()));
    }
    let tc = build_term_circuit(sys, TermKind::State1, variant, UvBackend::Linearized)?;
    let result = sim::run(&tc.circuit, tc.initial_level)?;
    let n = sys.target_level();
    let c = select_c(sys, n, 1);
    let scale = Complex64::new(0.0, lambda * c);
    Ok((0..sys.num_levels())
        .filter(|&k| k != n)
        .map(|k| {
            let amp = result.state.amplitude_at(tc.post_select.index_for_level(k));
            (k, amp / scale)
        })
        .collect())
}

/// Estimates every scalar term in the given mode and assembles the report.
pub fn estimate_all_terms(
    sys: &PerturbedSystem,
    mode: EstimateMode,
    variant: UeVariant,
    backend: UvBackend,
    shots: Option<u64>,
    seed: Option<u64>,
) -> Result<PTReport> {
    let backend = match (mode, backend) {
        (EstimateMode::Linearized, _) => UvBackend::Linearized,
        (_, UvBackend::Linearized) => {
            return Err(PtqError::InvalidInput(
                "unitary modes need an exact or Trotter U_V backend".into(),
            ))
        }
        (_, b) => b,
    };
    let mut estimates = Vec::new();
    for kind in TermKind::all_scalar() {
        let tc = build_term_circuit(sys, kind, variant, backend)?;
        let est = match mode {
            EstimateMode::Linearized => extract_term_linearized(sys, &tc)?,
            EstimateMode::UnitaryAmplitude => extract_term_unitary(sys, &tc)?,
            EstimateMode::Sampling => {
                let shots = shots.ok_or_else(|| {
                    PtqError::InvalidInput("sampling mode needs --shots".into())
                })?;
                extract_term_sampling(sys, &tc, shots, seed.unwrap_or(0))?
            }
        };
        estimates.push(est);
    }
    assemble_corrections(sys, estimates, mode, variant, backend, shots, seed)
}

/// Assembles E^(3) and E^(4) from term estimates, with `e1 = V_nn` taken
/// classically.
pub fn assemble_corrections(
    sys: &PerturbedSystem,
    estimates: Vec<TermEstimate>,
    mode: EstimateMode,
    variant: UeVariant,
    backend: UvBackend,
    shots: Option<u64>,
    seed: Option<u64>,
) -> Result<PTReport> {
    let oracle = PTCorrections::compute(sys)?;
    let value = |kind: TermKind| -> Result<f64> {
        estimates
            .iter()
            .find(|e| e.term == kind)
            .map(|e| e.value)
            .ok_or_else(|| PtqError::MissingEstimate { term: kind.to_string() })
    };
    let e1 = oracle.e1;
    let assembled_e3 = value(TermKind::Eps(3))? - e1 * value(TermKind::MB)?;
    let assembled_e4 = value(TermKind::Eps(4))? - value(TermKind::MB)? * value(TermKind::E2)?
        - 2.0 * e1 * value(TermKind::MA)?
        + e1 * e1 * value(TermKind::MC)?;
    let n = sys.target_level();
    let config = ReportConfig {
        lambda: sys.lambda(),
        target_level: n,
        mode,
        ue_variant: variant,
        uv_backend: backend,
        c_values: (1..=3)
            .map(|p| CValue { power: p, c: select_c(sys, n, p) })
            .collect(),
        shots,
        seed,
    };
    Ok(PTReport {
        deviation_e3: assembled_e3 - oracle.e3,
        deviation_e4: assembled_e4 - oracle.e4,
        oracle,
        estimates,
        assembled_e3,
        assembled_e4,
        config,
    })
}
