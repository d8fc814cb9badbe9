//! Gate-count model for the two `U_E` designs and the full term circuits.
//!
//! Counts are weighted basic gates under a pluggable cost model, not wall
//! clock: a `C^j Ry` is charged `max(1, j²)` by default (the quadratic
//! decomposition law) and one `U_V` is charged `N`. The interesting output
//! is the scaling shape — the improved `U_E` replaces `2^N` fully-controlled
//! rotations by one rotation per nonempty control subset, which wins a
//! factor approaching `4N/(N+1)` under the default model.

use serde::Serialize;

use crate::error::{PtqError, Result};
use crate::synthesis::UeVariant;

/// Weighted gate costs. `cnry_cost(j)` is the price of a Ry with `j`
/// controls (nondecreasing in `j`, positive; zero controls are charged like
/// one — the flip conjugation is absorbed in the constant). `uv_cost(N)` is
/// the price of one `U_V` application on `N` qubits.
pub struct CostModel {
    cnry_cost: Box<dyn Fn(u32) -> u64 + Send + Sync>,
    uv_cost: Box<dyn Fn(u32) -> u64 + Send + Sync>,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            cnry_cost: Box::new(|j| u64::from(j * j).max(1)),
            uv_cost: Box::new(u64::from),
        }
    }
}

impl CostModel {
    pub fn new(
        cnry_cost: impl Fn(u32) -> u64 + Send + Sync + 'static,
        uv_cost: impl Fn(u32) -> u64 + Send + Sync + 'static,
    ) -> Self {
        CostModel { cnry_cost: Box::new(cnry_cost), uv_cost: Box::new(uv_cost) }
    }

    pub fn cnry(&self, controls: u32) -> u64 {
        (self.cnry_cost)(controls)
    }

    pub fn uv(&self, n_qubits: u32) -> u64 {
        (self.uv_cost)(n_qubits)
    }
}

/// One row of the scaling report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CostRow {
    /// System qubits.
    pub n: u32,
    /// Energy levels, `M = 2^N`.
    pub m: u64,
    pub standard_ue: u64,
    pub improved_ue: u64,
    /// Third-order circuit under the improved design.
    pub circuit_e3: u64,
    /// Fourth-order circuit under the improved design.
    pub circuit_e4: u64,
}

/// Gate-count scaling versus system size.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
}

impl CostReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,M,standard_ue,improved_ue,circuit_e3,circuit_e4\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n, r.m, r.standard_ue, r.improved_ue, r.circuit_e3, r.circuit_e4
            ));
        }
        out
    }

    /// Whitespace-separated columns for plotting; both axes are meant to be
    /// drawn logarithmically (`set logscale xy`).
    pub fn to_plot_data(&self) -> String {
        let mut out = String::from("# gate-count scaling (plot with: set logscale xy)\n");
        out.push_str("# M standard_ue improved_ue circuit_e3 circuit_e4\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                r.m, r.standard_ue, r.improved_ue, r.circuit_e3, r.circuit_e4
            ));
        }
        out
    }
}

fn check_n(n: u32) -> Result<()> {
    if n == 0 {
        return Err(PtqError::InvalidInput("cost model needs N ≥ 1".into()));
    }
    Ok(())
}

fn to_u64(value: u128, what: &str) -> Result<u64> {
    u64::try_from(value)
        .map_err(|_| PtqError::InvalidInput(format!("{what} overflows 64 bits")))
}

/// Weighted gate count of one `U_E` application on `N` system qubits.
///
/// Standard: `2^N` rotations, each with all `N` controls. Improved: one
/// rotation per control subset — `C(N,j)` rotations with `j` controls.
pub fn ue_cost(n: u32, variant: UeVariant, model: &CostModel) -> Result<u64> {
    check_n(n)?;
    let total: u128 = match variant {
        UeVariant::Standard => (1u128 << n) * u128::from(model.cnry(n)),
        UeVariant::Improved => {
            let mut binom: u128 = 1;
            let mut total: u128 = 0;
            for j in 0..=n {
                total += binom * u128::from(model.cnry(j));
                // C(N, j+1) = C(N, j) · (N−j)/(j+1), exact at every step.
                binom = binom * u128::from(n - j) / u128::from(j + 1);
            }
            total
        }
    };
    to_u64(total, "U_E cost")
}

/// Weighted gate count of an order-`m` term circuit: `m−1` energy oracles
/// and `m` perturbation applications.
pub fn circuit_cost(n: u32, m: u32, variant: UeVariant, model: &CostModel) -> Result<u64> {
    check_n(n)?;
    if m < 3 {
        return Err(PtqError::InvalidInput(format!(
            "term circuits start at third order, got m = {m}"
        )));
    }
    let total = u128::from(m - 1) * u128::from(ue_cost(n, variant, model)?)
        + u128::from(m) * u128::from(model.uv(n));
    to_u64(total, "circuit cost")
}

/// One row per `N` in the range; the third/fourth-order circuit columns use
/// the improved design.
pub fn scaling_report(n_values: &[u32], model: &CostModel) -> Result<CostReport> {
    if n_values.is_empty() {
        return Err(PtqError::InvalidInput("cost report needs at least one N".into()));
    }
    let rows = n_values
        .iter()
        .map(|&n| {
            let standard_ue = ue_cost(n, UeVariant::Standard, model)?;
            let improved_ue = ue_cost(n, UeVariant::Improved, model)?;
            if n >= 2 && improved_ue > standard_ue {
                return Err(PtqError::Internal(format!(
                    "improved U_E costs more than standard at N = {n}"
                )));
            }
            Ok(CostRow {
                n,
                m: 1u64 << n,
                standard_ue,
                improved_ue,
                circuit_e3: circuit_cost(n, 3, UeVariant::Improved, model)?,
                circuit_e4: circuit_cost(n, 4, UeVariant::Improved, model)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostReport { rows })
}
