//! Gate-level intermediate representation for the estimation circuits.
//!
//! The vocabulary is deliberately tiny: plain and multi-controlled `Ry`
//! rotations (the building blocks of every `U_{E^p}` decomposition) and a
//! dense [`Gate::SystemUnitary`] black box for `U_V`. Circuits are immutable
//! values once built; [`Circuit::validate`] reports every structural
//! violation rather than stopping at the first.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PtqError, Result};
use crate::linalg::unitarity_deviation;

/// Structural unitarity tolerance for gates flagged `is_unitary`.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Qubit bookkeeping: the system register `q` occupies qubits `0..N`
/// (little-endian, qubit j is bit j of a basis index), ancillas `q'_1, q'_2,
/// …` follow at `N, N+1, …`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    n_system: usize,
    ancilla_labels: Vec<String>,
}

impl RegisterLayout {
    pub fn new(n_system: usize, ancilla_labels: Vec<String>) -> Self {
        Self { n_system, ancilla_labels }
    }

    /// Layout with `count` ancillas labelled `q'_1 … q'_count`.
    pub fn with_ancillas(n_system: usize, count: usize) -> Self {
        Self::new(n_system, (1..=count).map(|i| format!("q'_{i}")).collect())
    }

    pub fn n_system(&self) -> usize {
        self.n_system
    }

    pub fn num_ancillas(&self) -> usize {
        self.ancilla_labels.len()
    }

    pub fn ancilla_labels(&self) -> &[String] {
        &self.ancilla_labels
    }

    /// Qubit index of the i-th ancilla (0-based: `ancilla_qubit(0)` is q'_1).
    pub fn ancilla_qubit(&self, i: usize) -> usize {
        debug_assert!(i < self.num_ancillas());
        self.n_system + i
    }

    pub fn total_qubits(&self) -> usize {
        self.n_system + self.ancilla_labels.len()
    }
}

/// One gate. Control masks/values are bitmasks over qubit indices; a control
/// bit set in `control_mask` but clear in `control_values` is a 0-control
/// (the gate fires when that qubit is |0⟩).
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    /// Uncontrolled Ry(angle) on `target`.
    Ry { target: usize, angle: f64 },
    /// Ry(angle) on `target`, applied when every qubit in `control_mask`
    /// matches the corresponding bit of `control_values`.
    MultiControlledRy {
        target: usize,
        angle: f64,
        control_mask: u64,
        control_values: u64,
    },
    /// Dense operator on the whole system register. `is_unitary = false`
    /// marks deliberate non-unitary evaluators (the linearized `U_V`), whose
    /// norm loss the simulator tracks rather than hiding.
    SystemUnitary {
        matrix: DMatrix<Complex64>,
        is_unitary: bool,
        label: String,
    },
}

impl Gate {
    pub fn ry(target: usize, angle: f64) -> Self {
        Gate::Ry { target, angle }
    }

    pub fn mc_ry(target: usize, angle: f64, control_mask: u64, control_values: u64) -> Self {
        Gate::MultiControlledRy { target, angle, control_mask, control_values }
    }

    pub fn system_unitary(matrix: DMatrix<Complex64>, is_unitary: bool, label: &str) -> Self {
        Gate::SystemUnitary { matrix, is_unitary, label: label.to_string() }
    }

    /// Number of control qubits (0 for plain Ry and SystemUnitary).
    pub fn num_controls(&self) -> u32 {
        match self {
            Gate::MultiControlledRy { control_mask, .. } => control_mask.count_ones(),
            _ => 0,
        }
    }
}

/// A named position between gates: `position` counts gate boundaries, so 0 is
/// before the first gate and `gates.len()` after the last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMark {
    pub name: String,
    pub position: usize,
}

/// An ordered gate list over a register layout, with optional named stage
/// marks at which the simulator records snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitDoc", into = "CircuitDoc")]
pub struct Circuit {
    pub layout: RegisterLayout,
    pub gates: Vec<Gate>,
    pub stage_marks: Vec<StageMark>,
}

impl Circuit {
    pub fn new(layout: RegisterLayout, gates: Vec<Gate>, stage_marks: Vec<StageMark>) -> Self {
        Self { layout, gates, stage_marks }
    }

    /// Checks every structural invariant and returns all violations (an
    /// empty list means the circuit is well-formed).
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let total = self.layout.total_qubits();
        if total > u64::BITS as usize {
            violations.push(format!(
                "layout has {total} qubits; control masks support at most {}",
                u64::BITS
            ));
        }
        {
            let mut seen = std::collections::HashSet::new();
            for label in self.layout.ancilla_labels() {
                if !seen.insert(label) {
                    violations.push(format!("duplicate ancilla label {label:?}"));
                }
            }
        }
        let sys_dim = 1usize << self.layout.n_system();
        for (i, gate) in self.gates.iter().enumerate() {
            match gate {
                Gate::Ry { target, angle } => {
                    if *target >= total {
                        violations.push(format!(
                            "gate {i}: target {target} outside layout of {total} qubits"
                        ));
                    }
                    if !angle.is_finite() {
                        violations.push(format!("gate {i}: non-finite angle {angle}"));
                    }
                }
                Gate::MultiControlledRy { target, angle, control_mask, control_values } => {
                    if *target >= total {
                        violations.push(format!(
                            "gate {i}: target {target} outside layout of {total} qubits"
                        ));
                    }
                    if !angle.is_finite() {
                        violations.push(format!("gate {i}: non-finite angle {angle}"));
                    }
                    if control_mask & (1u64 << target) != 0 {
                        violations.push(format!(
                            "gate {i}: target {target} appears in its own control mask"
                        ));
                    }
                    if total < u64::BITS as usize && *control_mask >> total != 0 {
                        violations.push(format!(
                            "gate {i}: control mask {control_mask:#b} outside layout of {total} qubits"
                        ));
                    }
                    if control_values & !control_mask != 0 {
                        violations.push(format!(
                            "gate {i}: control values {control_values:#b} not a subset of mask {control_mask:#b}"
                        ));
                    }
                }
                Gate::SystemUnitary { matrix, is_unitary, label } => {
                    if matrix.nrows() != sys_dim || matrix.ncols() != sys_dim {
                        violations.push(format!(
                            "gate {i} ({label}): matrix is {}×{}, system register needs {sys_dim}×{sys_dim}",
                            matrix.nrows(),
                            matrix.ncols()
                        ));
                    } else if *is_unitary {
                        let dev = unitarity_deviation(matrix);
                        if dev > UNITARITY_TOL {
                            violations.push(format!(
                                "gate {i} ({label}): flagged unitary but ‖U†U − I‖_max = {dev:.3e}"
                            ));
                        }
                    }
                }
            }
        }
        for pair in self.stage_marks.windows(2) {
            if pair[1].position <= pair[0].position {
                violations.push(format!(
                    "stage marks {:?} and {:?} not strictly increasing",
                    pair[0].name, pair[1].name
                ));
            }
        }
        for mark in &self.stage_marks {
            if mark.position > self.gates.len() {
                violations.push(format!(
                    "stage mark {:?} at position {} beyond the {} gate boundaries",
                    mark.name,
                    mark.position,
                    self.gates.len()
                ));
            }
        }
        violations
    }

    /// Consumes the circuit, returning it if well-formed.
    pub fn validated(self) -> Result<Self> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(PtqError::InvalidCircuit { violations })
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

// --- serialization mirror ---------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ControlDoc {
    qubit: usize,
    value: u8,
}

#[derive(Serialize, Deserialize)]
struct GateDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    controls: Option<Vec<ControlDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    is_unitary: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct CircuitDoc {
    layout: RegisterLayout,
    gates: Vec<GateDoc>,
    stage_marks: Vec<StageMark>,
}

impl From<Gate> for GateDoc {
    fn from(gate: Gate) -> Self {
        match gate {
            Gate::Ry { target, angle } => GateDoc {
                kind: "ry".into(),
                target: Some(target),
                angle: Some(angle),
                controls: None,
                matrix: None,
                is_unitary: None,
                label: None,
            },
            Gate::MultiControlledRy { target, angle, control_mask, control_values } => {
                let controls = (0..u64::BITS as usize)
                    .filter(|&q| control_mask & (1 << q) != 0)
                    .map(|q| ControlDoc {
                        qubit: q,
                        value: ((control_values >> q) & 1) as u8,
                    })
                    .collect();
                GateDoc {
                    kind: "mc_ry".into(),
                    target: Some(target),
                    angle: Some(angle),
                    controls: Some(controls),
                    matrix: None,
                    is_unitary: None,
                    label: None,
                }
            }
            Gate::SystemUnitary { matrix, is_unitary, label } => {
                let rows = (0..matrix.nrows())
                    .map(|i| {
                        (0..matrix.ncols())
                            .map(|j| [matrix[(i, j)].re, matrix[(i, j)].im])
                            .collect()
                    })
                    .collect();
                GateDoc {
                    kind: "system_unitary".into(),
                    target: None,
                    angle: None,
                    controls: None,
                    matrix: Some(rows),
                    is_unitary: Some(is_unitary),
                    label: Some(label),
                }
            }
        }
    }
}

fn need<T>(field: Option<T>, name: &str) -> Result<T> {
    field.ok_or_else(|| PtqError::Parse(format!("gate missing field {name:?}")))
}

impl TryFrom<GateDoc> for Gate {
    type Error = PtqError;

    fn try_from(doc: GateDoc) -> Result<Self> {
        match doc.kind.as_str() {
            "ry" => Ok(Gate::Ry {
                target: need(doc.target, "target")?,
                angle: need(doc.angle, "angle")?,
            }),
            "mc_ry" => {
                let mut control_mask = 0u64;
                let mut control_values = 0u64;
                for c in need(doc.controls, "controls")? {
                    if c.qubit >= u64::BITS as usize {
                        return Err(PtqError::Parse(format!(
                            "control qubit {} out of range",
                            c.qubit
                        )));
                    }
                    if c.value > 1 {
                        return Err(PtqError::Parse(format!(
                            "control value {} must be 0 or 1",
                            c.value
                        )));
                    }
                    control_mask |= 1 << c.qubit;
                    control_values |= u64::from(c.value) << c.qubit;
                }
                Ok(Gate::MultiControlledRy {
                    target: need(doc.target, "target")?,
                    angle: need(doc.angle, "angle")?,
                    control_mask,
                    control_values,
                })
            }
            "system_unitary" => {
                let rows = need(doc.matrix, "matrix")?;
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(PtqError::Parse("system_unitary matrix must be square".into()));
                }
                let matrix = DMatrix::from_fn(n, n, |i, j| {
                    Complex64::new(rows[i][j][0], rows[i][j][1])
                });
                Ok(Gate::SystemUnitary {
                    matrix,
                    is_unitary: need(doc.is_unitary, "is_unitary")?,
                    label: doc.label.unwrap_or_default(),
                })
            }
            other => Err(PtqError::Parse(format!("unknown gate kind {other:?}"))),
        }
    }
}

impl From<Circuit> for CircuitDoc {
    fn from(c: Circuit) -> Self {
        CircuitDoc {
            layout: c.layout,
            gates: c.gates.into_iter().map(GateDoc::from).collect(),
            stage_marks: c.stage_marks,
        }
    }
}

impl TryFrom<CircuitDoc> for Circuit {
    type Error = PtqError;

    fn try_from(doc: CircuitDoc) -> Result<Self> {
        Ok(Circuit {
            layout: doc.layout,
            gates: doc
                .gates
                .into_iter()
                .map(Gate::try_from)
                .collect::<Result<Vec<_>>>()?,
            stage_marks: doc.stage_marks,
        })
    }
}
