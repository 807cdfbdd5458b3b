use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::unitarity_defect;
use crate::qstate::{
    self, apply_1q, apply_gate_in_place, bit_of, gates, Outcome, Pauli, PureState,
};

/// Gate operation, either named or an explicit row-major matrix of
/// `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateOp {
    H,
    S,
    Sdg,
    X,
    Y,
    Z,
    Cx,
    Cz,
    Swap,
    Matrix(Vec<[f64; 2]>),
}

impl GateOp {
    pub fn arity(&self) -> Option<usize> {
        match self {
            GateOp::H | GateOp::S | GateOp::Sdg | GateOp::X | GateOp::Y | GateOp::Z => Some(1),
            GateOp::Cx | GateOp::Cz | GateOp::Swap => Some(2),
            GateOp::Matrix(m) => {
                let dim = (m.len() as f64).sqrt() as usize;
                (dim * dim == m.len() && dim.is_power_of_two())
                    .then(|| dim.trailing_zeros() as usize)
            }
        }
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        match self {
            GateOp::H => gates::h(),
            GateOp::S => gates::s(),
            GateOp::Sdg => gates::sdg(),
            GateOp::X => gates::x(),
            GateOp::Y => gates::y(),
            GateOp::Z => gates::z(),
            GateOp::Cx => gates::cx(),
            GateOp::Cz => gates::cz(),
            GateOp::Swap => gates::swap(),
            GateOp::Matrix(m) => {
                let dim = (m.len() as f64).sqrt() as usize;
                let rows: Vec<C64> = m.iter().map(|z| C64::new(z[0], z[1])).collect();
                DMatrix::from_row_slice(dim, dim, &rows)
            }
        }
    }

    pub fn from_matrix(u: &DMatrix<C64>) -> GateOp {
        let mut rows = Vec::with_capacity(u.len());
        for i in 0..u.nrows() {
            for j in 0..u.ncols() {
                rows.push([u[(i, j)].re, u[(i, j)].im]);
            }
        }
        GateOp::Matrix(rows)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub op: GateOp,
    pub qubits: Vec<usize>,
}

impl Gate {
    pub fn new(op: GateOp, qubits: &[usize]) -> Self {
        Gate {
            op,
            qubits: qubits.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub qubit: usize,
    pub basis: Pauli,
}

/// Parallel gates followed by single-qubit measurements. When `branches` is
/// non-empty it replaces `gates`, keyed by the measurement record so far.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    #[serde(default)]
    pub gates: Vec<Gate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measurements: Vec<Measurement>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub branches: BTreeMap<String, Vec<Gate>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub n: usize,
    pub layers: Vec<Layer>,
}

impl CircuitSpec {
    pub fn new(n: usize) -> Self {
        CircuitSpec {
            n,
            layers: Vec::new(),
        }
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.gates.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let mut recorded = 0usize;
        for (li, layer) in self.layers.iter().enumerate() {
            let check = |gs: &[Gate]| -> Result<()> {
                let mut used = vec![false; self.n];
                for g in gs {
                    if g.op.arity() != Some(g.qubits.len()) {
                        return Err(Error::InvalidArgument(format!(
                            "layer {li}: gate arity mismatch on {:?}",
                            g.qubits
                        )));
                    }
                    for &q in &g.qubits {
                        if q >= self.n || used[q] {
                            return Err(Error::InvalidArgument(format!(
                                "layer {li}: overlapping or out-of-range qubit {q}"
                            )));
                        }
                        used[q] = true;
                    }
                    if let GateOp::Matrix(_) = g.op {
                        let dev = unitarity_defect(&g.op.matrix());
                        if dev > 1e-10 {
                            return Err(Error::NonUnitaryGate(dev));
                        }
                    }
                }
                Ok(())
            };
            check(&layer.gates)?;
            if !layer.branches.is_empty() {
                let expected = 1usize.checked_shl(recorded as u32).unwrap_or(usize::MAX);
                if layer.branches.len() < expected {
                    return Err(Error::InvalidArgument(format!(
                        "layer {li}: branches cover {} of {expected} measurement records",
                        layer.branches.len()
                    )));
                }
                for (key, gs) in &layer.branches {
                    let rec = Outcome::parse(key)?;
                    if rec.len() != recorded {
                        return Err(Error::InvalidArgument(format!(
                            "layer {li}: branch key {key:?} has wrong length"
                        )));
                    }
                    check(gs)?;
                }
            }
            let mut used = vec![false; self.n];
            for m in &layer.measurements {
                if m.qubit >= self.n || used[m.qubit] {
                    return Err(Error::InvalidArgument(format!(
                        "layer {li}: bad measurement qubit {}",
                        m.qubit
                    )));
                }
                used[m.qubit] = true;
            }
            recorded += layer.measurements.len();
        }
        Ok(())
    }
}

/// Final state, measurement record and the record's Born probability.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub state: PureState,
    pub record: Outcome,
    pub probability: f64,
}

fn apply_named(amps: &mut [C64], n: usize, g: &Gate) {
    let one = |m: DMatrix<C64>| [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
    match &g.op {
        GateOp::H => apply_1q(amps, n, g.qubits[0], &one(gates::h())),
        GateOp::S => apply_1q(amps, n, g.qubits[0], &one(gates::s())),
        GateOp::Sdg => apply_1q(amps, n, g.qubits[0], &one(gates::sdg())),
        GateOp::X => apply_1q(amps, n, g.qubits[0], &one(gates::x())),
        GateOp::Y => apply_1q(amps, n, g.qubits[0], &one(gates::y())),
        GateOp::Z => apply_1q(amps, n, g.qubits[0], &one(gates::z())),
        GateOp::Cx => {
            let (c, t) = (bit_of(n, g.qubits[0]), bit_of(n, g.qubits[1]));
            for i in 0..amps.len() {
                if i & c != 0 && i & t == 0 {
                    amps.swap(i, i | t);
                }
            }
        }
        GateOp::Cz => {
            let m = bit_of(n, g.qubits[0]) | bit_of(n, g.qubits[1]);
            for (i, a) in amps.iter_mut().enumerate() {
                if i & m == m {
                    *a = -*a;
                }
            }
        }
        GateOp::Swap => {
            let (a, b) = (bit_of(n, g.qubits[0]), bit_of(n, g.qubits[1]));
            for i in 0..amps.len() {
                if i & a != 0 && i & b == 0 {
                    amps.swap(i, i ^ a ^ b);
                }
            }
        }
        GateOp::Matrix(_) => apply_gate_in_place(amps, n, &g.op.matrix(), &g.qubits),
    }
}

/// Applies a gate list to raw amplitudes.
pub(crate) fn apply_gates(amps: &mut [C64], n: usize, gs: &[Gate]) {
    for g in gs {
        apply_named(amps, n, g);
    }
}

/// Applies one gate (named or explicit) to a pure state.
pub fn apply_gate(psi: &PureState, g: &Gate) -> PureState {
    let mut amps = psi.amplitudes().to_vec();
    apply_named(&mut amps, psi.n(), g);
    PureState::from_raw(psi.n(), amps)
}

/// Runs `spec` from `initial`, sampling mid-circuit measurements.
pub fn run_circuit<R: Rng + ?Sized>(
    spec: &CircuitSpec,
    initial: &PureState,
    rng: &mut R,
) -> Result<RunResult> {
    if initial.n() != spec.n {
        return Err(Error::SizeMismatch(format!(
            "circuit on {} qubits, state on {}",
            spec.n,
            initial.n()
        )));
    }
    spec.validate()?;
    let n = spec.n;
    let mut state = initial.clone();
    let mut record = Outcome::default();
    let mut prob = 1.0;
    for layer in &spec.layers {
        let gs = if layer.branches.is_empty() {
            &layer.gates
        } else {
            layer
                .branches
                .get(&record.to_string())
                .ok_or_else(|| Error::InvalidArgument(format!("no branch for record {record}")))?
        };
        let mut amps = state.into_amplitudes();
        apply_gates(&mut amps, n, gs);
        state = PureState::from_raw(n, amps);
        for m in &layer.measurements {
            let (d, p, post) = qstate::measure_qubit_with_prob(&state, m.qubit, m.basis, rng);
            record.0.push(d);
            prob *= p;
            state = post;
        }
    }
    Ok(RunResult {
        state,
        record,
        probability: prob,
    })
}

/// Gate pairs of brickwork layer `layer` (0-based) on a lattice with extents
/// `dims` (last coordinate fastest). Layers `2i` and `2i+1` act along
/// coordinate `i mod D`, pairing `(2x, 2x+1)` then `(2x+1, 2x+2)`; the
/// boundary is open.
pub fn brickwork_pairs(dims: &[usize], layer: usize) -> Vec<(usize, usize)> {
    let axis = (layer / 2) % dims.len();
    let offset = layer % 2;
    let total: usize = dims.iter().product();
    let stride: usize = dims[axis + 1..].iter().product();
    let mut pairs = Vec::new();
    for q in 0..total {
        let x = (q / stride) % dims[axis];
        if x >= offset && (x - offset).is_multiple_of(2) && x + 1 < dims[axis] {
            pairs.push((q, q + stride));
        }
    }
    pairs
}

/// Depth-`depth` brickwork circuit of Haar-random two-qubit gates.
pub fn brickwork_circuit<R: Rng + ?Sized>(
    dims: &[usize],
    depth: usize,
    rng: &mut R,
) -> CircuitSpec {
    let n = dims.iter().product();
    let mut spec = CircuitSpec::new(n);
    for layer in 0..depth {
        let gates = brickwork_pairs(dims, layer)
            .into_iter()
            .map(|(a, b)| {
                Gate::new(
                    GateOp::from_matrix(&super::haar_two_qubit_unitary(rng)),
                    &[a, b],
                )
            })
            .collect();
        spec.layers.push(Layer {
            gates,
            ..Default::default()
        });
    }
    spec
}
