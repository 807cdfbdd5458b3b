//! Uniform random Clifford circuits.
//!
//! For each qubit `l` in turn, an anticommuting pair of signed Pauli strings
//! supported on `l..n` is drawn uniformly and swept to `(X_l, Z_l)` with H, S,
//! CX and SWAP gates plus a Pauli sign fix. Distinct pair sequences give
//! distinct group elements and their number equals the order of the Clifford
//! group modulo phases, so the recorded gate sequence is uniform.

use rand::Rng;

use super::circuit::{apply_gates, CircuitSpec, Gate, GateOp, Layer};
use crate::error::{Error, Result};
use crate::qstate::{states, PureState};

/// Signed Hermitian Pauli string in symplectic form; `x & z` denotes `Y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
    pub negative: bool,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            x: vec![false; n],
            z: vec![false; n],
            negative: false,
        }
    }

    pub fn single(n: usize, q: usize, symbol: char) -> Self {
        let mut p = PauliString::identity(n);
        match symbol {
            'X' => p.x[q] = true,
            'Z' => p.z[q] = true,
            'Y' => {
                p.x[q] = true;
                p.z[q] = true
            }
            _ => {}
        }
        p
    }

    fn weight_from(&self, l: usize) -> usize {
        (l..self.x.len())
            .filter(|&j| self.x[j] || self.z[j])
            .count()
    }

    /// Symplectic product restricted to qubits `l..`: true if anticommuting.
    fn anticommutes_from(&self, other: &PauliString, l: usize) -> bool {
        (l..self.x.len()).fold(false, |acc, j| {
            acc ^ (self.x[j] & other.z[j]) ^ (self.z[j] & other.x[j])
        })
    }

    /// Conjugation `P -> g P g^dagger` for a named Clifford gate.
    pub fn conjugate(&mut self, g: &Gate) {
        let q = &g.qubits;
        match g.op {
            GateOp::H => {
                let a = q[0];
                self.negative ^= self.x[a] & self.z[a];
                std::mem::swap(&mut self.x[a], &mut self.z[a]);
            }
            GateOp::S => {
                let a = q[0];
                self.negative ^= self.x[a] & self.z[a];
                self.z[a] ^= self.x[a];
            }
            GateOp::Sdg => {
                let a = q[0];
                self.negative ^= self.x[a] & !self.z[a];
                self.z[a] ^= self.x[a];
            }
            GateOp::X => self.negative ^= self.z[q[0]],
            GateOp::Z => self.negative ^= self.x[q[0]],
            GateOp::Y => self.negative ^= self.x[q[0]] ^ self.z[q[0]],
            GateOp::Cx => {
                let (a, b) = (q[0], q[1]);
                self.negative ^= self.x[a] & self.z[b] & !(self.x[b] ^ self.z[a]);
                self.x[b] ^= self.x[a];
                self.z[a] ^= self.z[b];
            }
            GateOp::Cz => {
                let (a, b) = (q[0], q[1]);
                self.negative ^= self.x[a] & self.x[b] & (self.z[a] ^ self.z[b]);
                self.z[a] ^= self.x[b];
                self.z[b] ^= self.x[a];
            }
            GateOp::Swap => {
                self.x.swap(q[0], q[1]);
                self.z.swap(q[0], q[1]);
            }
            GateOp::Matrix(_) => panic!("conjugation is defined for named Clifford gates only"),
        }
    }

    fn random_from<R: Rng + ?Sized>(n: usize, l: usize, rng: &mut R) -> Self {
        let mut p = PauliString::identity(n);
        for j in l..n {
            p.x[j] = rng.random();
            p.z[j] = rng.random();
        }
        p.negative = rng.random();
        p
    }
}

struct Sweep<'a> {
    a: PauliString,
    b: PauliString,
    out: &'a mut Vec<Gate>,
}

impl Sweep<'_> {
    fn push(&mut self, op: GateOp, qubits: &[usize]) {
        let g = Gate::new(op, qubits);
        self.a.conjugate(&g);
        self.b.conjugate(&g);
        self.out.push(g);
    }

    /// Reduces row `a` (or `b`) on qubits `l..` to a single `X` on `l`.
    fn reduce_to_x(&mut self, l: usize, use_b: bool) {
        let n = self.a.x.len();
        for j in l..n {
            let row = if use_b { &self.b } else { &self.a };
            if row.z[j] {
                let op = if row.x[j] { GateOp::S } else { GateOp::H };
                self.push(op, &[j]);
            }
        }
        let row = if use_b { &self.b } else { &self.a };
        let mut support: Vec<usize> = (l..n).filter(|&j| row.x[j]).collect();
        while support.len() > 1 {
            let mut keep = Vec::with_capacity(support.len().div_ceil(2));
            for chunk in support.chunks(2) {
                if let [c, t] = *chunk {
                    self.push(GateOp::Cx, &[c, t]);
                }
                keep.push(chunk[0]);
            }
            support = keep;
        }
        if support[0] != l {
            self.push(GateOp::Swap, &[l, support[0]]);
        }
    }
}

fn pack(n: usize, gates: Vec<Gate>) -> CircuitSpec {
    let mut spec = CircuitSpec::new(n);
    let mut used = vec![false; n];
    for g in gates {
        if spec.layers.is_empty() || g.qubits.iter().any(|&q| used[q]) {
            spec.layers.push(Layer::default());
            used.iter_mut().for_each(|u| *u = false);
        }
        g.qubits.iter().for_each(|&q| used[q] = true);
        spec.layers.last_mut().unwrap().gates.push(g);
    }
    spec
}

/// Uniformly random `n`-qubit Clifford as an H/S/CX/SWAP/Pauli circuit.
pub fn random_clifford_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CircuitSpec> {
    if n == 0 || n > 14 {
        return Err(Error::UnsupportedSize(format!(
            "random Clifford on {n} qubits (supported: 1..=14)"
        )));
    }
    let mut gates = Vec::new();
    for l in 0..n {
        let a = loop {
            let p = PauliString::random_from(n, l, rng);
            if p.weight_from(l) > 0 {
                break p;
            }
        };
        let b = loop {
            let p = PauliString::random_from(n, l, rng);
            if a.anticommutes_from(&p, l) {
                break p;
            }
        };
        let mut sw = Sweep {
            a,
            b,
            out: &mut gates,
        };
        sw.reduce_to_x(l, false);
        let b_is_z = sw.b.z[l] && !sw.b.x[l] && sw.b.weight_from(l) == 1;
        if !b_is_z {
            sw.push(GateOp::H, &[l]);
            sw.reduce_to_x(l, true);
            sw.push(GateOp::H, &[l]);
        }
        match (sw.a.negative, sw.b.negative) {
            (true, false) => sw.push(GateOp::Z, &[l]),
            (false, true) => sw.push(GateOp::X, &[l]),
            (true, true) => sw.push(GateOp::Y, &[l]),
            (false, false) => {}
        }
    }
    Ok(pack(n, gates))
}

/// `C [R_Z(alpha)|+>]^n` for a uniformly random Clifford `C`.
pub fn magic_injection_state<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<PureState> {
    let cliff = random_clifford_unitary(n, rng)?;
    let single = states::rz_plus(alpha);
    let kets: Vec<_> = (0..n)
        .map(|_| [single.amplitudes()[0], single.amplitudes()[1]])
        .collect();
    let mut amps = PureState::product(&kets)?.into_amplitudes();
    for layer in &cliff.layers {
        apply_gates(&mut amps, n, &layer.gates);
    }
    PureState::normalized(n, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::gates;
    use crate::rng::stream;
    use nalgebra::DMatrix;
    use num_complex::Complex64 as C64;
    use std::collections::HashMap;

    fn unitary_of(spec: &CircuitSpec) -> DMatrix<C64> {
        let dim = 1 << spec.n;
        let mut cols = Vec::new();
        for k in 0..dim {
            let mut amps = PureState::basis(spec.n, k).into_amplitudes();
            for layer in &spec.layers {
                apply_gates(&mut amps, spec.n, &layer.gates);
            }
            cols.push(nalgebra::DVector::from_vec(amps));
        }
        DMatrix::from_columns(&cols)
    }

    fn pauli_matrix(p: &PauliString) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(1, 1, C64::new(if p.negative { -1.0 } else { 1.0 }, 0.0));
        for j in 0..p.x.len() {
            let s = match (p.x[j], p.z[j]) {
                (false, false) => DMatrix::identity(2, 2),
                (true, false) => gates::x(),
                (false, true) => gates::z(),
                (true, true) => gates::y(),
            };
            m = m.kronecker(&s);
        }
        m
    }

    /// Matches `m` to a signed Pauli string times a phase in {1, i}.
    fn as_pauli(m: &DMatrix<C64>, n: usize) -> Option<(PauliString, bool)> {
        for code in 0..(1usize << (2 * n)) {
            let mut p = PauliString::identity(n);
            for j in 0..n {
                p.x[j] = code >> (2 * j) & 1 == 1;
                p.z[j] = code >> (2 * j + 1) & 1 == 1;
            }
            let pm = pauli_matrix(&p);
            for (phase, imag) in [
                (C64::new(1.0, 0.0), false),
                (C64::new(-1.0, 0.0), false),
                (C64::new(0.0, 1.0), true),
                (C64::new(0.0, -1.0), true),
            ] {
                if (m - &pm * phase).norm() < 1e-9 {
                    let mut q = p.clone();
                    q.negative = phase.re < -0.5 || phase.im < -0.5;
                    return Some((q, imag));
                }
            }
        }
        None
    }

    #[test]
    fn conjugation_rules_match_matrices() {
        let n = 2;
        let named = [
            GateOp::H,
            GateOp::S,
            GateOp::Sdg,
            GateOp::X,
            GateOp::Y,
            GateOp::Z,
        ];
        for code in 0..16usize {
            let mut p = PauliString::identity(n);
            for j in 0..n {
                p.x[j] = code >> (2 * j) & 1 == 1;
                p.z[j] = code >> (2 * j + 1) & 1 == 1;
            }
            let mut gs: Vec<Gate> = named.iter().map(|op| Gate::new(op.clone(), &[1])).collect();
            gs.push(Gate::new(GateOp::Cx, &[0, 1]));
            gs.push(Gate::new(GateOp::Cx, &[1, 0]));
            gs.push(Gate::new(GateOp::Cz, &[0, 1]));
            gs.push(Gate::new(GateOp::Swap, &[0, 1]));
            for g in gs {
                let spec = pack(n, vec![g.clone()]);
                let u = unitary_of(&spec);
                let want = &u * pauli_matrix(&p) * u.adjoint();
                let mut got = p.clone();
                got.conjugate(&g);
                assert!((want - pauli_matrix(&got)).norm() < 1e-9, "{g:?} on {p:?}");
            }
        }
    }

    #[test]
    fn output_is_clifford() {
        for seed in 0..20 {
            let mut rng = stream(seed, 0);
            let spec = random_clifford_unitary(3, &mut rng).unwrap();
            let u = unitary_of(&spec);
            for q in 0..3 {
                for s in ['X', 'Z'] {
                    let img = &u * pauli_matrix(&PauliString::single(3, q, s)) * u.adjoint();
                    assert!(as_pauli(&img, 3).is_some(), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn single_qubit_distribution_is_uniform() {
        let mut rng = stream(21, 0);
        let draws = 10_000;
        let mut counts: HashMap<(PauliString, PauliString), usize> = HashMap::new();
        for _ in 0..draws {
            let spec = random_clifford_unitary(1, &mut rng).unwrap();
            let u = unitary_of(&spec);
            let ix = as_pauli(&(&u * gates::x() * u.adjoint()), 1).unwrap().0;
            let iz = as_pauli(&(&u * gates::z() * u.adjoint()), 1).unwrap().0;
            *counts.entry((ix, iz)).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        let p = 1.0 / 24.0;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts.values() {
            assert!((*c as f64 / draws as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn two_qubit_group_is_covered() {
        // |C_2 / U(1)| = 11520; 200k draws see every element with near certainty.
        let mut rng = stream(22, 0);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..200_000 {
            let spec = random_clifford_unitary(2, &mut rng).unwrap();
            let mut key = Vec::new();
            for q in 0..2 {
                for s in ['X', 'Z'] {
                    let mut p = PauliString::single(2, q, s);
                    for layer in &spec.layers {
                        for g in &layer.gates {
                            p.conjugate(g);
                        }
                    }
                    key.push(p);
                }
            }
            seen.insert(key);
        }
        assert_eq!(seen.len(), 11520);
    }

    #[test]
    fn clifford_maps_zero_to_stabilizer_state() {
        let dict = crate::freeset::StabilizerDictionary::build(3).unwrap();
        for seed in 0..10 {
            let psi = magic_injection_state(3, 0.0, &mut stream(seed, 1)).unwrap();
            assert!(
                (crate::freeset::stabilizer_fidelity(&psi, &dict).unwrap() - 1.0).abs() < 1e-10
            );
        }
    }

    #[test]
    fn magic_state_examples() {
        let dict = crate::freeset::StabilizerDictionary::build(1).unwrap();
        let t = states::rz_plus(std::f64::consts::FRAC_PI_4);
        let f = crate::freeset::stabilizer_fidelity(&t, &dict).unwrap();
        assert!((f - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-12);
        for &alpha in &[0.0, 0.3, std::f64::consts::FRAC_PI_4] {
            let psi = magic_injection_state(5, alpha, &mut stream(3, 0)).unwrap();
            assert!((crate::linalg::norm_sqr(psi.amplitudes()) - 1.0).abs() < 1e-12);
        }
        assert!(random_clifford_unitary(15, &mut stream(0, 0)).is_err());
    }
}
