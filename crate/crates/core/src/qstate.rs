//! Dense pure and mixed states with the primitives the rest of the crate
//! builds on.
//!
//! Qubit `q` of an `n`-qubit register is bit `n - 1 - q` of the basis index.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ZERO_PROB;

const NORM_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn bit_of(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Single-qubit measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    /// First outcome digit of this basis; the second is `offset() + 1`.
    fn offset(self) -> u8 {
        match self {
            Pauli::Z => 0,
            Pauli::X => 2,
            Pauli::Y => 4,
        }
    }

    pub fn outcome(self, bit: u8) -> u8 {
        self.offset() + bit
    }

    pub fn of_outcome(digit: u8) -> Pauli {
        match digit / 2 {
            0 => Pauli::Z,
            1 => Pauli::X,
            _ => Pauli::Y,
        }
    }

    pub fn from_index(i: usize) -> Pauli {
        Pauli::ALL[i]
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn parse(ch: char) -> Option<Pauli> {
        match ch {
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Render a basis string such as `"ZXY"`.
pub fn basis_string(bases: &[Pauli]) -> String {
    bases.iter().map(|b| b.symbol()).collect()
}

/// The six single-qubit Pauli eigenstates indexed by outcome digit:
/// `0, 1, +, -, +i, -i`.
pub fn outcome_ket(digit: u8) -> [C64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match digit {
        0 => [c(1.0, 0.0), c(0.0, 0.0)],
        1 => [c(0.0, 0.0), c(1.0, 0.0)],
        2 => [c(h, 0.0), c(h, 0.0)],
        3 => [c(h, 0.0), c(-h, 0.0)],
        4 => [c(h, 0.0), c(0.0, h)],
        5 => [c(h, 0.0), c(0.0, -h)],
        _ => panic!("outcome digit {digit} out of range"),
    }
}

const SYMBOLS: [&str; 6] = ["0", "1", "+", "-", "+i", "-i"];

/// Outcome string over the alphabet `{0, 1, +, -, +i, -i}`, one symbol per
/// measured qubit. Digits `0..6` index [`outcome_ket`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Outcome(pub Vec<u8>);

impl Outcome {
    pub fn from_bits(bits: &[u8]) -> Self {
        Outcome(bits.to_vec())
    }

    /// Computational-basis outcome for the low `len` bits of `index`,
    /// most significant first.
    pub fn from_index(index: usize, len: usize) -> Self {
        Outcome(
            (0..len)
                .map(|k| ((index >> (len - 1 - k)) & 1) as u8)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn bases(&self) -> Vec<Pauli> {
        self.0.iter().map(|&d| Pauli::of_outcome(d)).collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        let mut chars = s.chars().peekable();
        while let Some(ch) = chars.next() {
            let d = match ch {
                '0' => 0,
                '1' => 1,
                '+' | '-' | '\u{2212}' => {
                    let plus = ch == '+';
                    if chars.peek() == Some(&'i') {
                        chars.next();
                        if plus {
                            4
                        } else {
                            5
                        }
                    } else if plus {
                        2
                    } else {
                        3
                    }
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "bad outcome symbol {ch:?} in {s:?}"
                    )))
                }
            };
            out.push(d);
        }
        Ok(Outcome(out))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &d in &self.0 {
            f.write_str(SYMBOLS[d as usize])?;
        }
        Ok(())
    }
}

impl Serialize for Outcome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Outcome::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Disjoint split of `0..n` into a retained part `a` and a measured part `b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Bipartition {
    pub fn new(n: usize, a: Vec<usize>, b: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &q in a.iter().chain(b.iter()) {
            if q >= n || seen[q] {
                return Err(Error::InvalidArgument(format!(
                    "partition {a:?}|{b:?} is not a split of 0..{n}"
                )));
            }
            seen[q] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "partition {a:?}|{b:?} does not cover 0..{n}"
            )));
        }
        Ok(Bipartition { a, b })
    }

    /// `a` as given, `b` the remaining qubits in ascending order.
    pub fn complement(n: usize, a: &[usize]) -> Result<Self> {
        let b = (0..n).filter(|q| !a.contains(q)).collect();
        Bipartition::new(n, a.to_vec(), b)
    }

    /// First `n_a` qubits retained.
    pub fn leading(n: usize, n_a: usize) -> Self {
        Bipartition {
            a: (0..n_a).collect(),
            b: (n_a..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.a.len() + self.b.len()
    }

    pub fn n_a(&self) -> usize {
        self.a.len()
    }

    pub fn n_b(&self) -> usize {
        self.b.len()
    }

    /// Qubit order placing `a` first, then `b`.
    pub fn order(&self) -> Vec<usize> {
        self.a.iter().chain(self.b.iter()).copied().collect()
    }

    pub fn swapped(&self) -> Self {
        Bipartition {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }
}

/// Normalized statevector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(n: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n {
            return Err(Error::LengthMismatch {
                expected: 1 << n,
                got: amps.len(),
            });
        }
        let norm = linalg::norm_sqr(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "squared norm {norm} differs from 1"
            )));
        }
        Ok(PureState { n, amps })
    }

    /// Normalizes `amps`; fails if the vector is (numerically) zero.
    pub fn normalized(n: usize, mut amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n {
            return Err(Error::LengthMismatch {
                expected: 1 << n,
                got: amps.len(),
            });
        }
        let norm = linalg::norm_sqr(&amps);
        if norm < ZERO_PROB {
            return Err(Error::ZeroProbabilityOutcome(norm));
        }
        let s = 1.0 / norm.sqrt();
        amps.iter_mut().for_each(|a| *a *= s);
        Ok(PureState { n, amps })
    }

    pub(crate) fn from_raw(n: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n);
        PureState { n, amps }
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![C64::default(); 1 << n];
        amps[index] = c(1.0, 0.0);
        PureState { n, amps }
    }

    pub fn zero(n: usize) -> Self {
        PureState::basis(n, 0)
    }

    /// Tensor product of single-qubit kets, qubit 0 first.
    pub fn product(kets: &[[C64; 2]]) -> Result<Self> {
        let mut amps = vec![c(1.0, 0.0)];
        for k in kets {
            amps = amps.iter().flat_map(|&a| [a * k[0], a * k[1]]).collect();
        }
        PureState::normalized(kets.len(), amps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        linalg::inner(&self.amps, &other.amps)
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let amps = self
            .amps
            .iter()
            .flat_map(|&a| other.amps.iter().map(move |&b| a * b))
            .collect();
        PureState {
            n: self.n + other.n,
            amps,
        }
    }

    /// Reorders qubits so that new qubit `k` is old qubit `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> PureState {
        PureState {
            n: self.n,
            amps: permute_qubits(&self.amps, self.n, order),
        }
    }

    pub fn to_density(&self) -> DensityState {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        DensityState {
            n: self.n,
            mat: &v * v.adjoint(),
        }
    }

    /// Squared-norm probability of each computational basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Trace-one Hermitian positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    n: usize,
    mat: DMatrix<C64>,
}

impl DensityState {
    pub fn new(n: usize, mat: DMatrix<C64>) -> Result<Self> {
        let dim = 1usize << n;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::SizeMismatch(format!(
                "{}x{} matrix for {n} qubits",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm = linalg::hermiticity_defect(&mat);
        if herm > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "matrix not Hermitian (defect {herm:.2e})"
            )));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = linalg::hermitian_eigenvalues(&mat)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -1e-8 {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {min:.3e} is negative"
            )));
        }
        Ok(DensityState { n, mat })
    }

    pub(crate) fn from_raw(n: usize, mat: DMatrix<C64>) -> Self {
        DensityState { n, mat }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1usize << n;
        DensityState {
            n,
            mat: DMatrix::identity(dim, dim) / c(dim as f64, 0.0),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn permuted(&self, order: &[usize]) -> DensityState {
        // Column-major storage: the flat index is col * dim + row, so column
        // qubits come first in a 2n-qubit view.
        let n = self.n;
        let full: Vec<usize> = order
            .iter()
            .copied()
            .chain(order.iter().map(|q| q + n))
            .collect();
        let data = permute_qubits(self.mat.as_slice(), 2 * n, &full);
        let dim = 1 << n;
        DensityState {
            n,
            mat: DMatrix::from_vec(dim, dim, data),
        }
    }
}

/// Either kind of state. Most operations accept both.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(PureState),
    Mixed(DensityState),
}

impl QuantumState {
    pub fn n(&self) -> usize {
        match self {
            QuantumState::Pure(p) => p.n(),
            QuantumState::Mixed(m) => m.n(),
        }
    }

    pub fn as_pure(&self) -> Option<&PureState> {
        match self {
            QuantumState::Pure(p) => Some(p),
            QuantumState::Mixed(_) => None,
        }
    }

    pub fn as_mixed(&self) -> Option<&DensityState> {
        match self {
            QuantumState::Mixed(m) => Some(m),
            QuantumState::Pure(_) => None,
        }
    }

    pub fn to_density(&self) -> DensityState {
        match self {
            QuantumState::Pure(p) => p.to_density(),
            QuantumState::Mixed(m) => m.clone(),
        }
    }
}

impl From<PureState> for QuantumState {
    fn from(p: PureState) -> Self {
        QuantumState::Pure(p)
    }
}

impl From<DensityState> for QuantumState {
    fn from(m: DensityState) -> Self {
        QuantumState::Mixed(m)
    }
}

pub(crate) fn permute_qubits(amps: &[C64], n: usize, order: &[usize]) -> Vec<C64> {
    debug_assert_eq!(order.len(), n);
    if order.iter().enumerate().all(|(k, &q)| k == q) {
        return amps.to_vec();
    }
    let mut out = vec![C64::default(); amps.len()];
    for (new, slot) in out.iter_mut().enumerate() {
        let mut old = 0usize;
        for (k, &q) in order.iter().enumerate() {
            if new & bit_of(n, k) != 0 {
                old |= bit_of(n, q);
            }
        }
        *slot = amps[old];
    }
    out
}

/// Contracts qubit `q` of an `n`-qubit tensor with `coeffs`, returning the
/// `(n-1)`-qubit tensor `sum_b coeffs[b] * amps[.., b, ..]`.
pub(crate) fn contract_qubit(amps: &[C64], n: usize, q: usize, coeffs: [C64; 2]) -> Vec<C64> {
    let low = 1usize << (n - 1 - q);
    let high = amps.len() / (2 * low);
    let mut out = Vec::with_capacity(amps.len() / 2);
    for h in 0..high {
        let base = h * 2 * low;
        for l in 0..low {
            out.push(coeffs[0] * amps[base + l] + coeffs[1] * amps[base + low + l]);
        }
    }
    out
}

/// Applies `<x_j|` to each qubit `qubits[j]` of a pure tensor and returns the
/// unnormalized remainder with the untouched qubits in ascending order.
pub(crate) fn contract_bras(
    amps: &[C64],
    n: usize,
    qubits: &[usize],
    kets: &[[C64; 2]],
) -> Vec<C64> {
    let mut pairs: Vec<(usize, [C64; 2])> =
        qubits.iter().copied().zip(kets.iter().copied()).collect();
    pairs.sort_by_key(|p| std::cmp::Reverse(p.0));
    let mut cur = amps.to_vec();
    let mut m = n;
    for (q, ket) in pairs {
        cur = contract_qubit(&cur, m, q, [ket[0].conj(), ket[1].conj()]);
        m -= 1;
    }
    cur
}

fn sorted_positions(a: &[usize]) -> Option<Vec<usize>> {
    // Position of each a[k] among sorted(a), or None if already sorted.
    let mut sorted = a.to_vec();
    sorted.sort_unstable();
    if sorted == a {
        return None;
    }
    Some(
        a.iter()
            .map(|q| sorted.iter().position(|s| s == q).unwrap())
            .collect(),
    )
}

/// Unnormalized projection of a pure state onto the product ket `kets` on
/// `part.b`; the result is ordered as `part.a`.
pub(crate) fn project_pure_raw(psi: &PureState, part: &Bipartition, kets: &[[C64; 2]]) -> Vec<C64> {
    let v = contract_bras(&psi.amps, psi.n, &part.b, kets);
    match sorted_positions(&part.a) {
        None => v,
        Some(pos) => permute_qubits(&v, part.a.len(), &pos),
    }
}

/// Unnormalized projection `(<x| ⊗ I) rho (|x> ⊗ I)` ordered as `part.a`.
pub(crate) fn project_mixed_raw(
    rho: &DensityState,
    part: &Bipartition,
    kets: &[[C64; 2]],
) -> DMatrix<C64> {
    let n = rho.n;
    // 2n-qubit view: column qubits at positions 0..n, row qubits at n..2n.
    let mut pairs: Vec<(usize, [C64; 2])> = Vec::new();
    for (&q, k) in part.b.iter().zip(kets) {
        pairs.push((q, [k[0], k[1]]));
        pairs.push((q + n, [k[0].conj(), k[1].conj()]));
    }
    pairs.sort_by_key(|p| std::cmp::Reverse(p.0));
    let mut cur = rho.mat.as_slice().to_vec();
    let mut m = 2 * n;
    for (q, co) in pairs {
        cur = contract_qubit(&cur, m, q, co);
        m -= 1;
    }
    let k = part.a.len();
    let dim = 1 << k;
    let out = DensityState {
        n: k,
        mat: DMatrix::from_vec(dim, dim, cur),
    };
    match sorted_positions(&part.a) {
        None => out.mat,
        Some(pos) => out.permuted(&pos).mat,
    }
}

/// Projects `b` onto the computational outcome `bits` and returns the Born
/// probability with the normalized state left on `a`.
pub fn projected_state(
    state: &QuantumState,
    part: &Bipartition,
    bits: &[u8],
) -> Result<(f64, QuantumState)> {
    let digits: Vec<u8> = bits.to_vec();
    projected_state_local(state, part, &Outcome(digits))
}

/// As [`projected_state`] but for any local Pauli outcome on `b`.
pub fn projected_state_local(
    state: &QuantumState,
    part: &Bipartition,
    outcome: &Outcome,
) -> Result<(f64, QuantumState)> {
    if part.n() != state.n() {
        return Err(Error::SizeMismatch(format!(
            "partition on {} qubits, state on {}",
            part.n(),
            state.n()
        )));
    }
    if outcome.len() != part.n_b() {
        return Err(Error::LengthMismatch {
            expected: part.n_b(),
            got: outcome.len(),
        });
    }
    if outcome.0.iter().any(|&d| d > 5) {
        return Err(Error::InvalidArgument("outcome digit out of range".into()));
    }
    let kets: Vec<[C64; 2]> = outcome.0.iter().map(|&d| outcome_ket(d)).collect();
    match state {
        QuantumState::Pure(psi) => {
            let v = project_pure_raw(psi, part, &kets);
            let p = linalg::norm_sqr(&v);
            if p < ZERO_PROB {
                return Err(Error::ZeroProbabilityOutcome(p));
            }
            Ok((p, QuantumState::Pure(PureState::normalized(part.n_a(), v)?)))
        }
        QuantumState::Mixed(rho) => {
            let m = project_mixed_raw(rho, part, &kets);
            let p = m.trace().re;
            if p < ZERO_PROB {
                return Err(Error::ZeroProbabilityOutcome(p));
            }
            Ok((
                p,
                QuantumState::Mixed(DensityState {
                    n: part.n_a(),
                    mat: m / c(p, 0.0),
                }),
            ))
        }
    }
}

/// Reduced density matrix on `keep` (in the order given).
pub fn reduced_density(psi: &PureState, keep: &[usize]) -> DMatrix<C64> {
    let part =
        Bipartition::complement(psi.n, keep).expect("keep must be distinct qubits of the state");
    let v = psi.permuted(&part.order());
    let rows = 1usize << keep.len();
    let cols = psi.dim() / rows;
    // Row-major (keep, rest) reshape equals the column-major (rest, keep)
    // matrix, so rho = M^T conj(M).
    let m = DMatrix::from_column_slice(cols, rows, &v.amps);
    m.transpose() * m.map(|z| z.conj())
}

/// Squared Schmidt coefficients across `cut`, descending, with
/// `2^min(|a|,|b|)` entries.
pub fn schmidt_spectrum(psi: &PureState, cut: &Bipartition) -> Vec<f64> {
    let keep = if cut.a.len() <= cut.b.len() {
        &cut.a
    } else {
        &cut.b
    };
    let rho = reduced_density(psi, keep);
    let mut ev: Vec<f64> = linalg::hermitian_eigenvalues(&rho)
        .into_iter()
        .map(|x| x.clamp(0.0, 1.0))
        .collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Von Neumann entropy of either side of `cut`, in bits.
pub fn entanglement_entropy(psi: &PureState, cut: &Bipartition) -> f64 {
    schmidt_spectrum(psi, cut)
        .into_iter()
        .filter(|&l| l >= ZERO_PROB)
        .map(|l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}

/// `tr(rho_keep^2)`.
pub fn reduced_purity(psi: &PureState, keep: &[usize]) -> f64 {
    let rest: Vec<usize> = (0..psi.n).filter(|q| !keep.contains(q)).collect();
    let small = if keep.len() <= rest.len() {
        keep
    } else {
        &rest[..]
    };
    reduced_density(psi, small)
        .iter()
        .map(|z| z.norm_sqr())
        .sum()
}

/// `<psi| state |psi>`.
pub fn state_fidelity(psi: &PureState, state: &QuantumState) -> Result<f64> {
    if psi.n != state.n() {
        return Err(Error::SizeMismatch(format!(
            "{} vs {} qubits",
            psi.n,
            state.n()
        )));
    }
    let f = match state {
        QuantumState::Pure(phi) => psi.inner(phi).norm_sqr(),
        QuantumState::Mixed(rho) => {
            let v = nalgebra::DVector::from_column_slice(&psi.amps);
            (v.adjoint() * &rho.mat * &v)[(0, 0)].re
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// In-place application of a `2^k x 2^k` gate on `targets` (no checks).
pub(crate) fn apply_gate_in_place(
    amps: &mut [C64],
    n: usize,
    gate: &DMatrix<C64>,
    targets: &[usize],
) {
    let k = targets.len();
    if k == 1 {
        let g = [gate[(0, 0)], gate[(0, 1)], gate[(1, 0)], gate[(1, 1)]];
        apply_1q(amps, n, targets[0], &g);
        return;
    }
    let masks: Vec<usize> = targets.iter().map(|&q| bit_of(n, q)).collect();
    let all: usize = masks.iter().sum();
    let sub = 1usize << k;
    let offsets: Vec<usize> = (0..sub)
        .map(|s| {
            (0..k)
                .filter(|&j| s & (1 << (k - 1 - j)) != 0)
                .map(|j| masks[j])
                .sum()
        })
        .collect();
    let mut buf = vec![C64::default(); sub];
    for base in 0..amps.len() {
        if base & all != 0 {
            continue;
        }
        for (s, off) in offsets.iter().enumerate() {
            buf[s] = amps[base + off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let mut acc = C64::default();
            for (s, b) in buf.iter().enumerate() {
                acc += gate[(r, s)] * b;
            }
            amps[base + off] = acc;
        }
    }
}

/// `g` in row-major order.
pub(crate) fn apply_1q(amps: &mut [C64], n: usize, q: usize, g: &[C64; 4]) {
    let m = bit_of(n, q);
    for i in 0..amps.len() {
        if i & m == 0 {
            let (a0, a1) = (amps[i], amps[i | m]);
            amps[i] = g[0] * a0 + g[1] * a1;
            amps[i | m] = g[2] * a0 + g[3] * a1;
        }
    }
}

fn check_gate(gate: &DMatrix<C64>, targets: &[usize], n: usize) -> Result<()> {
    let dim = 1usize << targets.len();
    if gate.nrows() != dim || gate.ncols() != dim {
        return Err(Error::SizeMismatch(format!(
            "{}x{} gate on {} targets",
            gate.nrows(),
            gate.ncols(),
            targets.len()
        )));
    }
    for (i, &q) in targets.iter().enumerate() {
        if q >= n || targets[..i].contains(&q) {
            return Err(Error::InvalidArgument(format!(
                "bad target list {targets:?}"
            )));
        }
    }
    let dev = linalg::unitarity_defect(gate);
    if dev > NORM_TOL {
        return Err(Error::NonUnitaryGate(dev));
    }
    Ok(())
}

/// Applies `gate` to `targets` (first target is the most significant gate
/// index bit). Mixed states evolve as `U rho U^dagger`.
pub fn apply_unitary(
    state: &QuantumState,
    gate: &DMatrix<C64>,
    targets: &[usize],
) -> Result<QuantumState> {
    let n = state.n();
    check_gate(gate, targets, n)?;
    Ok(match state {
        QuantumState::Pure(psi) => {
            let mut amps = psi.amps.clone();
            apply_gate_in_place(&mut amps, n, gate, targets);
            QuantumState::Pure(PureState { n, amps })
        }
        QuantumState::Mixed(rho) => {
            let mut data = rho.mat.as_slice().to_vec();
            // Column qubits occupy 0..n (take conj(U)), rows n..2n (take U).
            let shifted: Vec<usize> = targets.iter().map(|q| q + n).collect();
            apply_gate_in_place(&mut data, 2 * n, gate, &shifted);
            apply_gate_in_place(&mut data, 2 * n, &gate.map(|z| z.conj()), targets);
            let dim = 1 << n;
            QuantumState::Mixed(DensityState {
                n,
                mat: DMatrix::from_vec(dim, dim, data),
            })
        }
    })
}

pub fn apply_unitary_pure(
    psi: &PureState,
    gate: &DMatrix<C64>,
    targets: &[usize],
) -> Result<PureState> {
    check_gate(gate, targets, psi.n)?;
    let mut amps = psi.amps.clone();
    apply_gate_in_place(&mut amps, psi.n, gate, targets);
    Ok(PureState { n: psi.n, amps })
}

/// Measures one qubit in `basis`; returns the outcome digit and the
/// normalized post-measurement state.
pub fn measure_qubit<R: Rng + ?Sized>(
    psi: &PureState,
    qubit: usize,
    basis: Pauli,
    rng: &mut R,
) -> (u8, PureState) {
    let (d, _, post) = measure_qubit_with_prob(psi, qubit, basis, rng);
    (d, post)
}

/// As [`measure_qubit`], also returning the Born probability of the outcome.
pub fn measure_qubit_with_prob<R: Rng + ?Sized>(
    psi: &PureState,
    qubit: usize,
    basis: Pauli,
    rng: &mut R,
) -> (u8, f64, PureState) {
    let n = psi.n;
    let mut p = [0.0f64; 2];
    let mut parts = [Vec::new(), Vec::new()];
    for bit in 0..2u8 {
        let ket = outcome_ket(basis.outcome(bit));
        let v = contract_qubit(&psi.amps, n, qubit, [ket[0].conj(), ket[1].conj()]);
        p[bit as usize] = linalg::norm_sqr(&v);
        parts[bit as usize] = v;
    }
    let bit = if rng.random::<f64>() * (p[0] + p[1]) < p[0] {
        0u8
    } else {
        1u8
    };
    let ket = outcome_ket(basis.outcome(bit));
    let scale = 1.0 / p[bit as usize].sqrt();
    // Re-insert the measured qubit in its eigenstate.
    let low = 1usize << (n - 1 - qubit);
    let rest = &parts[bit as usize];
    let mut amps = vec![C64::default(); psi.dim()];
    for (i, a) in amps.iter_mut().enumerate() {
        let b = (i / low) & 1;
        let r = (i / (2 * low)) * low + (i % low);
        *a = ket[b] * rest[r] * scale;
    }
    (basis.outcome(bit), p[bit as usize], PureState { n, amps })
}

/// Standard single-qubit and two-qubit gates.
pub mod gates {
    use super::c;
    use nalgebra::DMatrix;
    use num_complex::Complex64 as C64;

    pub fn from_rows(dim: usize, rows: &[C64]) -> DMatrix<C64> {
        DMatrix::from_row_slice(dim, dim, rows)
    }

    pub fn x() -> DMatrix<C64> {
        from_rows(2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn y() -> DMatrix<C64> {
        from_rows(2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn z() -> DMatrix<C64> {
        from_rows(2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    pub fn h() -> DMatrix<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        from_rows(2, &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)])
    }

    pub fn s() -> DMatrix<C64> {
        from_rows(2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.)])
    }

    pub fn sdg() -> DMatrix<C64> {
        from_rows(2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., -1.)])
    }

    /// `exp(-i alpha Z / 2)`.
    pub fn rz(alpha: f64) -> DMatrix<C64> {
        let h = alpha / 2.0;
        from_rows(
            2,
            &[
                C64::from_polar(1.0, -h),
                c(0., 0.),
                c(0., 0.),
                C64::from_polar(1.0, h),
            ],
        )
    }

    pub fn cx() -> DMatrix<C64> {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = c(1., 0.);
        m[(1, 1)] = c(1., 0.);
        m[(2, 3)] = c(1., 0.);
        m[(3, 2)] = c(1., 0.);
        m
    }

    pub fn cz() -> DMatrix<C64> {
        let mut m = DMatrix::identity(4, 4);
        m[(3, 3)] = c(-1., 0.);
        m
    }

    pub fn swap() -> DMatrix<C64> {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = c(1., 0.);
        m[(1, 2)] = c(1., 0.);
        m[(2, 1)] = c(1., 0.);
        m[(3, 3)] = c(1., 0.);
        m
    }
}

/// Common named states.
pub mod states {
    use super::*;

    pub fn bell() -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::from_raw(2, vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)])
    }

    pub fn ghz(n: usize) -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![C64::default(); 1 << n];
        amps[0] = c(s, 0.);
        amps[(1 << n) - 1] = c(s, 0.);
        PureState::from_raw(n, amps)
    }

    pub fn plus(n: usize) -> PureState {
        let a = (1.0 / (1u64 << n) as f64).sqrt();
        PureState::from_raw(n, vec![c(a, 0.); 1 << n])
    }

    /// Open-boundary 1D cluster state `prod CZ_{i,i+1} |+>^n`.
    pub fn cluster_1d(n: usize) -> PureState {
        let mut psi = plus(n);
        for i in 0..n.saturating_sub(1) {
            let (mi, mj) = (bit_of(n, i), bit_of(n, i + 1));
            for (k, a) in psi.amps.iter_mut().enumerate() {
                if k & mi != 0 && k & mj != 0 {
                    *a = -*a;
                }
            }
        }
        psi
    }

    /// `R_Z(alpha)|+>`; the T-state at `alpha = pi/4`.
    pub fn rz_plus(alpha: f64) -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = alpha / 2.0;
        PureState::from_raw(1, vec![C64::from_polar(s, -h), C64::from_polar(s, h)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::SeedableRng;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn skewed() -> PureState {
        PureState::new(
            2,
            vec![
                c(0.8f64.sqrt(), 0.),
                c(0., 0.),
                c(0., 0.),
                c(0.2f64.sqrt(), 0.),
            ],
        )
        .unwrap()
    }

    fn zero_one() -> PureState {
        PureState::basis(2, 0b01)
    }

    #[test]
    fn projected_state_examples() {
        let bell: QuantumState = states::bell().into();
        let part = Bipartition::complement(2, &[0]).unwrap();
        let (p, st) = projected_state(&bell, &part, &[0]).unwrap();
        assert!(approx(p, 0.5, 1e-12));
        assert!(approx(
            st.as_pure().unwrap().amplitudes()[0].norm(),
            1.0,
            1e-12
        ));

        let plus0 = PureState::product(&[outcome_ket(2), outcome_ket(0)]).unwrap();
        let (p, st) = projected_state(&plus0.clone().into(), &part, &[0]).unwrap();
        assert!(approx(p, 1.0, 1e-12));
        assert!(approx(
            st.as_pure().unwrap().inner(&states::plus(1)).norm(),
            1.0,
            1e-12
        ));

        let ghz: QuantumState = states::ghz(3).into();
        let part = Bipartition::complement(3, &[0]).unwrap();
        assert!(matches!(
            projected_state(&ghz, &part, &[0, 1]),
            Err(Error::ZeroProbabilityOutcome(_))
        ));
    }

    #[test]
    fn mixed_projection_matches_pure() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let psi = crate::models::haar_state(4, &mut rng);
        let part = Bipartition::new(4, vec![2, 0], vec![1, 3]).unwrap();
        let out = Outcome(vec![3, 4]);
        let (p1, s1) = projected_state_local(&psi.clone().into(), &part, &out).unwrap();
        let (p2, s2) = projected_state_local(&psi.to_density().into(), &part, &out).unwrap();
        assert!(approx(p1, p2, 1e-12));
        let d1 = s1.to_density();
        assert!((d1.matrix() - s2.as_mixed().unwrap().matrix()).norm() < 1e-12);
    }

    #[test]
    fn schmidt_examples() {
        let cut = Bipartition::complement(2, &[0]).unwrap();
        let s = schmidt_spectrum(&states::bell(), &cut);
        assert!(approx(s[0], 0.5, 1e-12) && approx(s[1], 0.5, 1e-12));
        let s = schmidt_spectrum(&zero_one(), &cut);
        assert!(approx(s[0], 1.0, 1e-12) && approx(s[1], 0.0, 1e-12));
        let s = schmidt_spectrum(&skewed(), &cut);
        assert!(approx(s[0], 0.8, 1e-12) && approx(s[1], 0.2, 1e-12));
    }

    #[test]
    fn entropy_examples() {
        let cut = Bipartition::complement(2, &[0]).unwrap();
        assert!(approx(
            entanglement_entropy(&states::bell(), &cut),
            1.0,
            1e-12
        ));
        assert!(approx(entanglement_entropy(&zero_one(), &cut), 0.0, 1e-12));
        let h = -(0.8f64 * 0.8f64.log2() + 0.2 * 0.2f64.log2());
        assert!(approx(entanglement_entropy(&skewed(), &cut), h, 1e-12));
        assert!(approx(h, 0.721928, 1e-6));
    }

    #[test]
    fn purity_examples() {
        assert!(approx(reduced_purity(&states::bell(), &[0]), 0.5, 1e-12));
        assert!(approx(reduced_purity(&zero_one(), &[0]), 1.0, 1e-12));
        assert!(approx(reduced_purity(&skewed(), &[0]), 0.68, 1e-12));
    }

    #[test]
    fn fidelity_examples() {
        let z = PureState::zero(1);
        let o = PureState::basis(1, 1);
        assert!(approx(
            state_fidelity(&z, &z.clone().into()).unwrap(),
            1.0,
            1e-12
        ));
        assert!(approx(state_fidelity(&z, &o.into()).unwrap(), 0.0, 1e-12));
        let mixed = DensityState::maximally_mixed(1);
        assert!(approx(
            state_fidelity(&z, &mixed.into()).unwrap(),
            0.5,
            1e-12
        ));
    }

    #[test]
    fn unitary_examples() {
        let z: QuantumState = PureState::zero(1).into();
        let x = apply_unitary(&z, &gates::x(), &[0]).unwrap();
        assert_eq!(x.as_pure().unwrap(), &PureState::basis(1, 1));
        let id = apply_unitary(&z, &DMatrix::identity(2, 2), &[0]).unwrap();
        assert_eq!(id, z);
        let p = apply_unitary(&z, &gates::h(), &[0]).unwrap();
        assert!(approx(
            p.as_pure().unwrap().inner(&states::plus(1)).norm(),
            1.0,
            1e-12
        ));
        let bad = gates::x() * c(2.0, 0.0);
        assert!(matches!(
            apply_unitary(&z, &bad, &[0]),
            Err(Error::NonUnitaryGate(_))
        ));
    }

    #[test]
    fn cx_ordering_is_big_endian() {
        // |10> with control 0, target 1 -> |11>.
        let psi = PureState::basis(2, 0b10);
        let out = apply_unitary_pure(&psi, &gates::cx(), &[0, 1]).unwrap();
        assert_eq!(out, PureState::basis(2, 0b11));
        let out = apply_unitary_pure(&psi, &gates::cx(), &[1, 0]).unwrap();
        assert_eq!(out, PureState::basis(2, 0b10));
    }

    #[test]
    fn mixed_evolution_matches_pure() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let psi = crate::models::haar_state(3, &mut rng);
        let u = crate::models::haar_unitary(4, &mut rng);
        let a = apply_unitary(&psi.clone().into(), &u, &[2, 0])
            .unwrap()
            .to_density();
        let b = apply_unitary(&psi.to_density().into(), &u, &[2, 0])
            .unwrap()
            .to_density();
        assert!((a.matrix() - b.matrix()).norm() < 1e-12);
    }

    #[test]
    fn measure_examples() {
        let mut rng = stream(1, 0);
        let (d, post) = measure_qubit(&PureState::zero(1), 0, Pauli::Z, &mut rng);
        assert_eq!(d, 0);
        assert_eq!(post, PureState::zero(1));
        let (d, _) = measure_qubit(&states::plus(1), 0, Pauli::X, &mut rng);
        assert_eq!(d, 2);
        let mut plus = 0;
        let draws = 10_000;
        for _ in 0..draws {
            if measure_qubit(&PureState::zero(1), 0, Pauli::X, &mut rng).0 == 2 {
                plus += 1;
            }
        }
        let se = (0.25f64 / draws as f64).sqrt();
        assert!(approx(plus as f64 / draws as f64, 0.5, 4.0 * se));
    }

    #[test]
    fn measure_born_frequencies() {
        let mut rng = stream(7, 0);
        let psi = crate::models::haar_state(3, &mut rng);
        for basis in Pauli::ALL {
            let ket = outcome_ket(basis.outcome(0));
            let v = contract_qubit(psi.amplitudes(), 3, 1, [ket[0].conj(), ket[1].conj()]);
            let p0 = linalg::norm_sqr(&v);
            let draws = 100_000;
            let hits = (0..draws)
                .filter(|_| measure_qubit(&psi, 1, basis, &mut rng).0 == basis.outcome(0))
                .count();
            let se = (p0 * (1.0 - p0) / draws as f64).sqrt();
            assert!(
                approx(hits as f64 / draws as f64, p0, 4.0 * se),
                "{basis:?}"
            );
        }
    }

    #[test]
    fn post_measurement_state_is_eigenstate() {
        let mut rng = stream(9, 0);
        let psi = crate::models::haar_state(3, &mut rng);
        let (d, post) = measure_qubit(&psi, 2, Pauli::Y, &mut rng);
        let part = Bipartition::complement(3, &[0, 1]).unwrap();
        let (p, _) = projected_state_local(&post.into(), &part, &Outcome(vec![d])).unwrap();
        assert!(approx(p, 1.0, 1e-12));
    }

    #[test]
    fn outcome_labels_round_trip() {
        let o = Outcome(vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(o.to_string(), "01+-+i-i");
        assert_eq!(Outcome::parse("01+-+i-i").unwrap(), o);
        assert_eq!(Outcome::from_index(0b101, 3), Outcome(vec![1, 0, 1]));
    }

    #[test]
    fn partition_validation() {
        assert!(Bipartition::new(3, vec![0], vec![1]).is_err());
        assert!(Bipartition::new(3, vec![0, 1], vec![1, 2]).is_err());
        assert!(Bipartition::new(3, vec![2], vec![0, 1]).is_ok());
    }

    #[test]
    fn length_and_norm_checked() {
        assert!(PureState::new(2, vec![c(1.0, 0.0); 3]).is_err());
        assert!(PureState::new(1, vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }
}
