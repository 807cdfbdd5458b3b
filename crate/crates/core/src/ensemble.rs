//! Projected ensembles and localizable quantumness.
//!
//! Measuring `B` of a pure state in a local Pauli basis leaves a pure state
//! on `A` for every outcome. [`ProjectionTable`] computes all of them at once
//! with a per-qubit transform, which is what the exact metrics, the protocol
//! sampler and the spectral observables are built on.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeset::FidelityOracle;
use crate::linalg;
use crate::qstate::{
    self, outcome_ket, Bipartition, DensityState, Outcome, Pauli, PureState, QuantumState,
};
use crate::rng;
use crate::ZERO_PROB;

/// Largest `|B|` for which all `3^|B|` basis strings are enumerated.
pub const MAX_RANDOM_EXACT_B: usize = 8;
/// Largest `|B|` for single-basis enumeration.
pub const MAX_FIXED_EXACT_B: usize = 24;

/// How `B` is measured.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisAssignment {
    /// Computational basis on every qubit of `B`.
    FixedZ,
    /// One explicit basis per qubit of `B`.
    Fixed(Vec<Pauli>),
    /// Each qubit's basis drawn uniformly from `{X, Y, Z}`.
    Random,
}

impl BasisAssignment {
    fn fixed_bases(&self, n_b: usize) -> Result<Option<Vec<Pauli>>> {
        match self {
            BasisAssignment::FixedZ => Ok(Some(vec![Pauli::Z; n_b])),
            BasisAssignment::Fixed(b) if b.len() == n_b => Ok(Some(b.clone())),
            BasisAssignment::Fixed(b) => Err(Error::LengthMismatch {
                expected: n_b,
                got: b.len(),
            }),
            BasisAssignment::Random => Ok(None),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, BasisAssignment::Random)
    }
}

/// Uniformly random basis, as a code matching the outcome digits
/// (`Z = 0, X = 1, Y = 2`).
pub(crate) fn random_basis<R: Rng + ?Sized>(rng: &mut R) -> Pauli {
    Pauli::of_outcome(2 * rng.random_range(0..3u8))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMode {
    ExactEnumeration,
    MonteCarloSample,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleEntry {
    pub p: f64,
    pub label: Outcome,
    pub state: PureState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedEnsemble {
    pub partition: Bipartition,
    pub mode: EnsembleMode,
    pub entries: Vec<EnsembleEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryJson {
    p: f64,
    label: Outcome,
    amplitudes: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleJson {
    partition: Bipartition,
    mode: EnsembleMode,
    entries: Vec<EntryJson>,
}

impl ProjectedEnsemble {
    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.p).sum()
    }

    pub fn to_json(&self) -> String {
        let entries = self
            .entries
            .iter()
            .map(|e| EntryJson {
                p: e.p,
                label: e.label.clone(),
                amplitudes: e.state.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
            })
            .collect();
        serde_json::to_string(&EnsembleJson {
            partition: self.partition.clone(),
            mode: self.mode,
            entries,
        })
        .unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: EnsembleJson = serde_json::from_str(text)?;
        let n_a = raw.partition.n_a();
        let entries = raw
            .entries
            .into_iter()
            .map(|e| {
                let amps = e
                    .amplitudes
                    .into_iter()
                    .map(|[re, im]| C64::new(re, im))
                    .collect();
                Ok(EnsembleEntry {
                    p: e.p,
                    label: e.label,
                    state: PureState::new(n_a, amps)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProjectedEnsemble {
            partition: raw.partition,
            mode: raw.mode,
            entries,
        })
    }
}

/// Applies `rows[j]` (an `out x in_radix` matrix) to tensor axis `j`, for
/// every leading axis of `data`, leaving a trailing block of `inner` entries.
pub(crate) fn expand_axes(
    data: Vec<C64>,
    in_radix: usize,
    rows: &[Vec<Vec<C64>>],
    inner: usize,
) -> Vec<C64> {
    let axes = rows.len();
    let mut cur = data;
    let mut outer = 1usize;
    for (j, map) in rows.iter().enumerate() {
        let out_radix = map.len();
        let rest = in_radix.pow((axes - j - 1) as u32) * inner;
        let mut next = vec![C64::default(); outer * out_radix * rest];
        for o in 0..outer {
            let src = &cur[o * in_radix * rest..(o + 1) * in_radix * rest];
            for (d, row) in map.iter().enumerate() {
                let start = (o * out_radix + d) * rest;
                let dst = &mut next[start..start + rest];
                for (b, &cb) in row.iter().enumerate() {
                    if cb == C64::default() {
                        continue;
                    }
                    for (x, y) in dst.iter_mut().zip(&src[b * rest..(b + 1) * rest]) {
                        *x += cb * y;
                    }
                }
            }
        }
        outer *= out_radix;
        cur = next;
    }
    cur
}

#[derive(Clone, Debug, PartialEq)]
enum Alphabet {
    All,
    Fixed(Vec<Pauli>),
}

impl Alphabet {
    fn radix(&self) -> usize {
        match self {
            Alphabet::All => 6,
            Alphabet::Fixed(_) => 2,
        }
    }

    fn digits_for(&self, j: usize) -> Vec<u8> {
        match self {
            Alphabet::All => (0..6).collect(),
            Alphabet::Fixed(b) => vec![b[j].outcome(0), b[j].outcome(1)],
        }
    }

    fn of(basis: &BasisAssignment, n_b: usize) -> Result<Self> {
        match basis.fixed_bases(n_b)? {
            Some(b) => {
                if n_b > MAX_FIXED_EXACT_B {
                    return Err(Error::TooLargeToEnumerate(format!("2^{n_b} outcomes on B")));
                }
                Ok(Alphabet::Fixed(b))
            }
            None => {
                if n_b > MAX_RANDOM_EXACT_B {
                    return Err(Error::TooLargeToEnumerate(format!(
                        "6^{n_b} random-basis outcomes (limit |B| <= {MAX_RANDOM_EXACT_B})"
                    )));
                }
                Ok(Alphabet::All)
            }
        }
    }
}

/// Unnormalized projections `(<x|_B ⊗ I_A)|psi>` for every outcome `x` of a
/// basis assignment, with `A` in `part.a` order.
///
/// In random mode the table covers all `6^|B|` outcome strings and
/// [`probability`](Self::probability) is conditioned on the basis string;
/// multiply by [`basis_weight`](Self::basis_weight) for the ensemble weight.
#[derive(Clone, Debug)]
pub struct ProjectionTable {
    n_a: usize,
    n_b: usize,
    alphabet: Alphabet,
    raw: Vec<C64>,
    probs: Vec<f64>,
}

impl ProjectionTable {
    pub fn new(psi: &PureState, part: &Bipartition, basis: &BasisAssignment) -> Result<Self> {
        if part.n() != psi.n() {
            return Err(Error::SizeMismatch(format!(
                "partition on {} qubits, state on {}",
                part.n(),
                psi.n()
            )));
        }
        let alphabet = Alphabet::of(basis, part.n_b())?;
        let order: Vec<usize> = part.b.iter().chain(&part.a).copied().collect();
        let data = psi.permuted(&order).into_amplitudes();
        let rows: Vec<Vec<Vec<C64>>> = (0..part.n_b())
            .map(|j| {
                alphabet
                    .digits_for(j)
                    .into_iter()
                    .map(|d| outcome_ket(d).iter().map(|z| z.conj()).collect())
                    .collect()
            })
            .collect();
        let d_a = 1usize << part.n_a();
        let raw = expand_axes(data, 2, &rows, d_a);
        let probs = raw.chunks(d_a).map(linalg::norm_sqr).collect();
        Ok(ProjectionTable {
            n_a: part.n_a(),
            n_b: part.n_b(),
            alphabet,
            raw,
            probs,
        })
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_random(&self) -> bool {
        self.alphabet == Alphabet::All
    }

    /// `3^-|B|` in random mode, 1 otherwise.
    pub fn basis_weight(&self) -> f64 {
        match self.alphabet {
            Alphabet::All => 3f64.powi(-(self.n_b as i32)),
            Alphabet::Fixed(_) => 1.0,
        }
    }

    pub fn outcome(&self, x: usize) -> Outcome {
        let r = self.alphabet.radix();
        let mut digits = vec![0u8; self.n_b];
        let mut rem = x;
        for j in (0..self.n_b).rev() {
            let local = rem % r;
            rem /= r;
            digits[j] = match &self.alphabet {
                Alphabet::All => local as u8,
                Alphabet::Fixed(b) => b[j].outcome(local as u8),
            };
        }
        Outcome(digits)
    }

    /// Table index of an outcome string, if the alphabet contains it.
    pub fn index_of(&self, digits: &[u8]) -> Option<usize> {
        if digits.len() != self.n_b {
            return None;
        }
        let r = self.alphabet.radix();
        let mut x = 0usize;
        for (j, &d) in digits.iter().enumerate() {
            let local = match &self.alphabet {
                Alphabet::All => d as usize,
                Alphabet::Fixed(b) => {
                    if Pauli::of_outcome(d) != b[j] {
                        return None;
                    }
                    (d % 2) as usize
                }
            };
            x = x * r + local;
        }
        Some(x)
    }

    /// Born probability of `x` given its basis string.
    pub fn probability(&self, x: usize) -> f64 {
        self.probs[x]
    }

    pub fn raw(&self, x: usize) -> &[C64] {
        let d_a = 1usize << self.n_a;
        &self.raw[x * d_a..(x + 1) * d_a]
    }

    /// Normalized projected state, or `None` below the probability cutoff.
    pub fn state(&self, x: usize) -> Option<PureState> {
        let p = self.probs[x];
        if p < ZERO_PROB {
            return None;
        }
        let s = 1.0 / p.sqrt();
        Some(PureState::from_raw(
            self.n_a,
            self.raw(x).iter().map(|a| a * s).collect(),
        ))
    }

    /// Indices with nonzero probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&x| self.probs[x] >= ZERO_PROB)
    }
}

/// Unnormalized projections `(<x| ⊗ I) rho (|x> ⊗ I)` for every outcome, as
/// [`ProjectionTable`] does for pure states.
#[derive(Clone, Debug)]
pub struct MixedProjectionTable {
    n_a: usize,
    n_b: usize,
    alphabet: Alphabet,
    raw: Vec<C64>,
    probs: Vec<f64>,
}

impl MixedProjectionTable {
    pub fn new(rho: &DensityState, part: &Bipartition, basis: &BasisAssignment) -> Result<Self> {
        if part.n() != rho.n() {
            return Err(Error::SizeMismatch(format!(
                "partition on {} qubits, state on {}",
                part.n(),
                rho.n()
            )));
        }
        let alphabet = Alphabet::of(basis, part.n_b())?;
        let (n_a, n_b) = (part.n_a(), part.n_b());
        let order: Vec<usize> = part.b.iter().chain(&part.a).copied().collect();
        let m = rho.permuted(&order);
        let m = m.matrix();
        let d_a = 1usize << n_a;
        let dim = m.nrows();
        // Layout: one radix-4 axis per B qubit (row bit, column bit), then
        // the A block row-major.
        let mut data = vec![C64::default(); dim * dim];
        for c in 0..dim {
            for r in 0..dim {
                let (rb, ra) = (r / d_a, r % d_a);
                let (cb, ca) = (c / d_a, c % d_a);
                let mut pairs = 0usize;
                for j in 0..n_b {
                    let shift = n_b - 1 - j;
                    pairs = pairs * 4 + ((rb >> shift) & 1) * 2 + ((cb >> shift) & 1);
                }
                data[(pairs * d_a + ra) * d_a + ca] = m[(r, c)];
            }
        }
        let rows: Vec<Vec<Vec<C64>>> = (0..n_b)
            .map(|j| {
                alphabet
                    .digits_for(j)
                    .into_iter()
                    .map(|d| {
                        let e = outcome_ket(d);
                        (0..4).map(|k| e[k / 2].conj() * e[k % 2]).collect()
                    })
                    .collect()
            })
            .collect();
        let raw = expand_axes(data, 4, &rows, d_a * d_a);
        let probs = raw
            .chunks(d_a * d_a)
            .map(|blk| (0..d_a).map(|i| blk[i * d_a + i].re).sum())
            .collect();
        Ok(MixedProjectionTable {
            n_a,
            n_b,
            alphabet,
            raw,
            probs,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn probability(&self, x: usize) -> f64 {
        self.probs[x]
    }

    /// Unnormalized `rho_x` (trace `p(x)`).
    pub fn raw_matrix(&self, x: usize) -> DMatrix<C64> {
        let d_a = 1usize << self.n_a;
        DMatrix::from_row_slice(d_a, d_a, &self.raw[x * d_a * d_a..(x + 1) * d_a * d_a])
    }

    /// `<phi| rho_x |phi>` without normalization.
    pub fn raw_overlap(&self, x: usize, phi: &[C64]) -> f64 {
        let d_a = 1usize << self.n_a;
        let blk = &self.raw[x * d_a * d_a..(x + 1) * d_a * d_a];
        let mut acc = C64::default();
        for i in 0..d_a {
            for j in 0..d_a {
                acc += phi[i].conj() * blk[i * d_a + j] * phi[j];
            }
        }
        acc.re
    }

    fn same_alphabet(&self, t: &ProjectionTable) -> bool {
        self.alphabet == t.alphabet && self.n_b == t.n_b && self.n_a == t.n_a
    }
}

/// Born probabilities of every local outcome string on all `n` qubits,
/// indexed base 6 (qubit 0 most significant).
pub fn local_outcome_probabilities(state: &QuantumState) -> Result<Vec<f64>> {
    let n = state.n();
    let part = Bipartition::new(n, vec![], (0..n).collect())?;
    Ok(match state {
        QuantumState::Pure(psi) => {
            ProjectionTable::new(psi, &part, &BasisAssignment::Random)?.probs
        }
        QuantumState::Mixed(rho) => {
            MixedProjectionTable::new(rho, &part, &BasisAssignment::Random)?.probs
        }
    })
}

/// Exact projected ensemble. A random basis assignment aggregates all basis
/// strings with weight `3^-|B|`; a fixed one is conditioned on its basis.
pub fn enumerate_ensemble(
    psi: &PureState,
    part: &Bipartition,
    basis: &BasisAssignment,
) -> Result<ProjectedEnsemble> {
    let table = ProjectionTable::new(psi, part, basis)?;
    let w = table.basis_weight();
    let entries = table
        .support()
        .map(|x| EnsembleEntry {
            p: w * table.probability(x),
            label: table.outcome(x),
            state: table.state(x).unwrap(),
        })
        .collect();
    Ok(ProjectedEnsemble {
        partition: part.clone(),
        mode: EnsembleMode::ExactEnumeration,
        entries,
    })
}

/// Measures `qubits` one after another in `bases`, returning the digits,
/// the unnormalized remainder on the other qubits (ascending) and its
/// squared norm.
pub(crate) fn measure_sequence_pure<R: Rng + ?Sized>(
    amps: &[C64],
    n: usize,
    qubits: &[usize],
    bases: &[Pauli],
    rng: &mut R,
) -> (Vec<u8>, Vec<C64>, f64) {
    let mut alive: Vec<usize> = (0..n).collect();
    let mut cur = amps.to_vec();
    let mut digits = Vec::with_capacity(qubits.len());
    for (&q, &basis) in qubits.iter().zip(bases) {
        let pos = alive
            .iter()
            .position(|&a| a == q)
            .expect("qubit measured twice");
        let m = alive.len();
        let mut parts: [Vec<C64>; 2] = Default::default();
        let mut p = [0.0; 2];
        for bit in 0..2u8 {
            let k = outcome_ket(basis.outcome(bit));
            parts[bit as usize] = qstate::contract_qubit(&cur, m, pos, [k[0].conj(), k[1].conj()]);
            p[bit as usize] = linalg::norm_sqr(&parts[bit as usize]);
        }
        let bit = usize::from(rng.random::<f64>() * (p[0] + p[1]) >= p[0]);
        digits.push(basis.outcome(bit as u8));
        cur = std::mem::take(&mut parts[bit]);
        alive.remove(pos);
    }
    let norm = linalg::norm_sqr(&cur);
    (digits, cur, norm)
}

fn trace_col_major(v: &[C64], dim: usize) -> f64 {
    (0..dim).map(|i| v[i * dim + i].re).sum()
}

/// Density-matrix analogue of [`measure_sequence_pure`]; the remainder is a
/// column-major matrix.
pub(crate) fn measure_sequence_mixed<R: Rng + ?Sized>(
    mat: &DMatrix<C64>,
    n: usize,
    qubits: &[usize],
    bases: &[Pauli],
    rng: &mut R,
) -> (Vec<u8>, DMatrix<C64>, f64) {
    let mut alive: Vec<usize> = (0..n).collect();
    let mut cur = mat.as_slice().to_vec();
    let mut digits = Vec::with_capacity(qubits.len());
    for (&q, &basis) in qubits.iter().zip(bases) {
        let pos = alive
            .iter()
            .position(|&a| a == q)
            .expect("qubit measured twice");
        let m = alive.len();
        let mut parts: [Vec<C64>; 2] = Default::default();
        let mut p = [0.0; 2];
        for bit in 0..2u8 {
            let k = outcome_ket(basis.outcome(bit));
            // Column qubits sit at positions 0..m, row qubits at m..2m.
            let v = qstate::contract_qubit(&cur, 2 * m, pos, k);
            let v = qstate::contract_qubit(&v, 2 * m - 1, m - 1 + pos, [k[0].conj(), k[1].conj()]);
            p[bit as usize] = trace_col_major(&v, 1 << (m - 1)).max(0.0);
            parts[bit as usize] = v;
        }
        let bit = usize::from(rng.random::<f64>() * (p[0] + p[1]) >= p[0]);
        digits.push(basis.outcome(bit as u8));
        cur = std::mem::take(&mut parts[bit]);
        alive.remove(pos);
    }
    let dim = 1usize << alive.len();
    let norm = trace_col_major(&cur, dim);
    (digits, DMatrix::from_vec(dim, dim, cur), norm)
}

fn bases_for<R: Rng + ?Sized>(
    basis: &BasisAssignment,
    n_b: usize,
    rng: &mut R,
) -> Result<Vec<Pauli>> {
    Ok(match basis.fixed_bases(n_b)? {
        Some(b) => b,
        None => (0..n_b).map(|_| random_basis(rng)).collect(),
    })
}

fn reorder_to_a(part: &Bipartition) -> Option<Vec<usize>> {
    let mut sorted = part.a.clone();
    sorted.sort_unstable();
    (sorted != part.a).then(|| {
        part.a
            .iter()
            .map(|q| sorted.iter().position(|s| s == q).unwrap())
            .collect()
    })
}

/// Draws one outcome on `B` from the Born distribution and returns its label,
/// the normalized projected state on `A` and the basis string used.
pub fn sample_projected<R: Rng + ?Sized>(
    state: &QuantumState,
    part: &Bipartition,
    basis: &BasisAssignment,
    rng: &mut R,
) -> Result<(Outcome, QuantumState, Vec<Pauli>)> {
    if part.n() != state.n() {
        return Err(Error::SizeMismatch(format!(
            "partition on {} qubits, state on {}",
            part.n(),
            state.n()
        )));
    }
    let bases = bases_for(basis, part.n_b(), rng)?;
    let n_a = part.n_a();
    let projected = match state {
        QuantumState::Pure(psi) => {
            let (digits, rest, p) =
                measure_sequence_pure(psi.amplitudes(), psi.n(), &part.b, &bases, rng);
            let s = 1.0 / p.sqrt();
            let mut phi = PureState::from_raw(n_a, rest.into_iter().map(|a| a * s).collect());
            if let Some(order) = reorder_to_a(part) {
                phi = phi.permuted(&order);
            }
            (Outcome(digits), QuantumState::Pure(phi))
        }
        QuantumState::Mixed(rho) => {
            let (digits, rest, p) =
                measure_sequence_mixed(rho.matrix(), rho.n(), &part.b, &bases, rng);
            let mut r = DensityState::from_raw(n_a, rest / C64::new(p, 0.0));
            if let Some(order) = reorder_to_a(part) {
                r = r.permuted(&order);
            }
            (Outcome(digits), QuantumState::Mixed(r))
        }
    };
    Ok((projected.0, projected.1, bases))
}

/// How [`localizable_quantumness`] evaluates the ensemble average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LqMethod {
    /// Exact when enumerable, otherwise Monte Carlo with the given budget.
    Auto {
        budget: usize,
        seed: u64,
    },
    Exact,
    MonteCarlo {
        budget: usize,
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqEstimate {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
    /// Projected states evaluated (outcomes for exact, draws for Monte Carlo).
    pub samples: usize,
}

/// Per-outcome oracle values over a table's support, evaluated in parallel
/// and returned in index order.
pub fn table_fidelities(
    table: &ProjectionTable,
    oracle: &FidelityOracle,
) -> Result<Vec<(usize, f64)>> {
    let support: Vec<usize> = table.support().collect();
    support
        .into_par_iter()
        .map(|x| Ok((x, oracle.fidelity(&table.state(x).unwrap())?)))
        .collect()
}

/// `sum_x w p(x) [1 - Fid(psi_x)]` over the outcomes of `basis`.
pub fn localizable_quantumness(
    psi: &PureState,
    part: &Bipartition,
    oracle: &FidelityOracle,
    basis: &BasisAssignment,
    method: LqMethod,
) -> Result<LqEstimate> {
    let enumerable = match basis {
        BasisAssignment::Random => part.n_b() <= MAX_RANDOM_EXACT_B,
        _ => part.n_b() <= MAX_FIXED_EXACT_B,
    };
    let (budget, seed) = match method {
        LqMethod::Exact => return exact_lq(psi, part, oracle, basis),
        LqMethod::Auto { .. } if enumerable => return exact_lq(psi, part, oracle, basis),
        LqMethod::Auto { budget, seed } | LqMethod::MonteCarlo { budget, seed } => (budget, seed),
    };
    if budget < 2 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo budget {budget} must be at least 2"
        )));
    }
    let state = QuantumState::Pure(psi.clone());
    let values: Vec<f64> = (0..budget as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let (_, phi, _) = sample_projected(&state, part, basis, &mut r)?;
            Ok(1.0 - oracle.fidelity_of(&phi)?)
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_se(&values);
    Ok(LqEstimate {
        value: mean.clamp(0.0, 1.0),
        std_error: se,
        exact: false,
        samples: budget,
    })
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn exact_lq(
    psi: &PureState,
    part: &Bipartition,
    oracle: &FidelityOracle,
    basis: &BasisAssignment,
) -> Result<LqEstimate> {
    let table = ProjectionTable::new(psi, part, basis)?;
    let fids = table_fidelities(&table, oracle)?;
    let w = table.basis_weight();
    let value: f64 = fids
        .iter()
        .map(|&(x, f)| w * table.probability(x) * (1.0 - f))
        .sum();
    Ok(LqEstimate {
        value: value.clamp(0.0, 1.0),
        std_error: 0.0,
        exact: true,
        samples: fids.len(),
    })
}

/// Exact `eta_psi(rho) = sum_x w p_rho(x) [tr(psi_x rho_x) - Fid(psi_x)]`.
/// Outcomes where the target projection is undefined contribute nothing.
pub fn exact_conditional_fidelity(
    rho: &QuantumState,
    psi: &PureState,
    part: &Bipartition,
    oracle: &FidelityOracle,
    basis: &BasisAssignment,
) -> Result<f64> {
    if rho.n() != psi.n() {
        return Err(Error::SizeMismatch(format!(
            "rho on {} qubits, psi on {}",
            rho.n(),
            psi.n()
        )));
    }
    let target = ProjectionTable::new(psi, part, basis)?;
    let fids = table_fidelities(&target, oracle)?;
    let w = target.basis_weight();
    match rho {
        QuantumState::Pure(phi) => {
            let exp = ProjectionTable::new(phi, part, basis)?;
            Ok(fids
                .iter()
                .map(|&(x, f)| {
                    let s = 1.0 / target.probability(x).sqrt();
                    let ov = linalg::inner(target.raw(x), exp.raw(x)).norm_sqr() * s * s;
                    w * (ov - exp.probability(x) * f)
                })
                .sum())
        }
        QuantumState::Mixed(m) => {
            let exp = MixedProjectionTable::new(m, part, basis)?;
            debug_assert!(exp.same_alphabet(&target));
            Ok(fids
                .iter()
                .map(|&(x, f)| {
                    let s = 1.0 / target.probability(x);
                    w * (exp.raw_overlap(x, target.raw(x)) * s - exp.probability(x) * f)
                })
                .sum())
        }
    }
}

/// Trace norm `|| sum_j p_j (psi_j^{⊗k})(psi_j^{⊗k})^† - rho_Haar^(k) ||_1`
/// for `k` in `{1, 2}`.
pub fn design_moment_distance(ens: &ProjectedEnsemble, k: usize) -> Result<f64> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "moment order {k} (supported: 1, 2)"
        )));
    }
    let n_a = ens.partition.n_a();
    if k * n_a > 12 {
        return Err(Error::TooLargeToEnumerate(format!(
            "{k}-th moment on {n_a} qubits"
        )));
    }
    let d = 1usize << n_a;
    let dim = d.pow(k as u32);
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for e in &ens.entries {
        let a = e.state.amplitudes();
        let v: Vec<C64> = if k == 1 {
            a.to_vec()
        } else {
            a.iter()
                .flat_map(|x| a.iter().map(move |y| x * y))
                .collect()
        };
        let v = nalgebra::DVector::from_vec(v);
        m += (&v * v.adjoint()) * C64::new(e.p, 0.0);
    }
    if k == 1 {
        for i in 0..d {
            m[(i, i)] -= C64::new(1.0 / d as f64, 0.0);
        }
    } else {
        // Symmetric projector (I + SWAP)/2 normalized by d(d+1)/2.
        let norm = 1.0 / (d * (d + 1)) as f64;
        for i in 0..d {
            for j in 0..d {
                m[(i * d + j, i * d + j)] -= C64::new(norm, 0.0);
                m[(j * d + i, i * d + j)] -= C64::new(norm, 0.0);
            }
        }
    }
    Ok(linalg::trace_norm_hermitian(&m))
}
