//! Measurement simulation for protocol rounds.
//!
//! A round measures `B` (fixed or random local bases) and then every qubit
//! of `A` in a uniformly random Pauli basis. When the experimental state is
//! small enough its projection table is precomputed and each round costs a
//! binary search plus an `n_A`-qubit measurement; otherwise qubits are
//! measured one after another on the full state.

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::ensemble::{
    measure_sequence_mixed, measure_sequence_pure, random_basis, BasisAssignment,
    MixedProjectionTable, ProjectionTable, MAX_FIXED_EXACT_B, MAX_RANDOM_EXACT_B,
};
use crate::error::{Error, Result};
use crate::qstate::{self, outcome_ket, Bipartition, Pauli, PureState, QuantumState};

use super::InputState;

/// Table entries (outcomes times amplitudes) above which rounds fall back
/// to sequential measurement.
const TABLE_LIMIT: usize = 1 << 24;

enum Engine {
    Pure {
        table: ProjectionTable,
        cdf: Vec<f64>,
    },
    Mixed {
        table: MixedProjectionTable,
        cdf: Vec<f64>,
    },
    Sequential(QuantumState),
}

/// One simulated round.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub bases_b: Vec<Pauli>,
    /// Outcome digits on `B`, in `part.b` order.
    pub z: Vec<u8>,
    /// Random-Pauli outcome digits on `A`, in `part.a` order.
    pub x: Vec<u8>,
}

pub struct Sampler {
    part: Bipartition,
    basis: BasisAssignment,
    /// Probability of replacing the state by `I / 2^n` (depolarizing branch).
    noise: f64,
    engine: Engine,
}

/// Cumulative probabilities grouped by basis string: block `b` holds the
/// `2^{n_B}` outcomes of basis index `b` (digits base 3, `Z = 0, X = 1,
/// Y = 2`) in bit order.
fn grouped_cdf(probs: impl Fn(usize) -> f64, n_b: usize, random: bool) -> Vec<f64> {
    let outcomes = 1usize << n_b;
    let blocks = if random { 3usize.pow(n_b as u32) } else { 1 };
    let mut cdf = Vec::with_capacity(blocks * outcomes);
    for b in 0..blocks {
        let mut acc = 0.0;
        for bits in 0..outcomes {
            let x = if random {
                random_index(b, bits, n_b)
            } else {
                bits
            };
            acc += probs(x).max(0.0);
            cdf.push(acc);
        }
    }
    cdf
}

/// Base-6 table index of basis index `b` with outcome bits `bits`.
fn random_index(b: usize, bits: usize, n_b: usize) -> usize {
    let mut x = 0;
    for j in 0..n_b {
        let code = (b / 3usize.pow((n_b - 1 - j) as u32)) % 3;
        let bit = (bits >> (n_b - 1 - j)) & 1;
        x = x * 6 + 2 * code + bit;
    }
    x
}

fn basis_code(p: Pauli) -> usize {
    (p.outcome(0) / 2) as usize
}

fn pick(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().unwrap();
    let target = u * total;
    cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
}

impl Sampler {
    pub fn new(input: &InputState, part: &Bipartition, basis: &BasisAssignment) -> Result<Self> {
        if part.n() != input.n() {
            return Err(Error::SizeMismatch(format!(
                "partition on {} qubits, input on {}",
                part.n(),
                input.n()
            )));
        }
        let (state, noise) = match input {
            InputState::State(s) => (s.clone(), 0.0),
            InputState::Depolarized { psi, p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidProbability(*p));
                }
                (QuantumState::Pure(psi.clone()), *p)
            }
        };
        let (n_a, n_b) = (part.n_a(), part.n_b());
        let random = basis.is_random();
        let enumerable = if random {
            n_b <= MAX_RANDOM_EXACT_B
        } else {
            n_b <= MAX_FIXED_EXACT_B
        };
        let outcomes = if random {
            6f64.powi(n_b as i32)
        } else {
            2f64.powi(n_b as i32)
        };
        let engine = match &state {
            QuantumState::Pure(psi)
                if enumerable && outcomes * 2f64.powi(n_a as i32) <= TABLE_LIMIT as f64 =>
            {
                let table = ProjectionTable::new(psi, part, basis)?;
                let cdf = grouped_cdf(|x| table.probability(x), n_b, random);
                Engine::Pure { table, cdf }
            }
            QuantumState::Mixed(rho)
                if enumerable && outcomes * 4f64.powi(n_a as i32) <= TABLE_LIMIT as f64 =>
            {
                let table = MixedProjectionTable::new(rho, part, basis)?;
                let cdf = grouped_cdf(|x| table.probability(x), n_b, random);
                Engine::Mixed { table, cdf }
            }
            _ => Engine::Sequential(state),
        };
        Ok(Sampler {
            part: part.clone(),
            basis: basis.clone(),
            noise,
            engine,
        })
    }

    pub fn partition(&self) -> &Bipartition {
        &self.part
    }

    /// Draws bases, then (for noisy inputs) the depolarizing branch, then
    /// outcomes, always in that order.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        let (n_a, n_b) = (self.part.n_a(), self.part.n_b());
        let bases_b: Vec<Pauli> = match &self.basis {
            BasisAssignment::FixedZ => vec![Pauli::Z; n_b],
            BasisAssignment::Fixed(b) => b.clone(),
            BasisAssignment::Random => (0..n_b).map(|_| random_basis(rng)).collect(),
        };
        let bases_a: Vec<Pauli> = (0..n_a).map(|_| random_basis(rng)).collect();
        if self.noise > 0.0 && rng.random::<f64>() < self.noise {
            let z = bases_b
                .iter()
                .map(|b| b.outcome(rng.random_range(0..2u8)))
                .collect();
            let x = bases_a
                .iter()
                .map(|b| b.outcome(rng.random_range(0..2u8)))
                .collect();
            return Draw { bases_b, z, x };
        }
        let a_qubits: Vec<usize> = (0..n_a).collect();
        match &self.engine {
            Engine::Pure { table, cdf } => {
                let x_idx = self.table_pick(cdf, &bases_b, rng);
                let z = table.outcome(x_idx).0;
                let (x, _, _) =
                    measure_sequence_pure(table.raw(x_idx), n_a, &a_qubits, &bases_a, rng);
                Draw { bases_b, z, x }
            }
            Engine::Mixed { table, cdf } => {
                let x_idx = self.table_pick(cdf, &bases_b, rng);
                let z = self.outcome_digits(x_idx, &bases_b);
                let (x, _, _) =
                    measure_sequence_mixed(&table.raw_matrix(x_idx), n_a, &a_qubits, &bases_a, rng);
                Draw { bases_b, z, x }
            }
            Engine::Sequential(state) => {
                let qubits: Vec<usize> = self.part.b.iter().chain(&self.part.a).copied().collect();
                let bases: Vec<Pauli> = bases_b.iter().chain(&bases_a).copied().collect();
                let digits = match state {
                    QuantumState::Pure(psi) => {
                        measure_sequence_pure(psi.amplitudes(), psi.n(), &qubits, &bases, rng).0
                    }
                    QuantumState::Mixed(rho) => {
                        measure_sequence_mixed(rho.matrix(), rho.n(), &qubits, &bases, rng).0
                    }
                };
                let (z, x) = digits.split_at(n_b);
                Draw {
                    bases_b,
                    z: z.to_vec(),
                    x: x.to_vec(),
                }
            }
        }
    }

    fn table_pick<R: Rng + ?Sized>(&self, cdf: &[f64], bases_b: &[Pauli], rng: &mut R) -> usize {
        let n_b = self.part.n_b();
        let outcomes = 1usize << n_b;
        let u: f64 = rng.random();
        if self.basis.is_random() {
            let b = bases_b
                .iter()
                .fold(0usize, |acc, &p| acc * 3 + basis_code(p));
            let bits = pick(&cdf[b * outcomes..(b + 1) * outcomes], u);
            random_index(b, bits, n_b)
        } else {
            pick(cdf, u)
        }
    }

    fn outcome_digits(&self, x_idx: usize, bases_b: &[Pauli]) -> Vec<u8> {
        let n_b = self.part.n_b();
        if self.basis.is_random() {
            (0..n_b)
                .map(|j| ((x_idx / 6usize.pow((n_b - 1 - j) as u32)) % 6) as u8)
                .collect()
        } else {
            (0..n_b)
                .map(|j| bases_b[j].outcome(((x_idx >> (n_b - 1 - j)) & 1) as u8))
                .collect()
        }
    }
}

/// Target projections `psi_z` with their oracle offsets, precomputed when
/// the outcome alphabet is enumerable.
pub struct TargetProjections {
    psi: PureState,
    part: Bipartition,
    table: Option<ProjectionTable>,
    offsets: Vec<f64>,
    oracle: Option<crate::freeset::FidelityOracle>,
    weights: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

/// Unnormalized projection, its probability and the per-outcome offset and
/// weight.
pub struct Projection<'a> {
    pub raw: std::borrow::Cow<'a, [C64]>,
    pub p: f64,
    pub offset: f64,
    pub weight: f64,
}

impl TargetProjections {
    /// `oracle = None` means zero offsets (fidelity-observable estimation).
    pub fn new(
        psi: &PureState,
        part: &Bipartition,
        basis: &BasisAssignment,
        oracle: Option<&crate::freeset::FidelityOracle>,
    ) -> Result<Self> {
        let table = match ProjectionTable::new(psi, part, basis) {
            Ok(t) => Some(t),
            Err(Error::TooLargeToEnumerate(_)) => None,
            Err(e) => return Err(e),
        };
        let mut offsets = Vec::new();
        if let (Some(t), Some(o)) = (&table, oracle) {
            offsets = vec![0.0; t.len()];
            for (x, f) in crate::ensemble::table_fidelities(t, o)? {
                offsets[x] = f;
            }
        }
        Ok(TargetProjections {
            psi: psi.clone(),
            part: part.clone(),
            table,
            offsets,
            oracle: oracle.cloned(),
            weights: None,
        })
    }

    /// Multiplies each outcome's estimate by `weight(Fid(psi_z))` and drops
    /// the offset, turning the estimate into `tr(O rho)` for a weighted
    /// projector sum.
    pub fn with_weights(mut self, weight: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.weights = Some(Box::new(weight));
        self
    }

    pub fn table(&self) -> Option<&ProjectionTable> {
        self.table.as_ref()
    }

    pub fn n_a(&self) -> usize {
        self.part.n_a()
    }

    /// Looks up outcome `z` on `B`; `None` when `p_psi(z)` is below the cutoff.
    pub fn get(&self, z: &[u8]) -> Result<Option<Projection<'_>>> {
        let (raw, p, fid) = match &self.table {
            Some(t) => {
                let x = t.index_of(z).ok_or_else(|| {
                    Error::InvalidArgument(format!("outcome {z:?} outside the basis"))
                })?;
                let p = t.probability(x);
                if p < crate::ZERO_PROB {
                    return Ok(None);
                }
                let fid = if self.oracle.is_some() {
                    self.offsets[x]
                } else {
                    0.0
                };
                (std::borrow::Cow::Borrowed(t.raw(x)), p, fid)
            }
            None => {
                let kets: Vec<[C64; 2]> = z.iter().map(|&d| outcome_ket(d)).collect();
                let raw = qstate::project_pure_raw(&self.psi, &self.part, &kets);
                let p = crate::linalg::norm_sqr(&raw);
                if p < crate::ZERO_PROB {
                    return Ok(None);
                }
                let fid = match &self.oracle {
                    Some(o) => {
                        let s = 1.0 / p.sqrt();
                        o.fidelity(&PureState::from_raw(
                            self.part.n_a(),
                            raw.iter().map(|a| a * s).collect(),
                        ))?
                    }
                    None => 0.0,
                };
                (std::borrow::Cow::Owned(raw), p, fid)
            }
        };
        Ok(Some(match &self.weights {
            Some(w) => Projection {
                weight: w(fid),
                offset: 0.0,
                raw,
                p,
            },
            None => Projection {
                weight: 1.0,
                offset: fid,
                raw,
                p,
            },
        }))
    }

    /// Single-round estimate `weight * tr(psi_z shadow_x) - offset`, and the
    /// offset used. Undefined target branches give `(0, 0)`.
    pub fn estimate(&self, z: &[u8], x: &[u8]) -> Result<(f64, f64, bool)> {
        match self.get(z)? {
            None => Ok((0.0, 0.0, false)),
            Some(pr) => {
                let w = crate::estimator::shadow_overlap(&pr.raw, self.part.n_a(), x) / pr.p;
                Ok((pr.weight * w - pr.offset, pr.offset, true))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::haar_state;
    use crate::rng::stream;

    fn frequencies(
        s: &Sampler,
        draws: u64,
        seed: u64,
    ) -> std::collections::HashMap<(Vec<u8>, Vec<u8>), f64> {
        let mut m = std::collections::HashMap::new();
        let mut r = stream(seed, 0);
        for _ in 0..draws {
            let d = s.draw(&mut r);
            *m.entry((d.z, d.x)).or_insert(0.0) += 1.0 / draws as f64;
        }
        m
    }

    #[test]
    fn engines_agree_in_distribution() {
        let mut r = stream(30, 0);
        let psi = haar_state(3, &mut r);
        let part = Bipartition::complement(3, &[1]).unwrap();
        let q = QuantumState::Pure(psi.clone());
        for basis in [BasisAssignment::FixedZ, BasisAssignment::Random] {
            let table = Sampler::new(&InputState::State(q.clone()), &part, &basis).unwrap();
            let mixed =
                Sampler::new(&InputState::State(psi.to_density().into()), &part, &basis).unwrap();
            let seq = Sampler {
                part: part.clone(),
                basis: basis.clone(),
                noise: 0.0,
                engine: Engine::Sequential(q.clone()),
            };
            let draws = 100_000;
            let (a, b, c) = (
                frequencies(&table, draws, 1),
                frequencies(&mixed, draws, 2),
                frequencies(&seq, draws, 3),
            );
            for (k, &fa) in &a {
                let fb = b.get(k).copied().unwrap_or(0.0);
                let fc = c.get(k).copied().unwrap_or(0.0);
                let sigma = (fa.max(fb).max(fc).max(1e-4) / draws as f64).sqrt();
                assert!(
                    (fa - fb).abs() < 6.0 * sigma && (fa - fc).abs() < 6.0 * sigma,
                    "{k:?}: {fa} {fb} {fc}"
                );
            }
        }
    }

    #[test]
    fn table_draw_matches_born_rule() {
        let mut r = stream(31, 0);
        let psi = haar_state(2, &mut r);
        let part = Bipartition::complement(2, &[0]).unwrap();
        let s = Sampler::new(
            &InputState::State(psi.clone().into()),
            &part,
            &BasisAssignment::Random,
        )
        .unwrap();
        let draws = 100_000;
        let f = frequencies(&s, draws, 4);
        // Joint probability of (z, x) is 1/9 * |<z x|psi>|^2 (with qubit 0 = A).
        for ((z, x), freq) in f {
            let ket = PureState::product(&[outcome_ket(x[0]), outcome_ket(z[0])]).unwrap();
            let p = ket.inner(&psi).norm_sqr() / 9.0;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() < 5.0 * sigma, "{z:?} {x:?}: {freq} vs {p}");
        }
    }

    #[test]
    fn depolarized_branch_frequency() {
        let part = Bipartition::complement(2, &[0]).unwrap();
        let s = Sampler::new(
            &InputState::Depolarized {
                psi: PureState::zero(2),
                p: 0.4,
            },
            &part,
            &BasisAssignment::FixedZ,
        )
        .unwrap();
        let draws = 50_000;
        let mut r = stream(32, 0);
        let ones = (0..draws).filter(|_| s.draw(&mut r).z == [1]).count() as f64 / draws as f64;
        // Only the maximally mixed branch yields z = 1, with probability 1/2.
        assert!((ones - 0.2).abs() < 5.0 * (0.16f64 / draws as f64).sqrt());
    }
}
