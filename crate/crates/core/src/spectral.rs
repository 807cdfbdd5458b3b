//! Fidelity observables and their spectral gaps.
//!
//! The observable for a target `psi` with retained region `A` (the leading
//! `n_A` qubits) is
//! `O = sum_x w (psi_x psi_x^† / q_x) ⊗ |x><x|_B`, where `x` runs over local
//! Pauli outcomes on `B`, `psi_x` is the unnormalized projection and `q_x`
//! its probability given the basis. Averaging over all `3^|B|` basis strings
//! gives the full observable; averaging over a sample gives a truncated one.
//! Outcomes with `q_x` below the cutoff contribute nothing, which keeps `O`
//! positive and gives the smallest expectation on states supported there.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{expand_axes, BasisAssignment, ProjectionTable, MAX_RANDOM_EXACT_B};
use crate::error::{Error, Result};
use crate::freeset::FidelityOracle;
use crate::linalg;
use crate::models::{brickwork_circuit, run_circuit};
use crate::qstate::{outcome_ket, Bipartition, Pauli, PureState};
use crate::rng;

/// Largest register materialized as a dense operator.
pub const MAX_OBSERVABLE_QUBITS: usize = 12;

/// Which basis strings on `B` enter the observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisSelection {
    All,
    Sampled(Vec<Vec<Pauli>>),
}

/// Dense fidelity observable in natural qubit order.
#[derive(Clone, Debug)]
pub struct FidelityObservable {
    pub n: usize,
    pub n_a: usize,
    /// Number of basis strings averaged.
    pub bases: usize,
    pub matrix: DMatrix<C64>,
}

impl FidelityObservable {
    /// `tr(O |phi><phi|)`.
    pub fn expectation(&self, phi: &PureState) -> f64 {
        let v = nalgebra::DVector::from_column_slice(phi.amplitudes());
        (v.adjoint() * &self.matrix * &v)[(0, 0)].re
    }
}

/// Basis string with index `code` (base 3, `Z = 0, X = 1, Y = 2`, first
/// qubit most significant).
pub fn basis_of_index(code: usize, n_b: usize) -> Vec<Pauli> {
    (0..n_b)
        .map(|j| Pauli::of_outcome(2 * ((code / 3usize.pow((n_b - 1 - j) as u32)) % 3) as u8))
        .collect()
}

/// Per-qubit maps from outcome digits to `(beta, beta')` pairs:
/// entry `[2 beta + beta'][d] = k_d[beta] conj(k_d[beta'])`.
fn pair_rows(digits: &[u8]) -> Vec<Vec<C64>> {
    (0..4)
        .map(|pair| {
            let (b, bp) = (pair >> 1, pair & 1);
            digits
                .iter()
                .map(|&d| {
                    let k = outcome_ket(d);
                    k[b] * k[bp].conj()
                })
                .collect()
        })
        .collect()
}

/// Operator blocks `[x][a][a']` weighted by `scale`, with optional free-set
/// offsets subtracted on the diagonal.
fn blocks(
    table: &ProjectionTable,
    scale: f64,
    offsets: Option<&FidelityOracle>,
) -> Result<Vec<C64>> {
    let d_a = 1usize << table.n_a();
    let mut data = vec![C64::default(); table.len() * d_a * d_a];
    for x in table.support() {
        let raw = table.raw(x);
        let s = scale / table.probability(x);
        let blk = &mut data[x * d_a * d_a..(x + 1) * d_a * d_a];
        for a in 0..d_a {
            for ap in 0..d_a {
                blk[a * d_a + ap] = raw[a] * raw[ap].conj() * s;
            }
        }
        if let Some(o) = offsets {
            let f = o.fidelity(&table.state(x).unwrap())?;
            for a in 0..d_a {
                blk[a * d_a + a] -= C64::new(scale * f, 0.0);
            }
        }
    }
    Ok(data)
}

/// Adds the `(B-pairs, a, a')` tensor to `out` in natural order.
fn scatter(out: &mut DMatrix<C64>, tensor: &[C64], part: &Bipartition) {
    let (n, n_a, n_b) = (part.n(), part.n_a(), part.n_b());
    let d_a = 1usize << n_a;
    let place = |qs: &[usize], bits: usize| {
        let k = qs.len();
        qs.iter().enumerate().fold(0usize, |acc, (j, &q)| {
            acc | (((bits >> (k - 1 - j)) & 1) << (n - 1 - q))
        })
    };
    let nat_a: Vec<usize> = (0..d_a).map(|a| place(&part.a, a)).collect();
    for (p, chunk) in tensor.chunks(d_a * d_a).enumerate() {
        let (mut rb, mut cb) = (0usize, 0usize);
        for j in 0..n_b {
            let pair = (p >> (2 * (n_b - 1 - j))) & 3;
            rb = (rb << 1) | (pair >> 1);
            cb = (cb << 1) | (pair & 1);
        }
        let (rb, cb) = (place(&part.b, rb), place(&part.b, cb));
        for a in 0..d_a {
            for ap in 0..d_a {
                let v = chunk[a * d_a + ap];
                if v != C64::default() {
                    out[(rb | nat_a[a], cb | nat_a[ap])] += v;
                }
            }
        }
    }
}

fn check_size(n: usize, n_a: usize) -> Result<()> {
    if n > MAX_OBSERVABLE_QUBITS {
        return Err(Error::TooLarge(format!(
            "dense observable on {n} qubits (limit {MAX_OBSERVABLE_QUBITS})"
        )));
    }
    if n_a == 0 || n_a >= n {
        return Err(Error::InvalidArgument(format!(
            "n_A = {n_a} must lie in 1..{n}"
        )));
    }
    Ok(())
}

/// Operator of a single basis string, unweighted, added into `out`.
fn add_basis(
    out: &mut DMatrix<C64>,
    psi: &PureState,
    part: &Bipartition,
    bases: &[Pauli],
    scale: f64,
    offsets: Option<&FidelityOracle>,
) -> Result<()> {
    let table = ProjectionTable::new(psi, part, &BasisAssignment::Fixed(bases.to_vec()))?;
    let d_a = 1usize << part.n_a();
    let rows: Vec<_> = bases
        .iter()
        .map(|b| pair_rows(&[b.outcome(0), b.outcome(1)]))
        .collect();
    let tensor = expand_axes(blocks(&table, scale, offsets)?, 2, &rows, d_a * d_a);
    scatter(out, &tensor, part);
    Ok(())
}

/// Builds the observable for `psi` with `A` the leading `n_a` qubits.
/// With an oracle, `Fid(psi_x) I_A` is subtracted from every block.
pub fn build_observable(
    psi: &PureState,
    n_a: usize,
    selection: &BasisSelection,
    offsets: Option<&FidelityOracle>,
) -> Result<FidelityObservable> {
    let n = psi.n();
    check_size(n, n_a)?;
    let part = Bipartition::leading(n, n_a);
    let n_b = part.n_b();
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    let count = match selection {
        BasisSelection::All => {
            if n_b > MAX_RANDOM_EXACT_B {
                return Err(Error::TooLarge(format!(
                    "3^{n_b} basis strings (limit |B| <= {MAX_RANDOM_EXACT_B})"
                )));
            }
            let table = ProjectionTable::new(psi, &part, &BasisAssignment::Random)?;
            let d_a = 1usize << n_a;
            let rows: Vec<_> = (0..n_b).map(|_| pair_rows(&[0, 1, 2, 3, 4, 5])).collect();
            let tensor = expand_axes(
                blocks(&table, table.basis_weight(), offsets)?,
                6,
                &rows,
                d_a * d_a,
            );
            scatter(&mut m, &tensor, &part);
            3usize.pow(n_b as u32)
        }
        BasisSelection::Sampled(list) => {
            if list.is_empty() {
                return Err(Error::InvalidArgument("empty basis list".into()));
            }
            let w = 1.0 / list.len() as f64;
            for b in list {
                if b.len() != n_b {
                    return Err(Error::SizeMismatch(format!(
                        "basis string of length {} on |B| = {n_b}",
                        b.len()
                    )));
                }
                add_basis(&mut m, psi, &part, b, w, offsets)?;
            }
            list.len()
        }
    };
    Ok(FidelityObservable {
        n,
        n_a,
        bases: count,
        matrix: m,
    })
}

/// `1 - lambda_max(P O P)` with `P = I - |psi><psi|`, clamped at zero.
pub fn spectral_gap(o: &FidelityObservable, psi: &PureState) -> f64 {
    let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
    let p = DMatrix::<C64>::identity(v.len(), v.len()) - &v * v.adjoint();
    let pop = &p * &o.matrix * &p;
    let pop = (&pop + pop.adjoint()) * C64::new(0.5, 0.0);
    (1.0 - linalg::max_eigenvalue(&pop)).max(0.0)
}

/// Untruncated gap of `psi` with `A` the leading `n_a` qubits.
pub fn fidelity_gap(psi: &PureState, n_a: usize) -> Result<f64> {
    let o = build_observable(psi, n_a, &BasisSelection::All, None)?;
    Ok(spectral_gap(&o, psi))
}

/// Draws `count` distinct basis strings on `n_b` qubits.
pub fn sample_bases<R: rand::Rng + ?Sized>(
    n_b: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<Pauli>>> {
    let total = 3usize
        .checked_pow(n_b as u32)
        .ok_or_else(|| Error::TooLarge(format!("3^{n_b} basis strings")))?;
    if count > total {
        return Err(Error::InvalidArgument(format!(
            "{count} distinct bases requested, only {total} exist"
        )));
    }
    Ok(sample(rng, total, count)
        .into_iter()
        .map(|c| basis_of_index(c, n_b))
        .collect())
}

/// Gaps of the truncated observables `O^(1) .. O^(bases.len())`, where
/// `O^(i)` averages the first `i` basis strings.
pub fn truncated_gaps(psi: &PureState, n_a: usize, bases: &[Vec<Pauli>]) -> Result<Vec<f64>> {
    let n = psi.n();
    check_size(n, n_a)?;
    let part = Bipartition::leading(n, n_a);
    let dim = 1usize << n;
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    let mut gaps = Vec::with_capacity(bases.len());
    for (i, b) in bases.iter().enumerate() {
        add_basis(&mut sum, psi, &part, b, 1.0, None)?;
        let o = FidelityObservable {
            n,
            n_a,
            bases: i + 1,
            matrix: &sum / C64::new((i + 1) as f64, 0.0),
        };
        gaps.push(spectral_gap(&o, psi));
    }
    Ok(gaps)
}

/// Scan of averaged truncated gaps over random circuit states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapScanConfig {
    pub ns: Vec<usize>,
    pub n_a: usize,
    pub states: usize,
    pub bases: usize,
    /// Brickwork depth per qubit.
    #[serde(default = "default_depth_factor")]
    pub depth_factor: usize,
}

fn default_depth_factor() -> usize {
    10
}

/// One `(state, i)` cell of a gap scan; `mean`/`std` are over states at
/// the same `(n, i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub n_a: usize,
    pub seed: u64,
    pub i: usize,
    pub gap: f64,
    pub mean: f64,
    pub std: f64,
}

/// Depth-`depth` 1D brickwork state on `n` qubits from `|0...0>`.
pub fn brickwork_state(n: usize, depth: usize, seed: u64) -> Result<PureState> {
    let mut r = rng::stream(seed, 0);
    let spec = brickwork_circuit(&[n], depth, &mut r);
    Ok(run_circuit(&spec, &PureState::zero(n), &mut r)?.state)
}

/// Truncated gap curves for each state; state `j` at size `n` uses seed
/// `derive(master, [n, j])` for both circuit and basis draws.
pub fn averaged_truncated_gaps(cfg: &GapScanConfig, master: u64) -> Result<Vec<GapRow>> {
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        if n > 10 {
            return Err(Error::TooLarge(format!("gap scan at n = {n} (limit 10)")));
        }
        check_size(n, cfg.n_a)?;
        let curves: Vec<(u64, Vec<f64>)> = (0..cfg.states as u64)
            .into_par_iter()
            .map(|j| {
                let seed = rng::derive(master, &[n as u64, j]);
                let psi = brickwork_state(n, cfg.depth_factor * n, seed)?;
                let bases = sample_bases(n - cfg.n_a, cfg.bases, &mut rng::stream(seed, 1))?;
                Ok((seed, truncated_gaps(&psi, cfg.n_a, &bases)?))
            })
            .collect::<Result<_>>()?;
        for i in 0..cfg.bases {
            let vals: Vec<f64> = curves.iter().map(|c| c.1[i]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let std = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            for (seed, c) in &curves {
                rows.push(GapRow {
                    n,
                    n_a: cfg.n_a,
                    seed: *seed,
                    i: i + 1,
                    gap: c[i],
                    mean,
                    std,
                });
            }
        }
    }
    Ok(rows)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let m = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / m, ry.iter().sum::<f64>() / m);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::haar_state;
    use crate::qstate::states;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a.kronecker(b)
    }

    fn ket_proj(k: [C64; 2]) -> DMatrix<C64> {
        let v = nalgebra::DVector::from_column_slice(&k);
        &v * v.adjoint()
    }

    /// Independent construction: sum over outcomes with explicit Kronecker
    /// products, for `n_a = 1`, `B` the remaining qubits.
    fn dense_reference(psi: &PureState, bases: &[Vec<Pauli>]) -> DMatrix<C64> {
        let n = psi.n();
        let dim = 1usize << n;
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let mut out = DMatrix::<C64>::zeros(dim, dim);
        for b in bases {
            for bits in 0..1usize << (n - 1) {
                let mut proj_b = DMatrix::<C64>::identity(1, 1);
                for (j, p) in b.iter().enumerate() {
                    let d = p.outcome(((bits >> (n - 2 - j)) & 1) as u8);
                    proj_b = kron(&proj_b, &ket_proj(outcome_ket(d)));
                }
                let full = kron(&DMatrix::identity(2, 2), &proj_b);
                let projected = &full * &v;
                let q = projected.norm_squared();
                if q < crate::ZERO_PROB {
                    continue;
                }
                out += &projected * projected.adjoint() / C64::new(q * bases.len() as f64, 0.0);
            }
        }
        out
    }

    #[test]
    fn bell_z_basis_observable() {
        let o = build_observable(
            &states::bell(),
            1,
            &BasisSelection::Sampled(vec![vec![Pauli::Z]]),
            None,
        )
        .unwrap();
        let mut expected = DMatrix::<C64>::zeros(4, 4);
        expected[(0, 0)] = C64::new(1.0, 0.0);
        expected[(3, 3)] = C64::new(1.0, 0.0);
        assert!((&o.matrix - expected).norm() < 1e-12);
    }

    #[test]
    fn bell_gap_matches_per_basis_average() {
        let psi = states::bell();
        let o = build_observable(&psi, 1, &BasisSelection::All, None).unwrap();
        let all: Vec<Vec<Pauli>> = (0..3).map(|c| basis_of_index(c, 1)).collect();
        let reference = dense_reference(&psi, &all);
        assert!((&o.matrix - &reference).norm() < 1e-12);
        let g = spectral_gap(&o, &psi);
        // Each basis contributes |b b><b b| + |b' b'><b' b'| projected onto
        // Bell's orthogonal complement; the largest such eigenvalue is 1/3.
        assert!((g - 2.0 / 3.0).abs() < 1e-10, "{g}");
    }

    #[test]
    fn all_bases_equal_average_of_per_basis_operators() {
        let mut r = stream(60, 0);
        let psi = haar_state(4, &mut r);
        let all: Vec<Vec<Pauli>> = (0..27).map(|c| basis_of_index(c, 3)).collect();
        let a = build_observable(&psi, 1, &BasisSelection::All, None).unwrap();
        let b = build_observable(&psi, 1, &BasisSelection::Sampled(all.clone()), None).unwrap();
        assert!((&a.matrix - &b.matrix).norm() < 1e-10);
        assert!((&a.matrix - dense_reference(&psi, &all)).norm() < 1e-10);
        assert!((a.expectation(&psi) - 1.0).abs() < 1e-9);
        assert!(linalg::hermiticity_defect(&a.matrix) < 1e-12);
    }

    #[test]
    fn product_state_has_zero_gap() {
        let mut r = stream(61, 0);
        let psi = haar_state(2, &mut r).tensor(&haar_state(2, &mut r));
        let g = fidelity_gap(&psi, 2).unwrap();
        assert!(g <= 1e-10, "{g}");
        let ev = linalg::hermitian_eigenvalues(
            &build_observable(&psi, 2, &BasisSelection::All, None)
                .unwrap()
                .matrix,
        );
        assert!(ev.iter().filter(|&&e| (e - 1.0).abs() < 1e-9).count() >= 2);
    }

    #[test]
    fn haar_gaps_are_positive() {
        for seed in 0..10 {
            let psi = haar_state(4, &mut stream(62, seed));
            assert!(fidelity_gap(&psi, 1).unwrap() > 1e-6);
        }
    }

    #[test]
    fn single_basis_gap_is_below_full_gap() {
        for seed in 0..5 {
            let mut r = stream(63, seed);
            let psi = haar_state(4, &mut r);
            let bases = sample_bases(3, 1, &mut r).unwrap();
            let g1 = truncated_gaps(&psi, 1, &bases).unwrap()[0];
            assert!(g1 <= fidelity_gap(&psi, 1).unwrap() + 1e-9);
        }
    }

    #[test]
    fn truncated_with_every_basis_is_full() {
        let psi = haar_state(3, &mut stream(64, 0));
        let all: Vec<Vec<Pauli>> = (0..9).map(|c| basis_of_index(c, 2)).collect();
        let g = truncated_gaps(&psi, 1, &all).unwrap();
        assert!((g[8] - fidelity_gap(&psi, 1).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn deflated_gap_matches_second_eigenvalue_when_aligned() {
        let psi = haar_state(4, &mut stream(65, 0));
        let o = build_observable(&psi, 2, &BasisSelection::All, None).unwrap();
        let (vals, vecs) = linalg::hermitian_eigh(&o.matrix);
        let top = vecs.column(vals.len() - 1);
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        if (top.dot(&v.conjugate())).norm() > 1.0 - 1e-8 {
            assert!((spectral_gap(&o, &psi) - (1.0 - vals[vals.len() - 2])).abs() < 1e-9);
        }
    }

    #[test]
    fn offsets_shift_expectation_by_lq() {
        let psi = haar_state(4, &mut stream(66, 0));
        let oracle = FidelityOracle::separable(vec![0]);
        let o = build_observable(&psi, 2, &BasisSelection::All, Some(&oracle)).unwrap();
        let lq = crate::ensemble::localizable_quantumness(
            &psi,
            &Bipartition::leading(4, 2),
            &oracle,
            &BasisAssignment::Random,
            crate::ensemble::LqMethod::Exact,
        )
        .unwrap();
        assert!((o.expectation(&psi) - lq.value).abs() < 1e-9);
    }

    #[test]
    fn spearman_basics() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!((spearman(&x, &x.iter().map(|v| v * v).collect::<Vec<_>>()) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &x.iter().map(|v| -v).collect::<Vec<_>>()) + 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn expectation_in_unit_interval(seed in 0u64..1000) {
            let mut r = stream(67, seed);
            let psi = haar_state(3, &mut r);
            let phi = haar_state(3, &mut r);
            let o = build_observable(&psi, 1, &BasisSelection::All, None).unwrap();
            let e = o.expectation(&phi);
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&e));
        }
    }
}
