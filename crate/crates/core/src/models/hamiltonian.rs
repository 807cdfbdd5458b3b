//! Spin-chain ground states by exact diagonalization.
//!
//! Both chains conserve the number of up spins, so `H` is diagonalized block
//! by block. Blocks with `k` and `n - k` ones are related by a global spin
//! flip and share a spectrum; only `k <= n/2` is solved.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::qstate::{bit_of, PureState};

const DEGENERACY_TOL: f64 = 1e-8;
const DENSE_MAX_N: usize = 12;

/// `sum_bonds jxy (XX + YY) + jz ZZ` on `n` spins.
#[derive(Clone, Debug)]
pub struct SpinChain {
    pub n: usize,
    pub bonds: Vec<(usize, usize, f64, f64)>,
}

impl SpinChain {
    /// `-sum [XX + YY + anisotropy ZZ]` with periodic boundary.
    pub fn xxz(n: usize, anisotropy: f64) -> Self {
        let bonds = (0..n)
            .map(|i| (i, (i + 1) % n, -1.0, -anisotropy))
            .collect();
        SpinChain { n, bonds }
    }

    /// `sum s_i.s_{i+1} + j2 sum s_i.s_{i+2}` with periodic boundary.
    pub fn j1j2(n: usize, j2: f64) -> Self {
        let mut bonds: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0, 1.0)).collect();
        if j2 != 0.0 {
            bonds.extend((0..n).map(|i| (i, (i + 2) % n, j2, j2)));
        }
        SpinChain { n, bonds }
    }

    fn masks(&self) -> Vec<(usize, f64, f64)> {
        self.bonds
            .iter()
            .map(|&(i, j, xy, z)| (bit_of(self.n, i) | bit_of(self.n, j), xy, z))
            .collect()
    }

    /// `H v` on the full Hilbert space.
    pub fn apply_full(&self, v: &[f64], out: &mut [f64]) {
        let masks = self.masks();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (s, &vs) in v.iter().enumerate() {
            if vs == 0.0 {
                continue;
            }
            for &(m, xy, z) in &masks {
                let both = s & m;
                if both == 0 || both == m {
                    out[s] += z * vs;
                } else {
                    out[s] -= z * vs;
                    out[s ^ m] += 2.0 * xy * vs;
                }
            }
        }
    }

    pub fn energy(&self, psi: &PureState) -> f64 {
        let v: Vec<f64> = psi.amplitudes().iter().map(|a| a.re).collect();
        let mut w = vec![0.0; v.len()];
        self.apply_full(&v, &mut w);
        v.iter().zip(&w).map(|(a, b)| a * b).sum()
    }

    pub fn residual(&self, psi: &PureState, energy: f64) -> f64 {
        let v: Vec<f64> = psi.amplitudes().iter().map(|a| a.re).collect();
        linalg::residual(|x, y| self.apply_full(x, y), &v, energy)
    }
}

struct Sector {
    states: Vec<usize>,
    index: Vec<u32>,
}

impl Sector {
    fn new(n: usize, ones: u32) -> Self {
        let states: Vec<usize> = (0..1usize << n)
            .filter(|s| s.count_ones() == ones)
            .collect();
        let mut index = vec![u32::MAX; 1 << n];
        for (i, &s) in states.iter().enumerate() {
            index[s] = i as u32;
        }
        Sector { states, index }
    }

    fn apply(&self, masks: &[(usize, f64, f64)], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &s) in self.states.iter().enumerate() {
            let vs = v[i];
            for &(m, xy, z) in masks {
                let both = s & m;
                if both == 0 || both == m {
                    out[i] += z * vs;
                } else {
                    out[i] -= z * vs;
                    out[self.index[s ^ m] as usize] += 2.0 * xy * vs;
                }
            }
        }
    }

    fn dense(&self, masks: &[(usize, f64, f64)]) -> DMatrix<f64> {
        let d = self.states.len();
        let mut h = DMatrix::zeros(d, d);
        for (i, &s) in self.states.iter().enumerate() {
            for &(m, xy, z) in masks {
                let both = s & m;
                if both == 0 || both == m {
                    h[(i, i)] += z;
                } else {
                    h[(i, i)] -= z;
                    h[(self.index[s ^ m] as usize, i)] += 2.0 * xy;
                }
            }
        }
        h
    }

    fn embed(&self, n: usize, v: &[f64]) -> PureState {
        let mut amps = vec![C64::default(); 1 << n];
        for (&s, &x) in self.states.iter().zip(v) {
            amps[s] = C64::new(x, 0.0);
        }
        PureState::normalized(n, amps).expect("eigenvector is nonzero")
    }
}

fn flip(psi: &PureState) -> PureState {
    let dim = psi.dim();
    let amps = (0..dim).map(|s| psi.amplitudes()[(dim - 1) ^ s]).collect();
    PureState::normalized(psi.n(), amps).expect("flip preserves norm")
}

/// Lowest energy with an orthonormal basis of its eigenspace.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub basis: Vec<PureState>,
    /// Largest residual `||H v - E v||` over the basis.
    pub residual: f64,
}

impl GroundState {
    pub fn is_degenerate(&self) -> bool {
        self.basis.len() > 1
    }
}

/// Ground space of `chain`. Basis vectors are ordered by the number of up
/// spins (ascending), i.e. by total `S_z` descending.
pub fn ground_space(chain: &SpinChain) -> Result<GroundState> {
    let n = chain.n;
    if n == 0 || n > 14 {
        return Err(Error::UnsupportedSize(format!(
            "spin chain of length {n} (supported: 1..=14)"
        )));
    }
    let masks = chain.masks();
    // (energy, ones, vector within the sector); dense sectors get their
    // vectors in a second pass, only if they reach the ground energy.
    let mut candidates: Vec<(f64, u32, Option<Vec<f64>>)> = Vec::new();
    let mut sectors = Vec::new();
    for ones in 0..=(n as u32 / 2) {
        let sec = Sector::new(n, ones);
        let d = sec.states.len();
        if n <= DENSE_MAX_N || d <= 300 {
            let vals = linalg::symmetric_eigenvalues(sec.dense(&masks));
            candidates.extend(vals.into_iter().take(4).map(|e| (e, ones, None)));
        } else {
            let pairs =
                linalg::lanczos_lowest(d, 3, |x, y| sec.apply(&masks, x, y), 0x5eed + ones as u64)?;
            for (e, v) in pairs {
                candidates.push((e, ones, Some(v.iter().copied().collect())));
            }
        }
        sectors.push(sec);
    }
    let e0 = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let mut dense_vecs: Vec<(f64, u32, Vec<f64>)> = Vec::new();
    for ones in 0..=(n as u32 / 2) {
        let hit = candidates
            .iter()
            .any(|c| c.1 == ones && c.2.is_none() && c.0 - e0 < DEGENERACY_TOL);
        if hit {
            let (vals, vecs) = linalg::symmetric_eigh(sectors[ones as usize].dense(&masks));
            for (k, &e) in vals
                .iter()
                .enumerate()
                .take_while(|(_, &e)| e - e0 < DEGENERACY_TOL)
            {
                dense_vecs.push((e, ones, vecs.column(k).iter().copied().collect()));
            }
        }
    }
    let candidates: Vec<(f64, u32, Vec<f64>)> = candidates
        .into_iter()
        .filter_map(|(e, o, v)| v.map(|v| (e, o, v)))
        .chain(dense_vecs)
        .collect();
    let mut low: Vec<(u32, PureState)> = Vec::new();
    for (e, ones, v) in &candidates {
        if e - e0 < DEGENERACY_TOL {
            let psi = sectors[*ones as usize].embed(n, v);
            if 2 * (*ones as usize) != n {
                low.push((n as u32 - ones, flip(&psi)));
            }
            low.push((*ones, psi));
        }
    }
    low.sort_by_key(|(ones, _)| *ones);
    let basis: Vec<PureState> = low.into_iter().map(|(_, v)| v).collect();
    let residual = basis
        .iter()
        .map(|v| chain.residual(v, e0))
        .fold(0.0, f64::max);
    Ok(GroundState {
        energy: e0,
        basis,
        residual,
    })
}

fn unique_or_degenerate(
    gs: GroundState,
    representatives: Option<Vec<PureState>>,
) -> Result<PureState> {
    if gs.is_degenerate() {
        return Err(Error::DegenerateGroundSpace {
            energy: gs.energy,
            representatives: representatives.unwrap_or_else(|| gs.basis.clone()),
            basis: gs.basis,
        });
    }
    Ok(gs.basis.into_iter().next().unwrap())
}

/// Ground state of the periodic XXZ chain.
pub fn xxz_ground_state(n: usize, anisotropy: f64) -> Result<PureState> {
    unique_or_degenerate(ground_space(&SpinChain::xxz(n, anisotropy))?, None)
}

/// Product of singlets on `(offset + 2k, offset + 2k + 1) mod n`.
pub fn dimer_state(n: usize, offset: usize) -> PureState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![C64::default(); 1 << n];
    for choice in 0..1usize << (n / 2) {
        let mut idx = 0usize;
        let mut sign = 1.0;
        for k in 0..n / 2 {
            let (a, b) = ((offset + 2 * k) % n, (offset + 2 * k + 1) % n);
            if choice >> k & 1 == 0 {
                idx |= bit_of(n, b);
            } else {
                idx |= bit_of(n, a);
                sign = -sign;
            }
        }
        amps[idx] = C64::new(sign * s.powi((n / 2) as i32), 0.0);
    }
    PureState::from_raw(n, amps)
}

/// Ground state of the periodic J1-J2 chain (J1 = 1, even `n`). When the
/// ground space is degenerate and spanned by the two dimer coverings, those
/// are returned as representatives.
pub fn j1j2_ground_state(n: usize, j2: f64) -> Result<PureState> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "J1-J2 chain needs even length, got {n}"
        )));
    }
    let gs = ground_space(&SpinChain::j1j2(n, j2))?;
    let reps = if gs.basis.len() == 2 {
        let dimers = [dimer_state(n, 0), dimer_state(n, 1)];
        let inside = dimers.iter().all(|d| {
            let w: f64 = gs.basis.iter().map(|b| b.inner(d).norm_sqr()).sum();
            (1.0 - w).abs() < 1e-8
        });
        inside.then(|| dimers.to_vec())
    } else {
        None
    };
    unique_or_degenerate(gs, reps)
}
