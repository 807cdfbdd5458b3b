//! Parameter scans: localizable magic over Clifford-scrambled injection
//! states, and pair localizable entanglement over spin-chain ground states.
//!
//! Scans use common random numbers: the Clifford drawn for index `j` and the
//! Monte Carlo streams do not depend on the scanned parameter, so differences
//! between neighbouring points are not swamped by sampling noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{localizable_quantumness, BasisAssignment, LqMethod};
use crate::error::{Error, Result};
use crate::freeset::FidelityOracle;
use crate::models::{ground_space, j1j2_ground_state, magic_injection_state, SpinChain};
use crate::qstate::{Bipartition, PureState};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagicScanConfig {
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub n_a: usize,
    pub cliffords: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagicRow {
    pub n: usize,
    pub n_a: usize,
    pub alpha: f64,
    pub clifford: usize,
    pub seed: u64,
    pub lm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagicPoint {
    pub n: usize,
    pub alpha: f64,
    pub mean: f64,
    pub std_error: f64,
}

/// Localizable magic with `A` the leading `n_a` qubits and `B` measured in
/// the computational basis.
pub fn localizable_magic(psi: &PureState, n_a: usize) -> Result<f64> {
    let part = Bipartition::leading(psi.n(), n_a);
    let oracle = FidelityOracle::stabilizer(n_a)?;
    Ok(localizable_quantumness(
        psi,
        &part,
        &oracle,
        &BasisAssignment::FixedZ,
        LqMethod::Exact,
    )?
    .value)
}

/// Every `(n, alpha, clifford)` cell. Clifford `j` at size `n` is drawn
/// from `derive(master, [n, j])` for every `alpha`.
pub fn magic_scan(cfg: &MagicScanConfig, master: u64) -> Result<Vec<MagicRow>> {
    if let Some(&a) = cfg
        .alphas
        .iter()
        .find(|a| !(0.0..=std::f64::consts::FRAC_PI_4 + 1e-12).contains(*a))
    {
        return Err(Error::InvalidArgument(format!(
            "alpha = {a} outside [0, pi/4]"
        )));
    }
    let mut cells = Vec::new();
    for &n in &cfg.ns {
        if cfg.n_a == 0 || cfg.n_a >= n {
            return Err(Error::InvalidArgument(format!(
                "n_A = {} must lie in 1..{n}",
                cfg.n_a
            )));
        }
        for &alpha in &cfg.alphas {
            for j in 0..cfg.cliffords {
                cells.push((n, alpha, j));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(n, alpha, j)| {
            let seed = rng::derive(master, &[n as u64, j as u64]);
            let psi = magic_injection_state(n, alpha, &mut rng::stream(seed, 0))?;
            Ok(MagicRow {
                n,
                n_a: cfg.n_a,
                alpha,
                clifford: j,
                seed,
                lm: localizable_magic(&psi, cfg.n_a)?,
            })
        })
        .collect()
}

/// Mean and standard error per `(n, alpha)`, in scan order.
pub fn magic_summary(rows: &[MagicRow]) -> Vec<MagicPoint> {
    let mut points: Vec<MagicPoint> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let j = rows[i..]
            .iter()
            .position(|r| r.n != rows[i].n || r.alpha != rows[i].alpha)
            .map_or(rows.len(), |k| i + k);
        let vals: Vec<f64> = rows[i..j].iter().map(|r| r.lm).collect();
        let (mean, std_error) = crate::ensemble::mean_and_se(&vals);
        points.push(MagicPoint {
            n: rows[i].n,
            alpha: rows[i].alpha,
            mean,
            std_error,
        });
        i = j;
    }
    points
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainModel {
    /// Parameter: anisotropy.
    Xxz,
    /// Parameter: `J2` with `J1 = 1`.
    J1j2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianScanConfig {
    pub model: ChainModel,
    pub n: usize,
    pub params: Vec<f64>,
    /// Projected states sampled per point.
    pub samples: usize,
    #[serde(default = "default_pair")]
    pub pair: (usize, usize),
}

fn default_pair() -> (usize, usize) {
    (0, 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianRow {
    pub parameter: f64,
    pub le: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
    /// `ground`, or the representative used in a degenerate ground space.
    pub state: String,
    pub degeneracy: usize,
}

/// States evaluated at one parameter value: the unique ground state, or
/// representatives of a degenerate ground space (both dimer coverings
/// for the J1-J2 chain, the first basis vector otherwise).
fn scan_states(model: ChainModel, n: usize, x: f64) -> Result<(Vec<(String, PureState)>, usize)> {
    match model {
        ChainModel::Xxz => {
            let gs = ground_space(&SpinChain::xxz(n, x))?;
            let k = gs.basis.len();
            let label = if k > 1 { "basis-0" } else { "ground" };
            Ok((
                vec![(label.to_string(), gs.basis.into_iter().next().unwrap())],
                k,
            ))
        }
        ChainModel::J1j2 => match j1j2_ground_state(n, x) {
            Ok(psi) => Ok((vec![("ground".into(), psi)], 1)),
            Err(Error::DegenerateGroundSpace {
                representatives,
                basis,
                ..
            }) => {
                let names = if representatives.len() == 2 && representatives != basis {
                    "dimer"
                } else {
                    "basis"
                };
                let states = representatives
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| (format!("{names}-{i}"), s))
                    .collect();
                Ok((states, basis.len()))
            }
            Err(e) => Err(e),
        },
    }
}

/// Random-basis pair localizable entanglement at every parameter value.
/// All points share the Monte Carlo seed `derive(master, [0x4c45])`.
pub fn hamiltonian_scan(cfg: &HamiltonianScanConfig, master: u64) -> Result<Vec<HamiltonianRow>> {
    let (i, j) = cfg.pair;
    if i == j || i >= cfg.n || j >= cfg.n {
        return Err(Error::InvalidArgument(format!(
            "pair ({i}, {j}) on {} sites",
            cfg.n
        )));
    }
    let part = Bipartition::complement(cfg.n, &[i, j])?;
    let oracle = FidelityOracle::separable(vec![0]);
    let seed = rng::derive(master, &[0x4c45]);
    let per_point: Vec<Vec<HamiltonianRow>> = cfg
        .params
        .par_iter()
        .map(|&x| {
            let (states, degeneracy) = scan_states(cfg.model, cfg.n, x)?;
            states
                .into_iter()
                .map(|(label, psi)| {
                    let est = localizable_quantumness(
                        &psi,
                        &part,
                        &oracle,
                        &BasisAssignment::Random,
                        LqMethod::MonteCarlo {
                            budget: cfg.samples,
                            seed,
                        },
                    )?;
                    Ok(HamiltonianRow {
                        parameter: x,
                        le: est.value,
                        std_error: est.std_error,
                        n: cfg.n,
                        seed,
                        state: label,
                        degeneracy,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magic_vanishes_without_injection() {
        let cfg = MagicScanConfig {
            ns: vec![5],
            alphas: vec![0.0, std::f64::consts::FRAC_PI_4],
            n_a: 2,
            cliffords: 3,
        };
        let rows = magic_scan(&cfg, 1).unwrap();
        assert_eq!(rows.len(), 6);
        for r in rows.iter().filter(|r| r.alpha == 0.0) {
            assert!(r.lm.abs() < 1e-9, "{}", r.lm);
        }
        let pts = magic_summary(&rows);
        assert_eq!(pts.len(), 2);
        assert!(pts[1].mean > pts[0].mean);
        // Same Clifford across alphas.
        assert_eq!(rows[0].seed, rows[3].seed);
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let cfg = MagicScanConfig {
            ns: vec![4],
            alphas: vec![1.0],
            n_a: 1,
            cliffords: 1,
        };
        assert!(magic_scan(&cfg, 0).is_err());
    }

    #[test]
    fn majumdar_ghosh_point_reports_both_dimers() {
        let cfg = HamiltonianScanConfig {
            model: ChainModel::J1j2,
            n: 8,
            params: vec![0.5],
            samples: 200,
            pair: (0, 1),
        };
        let rows = hamiltonian_scan(&cfg, 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows
            .iter()
            .all(|r| r.degeneracy == 2 && r.state.starts_with("dimer")));
        assert!((rows[0].le - 0.5).abs() < 1e-9 && rows[1].le.abs() < 1e-9);
    }

    #[test]
    fn ferromagnetic_xxz_is_unentangled() {
        let cfg = HamiltonianScanConfig {
            model: ChainModel::Xxz,
            n: 6,
            params: vec![2.0],
            samples: 100,
            pair: (0, 1),
        };
        let rows = hamiltonian_scan(&cfg, 4).unwrap();
        assert_eq!(rows[0].state, "basis-0");
        assert!(rows[0].le.abs() < 1e-12);
    }
}
