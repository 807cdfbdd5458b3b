//! Fully-inseparable entanglement from one dataset of random-Pauli rounds.
//!
//! Every round measures all qubits in uniformly random Pauli bases. For a
//! pair `(i, j)` the outcomes on the complement play the role of `z` and the
//! outcomes on the pair feed the shadow estimator, so a single dataset serves
//! all pairs. The failure probability is split evenly across pairs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ensemble::{localizable_quantumness, BasisAssignment, LqMethod};
use crate::error::{Error, Result};
use crate::estimator::{self, MoMParameters};
use crate::freeset::FidelityOracle;
use crate::qstate::{Bipartition, Outcome, PureState};
use crate::rng;

use super::sampler::{Sampler, TargetProjections};
use super::{layout_for, mom_formula, GapProvenance, InputState, Verdict, GAP_TOL};

#[derive(Clone, Debug)]
pub struct InseparableConfig {
    pub target: PureState,
    pub input: InputState,
    pub pairs: Vec<(usize, usize)>,
    pub delta: f64,
    pub seed: u64,
    pub trials: Option<u64>,
    pub lq_budget: usize,
    pub keep_dataset: bool,
}

impl InseparableConfig {
    /// Nearest-neighbour pairs `(i, i + 1)` on a chain.
    pub fn chain(target: PureState, input: impl Into<InputState>) -> Self {
        let n = target.n();
        InseparableConfig {
            target,
            input: input.into(),
            pairs: (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            delta: 0.05,
            seed: 0,
            trials: None,
            lq_budget: 4000,
            keep_dataset: true,
        }
    }
}

/// All-qubit random-Pauli outcomes, one per round (digits encode the basis).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InseparableDataset {
    pub n: usize,
    pub rounds: Vec<Outcome>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairVerdict {
    pub pair: (usize, usize),
    pub gap: f64,
    pub gap_provenance: GapProvenance,
    pub threshold: f64,
    pub estimate: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InseparableReport {
    pub verdict: Verdict,
    pub pairs: Vec<PairVerdict>,
    pub t: u64,
    pub t_formula: u64,
    pub mom: MoMParameters,
    pub delta: f64,
    pub delta_per_pair: f64,
    pub seed: u64,
    pub config_digest: Option<String>,
    pub wall_time: f64,
    #[serde(skip)]
    pub dataset: Option<InseparableDataset>,
}

fn pair_partition(n: usize, (i, j): (usize, usize)) -> Result<Bipartition> {
    if i == j {
        return Err(Error::InvalidArgument(format!(
            "pair ({i}, {j}) repeats a qubit"
        )));
    }
    Bipartition::complement(n, &[i, j])
}

/// Per-round estimates for one pair, recomputed from a stored dataset.
pub fn pair_estimates(
    dataset: &InseparableDataset,
    target: &PureState,
    pair: (usize, usize),
) -> Result<Vec<f64>> {
    let part = pair_partition(dataset.n, pair)?;
    let proj = TargetProjections::new(
        target,
        &part,
        &BasisAssignment::Random,
        Some(&FidelityOracle::separable(vec![0])),
    )?;
    estimates_for(&proj, &part, dataset)
}

fn estimates_for(
    proj: &TargetProjections,
    part: &Bipartition,
    dataset: &InseparableDataset,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    dataset
        .rounds
        .par_iter()
        .map(|o| {
            let d = o.digits();
            let z: Vec<u8> = part.b.iter().map(|&q| d[q]).collect();
            let x: Vec<u8> = part.a.iter().map(|&q| d[q]).collect();
            Ok(proj.estimate(&z, &x)?.0)
        })
        .collect()
}

pub fn run_fully_inseparable(cfg: &InseparableConfig) -> Result<InseparableReport> {
    let start = Instant::now();
    let n = cfg.target.n();
    if cfg.input.n() != n {
        return Err(Error::SizeMismatch(format!(
            "target on {n} qubits, input on {}",
            cfg.input.n()
        )));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta = {} must lie in (0, 1)",
            cfg.delta
        )));
    }
    if cfg.pairs.is_empty() {
        return Err(Error::InvalidArgument("no pairs to test".into()));
    }
    let oracle = FidelityOracle::separable(vec![0]);
    let mut gaps = Vec::with_capacity(cfg.pairs.len());
    for (k, &pair) in cfg.pairs.iter().enumerate() {
        let part = pair_partition(n, pair)?;
        let lq = localizable_quantumness(
            &cfg.target,
            &part,
            &oracle,
            &BasisAssignment::Random,
            LqMethod::Auto {
                budget: cfg.lq_budget,
                seed: rng::derive(cfg.seed, &[0x6c65, k as u64]),
            },
        )?;
        if lq.value <= GAP_TOL {
            return Err(Error::ZeroGap(Some(format!(
                "pair ({}, {})",
                pair.0, pair.1
            ))));
        }
        let prov = if lq.exact {
            GapProvenance::Exact
        } else {
            GapProvenance::MonteCarlo {
                std_error: lq.std_error,
                samples: lq.samples,
            }
        };
        gaps.push((part, lq.value, prov));
    }

    let delta_pair = cfg.delta / cfg.pairs.len() as f64;
    let min_gap = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    let sigma2 = estimator::shadow_variance_bound(2);
    let t_formula = mom_formula(sigma2, min_gap / 3.0, delta_pair).ceil() as u64;
    let mom = match cfg.trials {
        Some(t) => layout_for(t, delta_pair)?,
        None => estimator::mom_parameters(sigma2, min_gap / 3.0, delta_pair)?,
    };

    let all = Bipartition::new(n, vec![], (0..n).collect())?;
    let sampler = Sampler::new(&cfg.input, &all, &BasisAssignment::Random)?;
    let rounds: Vec<Outcome> = {
        use rayon::prelude::*;
        (0..mom.total() as u64)
            .into_par_iter()
            .map(|i| Outcome(sampler.draw(&mut rng::stream(cfg.seed, i)).z))
            .collect()
    };
    let dataset = InseparableDataset { n, rounds };

    let mut pairs = Vec::with_capacity(gaps.len());
    for (&pair, (part, gap, prov)) in cfg.pairs.iter().zip(gaps) {
        let proj =
            TargetProjections::new(&cfg.target, &part, &BasisAssignment::Random, Some(&oracle))?;
        let values = estimates_for(&proj, &part, &dataset)?;
        let estimate = estimator::median_of_means(&values, mom)?;
        let threshold = gap / 3.0;
        pairs.push(PairVerdict {
            pair,
            gap,
            gap_provenance: prov,
            threshold,
            estimate,
            verdict: Verdict::decide(estimate, threshold),
        });
    }
    let verdict = if pairs.iter().all(|p| p.verdict == Verdict::Accept) {
        Verdict::Accept
    } else {
        Verdict::Reject
    };
    Ok(InseparableReport {
        verdict,
        pairs,
        t: mom.total() as u64,
        t_formula,
        mom,
        delta: cfg.delta,
        delta_per_pair: delta_pair,
        seed: cfg.seed,
        config_digest: None,
        wall_time: start.elapsed().as_secs_f64(),
        dataset: cfg.keep_dataset.then_some(dataset),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::states;

    #[test]
    fn cluster_accepts_and_dataset_reuse_is_exact() {
        let psi = states::cluster_1d(4);
        let mut cfg = InseparableConfig::chain(psi.clone(), psi.clone());
        cfg.seed = 3;
        let r = run_fully_inseparable(&cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Accept);
        assert_eq!(r.pairs.len(), 3);
        let ds = r.dataset.as_ref().unwrap();
        assert_eq!(ds.rounds.len() as u64, r.t);
        for p in &r.pairs {
            let v = pair_estimates(ds, &psi, p.pair).unwrap();
            assert_eq!(
                estimator::median_of_means(&v, r.mom).unwrap().to_bits(),
                p.estimate.to_bits()
            );
        }
    }

    #[test]
    fn product_cut_rejects_at_the_cut() {
        let psi = states::cluster_1d(4);
        let rho = states::bell().tensor(&states::bell());
        let mut cfg = InseparableConfig::chain(psi, rho);
        cfg.seed = 5;
        let r = run_fully_inseparable(&cfg).unwrap();
        assert_eq!(r.pairs[1].verdict, Verdict::Reject);
        assert_eq!(r.verdict, Verdict::Reject);
    }

    #[test]
    fn zero_gap_names_the_pair() {
        let psi = states::bell().tensor(&PureState::zero(2));
        let cfg = InseparableConfig::chain(psi.clone(), psi);
        match run_fully_inseparable(&cfg) {
            Err(Error::ZeroGap(Some(m))) => assert!(m.contains("(1, 2)"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_qubits_match_the_basic_protocol_statistic() {
        let psi = states::bell();
        let mut cfg = InseparableConfig::chain(psi.clone(), psi.clone());
        cfg.trials = Some(600);
        let r = run_fully_inseparable(&cfg).unwrap();
        // With no complement, every round is a shadow of the pair.
        let v = pair_estimates(r.dataset.as_ref().unwrap(), &psi, (0, 1)).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.3, "{mean}");
        assert!((r.pairs[0].gap - 0.5).abs() < 1e-12);
    }
}
