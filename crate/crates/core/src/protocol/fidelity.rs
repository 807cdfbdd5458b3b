//! Fidelity certification through the fidelity observable.
//!
//! Rounds are the same as in the basic protocol with random bases on `B`,
//! but the estimate carries no free-set offset, so its mean is `tr(O rho)`.
//! Accept when the median of means exceeds `1 - (1 - c) gap (1 - F)`.

use std::time::Instant;

use crate::ensemble::BasisAssignment;
use crate::error::{Error, Result};
use crate::qstate::{Bipartition, PureState};
use crate::spectral;

use super::sampler::{Sampler, TargetProjections};
use super::{
    certify_with, mom_formula, CertificationReport, Decision, GapProvenance, InputState,
    SampleSizeRule, GAP_TOL,
};

#[derive(Clone, Debug)]
pub struct FidelityCertConfig {
    pub target: PureState,
    pub input: InputState,
    /// `A` is the leading `n_a` qubits.
    pub n_a: usize,
    /// Spectral gap of the fidelity observable; computed when absent.
    pub gap: Option<f64>,
    pub fidelity: f64,
    pub c: f64,
    pub delta: f64,
    pub seed: u64,
    pub trials: Option<u64>,
    pub sample_size: SampleSizeRule,
    pub keep_trials: bool,
}

impl FidelityCertConfig {
    pub fn new(target: PureState, input: impl Into<InputState>, n_a: usize) -> Self {
        FidelityCertConfig {
            target,
            input: input.into(),
            n_a,
            gap: None,
            fidelity: 0.5,
            c: 0.25,
            delta: 0.05,
            seed: 0,
            trials: None,
            sample_size: SampleSizeRule::Formula,
            keep_trials: true,
        }
    }
}

pub fn run_fidelity_cert(cfg: &FidelityCertConfig) -> Result<CertificationReport> {
    let start = Instant::now();
    if !(cfg.c > 0.0 && cfg.c < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "c = {} must lie in (0, 1/2)",
            cfg.c
        )));
    }
    if !(cfg.fidelity > 0.0 && cfg.fidelity < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "F = {} must lie in (0, 1)",
            cfg.fidelity
        )));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta = {} must lie in (0, 1)",
            cfg.delta
        )));
    }
    let n = cfg.target.n();
    if cfg.input.n() != n {
        return Err(Error::SizeMismatch(format!(
            "target on {n} qubits, input on {}",
            cfg.input.n()
        )));
    }
    let (gap, provenance) = match cfg.gap {
        Some(g) => (g, GapProvenance::Supplied),
        None => (
            spectral::fidelity_gap(&cfg.target, cfg.n_a)?,
            GapProvenance::Exact,
        ),
    };
    if gap <= GAP_TOL {
        return Err(Error::ZeroGap(Some(format!("spectral gap {gap:.3e}"))));
    }
    let part = Bipartition::leading(n, cfg.n_a);
    let basis = BasisAssignment::Random;
    let sampler = Sampler::new(&cfg.input, &part, &basis)?;
    let target = TargetProjections::new(&cfg.target, &part, &basis, None)?;
    let margin = gap * (1.0 - cfg.fidelity);
    let mut report = certify_with(
        &sampler,
        &target,
        Decision {
            epsilon: cfg.c * margin,
            threshold: 1.0 - (1.0 - cfg.c) * margin,
            formula: mom_formula,
        },
        gap,
        provenance,
        cfg.delta,
        cfg.seed,
        cfg.trials,
        cfg.sample_size,
        cfg.keep_trials,
    )?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}
