//! Certification engines built on the shadow estimator: the basic
//! conditional-fidelity protocol, the fully-inseparable multi-pair test,
//! fidelity certification, complexity certification and the analytic
//! depolarizing validators.

mod analytic;
mod complexity;
mod fidelity;
mod inseparable;
pub mod sampler;

pub use analytic::{analytic_eta_depolarized, depolarized_terms, DepolarizedTerms};
pub use complexity::{
    evaluate_threshold_witness, run_complexity_cert, validate_complexity_geometry,
    witness_parameters, ComplexityConfig, ComplexityReport, ComplexityVariant, WitnessParameters,
    WitnessValue,
};
pub use fidelity::{run_fidelity_cert, FidelityCertConfig};
pub use inseparable::{
    pair_estimates, run_fully_inseparable, InseparableConfig, InseparableDataset,
    InseparableReport, PairVerdict,
};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{localizable_quantumness, BasisAssignment, LqMethod};
use crate::error::{Error, Result};
use crate::estimator::{self, MoMParameters};
use crate::freeset::FidelityOracle;
use crate::qstate::{basis_string, Bipartition, DensityState, Outcome, PureState, QuantumState};
use crate::rng;
use sampler::{Sampler, TargetProjections};

/// The experimental state.
#[derive(Clone, Debug)]
pub enum InputState {
    State(QuantumState),
    /// `(1 - p) psi + p I / 2^n`, simulated as the exact branch mixture.
    Depolarized {
        psi: PureState,
        p: f64,
    },
}

impl InputState {
    pub fn n(&self) -> usize {
        match self {
            InputState::State(s) => s.n(),
            InputState::Depolarized { psi, .. } => psi.n(),
        }
    }
}

impl From<PureState> for InputState {
    fn from(p: PureState) -> Self {
        InputState::State(p.into())
    }
}

impl From<DensityState> for InputState {
    fn from(m: DensityState) -> Self {
        InputState::State(m.into())
    }
}

impl From<QuantumState> for InputState {
    fn from(s: QuantumState) -> Self {
        InputState::State(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn decide(estimate: f64, threshold: f64) -> Self {
        if estimate > threshold {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum ThresholdRule {
    /// `eta* = gap / 3`.
    LqOverThree,
    Explicit(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum SampleSizeRule {
    /// Worst-case variance `4^{n_A} + 1`.
    Formula,
    /// Variance measured on `pilot` extra rounds (independent streams).
    EmpiricalVariance { pilot: usize },
}

/// Where the certification gap came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GapProvenance {
    Exact,
    MonteCarlo { std_error: f64, samples: usize },
    Supplied,
}

/// One protocol round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub basis_b: String,
    pub outcome_b: Outcome,
    pub shadow: Outcome,
    pub estimate: f64,
    pub offset: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificationReport {
    pub verdict: Verdict,
    pub estimate: f64,
    pub threshold: f64,
    /// Rounds performed (`b * k`).
    pub t: u64,
    /// Closed-form sample size for the gap and variance used.
    pub t_formula: u64,
    pub mom: MoMParameters,
    pub gap: f64,
    pub gap_provenance: GapProvenance,
    pub variance: f64,
    pub sample_size_rule: SampleSizeRule,
    pub delta: f64,
    pub seed: u64,
    /// Rounds whose outcome on `B` has no target projection (contribute 0).
    pub undefined_branches: u64,
    pub unsound_toy: bool,
    pub zero_gap: bool,
    pub config_digest: Option<String>,
    pub wall_time: f64,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
}

/// Inputs of the basic protocol.
#[derive(Clone, Debug)]
pub struct CertificationConfig {
    pub target: PureState,
    pub input: InputState,
    pub partition: Bipartition,
    pub oracle: FidelityOracle,
    pub basis: BasisAssignment,
    pub delta: f64,
    pub threshold: ThresholdRule,
    /// Known gap; computed from the target when absent.
    pub gap: Option<f64>,
    pub seed: u64,
    /// Overrides the number of rounds (block count still follows `delta`).
    pub trials: Option<u64>,
    pub sample_size: SampleSizeRule,
    /// Monte Carlo budget when the gap is not enumerable.
    pub lq_budget: usize,
    pub keep_trials: bool,
}

impl CertificationConfig {
    pub fn new(
        target: PureState,
        input: impl Into<InputState>,
        partition: Bipartition,
        oracle: FidelityOracle,
    ) -> Self {
        CertificationConfig {
            target,
            input: input.into(),
            partition,
            oracle,
            basis: BasisAssignment::FixedZ,
            delta: 0.05,
            threshold: ThresholdRule::LqOverThree,
            gap: None,
            seed: 0,
            trials: None,
            sample_size: SampleSizeRule::Formula,
            lq_budget: 4000,
            keep_trials: true,
        }
    }
}

/// Gaps at or below this are treated as zero (rounding in the oracle).
pub const GAP_TOL: f64 = 1e-12;

/// Median-of-means layout for an explicit round count.
pub(crate) fn layout_for(trials: u64, delta: f64) -> Result<MoMParameters> {
    let k = estimator::mom_parameters(1.0, 1.0, delta)?.k;
    let b = (trials as usize).div_ceil(k).max(1);
    Ok(MoMParameters { b, k })
}

pub(crate) struct RoundOutput {
    pub estimates: Vec<f64>,
    pub records: Vec<TrialRecord>,
    pub undefined: u64,
}

/// Runs rounds `offset..offset + t` with streams `(seed, index)`.
pub(crate) fn run_rounds(
    sampler: &Sampler,
    target: &TargetProjections,
    t: usize,
    seed: u64,
    offset: u64,
    keep: bool,
) -> Result<RoundOutput> {
    let rows: Vec<(f64, bool, Option<TrialRecord>)> = (0..t as u64)
        .into_par_iter()
        .map(|i| {
            let trial = offset + i;
            let mut r = rng::stream(seed, trial);
            let d = sampler.draw(&mut r);
            let (estimate, off, defined) = target.estimate(&d.z, &d.x)?;
            let rec = keep.then(|| TrialRecord {
                trial,
                basis_b: basis_string(&d.bases_b),
                outcome_b: Outcome(d.z),
                shadow: Outcome(d.x),
                estimate,
                offset: off,
            });
            Ok((estimate, defined, rec))
        })
        .collect::<Result<_>>()?;
    let undefined = rows.iter().filter(|r| !r.1).count() as u64;
    let estimates = rows.iter().map(|r| r.0).collect();
    let records = rows.into_iter().filter_map(|r| r.2).collect();
    Ok(RoundOutput {
        estimates,
        records,
        undefined,
    })
}

/// Recomputes a logged round's estimate from the target alone.
pub fn recompute_estimate(
    record: &TrialRecord,
    target: &PureState,
    partition: &Bipartition,
    oracle: &FidelityOracle,
) -> Result<f64> {
    let proj = TargetProjections::new(
        target,
        partition,
        &BasisAssignment::Fixed(record.outcome_b.bases()),
        Some(oracle),
    )?;
    Ok(proj
        .estimate(record.outcome_b.digits(), record.shadow.digits())?
        .0)
}

/// Computes the gap for `cfg`, or uses the supplied one.
fn resolve_gap(cfg: &CertificationConfig) -> Result<(f64, GapProvenance)> {
    if let Some(g) = cfg.gap {
        return Ok((g, GapProvenance::Supplied));
    }
    let lq = localizable_quantumness(
        &cfg.target,
        &cfg.partition,
        &cfg.oracle,
        &cfg.basis,
        LqMethod::Auto {
            budget: cfg.lq_budget,
            seed: rng::derive(cfg.seed, &[0x6c71]),
        },
    )?;
    let prov = if lq.exact {
        GapProvenance::Exact
    } else {
        GapProvenance::MonteCarlo {
            std_error: lq.std_error,
            samples: lq.samples,
        }
    };
    Ok((lq.value, prov))
}

/// Shared tail of every single-observable certification: choose the
/// sample size, run the rounds, aggregate and decide.
pub(crate) struct Decision {
    pub epsilon: f64,
    pub threshold: f64,
    /// `t_formula` for the worst-case variance, given `sigma^2`.
    pub formula: fn(f64, f64, f64) -> f64,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn certify_with(
    sampler: &Sampler,
    target: &TargetProjections,
    decision: Decision,
    gap: f64,
    gap_provenance: GapProvenance,
    delta: f64,
    seed: u64,
    trials: Option<u64>,
    rule: SampleSizeRule,
    keep: bool,
) -> Result<CertificationReport> {
    let start = Instant::now();
    let n_a = target.n_a();
    let variance = match rule {
        SampleSizeRule::Formula => estimator::shadow_variance_bound(n_a),
        SampleSizeRule::EmpiricalVariance { pilot } => {
            let out = run_rounds(
                sampler,
                target,
                pilot.max(2),
                rng::derive(seed, &[0x70696c6f74]),
                0,
                false,
            )?;
            estimator::sample_variance(&out.estimates).max(1e-12)
        }
    };
    let t_formula = (decision.formula)(variance, decision.epsilon, delta).ceil() as u64;
    let mom = match trials {
        Some(t) => layout_for(t, delta)?,
        None => estimator::mom_parameters(variance, decision.epsilon, delta)?,
    };
    let out = run_rounds(sampler, target, mom.total(), seed, 0, keep)?;
    let estimate = estimator::median_of_means(&out.estimates, mom)?;
    Ok(CertificationReport {
        verdict: Verdict::decide(estimate, decision.threshold),
        estimate,
        threshold: decision.threshold,
        t: mom.total() as u64,
        t_formula,
        mom,
        gap,
        gap_provenance,
        variance,
        sample_size_rule: rule,
        delta,
        seed,
        undefined_branches: out.undefined,
        unsound_toy: false,
        zero_gap: false,
        config_digest: None,
        wall_time: start.elapsed().as_secs_f64(),
        trials: out.records,
    })
}

/// `27 ln(1/delta) sigma^2 / eps^2`, which is the median-of-means budget
/// `B K` before rounding. With `eps = LQ / 3` it equals
/// `243 ln(1/delta) sigma^2 / LQ^2`.
pub(crate) fn mom_formula(sigma2: f64, eps: f64, delta: f64) -> f64 {
    27.0 * (1.0 / delta).ln() * sigma2 / (eps * eps)
}

/// Conditional-fidelity certification: measure `B`, shadow `A`, subtract the
/// free-set offset, median-of-means, compare with the threshold.
pub fn run_certification(cfg: &CertificationConfig) -> Result<CertificationReport> {
    let start = Instant::now();
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta = {} must lie in (0, 1)",
            cfg.delta
        )));
    }
    if cfg.target.n() != cfg.partition.n() || cfg.input.n() != cfg.partition.n() {
        return Err(Error::SizeMismatch(format!(
            "target on {} qubits, input on {}, partition on {}",
            cfg.target.n(),
            cfg.input.n(),
            cfg.partition.n()
        )));
    }
    let (gap, provenance) = resolve_gap(cfg)?;
    if gap <= GAP_TOL {
        return Err(Error::ZeroGap(Some(format!(
            "localizable quantumness {gap:.3e}"
        ))));
    }
    let threshold = match cfg.threshold {
        ThresholdRule::LqOverThree => gap / 3.0,
        ThresholdRule::Explicit(t) => t,
    };
    let sampler = Sampler::new(&cfg.input, &cfg.partition, &cfg.basis)?;
    let target =
        TargetProjections::new(&cfg.target, &cfg.partition, &cfg.basis, Some(&cfg.oracle))?;
    let mut report = certify_with(
        &sampler,
        &target,
        Decision {
            epsilon: gap / 3.0,
            threshold,
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

/// Writes `trials` as JSON lines after a header line.
pub fn write_trials_jsonl<W: std::io::Write>(
    mut w: W,
    header: &serde_json::Value,
    trials: &[TrialRecord],
) -> Result<()> {
    writeln!(w, "{}", serde_json::to_string(header)?)?;
    for t in trials {
        writeln!(w, "{}", serde_json::to_string(t)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::exact_conditional_fidelity;
    use crate::models::{depolarize_matrix, haar_state};
    use crate::qstate::states;
    use crate::rng::stream;

    fn bell_zero() -> (PureState, Bipartition, FidelityOracle) {
        (
            states::bell().tensor(&PureState::zero(1)),
            Bipartition::leading(3, 2),
            FidelityOracle::separable(vec![0]),
        )
    }

    #[test]
    fn accepts_target_and_rejects_product() {
        let (psi, part, oracle) = bell_zero();
        let mut cfg =
            CertificationConfig::new(psi.clone(), psi.clone(), part.clone(), oracle.clone());
        cfg.seed = 7;
        let r = run_certification(&cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Accept);
        assert!((r.gap - 0.5).abs() < 1e-12);
        assert_eq!(r.t, r.mom.total() as u64);
        assert!(r.t >= r.t_formula);
        assert_eq!(r.trials.len() as u64, r.t);
        cfg.input = PureState::zero(3).into();
        let r = run_certification(&cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Reject);
    }

    #[test]
    fn estimate_is_seed_deterministic() {
        let (psi, part, oracle) = bell_zero();
        let mut cfg =
            CertificationConfig::new(psi.clone(), depolarize_matrix(&psi, 0.1), part, oracle);
        cfg.trials = Some(3000);
        cfg.seed = 11;
        let a = run_certification(&cfg).unwrap();
        let b = run_certification(&cfg).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    }

    #[test]
    fn records_recompute_bit_exactly() {
        let mut r = stream(40, 0);
        let psi = haar_state(4, &mut r);
        let part = Bipartition::complement(4, &[0, 2]).unwrap();
        let oracle = FidelityOracle::separable(vec![0]);
        let mut cfg =
            CertificationConfig::new(psi.clone(), psi.clone(), part.clone(), oracle.clone());
        cfg.basis = BasisAssignment::Random;
        cfg.trials = Some(200);
        let rep = run_certification(&cfg).unwrap();
        for t in rep.trials.iter().take(50) {
            let e = recompute_estimate(t, &psi, &part, &oracle).unwrap();
            assert_eq!(e.to_bits(), t.estimate.to_bits());
        }
    }

    #[test]
    fn mean_estimate_is_unbiased() {
        let mut r = stream(41, 0);
        let psi = haar_state(4, &mut r);
        let rho: QuantumState = depolarize_matrix(&haar_state(4, &mut r), 0.2).into();
        let part = Bipartition::complement(4, &[1, 3]).unwrap();
        let oracle = FidelityOracle::separable(vec![0]);
        for basis in [BasisAssignment::FixedZ, BasisAssignment::Random] {
            let eta = exact_conditional_fidelity(&rho, &psi, &part, &oracle, &basis).unwrap();
            let sampler = Sampler::new(&rho.clone().into(), &part, &basis).unwrap();
            let target = TargetProjections::new(&psi, &part, &basis, Some(&oracle)).unwrap();
            let out = run_rounds(&sampler, &target, 100_000, 5, 0, false).unwrap();
            let (mean, se) = crate::ensemble::mean_and_se(&out.estimates);
            assert!((mean - eta).abs() < 4.0 * se, "{mean} ± {se} vs {eta}");
            assert!(estimator::sample_variance(&out.estimates) <= 17.0);
        }
    }

    #[test]
    fn zero_gap_is_an_error() {
        let psi = states::ghz(4);
        let part = Bipartition::leading(4, 2);
        let cfg =
            CertificationConfig::new(psi.clone(), psi, part, FidelityOracle::separable(vec![0]));
        assert!(matches!(run_certification(&cfg), Err(Error::ZeroGap(_))));
    }

    #[test]
    fn empirical_variance_rule_shrinks_t() {
        let (psi, part, oracle) = bell_zero();
        let mut cfg = CertificationConfig::new(psi.clone(), psi, part, oracle);
        cfg.sample_size = SampleSizeRule::EmpiricalVariance { pilot: 2000 };
        cfg.keep_trials = false;
        let r = run_certification(&cfg).unwrap();
        assert!(r.variance < 17.0);
        assert_eq!(r.verdict, Verdict::Accept);
        assert!(r.trials.is_empty());
    }
}
