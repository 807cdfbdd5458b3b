//! Circuit-complexity certification on the block geometry.
//!
//! The unitary variant is the basic protocol with the entanglement-threshold
//! oracle over the `L|R` cut. The measurement-assisted variant estimates the
//! thresholded witness `O~ = sum_z [t + (1 - t) 1(Fid(psi_z) <= t)] psi_z ⊗ |z><z|`,
//! whose value on free states is at most `a = t + (1 - p')(1 - t)` and on the
//! target is `b = t + (1 - t) Pr[Fid <= t]`; the threshold sits a third of
//! the way from `a` to `b`.
//!
//! Both variants measure `B` in the computational basis.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ensemble::{table_fidelities, BasisAssignment, MixedProjectionTable, ProjectionTable};
use crate::error::{Error, Result};
use crate::estimator;
use crate::freeset::{thresholded_witness_weight, FidelityOracle, ThresholdVariant};
use crate::linalg;
use crate::models::LatticeGeometry;
use crate::qstate::{self, Bipartition, PureState, QuantumState};

use super::sampler::{Sampler, TargetProjections};
use super::{
    certify_with, mom_formula, run_certification, CertificationConfig, CertificationReport,
    Decision, GapProvenance, InputState, SampleSizeRule, ThresholdRule, Verdict,
};

/// Largest state the complexity engine simulates.
pub const MAX_COMPLEXITY_QUBITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplexityVariant {
    Unitary,
    MeasurementAssisted,
}

impl ComplexityVariant {
    /// Smallest `w / d` for which the soundness argument holds.
    pub fn min_eta(self) -> f64 {
        match self {
            ComplexityVariant::Unitary => 4.0,
            ComplexityVariant::MeasurementAssisted => 6.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ComplexityConfig {
    pub target: PureState,
    pub input: InputState,
    pub dims: Vec<usize>,
    /// Circuit depth being certified against.
    pub d: usize,
    /// `w / d`.
    pub eta: f64,
    /// Entanglement fraction: branches count as complex when
    /// `E_{L|R} >= c |L| + 1`.
    pub c: f64,
    pub variant: ComplexityVariant,
    pub delta: f64,
    pub seed: u64,
    pub trials: Option<u64>,
    /// Permits `eta` below the valid range; the report is flagged.
    pub toy: bool,
    /// Toy only: replaces the entanglement-threshold oracle.
    pub oracle_override: Option<FidelityOracle>,
    /// Toy only: overrides for `p'` and `t`.
    pub p_prime: Option<f64>,
    pub t: Option<f64>,
    pub keep_trials: bool,
}

impl ComplexityConfig {
    pub fn new(
        target: PureState,
        input: impl Into<InputState>,
        dims: &[usize],
        d: usize,
        eta: f64,
        variant: ComplexityVariant,
    ) -> Self {
        ComplexityConfig {
            target,
            input: input.into(),
            dims: dims.to_vec(),
            d,
            eta,
            c: 0.9,
            variant,
            delta: 0.05,
            seed: 0,
            trials: None,
            toy: false,
            oracle_override: None,
            p_prime: None,
            t: None,
            keep_trials: true,
        }
    }
}

/// Checks the parameters and builds the centered geometry. Returns whether
/// the run is outside the valid range (toy mode).
pub fn validate_complexity_geometry(
    dims: &[usize],
    d: usize,
    eta: f64,
    variant: ComplexityVariant,
    toy: bool,
) -> Result<(LatticeGeometry, bool)> {
    if d == 0 || eta.is_nan() || eta <= 0.0 {
        return Err(Error::GeometryInvalid(format!(
            "need d >= 1 and eta > 0 (got d = {d}, eta = {eta})"
        )));
    }
    let wf = eta * d as f64;
    let w = wf.round() as usize;
    if (wf - w as f64).abs() > 1e-9 || w == 0 {
        return Err(Error::GeometryInvalid(format!(
            "w = eta d = {wf} is not a positive integer"
        )));
    }
    let n_a = (2 * w).pow(dims.len() as u32);
    if n_a > MAX_COMPLEXITY_QUBITS {
        return Err(Error::GeometryInvalid(format!(
            "region A has (2w)^{} = {n_a} qubits for w = {w}; the simulator handles at most {MAX_COMPLEXITY_QUBITS}",
            dims.len()
        )));
    }
    let n: usize = dims.iter().product();
    if n > MAX_COMPLEXITY_QUBITS {
        return Err(Error::GeometryInvalid(format!(
            "lattice {dims:?} has {n} qubits (limit {MAX_COMPLEXITY_QUBITS})"
        )));
    }
    let unsound = eta <= variant.min_eta();
    if unsound && !toy {
        return Err(Error::GeometryInvalid(format!(
            "eta = {eta} is outside the valid range eta > {} for the {variant:?} variant; enable toy mode to run anyway",
            variant.min_eta()
        )));
    }
    Ok((LatticeGeometry::centered(dims, w, d)?, unsound))
}

/// Derived constants of the measurement-assisted witness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessParameters {
    /// Probability of branches with `E_{L|R} >= c |L| + 1`.
    pub p: f64,
    pub p_prime: f64,
    pub t: f64,
    /// Soundness bound.
    pub a: f64,
    /// Value on the target.
    pub b: f64,
    pub pr_fid_le_t: f64,
    pub gap: f64,
    pub threshold: f64,
}

fn ma_oracle(geom: &LatticeGeometry, p_prime: f64) -> FidelityOracle {
    FidelityOracle::EntanglementThreshold {
        w: geom.w,
        d: geom.d,
        variant: ThresholdVariant::PLikely { p_prime },
        left: geom.left_positions(),
    }
}

/// `p`, `p'`, `t`, `a`, `b` for the target. `p'` and `t` follow the
/// closed forms unless overridden.
pub fn witness_parameters(
    psi: &PureState,
    geom: &LatticeGeometry,
    c: f64,
    p_prime: Option<f64>,
    t: Option<f64>,
    oracle_override: Option<&FidelityOracle>,
) -> Result<(WitnessParameters, FidelityOracle)> {
    let part = geom.partition();
    let table = ProjectionTable::new(psi, &part, &BasisAssignment::FixedZ)?;
    let left = geom.left_positions();
    let cut = Bipartition::complement(part.n_a(), &left)?;
    let level = c * left.len() as f64 + 1.0;
    let p: f64 = table
        .support()
        .filter(|&x| qstate::entanglement_entropy(&table.state(x).unwrap(), &cut) >= level)
        .map(|x| table.probability(x))
        .sum();
    let eta = geom.w as f64 / geom.d as f64;
    let p_prime = p_prime.unwrap_or(1.0 - (p + 6.0 / (eta * c)) / 2.0);
    if !(p_prime > 0.0 && p_prime < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "p' = {p_prime} outside (0, 1); supply an override in toy mode"
        )));
    }
    let t = t.unwrap_or_else(|| {
        let inner = c - 6.0 / (eta * (1.0 - p_prime));
        1.0 - 0.25 * inner * inner
    });
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("t = {t} outside (0, 1)")));
    }
    let oracle = oracle_override
        .cloned()
        .unwrap_or_else(|| ma_oracle(geom, p_prime));
    let pr: f64 = table_fidelities(&table, &oracle)?
        .into_iter()
        .filter(|&(_, f)| f <= t)
        .map(|(x, _)| table.probability(x))
        .sum();
    let a = t + (1.0 - p_prime) * (1.0 - t);
    let b = t + (1.0 - t) * pr;
    let gap = b - a;
    Ok((
        WitnessParameters {
            p,
            p_prime,
            t,
            a,
            b,
            pr_fid_le_t: pr,
            gap,
            threshold: a + gap / 3.0,
        },
        oracle,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessValue {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
}

/// `tr(O~ rho)` for the thresholded witness of `psi` with `B` measured in
/// the computational basis. Exact when `B` is enumerable; otherwise a Monte
/// Carlo mean over `budget` simulated rounds.
pub fn evaluate_threshold_witness(
    psi: &PureState,
    rho: &QuantumState,
    part: &Bipartition,
    oracle: &FidelityOracle,
    t: f64,
    budget: usize,
    seed: u64,
) -> Result<WitnessValue> {
    if rho.n() != psi.n() {
        return Err(Error::SizeMismatch(format!(
            "rho on {} qubits, psi on {}",
            rho.n(),
            psi.n()
        )));
    }
    let basis = BasisAssignment::FixedZ;
    match ProjectionTable::new(psi, part, &basis) {
        Ok(target) => {
            let fids = table_fidelities(&target, oracle)?;
            let value: f64 = match rho {
                QuantumState::Pure(phi) => {
                    let exp = ProjectionTable::new(phi, part, &basis)?;
                    fids.iter()
                        .map(|&(x, f)| {
                            let ov = linalg::inner(target.raw(x), exp.raw(x)).norm_sqr()
                                / target.probability(x);
                            thresholded_witness_weight(f, t) * ov
                        })
                        .sum()
                }
                QuantumState::Mixed(m) => {
                    let exp = MixedProjectionTable::new(m, part, &basis)?;
                    fids.iter()
                        .map(|&(x, f)| {
                            thresholded_witness_weight(f, t) * exp.raw_overlap(x, target.raw(x))
                                / target.probability(x)
                        })
                        .sum()
                }
            };
            Ok(WitnessValue {
                value,
                std_error: 0.0,
                exact: true,
            })
        }
        Err(Error::TooLargeToEnumerate(_)) => {
            if budget < 2 {
                return Err(Error::InvalidArgument(format!(
                    "Monte Carlo budget {budget} must be at least 2"
                )));
            }
            let sampler = Sampler::new(&InputState::State(rho.clone()), part, &basis)?;
            let proj = TargetProjections::new(psi, part, &basis, Some(oracle))?
                .with_weights(move |f| thresholded_witness_weight(f, t));
            let out = super::run_rounds(&sampler, &proj, budget, seed, 0, false)?;
            let (value, std_error) = crate::ensemble::mean_and_se(&out.estimates);
            Ok(WitnessValue {
                value,
                std_error,
                exact: false,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexityReport {
    #[serde(flatten)]
    pub report: CertificationReport,
    pub variant: ComplexityVariant,
    pub eta: f64,
    pub w: usize,
    pub d: usize,
    pub c: f64,
    pub oracle: String,
    pub witness: Option<WitnessParameters>,
}

fn zero_gap_report(
    gap: f64,
    provenance: GapProvenance,
    cfg: &ComplexityConfig,
    start: Instant,
) -> CertificationReport {
    CertificationReport {
        verdict: Verdict::Reject,
        estimate: 0.0,
        threshold: 0.0,
        t: 0,
        t_formula: 0,
        mom: estimator::MoMParameters { b: 0, k: 0 },
        gap,
        gap_provenance: provenance,
        variance: 0.0,
        sample_size_rule: SampleSizeRule::Formula,
        delta: cfg.delta,
        seed: cfg.seed,
        undefined_branches: 0,
        unsound_toy: false,
        zero_gap: true,
        config_digest: None,
        wall_time: start.elapsed().as_secs_f64(),
        trials: Vec::new(),
    }
}

pub fn run_complexity_cert(cfg: &ComplexityConfig) -> Result<ComplexityReport> {
    let start = Instant::now();
    let (geom, unsound) =
        validate_complexity_geometry(&cfg.dims, cfg.d, cfg.eta, cfg.variant, cfg.toy)?;
    if cfg.target.n() != geom.n() {
        return Err(Error::SizeMismatch(format!(
            "target on {} qubits, lattice has {}",
            cfg.target.n(),
            geom.n()
        )));
    }
    if !cfg.toy && (cfg.oracle_override.is_some() || cfg.p_prime.is_some() || cfg.t.is_some()) {
        return Err(Error::InvalidArgument(
            "oracle and witness overrides require toy mode".into(),
        ));
    }
    if !(cfg.c > 0.0 && cfg.c <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "c = {} must lie in (0, 1]",
            cfg.c
        )));
    }
    let part = geom.partition();
    let (mut report, oracle, witness) = match cfg.variant {
        ComplexityVariant::Unitary => {
            let oracle =
                cfg.oracle_override
                    .clone()
                    .unwrap_or(FidelityOracle::EntanglementThreshold {
                        w: geom.w,
                        d: geom.d,
                        variant: ThresholdVariant::Unitary,
                        left: geom.left_positions(),
                    });
            let mut pc = CertificationConfig::new(
                cfg.target.clone(),
                cfg.input.clone(),
                part,
                oracle.clone(),
            );
            pc.delta = cfg.delta;
            pc.seed = cfg.seed;
            pc.trials = cfg.trials;
            pc.threshold = ThresholdRule::LqOverThree;
            pc.keep_trials = cfg.keep_trials;
            let report = match run_certification(&pc) {
                Ok(r) => r,
                Err(Error::ZeroGap(_)) => zero_gap_report(0.0, GapProvenance::Exact, cfg, start),
                Err(e) => return Err(e),
            };
            (report, oracle, None)
        }
        ComplexityVariant::MeasurementAssisted => {
            let (wp, oracle) = witness_parameters(
                &cfg.target,
                &geom,
                cfg.c,
                cfg.p_prime,
                cfg.t,
                cfg.oracle_override.as_ref(),
            )?;
            let report = if wp.gap <= super::GAP_TOL {
                zero_gap_report(wp.gap, GapProvenance::Exact, cfg, start)
            } else {
                let basis = BasisAssignment::FixedZ;
                let sampler = Sampler::new(&cfg.input, &part, &basis)?;
                let t = wp.t;
                let proj = TargetProjections::new(&cfg.target, &part, &basis, Some(&oracle))?
                    .with_weights(move |f| thresholded_witness_weight(f, t));
                certify_with(
                    &sampler,
                    &proj,
                    Decision {
                        epsilon: wp.gap / 3.0,
                        threshold: wp.threshold,
                        formula: mom_formula,
                    },
                    wp.gap,
                    GapProvenance::Exact,
                    cfg.delta,
                    cfg.seed,
                    cfg.trials,
                    SampleSizeRule::Formula,
                    cfg.keep_trials,
                )?
            };
            (report, oracle, Some(wp))
        }
    };
    report.unsound_toy = unsound;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(ComplexityReport {
        report,
        variant: cfg.variant,
        eta: cfg.eta,
        w: geom.w,
        d: geom.d,
        c: cfg.c,
        oracle: oracle.describe(),
        witness,
    })
}
