//! Experiment configuration files.
//!
//! One JSON document per experiment:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "seed": 7,
//!   "repetitions": 1,
//!   "experiment": { "kind": "magic-scan", "params": { "ns": [8], "alphas": [0.0], "n_a": 3, "cliffords": 5 } }
//! }
//! ```
//!
//! Unknown keys are rejected everywhere, and parse errors carry the path of
//! the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::BasisAssignment;
use crate::error::{Error, Result};
use crate::freeset::{FidelityOracle, ThresholdVariant};
use crate::models::{
    brickwork_circuit, haar_state, j1j2_ground_state, magic_injection_state, run_circuit,
    xxz_ground_state,
};
use crate::protocol::{ComplexityVariant, InputState, SampleSizeRule, ThresholdRule};
use crate::qstate::{states, Pauli, PureState};
use crate::rng;
use crate::scans::{HamiltonianScanConfig, MagicScanConfig};
use crate::spectral::GapScanConfig;
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub experiment: Experiment,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "kebab-case",
    deny_unknown_fields
)]
pub enum Experiment {
    Certify(CertifyParams),
    FullyInseparable(InseparableParams),
    FidelityCert(FidelityParams),
    ComplexityCert(ComplexityParams),
    MagicScan(MagicScanConfig),
    HamiltonianScan(HamiltonianScanConfig),
    GapScan(GapScanConfig),
    PropertySuite(SuiteParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Certify(_) => "certify",
            Experiment::FullyInseparable(_) => "fully-inseparable",
            Experiment::FidelityCert(_) => "fidelity-cert",
            Experiment::ComplexityCert(_) => "complexity-cert",
            Experiment::MagicScan(_) => "magic-scan",
            Experiment::HamiltonianScan(_) => "hamiltonian-scan",
            Experiment::GapScan(_) => "gap-scan",
            Experiment::PropertySuite(_) => "property-suite",
        }
    }
}

/// A pure state built from a named family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Zero {
        n: usize,
    },
    Plus {
        n: usize,
    },
    Bell,
    Ghz {
        n: usize,
    },
    Cluster {
        n: usize,
    },
    Haar {
        n: usize,
        seed: u64,
    },
    Brickwork {
        dims: Vec<usize>,
        depth: usize,
        seed: u64,
    },
    Magic {
        n: usize,
        alpha: f64,
        seed: u64,
    },
    Xxz {
        n: usize,
        anisotropy: f64,
    },
    J1j2 {
        n: usize,
        j2: f64,
    },
    /// Tensor product, first factor on the leading qubits.
    Product {
        factors: Vec<StateSpec>,
    },
    /// A Haar-random state orthogonal to `to`.
    Orthogonal {
        to: Box<StateSpec>,
        seed: u64,
    },
    Amplitudes {
        n: usize,
        amplitudes: Vec<[f64; 2]>,
    },
}

impl StateSpec {
    pub fn build(&self) -> Result<PureState> {
        Ok(match self {
            StateSpec::Zero { n } => PureState::zero(*n),
            StateSpec::Plus { n } => states::plus(*n),
            StateSpec::Bell => states::bell(),
            StateSpec::Ghz { n } => states::ghz(*n),
            StateSpec::Cluster { n } => states::cluster_1d(*n),
            StateSpec::Haar { n, seed } => haar_state(*n, &mut rng::stream(*seed, 0)),
            StateSpec::Brickwork { dims, depth, seed } => {
                let mut r = rng::stream(*seed, 0);
                let spec = brickwork_circuit(dims, *depth, &mut r);
                run_circuit(&spec, &PureState::zero(spec.n), &mut r)?.state
            }
            StateSpec::Magic { n, alpha, seed } => {
                magic_injection_state(*n, *alpha, &mut rng::stream(*seed, 0))?
            }
            StateSpec::Xxz { n, anisotropy } => xxz_ground_state(*n, *anisotropy)?,
            StateSpec::J1j2 { n, j2 } => j1j2_ground_state(*n, *j2)?,
            StateSpec::Product { factors } => {
                let mut it = factors.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::InvalidArgument("empty product".into()))?
                    .build()?;
                it.try_fold(first, |acc, f| Ok::<_, Error>(acc.tensor(&f.build()?)))?
            }
            StateSpec::Orthogonal { to, seed } => {
                let psi = to.build()?;
                let phi = haar_state(psi.n(), &mut rng::stream(*seed, 0));
                let ov = psi.inner(&phi);
                let amps = phi
                    .amplitudes()
                    .iter()
                    .zip(psi.amplitudes())
                    .map(|(b, a)| b - a * ov)
                    .collect();
                PureState::normalized(psi.n(), amps)?
            }
            StateSpec::Amplitudes { n, amplitudes } => PureState::normalized(
                *n,
                amplitudes
                    .iter()
                    .map(|&[re, im]| C64::new(re, im))
                    .collect(),
            )?,
        })
    }
}

/// The experimental state, relative to the target.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputSpec {
    /// `rho = psi`.
    #[default]
    Target,
    State {
        state: StateSpec,
    },
    /// Global depolarizing noise on the target.
    Depolarized {
        p: f64,
    },
    /// Global depolarizing noise on another state.
    DepolarizedState {
        state: StateSpec,
        p: f64,
    },
}

impl InputSpec {
    pub fn build(&self, target: &PureState) -> Result<InputState> {
        let check = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidProbability(p))
            }
        };
        Ok(match self {
            InputSpec::Target => target.clone().into(),
            InputSpec::State { state } => state.build()?.into(),
            InputSpec::Depolarized { p } => {
                check(*p)?;
                InputState::Depolarized {
                    psi: target.clone(),
                    p: *p,
                }
            }
            InputSpec::DepolarizedState { state, p } => {
                check(*p)?;
                InputState::Depolarized {
                    psi: state.build()?,
                    p: *p,
                }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleSpec {
    /// Cut positions relative to the retained register.
    Separable {
        cut: Vec<usize>,
    },
    Stabilizer,
    EntanglementThreshold {
        w: usize,
        d: usize,
        variant: ThresholdVariant,
        left: Vec<usize>,
    },
}

impl OracleSpec {
    pub fn build(&self, n_a: usize) -> Result<FidelityOracle> {
        Ok(match self {
            OracleSpec::Separable { cut } => FidelityOracle::separable(cut.clone()),
            OracleSpec::Stabilizer => FidelityOracle::stabilizer(n_a)?,
            OracleSpec::EntanglementThreshold {
                w,
                d,
                variant,
                left,
            } => FidelityOracle::EntanglementThreshold {
                w: *w,
                d: *d,
                variant: *variant,
                left: left.clone(),
            },
        })
    }
}

/// `"fixed-z"`, `"random"`, or a basis string such as `"XZY"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BasisSpec(pub BasisAssignment);

impl TryFrom<String> for BasisSpec {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "fixed-z" => Ok(BasisSpec(BasisAssignment::FixedZ)),
            "random" => Ok(BasisSpec(BasisAssignment::Random)),
            other => other
                .chars()
                .map(Pauli::parse)
                .collect::<Option<Vec<_>>>()
                .map(|b| BasisSpec(BasisAssignment::Fixed(b)))
                .ok_or_else(|| {
                    format!("basis {other:?}: expected fixed-z, random or a string over X/Y/Z")
                }),
        }
    }
}

impl From<BasisSpec> for String {
    fn from(b: BasisSpec) -> String {
        match b.0 {
            BasisAssignment::FixedZ => "fixed-z".into(),
            BasisAssignment::Random => "random".into(),
            BasisAssignment::Fixed(v) => crate::qstate::basis_string(&v),
        }
    }
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec(BasisAssignment::FixedZ)
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_threshold() -> ThresholdRule {
    ThresholdRule::LqOverThree
}

fn default_sample_size() -> SampleSizeRule {
    SampleSizeRule::Formula
}

fn default_c() -> f64 {
    0.9
}

fn default_budget() -> usize {
    4000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyParams {
    pub target: StateSpec,
    #[serde(default)]
    pub input: InputSpec,
    /// Retained qubits `A`; `B` is the rest.
    pub a: Vec<usize>,
    pub oracle: OracleSpec,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_threshold")]
    pub threshold: ThresholdRule,
    #[serde(default)]
    pub gap: Option<f64>,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default = "default_sample_size")]
    pub sample_size: SampleSizeRule,
    #[serde(default = "default_budget")]
    pub lq_budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InseparableParams {
    pub target: StateSpec,
    #[serde(default)]
    pub input: InputSpec,
    /// Defaults to nearest neighbours on a chain.
    #[serde(default)]
    pub pairs: Option<Vec<(usize, usize)>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default = "default_budget")]
    pub lq_budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityParams {
    pub target: StateSpec,
    #[serde(default)]
    pub input: InputSpec,
    pub n_a: usize,
    #[serde(default)]
    pub gap: Option<f64>,
    pub fidelity: f64,
    pub c: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default = "default_sample_size")]
    pub sample_size: SampleSizeRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityParams {
    pub target: StateSpec,
    #[serde(default)]
    pub input: InputSpec,
    pub dims: Vec<usize>,
    pub d: usize,
    pub eta: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    pub variant: ComplexityVariant,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub toy: bool,
    #[serde(default)]
    pub oracle_override: Option<OracleSpec>,
    #[serde(default)]
    pub p_prime: Option<f64>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub trials: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteParams {
    /// Suite names; empty means all.
    #[serde(default)]
    pub suites: Vec<String>,
}

/// Configuration failure with the key path where it occurred.
#[derive(Debug, thiserror::Error)]
#[error("{path}: {key}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub key: String,
    pub message: String,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> std::result::Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError {
                path: origin.to_string(),
                key: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate().map_err(|(key, message)| ConfigError {
            path: origin.to_string(),
            key,
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.display().to_string(),
            key: ".".into(),
            message: e.to_string(),
        })?;
        ExperimentConfig::from_json(&text, &path.display().to_string())
    }

    fn validate(&self) -> std::result::Result<(), (String, String)> {
        let bad = |k: &str, m: String| Err((k.to_string(), m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            );
        }
        if self.repetitions == 0 {
            return bad("repetitions", "must be at least 1".into());
        }
        let delta_ok = |d: f64| d > 0.0 && d < 1.0;
        match &self.experiment {
            Experiment::Certify(p) if !delta_ok(p.delta) => bad(
                "experiment.params.delta",
                format!("{} not in (0, 1)", p.delta),
            ),
            Experiment::FullyInseparable(p) if !delta_ok(p.delta) => bad(
                "experiment.params.delta",
                format!("{} not in (0, 1)", p.delta),
            ),
            Experiment::FidelityCert(p) if !delta_ok(p.delta) => bad(
                "experiment.params.delta",
                format!("{} not in (0, 1)", p.delta),
            ),
            Experiment::FidelityCert(p) if !(p.c > 0.0 && p.c < 0.5) => {
                bad("experiment.params.c", format!("{} not in (0, 1/2)", p.c))
            }
            Experiment::FidelityCert(p) if !(p.fidelity > 0.0 && p.fidelity < 1.0) => bad(
                "experiment.params.fidelity",
                format!("{} not in (0, 1)", p.fidelity),
            ),
            Experiment::ComplexityCert(p) if !delta_ok(p.delta) => bad(
                "experiment.params.delta",
                format!("{} not in (0, 1)", p.delta),
            ),
            Experiment::MagicScan(p)
                if p.ns.is_empty() || p.alphas.is_empty() || p.cliffords == 0 =>
            {
                bad(
                    "experiment.params",
                    "ns, alphas and cliffords must be non-empty".into(),
                )
            }
            Experiment::HamiltonianScan(p) if p.params.is_empty() || p.samples < 2 => bad(
                "experiment.params",
                "params must be non-empty and samples at least 2".into(),
            ),
            Experiment::GapScan(p) if p.ns.is_empty() || p.states == 0 || p.bases == 0 => bad(
                "experiment.params",
                "ns, states and bases must be non-empty".into(),
            ),
            _ => Ok(()),
        }
    }

    /// `sha256` of the canonical serialization.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let h = Sha256::digest(&bytes);
        h.iter().map(|b| format!("{b:02x}")).collect()
    }
}
