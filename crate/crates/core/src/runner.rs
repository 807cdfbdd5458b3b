//! Executes an [`ExperimentConfig`] and writes its artifacts.
//!
//! Every artifact is rendered in memory first, so a failing run leaves the
//! output directory untouched. Repetition `r` runs with seed
//! `derive(seed, [r])`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    CertifyParams, ComplexityParams, ConfigError, Experiment, ExperimentConfig, FidelityParams,
    InseparableParams,
};
use crate::error::Error;
use crate::protocol::{
    run_certification, run_complexity_cert, run_fidelity_cert, run_fully_inseparable,
    CertificationConfig, ComplexityConfig, FidelityCertConfig, InseparableConfig, TrialRecord,
};
use crate::qstate::{Bipartition, PureState};
use crate::scans::{hamiltonian_scan, magic_scan, magic_summary};
use crate::spectral::averaged_truncated_gaps;
use crate::{rng, suites, VERSION};

/// Exit code of a completed run, whatever its verdicts.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// A failed run, located at a config key.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {key}: {source}")]
    Runtime {
        path: String,
        key: String,
        source: Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Runtime { .. } => EXIT_RUNTIME,
        }
    }
}

/// Errors that mean the parameters themselves are unusable.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidArgument(_)
            | Error::InvalidProbability(_)
            | Error::LengthMismatch { .. }
            | Error::SizeMismatch(_)
            | Error::GeometryInvalid(_)
            | Error::InvalidState(_)
            | Error::TooLarge(_)
            | Error::UnsupportedSize(_)
    )
}

/// Rendered output files.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub summary: Vec<u8>,
    pub trials: Option<Vec<u8>>,
    pub csv: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn files(&self) -> Vec<(String, &[u8])> {
        let mut out = vec![("summary.json".to_string(), self.summary.as_slice())];
        if let Some(t) = &self.trials {
            out.push(("trials.jsonl".to_string(), t.as_slice()));
        }
        out.extend(
            self.csv
                .iter()
                .map(|(name, b)| (name.clone(), b.as_slice())),
        );
        out
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.files()
            .into_iter()
            .map(|(name, bytes)| {
                let p = dir.join(name);
                std::fs::write(&p, bytes)?;
                Ok(p)
            })
            .collect()
    }
}

/// Where a run writes when neither the config nor the caller says.
pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.kind()))
}

/// Runs on a dedicated pool of `workers` threads (rayon's default when
/// `None`). Output bytes do not depend on the pool size.
pub fn execute_with_workers(
    cfg: &ExperimentConfig,
    origin: &str,
    workers: Option<usize>,
) -> Result<Artifacts, RunError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    let pool = b.build().map_err(|e| RunError::Runtime {
        path: origin.into(),
        key: "workers".into(),
        source: Error::InvalidArgument(e.to_string()),
    })?;
    pool.install(|| execute(cfg, origin))
}

/// Renders every artifact of `cfg` on the current rayon pool.
pub fn execute(cfg: &ExperimentConfig, origin: &str) -> Result<Artifacts, RunError> {
    let start = Instant::now();
    let digest = cfg.digest();
    let fail = |key: &str, e: Error| {
        let key = format!(
            "experiment.params{}{key}",
            if key.is_empty() { "" } else { "." }
        );
        if is_config_error(&e) {
            RunError::Config(ConfigError {
                path: origin.into(),
                key,
                message: e.to_string(),
            })
        } else {
            RunError::Runtime {
                path: origin.into(),
                key,
                source: e,
            }
        }
    };
    let header = json!({ "locq": VERSION, "config_digest": format!("sha256:{digest}"), "kind": cfg.experiment.kind() });
    let seeds: Vec<u64> = (0..cfg.repetitions)
        .map(|r| rng::derive(cfg.seed, &[r]))
        .collect();

    let mut trials: Option<Vec<Value>> = None;
    let mut csv = Vec::new();
    let mut results = Vec::with_capacity(seeds.len());
    for (rep, &seed) in seeds.iter().enumerate() {
        let rep = rep as u64;
        let outcome = match &cfg.experiment {
            Experiment::Certify(p) => {
                let c = certify_config(p, seed).map_err(|(k, e)| fail(k, e))?;
                let mut r = run_certification(&c).map_err(|e| fail("", e))?;
                r.config_digest = Some(format!("sha256:{digest}"));
                push_trials(&mut trials, rep, &std::mem::take(&mut r.trials));
                to_value(&r)
            }
            Experiment::FidelityCert(p) => {
                let c = fidelity_config(p, seed).map_err(|(k, e)| fail(k, e))?;
                let mut r = run_fidelity_cert(&c).map_err(|e| fail("", e))?;
                r.config_digest = Some(format!("sha256:{digest}"));
                push_trials(&mut trials, rep, &std::mem::take(&mut r.trials));
                to_value(&r)
            }
            Experiment::ComplexityCert(p) => {
                let c = complexity_config(p, seed).map_err(|(k, e)| fail(k, e))?;
                let mut r = run_complexity_cert(&c).map_err(|e| fail("", e))?;
                r.report.config_digest = Some(format!("sha256:{digest}"));
                push_trials(&mut trials, rep, &std::mem::take(&mut r.report.trials));
                to_value(&r)
            }
            Experiment::FullyInseparable(p) => {
                let c = inseparable_config(p, seed).map_err(|(k, e)| fail(k, e))?;
                let mut r = run_fully_inseparable(&c).map_err(|e| fail("", e))?;
                r.config_digest = Some(format!("sha256:{digest}"));
                if let Some(ds) = r.dataset.take() {
                    let log = trials.get_or_insert_with(Vec::new);
                    log.extend(
                        ds.rounds
                            .iter()
                            .enumerate()
                            .map(|(i, o)| json!({ "rep": rep, "round": i, "outcome": o })),
                    );
                }
                to_value(&r)
            }
            Experiment::MagicScan(p) => {
                let rows = magic_scan(p, seed).map_err(|e| fail("", e))?;
                let points = magic_summary(&rows);
                append_csv(&mut csv, "magic_scan.csv", rep, &rows);
                append_csv(&mut csv, "magic_summary.csv", rep, &points);
                json!({ "seed": seed, "points": points })
            }
            Experiment::HamiltonianScan(p) => {
                let rows = hamiltonian_scan(p, seed).map_err(|e| fail("", e))?;
                append_csv(&mut csv, "hamiltonian_scan.csv", rep, &rows);
                json!({ "seed": seed, "model": p.model, "rows": rows })
            }
            Experiment::GapScan(p) => {
                let rows = averaged_truncated_gaps(p, seed).map_err(|e| fail("", e))?;
                let curve: Vec<_> = rows
                    .iter()
                    .filter(|r| r.seed == rows[0].seed)
                    .map(|r| json!({ "n": r.n, "i": r.i, "mean": r.mean, "std": r.std }))
                    .collect();
                append_csv(&mut csv, "gap_scan.csv", rep, &rows);
                json!({ "seed": seed, "curve": curve })
            }
            Experiment::PropertySuite(p) => {
                let names = suites::resolve(&p.suites).map_err(|e| fail("suites", e))?;
                let out = names
                    .iter()
                    .map(|n| suites::run_suite(n, seed))
                    .collect::<crate::Result<Vec<_>>>()
                    .map_err(|e| fail("", e))?;
                json!({ "seed": seed, "all_pass": out.iter().all(|s| s.pass), "suites": out })
            }
        };
        results.push(json!({ "rep": rep, "seed": seed, "result": outcome }));
    }

    let summary = json!({
        "locq": VERSION,
        "config_digest": format!("sha256:{digest}"),
        "kind": cfg.experiment.kind(),
        "seed": cfg.seed,
        "repetitions": cfg.repetitions,
        "config": cfg,
        "results": results,
        "wall_time": start.elapsed().as_secs_f64(),
    });
    let mut summary = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    summary.push(b'\n');
    let trials = trials.map(|recs| {
        let mut out = Vec::new();
        for v in std::iter::once(&header).chain(recs.iter()) {
            out.extend(serde_json::to_vec(v).expect("record serializes"));
            out.push(b'\n');
        }
        out
    });
    let csv = csv
        .into_iter()
        .map(|(name, body): (String, CsvTable)| (name, body.render(&digest)))
        .collect();
    Ok(Artifacts {
        summary,
        trials,
        csv,
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn push_trials(log: &mut Option<Vec<Value>>, rep: u64, recs: &[TrialRecord]) {
    if recs.is_empty() {
        return;
    }
    let log = log.get_or_insert_with(Vec::new);
    log.extend(recs.iter().map(|r| {
        let mut v = json!({ "rep": rep });
        if let (Value::Object(m), Value::Object(rec)) = (&mut v, to_value(r)) {
            m.extend(rec);
        }
        v
    }));
}

/// CSV rows gathered across repetitions; the header comes from the first row.
#[derive(Default)]
struct CsvTable {
    header: Option<Vec<u8>>,
    body: Vec<u8>,
}

impl CsvTable {
    fn render(self, digest: &str) -> Vec<u8> {
        let mut out = format!("# locq {VERSION} config=sha256:{digest}\n").into_bytes();
        out.extend(self.header.unwrap_or_default());
        out.extend(self.body);
        out
    }
}

fn append_csv<T: Serialize>(
    tables: &mut Vec<(String, CsvTable)>,
    name: &str,
    rep: u64,
    rows: &[T],
) {
    let idx = match tables.iter().position(|(n, _)| n == name) {
        Some(i) => i,
        None => {
            tables.push((name.to_string(), CsvTable::default()));
            tables.len() - 1
        }
    };
    let table = &mut tables[idx].1;
    for row in rows {
        // A headed writer per row yields "header\nrecord\n".
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row).expect("csv row serializes");
        let bytes = w.into_inner().expect("in-memory writer");
        let split = bytes.iter().position(|&b| b == b'\n').map_or(0, |i| i + 1);
        if table.header.is_none() {
            table.header = Some([b"rep,".as_slice(), &bytes[..split]].concat());
        }
        table.body.extend(format!("{rep},").into_bytes());
        table.body.extend(&bytes[split..]);
    }
}

type Built<T> = Result<T, (&'static str, Error)>;

fn target_and_input(
    target: &crate::config::StateSpec,
    input: &crate::config::InputSpec,
) -> Built<(PureState, crate::protocol::InputState)> {
    let psi = target.build().map_err(|e| ("target", e))?;
    let rho = input.build(&psi).map_err(|e| ("input", e))?;
    Ok((psi, rho))
}

fn certify_config(p: &CertifyParams, seed: u64) -> Built<CertificationConfig> {
    let (psi, rho) = target_and_input(&p.target, &p.input)?;
    let part = Bipartition::complement(psi.n(), &p.a).map_err(|e| ("a", e))?;
    let oracle = p.oracle.build(part.n_a()).map_err(|e| ("oracle", e))?;
    let mut c = CertificationConfig::new(psi, rho, part, oracle);
    c.basis = p.basis.0.clone();
    c.delta = p.delta;
    c.threshold = p.threshold;
    c.gap = p.gap;
    c.seed = seed;
    c.trials = p.trials;
    c.sample_size = p.sample_size;
    c.lq_budget = p.lq_budget;
    Ok(c)
}

fn fidelity_config(p: &FidelityParams, seed: u64) -> Built<FidelityCertConfig> {
    let (psi, rho) = target_and_input(&p.target, &p.input)?;
    let mut c = FidelityCertConfig::new(psi, rho, p.n_a);
    c.gap = p.gap;
    c.fidelity = p.fidelity;
    c.c = p.c;
    c.delta = p.delta;
    c.seed = seed;
    c.trials = p.trials;
    c.sample_size = p.sample_size;
    Ok(c)
}

fn complexity_config(p: &ComplexityParams, seed: u64) -> Built<ComplexityConfig> {
    let (psi, rho) = target_and_input(&p.target, &p.input)?;
    let mut c = ComplexityConfig::new(psi, rho, &p.dims, p.d, p.eta, p.variant);
    c.c = p.c;
    c.delta = p.delta;
    c.seed = seed;
    c.trials = p.trials;
    c.toy = p.toy;
    c.p_prime = p.p_prime;
    c.t = p.t;
    if let Some(o) = &p.oracle_override {
        let n_a = (2 * (p.eta * p.d as f64).round() as usize).pow(p.dims.len() as u32);
        c.oracle_override = Some(o.build(n_a).map_err(|e| ("oracle_override", e))?);
    }
    Ok(c)
}

fn inseparable_config(p: &InseparableParams, seed: u64) -> Built<InseparableConfig> {
    let (psi, rho) = target_and_input(&p.target, &p.input)?;
    let mut c = InseparableConfig::chain(psi, rho);
    if let Some(pairs) = &p.pairs {
        c.pairs = pairs.clone();
    }
    c.delta = p.delta;
    c.seed = seed;
    c.trials = p.trials;
    c.lq_budget = p.lq_budget;
    Ok(c)
}

/// Removes every `wall_time` key, for byte comparisons across runs.
pub fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_time");
            m.values_mut().for_each(strip_wall_time);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text, "t.json").unwrap()
    }

    const MAGIC: &str = r#"{"schema_version": 1, "seed": 2, "repetitions": 2,
        "experiment": {"kind": "magic-scan", "params": {"ns": [5], "alphas": [0.0, 0.5], "n_a": 2, "cliffords": 2}}}"#;

    #[test]
    fn csv_has_provenance_header_and_reps() {
        let art = execute(&cfg(MAGIC), "t.json").unwrap();
        let (name, body) = &art.csv[0];
        assert_eq!(name, "magic_scan.csv");
        let text = String::from_utf8(body.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# locq ") && lines[0].contains("config=sha256:"));
        assert_eq!(lines[1], "rep,n,n_a,alpha,clifford,seed,lm");
        assert_eq!(lines.len(), 2 + 2 * 4);
        assert!(art.trials.is_none());
    }

    #[test]
    fn summary_is_reproducible_across_pools() {
        let c = cfg(MAGIC);
        let a = execute_with_workers(&c, "t.json", Some(1)).unwrap();
        let b = execute_with_workers(&c, "t.json", Some(3)).unwrap();
        assert_eq!(a.csv, b.csv);
        let strip = |bytes: &[u8]| {
            let mut v: Value = serde_json::from_slice(bytes).unwrap();
            strip_wall_time(&mut v);
            v
        };
        assert_eq!(strip(&a.summary), strip(&b.summary));
    }

    #[test]
    fn certify_writes_trial_log() {
        let c = cfg(
            r#"{"schema_version": 1, "seed": 4, "experiment": {"kind": "certify", "params": {
            "target": {"family": "bell"}, "a": [0, 1], "oracle": {"kind": "separable", "cut": [0]}, "trials": 50}}}"#,
        );
        let art = execute(&c, "t.json").unwrap();
        let log = String::from_utf8(art.trials.unwrap()).unwrap();
        let mut lines = log.lines();
        let header: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(header["kind"], "certify");
        let first: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(first["rep"], 0);
        assert!(first.get("estimate").is_some());
    }

    #[test]
    fn bad_parameters_are_config_errors() {
        let c = cfg(
            r#"{"schema_version": 1, "experiment": {"kind": "certify", "params": {
            "target": {"family": "bell"}, "input": {"kind": "depolarized", "p": 2.0}, "a": [0], "oracle": {"kind": "stabilizer"}}}}"#,
        );
        let e = execute(&c, "t.json").unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
        assert!(e.to_string().contains("experiment.params.input"), "{e}");
    }

    #[test]
    fn zero_gap_is_a_runtime_error() {
        let c = cfg(
            r#"{"schema_version": 1, "experiment": {"kind": "certify", "params": {
            "target": {"family": "zero", "n": 3}, "a": [0, 1], "oracle": {"kind": "separable", "cut": [0]}}}}"#,
        );
        let e = execute(&c, "t.json").unwrap_err();
        assert_eq!(e.exit_code(), EXIT_RUNTIME);
    }
}
