//! Property suites behind `locq verify`: one suite per acceptance check,
//! each reporting measured values against its tolerance.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    CertifyParams, Experiment, ExperimentConfig, FidelityParams, InputSpec, InseparableParams,
    OracleSpec, StateSpec,
};
use crate::ensemble::{
    exact_conditional_fidelity, localizable_quantumness, mean_and_se, sample_projected,
    BasisAssignment, LqMethod,
};
use crate::error::{Error, Result};
use crate::estimator::{self, fidelity_sample_size, median_of_means, mom_parameters};
use crate::freeset::{stabilizer_dictionary, stabilizer_fidelity, FidelityOracle};
use crate::models::{
    brickwork_circuit, depolarize_matrix, haar_state, haar_two_qubit_unitary,
    magic_injection_state, run_circuit, LatticeGeometry,
};
use crate::protocol::sampler::{Sampler, TargetProjections};
use crate::protocol::{
    analytic_eta_depolarized, depolarized_terms, run_certification, run_fidelity_cert,
    run_fully_inseparable, run_rounds, CertificationConfig, FidelityCertConfig, InputState,
    InseparableConfig, Verdict,
};
use crate::qstate::{
    apply_unitary_pure, reduced_purity, states, Bipartition, PureState, QuantumState,
};
use crate::scans::{
    hamiltonian_scan, magic_scan, magic_summary, ChainModel, HamiltonianRow, HamiltonianScanConfig,
    MagicScanConfig,
};
use crate::spectral::{averaged_truncated_gaps, fidelity_gap, spearman, GapScanConfig};
use crate::{rng, runner};

/// Suite names in acceptance order.
pub const SUITES: [&str; 16] = [
    "haar-purity",
    "entanglement-growth",
    "shadow-estimator",
    "mom-concentration",
    "protocol-soundness",
    "ghz-degenerate",
    "stabilizer-counts",
    "magic-scan",
    "depolarizing-crossover",
    "xxz-scan",
    "j1j2-scan",
    "fully-inseparable",
    "fidelity-observable",
    "fidelity-cert",
    "brickwork-purity",
    "determinism",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub tolerance: String,
    pub pass: bool,
}

impl Check {
    fn new(
        label: impl Into<String>,
        measured: f64,
        tolerance: impl Into<String>,
        pass: bool,
    ) -> Self {
        Check {
            label: label.into(),
            measured,
            tolerance: tolerance.into(),
            pass,
        }
    }

    fn at_most(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check::new(
            label,
            measured,
            format!("<= {}", num(bound)),
            measured <= bound,
        )
    }

    fn at_least(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check::new(
            label,
            measured,
            format!(">= {}", num(bound)),
            measured >= bound,
        )
    }

    /// `|measured - expected| <= k * se`.
    fn within_se(label: impl Into<String>, measured: f64, expected: f64, se: f64, k: f64) -> Self {
        Check::new(
            label,
            measured,
            format!("{} +- {k} SE ({:.2e})", num(expected), k * se),
            (measured - expected).abs() <= k * se,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub wall_time: f64,
}

impl SuiteResult {
    /// One line: `[PASS] 1 haar-purity: mean purity = 0.8012 (0.8 +- 4 SE ...)`.
    pub fn line(&self) -> String {
        let detail: Vec<String> = self
            .checks
            .iter()
            .map(|c| format!("{} = {} ({})", c.label, num(c.measured), c.tolerance))
            .collect();
        format!(
            "[{}] {:>2} {}: {} [{:.1}s]",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            detail.join("; "),
            self.wall_time
        )
    }
}

/// Integers plainly, tiny or huge values in scientific notation.
fn num(v: f64) -> String {
    if v == 0.0 || (v.fract() == 0.0 && v.abs() < 1e9) {
        format!("{v:.0}")
    } else if v.abs() < 1e-3 || v.abs() >= 1e6 {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

/// Expands an empty list to all suites and checks the names.
pub fn resolve(names: &[String]) -> Result<Vec<String>> {
    if names.is_empty() {
        return Ok(SUITES.iter().map(|s| s.to_string()).collect());
    }
    names
        .iter()
        .map(|n| {
            if SUITES.contains(&n.as_str()) {
                Ok(n.clone())
            } else {
                Err(Error::InvalidArgument(format!(
                    "unknown suite {n:?} (known: {})",
                    SUITES.join(", ")
                )))
            }
        })
        .collect()
}

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteResult> {
    let id = SUITES
        .iter()
        .position(|s| *s == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {name:?}")))?
        + 1;
    let start = Instant::now();
    let seed = rng::derive(seed, &[id as u64]);
    let checks = match id {
        1 => haar_purity(seed),
        2 => entanglement_growth(seed),
        3 => shadow_estimator(seed)?,
        4 => mom_concentration(seed)?,
        5 => protocol_soundness(seed)?,
        6 => ghz_degenerate()?,
        7 => stabilizer_counts()?,
        8 => magic(seed)?,
        9 => depolarizing_crossover(seed)?,
        10 => xxz(seed)?,
        11 => j1j2(seed)?,
        12 => fully_inseparable(seed)?,
        13 => fidelity_observable(seed)?,
        14 => fidelity_cert(seed)?,
        15 => brickwork_purity(seed)?,
        _ => determinism(seed)?,
    };
    Ok(SuiteResult {
        id,
        name: name.to_string(),
        pass: checks.iter().all(|c| c.pass),
        checks,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn haar_purity(seed: u64) -> Vec<Check> {
    let vals: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| reduced_purity(&haar_state(2, &mut rng::stream(seed, i)), &[0]))
        .collect();
    let (m, se) = mean_and_se(&vals);
    // (d_A + d_B) / (d_A d_B + 1) with d_A = d_B = 2.
    vec![Check::within_se("mean purity", m, 0.8, se, 4.0)]
}

fn entanglement_growth(seed: u64) -> Vec<Check> {
    let start = {
        let mut r = rng::stream(seed, u64::MAX);
        (0..4)
            .map(|_| haar_state(1, &mut r))
            .reduce(|a, b| a.tensor(&b))
            .unwrap()
    };
    let vals: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let u = haar_two_qubit_unitary(&mut rng::stream(seed, i));
            reduced_purity(
                &apply_unitary_pure(&start, &u, &[1, 2]).expect("4x4 gate"),
                &[0, 1],
            )
        })
        .collect();
    let (m, se) = mean_and_se(&vals);
    // 2/5 (tr rho_1^2 + tr rho_123^2) with both purities 1 for a product start.
    vec![Check::within_se(
        "mean purity of qubits 0,1",
        m,
        0.8,
        se,
        4.0,
    )]
}

fn shadow_estimator(seed: u64) -> Result<Vec<Check>> {
    let psi = states::bell().tensor(&states::bell());
    let part = Bipartition::leading(4, 2);
    let oracle = FidelityOracle::separable(vec![0]);
    let basis = BasisAssignment::Random;
    let p = 0.3;
    let input = InputState::Depolarized {
        psi: psi.clone(),
        p,
    };
    let sampler = Sampler::new(&input, &part, &basis)?;
    let target = TargetProjections::new(&psi, &part, &basis, Some(&oracle))?;
    let out = run_rounds(&sampler, &target, 100_000, seed, 0, true)?;
    let (m, se) = mean_and_se(&out.estimates);
    let exact = exact_conditional_fidelity(
        &depolarize_matrix(&psi, p).into(),
        &psi,
        &part,
        &oracle,
        &basis,
    )?;
    let omegas: Vec<f64> = out.records.iter().map(|r| r.estimate + r.offset).collect();
    let var = estimator::sample_variance(&omegas);
    Ok(vec![
        Check::within_se("mean estimate", m, exact, se, 4.0),
        Check::at_most("shadow variance", var, estimator::shadow_variance_bound(2)),
    ])
}

fn mom_concentration(seed: u64) -> Result<Vec<Check>> {
    let (sigma2, eps, delta) = (5.0, 0.2, 0.05);
    let mom = mom_parameters(sigma2, eps, delta)?;
    // Single-qubit shadow fidelity of a Haar target with itself: mean 1,
    // variance at most 4 + 1.
    let psi = haar_state(1, &mut rng::stream(seed, u64::MAX));
    let part = Bipartition::new(1, vec![0], vec![])?;
    let sampler = Sampler::new(&psi.clone().into(), &part, &BasisAssignment::FixedZ)?;
    let target = TargetProjections::new(&psi, &part, &BasisAssignment::FixedZ, None)?;
    let reps = 200u64;
    let failures = (0..reps)
        .map(|r| {
            let out = run_rounds(
                &sampler,
                &target,
                mom.total(),
                rng::derive(seed, &[r]),
                0,
                false,
            )?;
            Ok(((median_of_means(&out.estimates, mom)? - 1.0).abs() >= eps) as u32)
        })
        .collect::<Result<Vec<u32>>>()?
        .into_iter()
        .sum::<u32>();
    Ok(vec![
        Check::new("block size B", mom.b as f64, "== 750", mom.b == 750),
        Check::new("block count K", mom.k as f64, "== 14", mom.k == 14),
        Check::at_most(
            "deviation >= eps fraction",
            failures as f64 / reps as f64,
            0.10,
        ),
    ])
}

/// Number of runs out of `runs` whose verdict matches `want`.
fn count_runs(runs: u64, f: impl Fn(u64) -> Result<bool>) -> Result<f64> {
    Ok((0..runs)
        .map(f)
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count() as f64)
}

fn protocol_soundness(seed: u64) -> Result<Vec<Check>> {
    let psi = states::bell().tensor(&PureState::zero(1));
    let part = Bipartition::leading(3, 2);
    let product = PureState::zero(3);
    let run = |input: &PureState, s: u64| -> Result<Verdict> {
        let mut c = CertificationConfig::new(
            psi.clone(),
            input.clone(),
            part.clone(),
            FidelityOracle::separable(vec![0]),
        );
        c.seed = s;
        c.keep_trials = false;
        Ok(run_certification(&c)?.verdict)
    };
    let rejects = count_runs(100, |i| {
        Ok(run(&product, rng::derive(seed, &[0, i]))? == Verdict::Reject)
    })?;
    let accepts = count_runs(100, |i| {
        Ok(run(&psi, rng::derive(seed, &[1, i]))? == Verdict::Accept)
    })?;
    Ok(vec![
        Check::at_least("product rejected /100", rejects, 95.0),
        Check::at_least("target accepted /100", accepts, 95.0),
    ])
}

fn ghz_degenerate() -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    for n in 3..=8 {
        let part = Bipartition::leading(n, 2);
        let lq = localizable_quantumness(
            &states::ghz(n),
            &part,
            &FidelityOracle::separable(vec![0]),
            &BasisAssignment::FixedZ,
            LqMethod::Exact,
        )?;
        worst = worst.max(lq.value);
    }
    Ok(vec![Check::new(
        "max LQ over n = 3..8",
        worst,
        "== 0",
        worst == 0.0,
    )])
}

fn stabilizer_counts() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (n, want) in [(1, 6), (2, 60), (3, 1080)] {
        let got = stabilizer_dictionary(n)?.states.len();
        checks.push(Check::new(
            format!("{n}-qubit count"),
            got as f64,
            format!("== {want}"),
            got == want,
        ));
    }
    let f = stabilizer_fidelity(&states::rz_plus(PI / 4.0), &*stabilizer_dictionary(1)?)?;
    let want = (2.0 + 2f64.sqrt()) / 4.0;
    checks.push(Check::new(
        "T-state fidelity",
        f,
        format!("{want:.15} +- 1e-12"),
        (f - want).abs() <= 1e-12,
    ));
    Ok(checks)
}

fn magic(seed: u64) -> Result<Vec<Check>> {
    let alphas = vec![0.0, PI / 12.0, PI / 6.0, PI / 4.0];
    let cfg = MagicScanConfig {
        ns: vec![8, 10, 12],
        alphas: alphas.clone(),
        n_a: 3,
        cliffords: 50,
    };
    let rows = magic_scan(&cfg, seed)?;
    let pts = magic_summary(&rows);
    let zero = rows
        .iter()
        .filter(|r| r.alpha == 0.0)
        .map(|r| r.lm.abs())
        .fold(0.0, f64::max);
    let at = |n: usize, a: usize| {
        pts.iter()
            .find(|p| p.n == n && p.alpha == alphas[a])
            .expect("scan point")
    };
    // Smallest step in alpha (must be > 0) and worst drop in n (in SE units).
    let mut min_step = f64::INFINITY;
    let mut worst_drop = f64::NEG_INFINITY;
    for &n in &cfg.ns {
        for a in 1..alphas.len() {
            min_step = min_step.min(at(n, a).mean - at(n, a - 1).mean);
        }
    }
    for w in cfg.ns.windows(2) {
        for a in 0..alphas.len() {
            let (lo, hi) = (at(w[0], a), at(w[1], a));
            let se = (lo.std_error.powi(2) + hi.std_error.powi(2)).sqrt();
            if se > 0.0 {
                worst_drop = worst_drop.max((lo.mean - hi.mean) / se);
            } else if lo.mean > hi.mean + 1e-12 {
                worst_drop = f64::INFINITY;
            }
        }
    }
    Ok(vec![
        Check::at_most("max LM at alpha = 0", zero, 1e-9),
        Check::new("min increase in alpha", min_step, "> 0", min_step > 0.0),
        Check::at_most("max decrease in n (combined SE)", worst_drop, 2.0),
    ])
}

fn depolarizing_crossover(seed: u64) -> Result<Vec<Check>> {
    let stab = FidelityOracle::stabilizer(3)?;
    let basis = BasisAssignment::FixedZ;
    let psi = magic_injection_state(12, PI / 6.0, &mut rng::stream(seed, 0))?;
    let part = Bipartition::leading(12, 3);
    let terms = depolarized_terms(&psi, &part, &stab, &basis)?;
    let closed = terms.crossover().unwrap_or(f64::NAN);
    // Root of eta(p) by bisection, independent of the closed form.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if analytic_eta_depolarized(&psi, &part, &stab, &basis, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);

    let small = magic_injection_state(8, PI / 6.0, &mut rng::stream(seed, 1))?;
    let part8 = Bipartition::leading(8, 3);
    let mut worst: f64 = 0.0;
    for p in [0.0, 0.2, 0.5, 0.8, 1.0] {
        let exact = exact_conditional_fidelity(
            &depolarize_matrix(&small, p).into(),
            &small,
            &part8,
            &stab,
            &basis,
        )?;
        worst =
            worst.max((exact - analytic_eta_depolarized(&small, &part8, &stab, &basis, p)?).abs());
    }
    Ok(vec![
        Check::at_most(
            "|bisection root - closed form|",
            (root - closed).abs(),
            1e-9,
        ),
        Check::at_most("n = 8 exact vs analytic", worst, 1e-9),
        Check::new(
            "crossover p* at n = 12",
            closed,
            "in [0.25, 0.5]",
            (0.25..=0.5).contains(&closed),
        ),
    ])
}

/// One value per parameter. Degenerate points average their representatives,
/// or are dropped when `unique_only`.
fn curve(rows: &[HamiltonianRow], unique_only: bool) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for r in rows.iter().filter(|r| !unique_only || r.degeneracy == 1) {
        match out.last_mut() {
            Some(last) if last.0 == r.parameter => {
                last.1 += r.le;
                last.2 += 1;
            }
            _ => out.push((r.parameter, r.le, 1)),
        }
    }
    out.into_iter().map(|(x, s, k)| (x, s / k as f64)).collect()
}

fn xxz(seed: u64) -> Result<Vec<Check>> {
    let grid = vec![-1.5, -1.25, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
    let cfg = HamiltonianScanConfig {
        model: ChainModel::Xxz,
        n: 10,
        params: grid,
        samples: 1000,
        pair: (0, 1),
    };
    let c = curve(&hamiltonian_scan(&cfg, seed)?, false);
    let (argmax, _) =
        c.iter().copied().fold(
            (f64::NAN, f64::NEG_INFINITY),
            |b, p| if p.1 > b.1 { p } else { b },
        );
    let last = c.last().expect("grid").1;
    Ok(vec![
        Check::new("argmax anisotropy", argmax, "== -1", argmax == -1.0),
        Check::new("LE at anisotropy 1.5", last, "< 0.01", last < 0.01),
    ])
}

fn j1j2(seed: u64) -> Result<Vec<Check>> {
    let grid: Vec<f64> = (0..=16)
        .map(|i| (i as f64 * 0.05 * 100.0).round() / 100.0)
        .collect();
    let cfg = HamiltonianScanConfig {
        model: ChainModel::J1j2,
        n: 12,
        params: grid,
        samples: 1000,
        pair: (0, 1),
    };
    let rows = hamiltonian_scan(&cfg, seed)?;
    // The dimer extremes at the degenerate point say nothing about the
    // trend, so the maximum is located on unique ground states.
    let c = curve(&rows, true);
    let peak = (1..c.len() - 1)
        .filter(|&i| c[i].1 >= c[i - 1].1 && c[i].1 >= c[i + 1].1 && (0.45..=0.6).contains(&c[i].0))
        .map(|i| c[i].0)
        .next();
    let mg: Vec<&HamiltonianRow> = rows.iter().filter(|r| r.parameter == 0.5).collect();
    let degenerate = mg.len() == 2 && mg.iter().all(|r| r.degeneracy == 2);
    let mut dimers: Vec<f64> = mg.iter().map(|r| r.le).collect();
    dimers.sort_by(f64::total_cmp);
    let dimer_err = if dimers.len() == 2 {
        dimers[0].abs().max((dimers[1] - 0.5).abs())
    } else {
        f64::INFINITY
    };
    Ok(vec![
        Check::new(
            "local maximum at J2",
            peak.unwrap_or(f64::NAN),
            "in [0.45, 0.6]",
            peak.is_some(),
        ),
        Check::new(
            "ground-space dimension at J2 = 0.5",
            mg.first().map_or(0.0, |r| r.degeneracy as f64),
            "== 2",
            degenerate,
        ),
        Check::at_most("dimer LE error vs {0.5, 0}", dimer_err, 1e-6),
    ])
}

fn fully_inseparable(seed: u64) -> Result<Vec<Check>> {
    let psi = states::cluster_1d(6);
    let product = states::cluster_1d(3).tensor(&states::cluster_1d(3));
    let run = |input: &PureState, s: u64| -> Result<crate::protocol::InseparableReport> {
        let mut c = InseparableConfig::chain(psi.clone(), input.clone());
        c.seed = s;
        c.keep_dataset = false;
        run_fully_inseparable(&c)
    };
    let accepts = count_runs(100, |i| {
        Ok(run(&psi, rng::derive(seed, &[0, i]))?.verdict == Verdict::Accept)
    })?;
    let cut = count_runs(100, |i| {
        let r = run(&product, rng::derive(seed, &[1, i]))?;
        Ok(r.pairs
            .iter()
            .any(|p| p.pair == (2, 3) && p.verdict == Verdict::Reject))
    })?;
    Ok(vec![
        Check::at_least("all pairs accept /100", accepts, 95.0),
        Check::at_least("pair (2, 3) rejects /100", cut, 95.0),
    ])
}

fn fidelity_observable(seed: u64) -> Result<Vec<Check>> {
    let mut r = rng::stream(seed, 0);
    let product = haar_state(2, &mut r).tensor(&haar_state(2, &mut r));
    let product_gap = fidelity_gap(&product, 2)?;

    let mut positive = 0usize;
    let mut total = 0usize;
    let mut smallest = f64::INFINITY;
    for n in 4..=8u64 {
        let gaps = (0..50u64)
            .into_par_iter()
            .map(|s| {
                fidelity_gap(
                    &haar_state(n as usize, &mut rng::stream(rng::derive(seed, &[n, s]), 0)),
                    1,
                )
            })
            .collect::<Result<Vec<f64>>>()?;
        positive += gaps.iter().filter(|&&g| g > 0.0).count();
        total += gaps.len();
        smallest = smallest.min(gaps.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let cfg = GapScanConfig {
        ns: vec![6],
        n_a: 1,
        states: 10,
        bases: 100,
        depth_factor: 10,
    };
    let rows = averaged_truncated_gaps(&cfg, seed)?;
    let first = rows[0].seed;
    let (is, means): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.seed == first)
        .map(|r| (r.i as f64, r.mean))
        .unzip();
    let rho = spearman(&is, &means);
    Ok(vec![
        Check::at_most("product-state gap", product_gap, 1e-10),
        Check::new(
            format!("Haar gaps > 0 (of {total}, n = 4..8)"),
            positive as f64,
            format!("== {total} (min {smallest:.3e})"),
            positive == total,
        ),
        Check::new("Spearman(i, mean truncated gap)", rho, "> 0.9", rho > 0.9),
    ])
}

fn fidelity_cert(seed: u64) -> Result<Vec<Check>> {
    let psi = haar_state(6, &mut rng::stream(seed, u64::MAX));
    let orth = StateSpec::Orthogonal {
        to: Box::new(StateSpec::Amplitudes {
            n: 6,
            amplitudes: psi.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
        }),
        seed,
    }
    .build()?;
    let gap = fidelity_gap(&psi, 1)?;
    let run = |input: &PureState, s: u64| -> Result<crate::protocol::CertificationReport> {
        let mut c = FidelityCertConfig::new(psi.clone(), input.clone(), 1);
        c.gap = Some(gap);
        c.seed = s;
        c.keep_trials = false;
        run_fidelity_cert(&c)
    };
    let t_formula = fidelity_sample_size(gap, 0.5, 0.25, 0.05, 1)?;
    let probe = run(&psi, rng::derive(seed, &[2]))?;
    let accepts = count_runs(100, |i| {
        Ok(run(&psi, rng::derive(seed, &[0, i]))?.verdict == Verdict::Accept)
    })?;
    let rejects = count_runs(100, |i| {
        Ok(run(&orth, rng::derive(seed, &[1, i]))?.verdict == Verdict::Reject)
    })?;
    Ok(vec![
        Check::new("gap", gap, "> 0", gap > 0.0),
        Check::new(
            "rounds T",
            probe.t as f64,
            format!(">= formula {t_formula}"),
            probe.t_formula == t_formula && probe.t >= t_formula,
        ),
        Check::at_least("target accepted /100", accepts, 95.0),
        Check::at_least("orthogonal rejected /100", rejects, 95.0),
    ])
}

fn brickwork_purity(seed: u64) -> Result<Vec<Check>> {
    let geom = LatticeGeometry::centered(&[12], 4, 1)?;
    let part = geom.partition();
    let left = geom.left_positions();
    let vals = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let spec = brickwork_circuit(&[12], 2, &mut r);
            let psi = run_circuit(&spec, &PureState::zero(12), &mut r)?.state;
            let (_, phi, _) = sample_projected(
                &QuantumState::Pure(psi),
                &part,
                &BasisAssignment::FixedZ,
                &mut r,
            )?;
            let phi = phi
                .as_pure()
                .cloned()
                .ok_or_else(|| Error::InvalidState("projection of a pure state".into()))?;
            Ok(reduced_purity(&phi, &left))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (m, se) = mean_and_se(&vals);
    // (4/5)^{(2w - 4s)^{D-1} min(s, floor(d'/2D))} = 4/5 at D = 1, s = 1, d' = 2.
    Ok(vec![Check::new(
        "mean purity of L",
        m,
        format!("<= 0.8 + 4 SE ({:.4})", 0.8 + 4.0 * se),
        m <= 0.8 + 4.0 * se,
    )])
}

/// Small configurations of every experiment kind, for byte comparisons.
pub fn determinism_configs(seed: u64) -> Vec<ExperimentConfig> {
    let cfg = |experiment| ExperimentConfig {
        schema_version: crate::config::SCHEMA_VERSION,
        seed,
        repetitions: 2,
        out: None,
        experiment,
    };
    let bell0 = StateSpec::Product {
        factors: vec![StateSpec::Bell, StateSpec::Zero { n: 1 }],
    };
    vec![
        cfg(Experiment::Certify(CertifyParams {
            target: bell0,
            input: InputSpec::Depolarized { p: 0.2 },
            a: vec![0, 1],
            oracle: OracleSpec::Separable { cut: vec![0] },
            basis: Default::default(),
            delta: 0.05,
            threshold: crate::protocol::ThresholdRule::LqOverThree,
            gap: None,
            trials: Some(3000),
            sample_size: crate::protocol::SampleSizeRule::Formula,
            lq_budget: 500,
        })),
        cfg(Experiment::FullyInseparable(InseparableParams {
            target: StateSpec::Cluster { n: 4 },
            input: InputSpec::Target,
            pairs: None,
            delta: 0.05,
            trials: Some(2000),
            lq_budget: 500,
        })),
        cfg(Experiment::FidelityCert(FidelityParams {
            target: StateSpec::Haar { n: 4, seed: 1 },
            input: InputSpec::Target,
            n_a: 1,
            gap: None,
            fidelity: 0.5,
            c: 0.25,
            delta: 0.05,
            trials: Some(2000),
            sample_size: crate::protocol::SampleSizeRule::Formula,
        })),
        cfg(Experiment::MagicScan(MagicScanConfig {
            ns: vec![6],
            alphas: vec![0.0, PI / 4.0],
            n_a: 2,
            cliffords: 3,
        })),
        cfg(Experiment::HamiltonianScan(HamiltonianScanConfig {
            model: ChainModel::Xxz,
            n: 6,
            params: vec![-1.0, 0.5],
            samples: 200,
            pair: (0, 1),
        })),
        cfg(Experiment::GapScan(GapScanConfig {
            ns: vec![4],
            n_a: 1,
            states: 2,
            bases: 5,
            depth_factor: 2,
        })),
        cfg(Experiment::PropertySuite(crate::config::SuiteParams {
            suites: vec!["haar-purity".into(), "brickwork-purity".into()],
        })),
    ]
}

/// Artifacts with wall-time fields removed from the JSON summary.
pub fn normalized_artifacts(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<Vec<(String, Vec<u8>)>> {
    let art = runner::execute_with_workers(cfg, "determinism", Some(workers))
        .map_err(|e| Error::InvalidState(e.to_string()))?;
    let mut summary: serde_json::Value = serde_json::from_slice(&art.summary)?;
    runner::strip_wall_time(&mut summary);
    let mut files = vec![("summary.json".to_string(), serde_json::to_vec(&summary)?)];
    files.extend(
        art.files()
            .into_iter()
            .skip(1)
            .map(|(n, b)| (n, b.to_vec())),
    );
    Ok(files)
}

fn determinism(seed: u64) -> Result<Vec<Check>> {
    let configs = determinism_configs(seed);
    let mut identical = 0usize;
    let mut files = 0usize;
    for cfg in &configs {
        let a = normalized_artifacts(cfg, 1)?;
        let b = normalized_artifacts(cfg, 4)?;
        files += a.len();
        identical +=
            a.iter().zip(&b).filter(|(x, y)| x == y).count() * usize::from(a.len() == b.len());
    }
    Ok(vec![Check::new(
        format!(
            "identical files across 1 and 4 workers ({} configs)",
            configs.len()
        ),
        identical as f64,
        format!("== {files}"),
        identical == files,
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_checks_names() {
        assert_eq!(resolve(&[]).unwrap().len(), 16);
        assert!(resolve(&["nope".into()]).is_err());
    }

    #[test]
    fn cheap_suites_pass() {
        for name in ["haar-purity", "ghz-degenerate", "stabilizer-counts"] {
            let r = run_suite(name, 11).unwrap();
            assert!(r.pass, "{}", r.line());
        }
    }
}
