//! Single-copy shadow estimates, median-of-means and sample sizes.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{outcome_ket, Outcome, PureState};

pub use crate::ensemble::exact_conditional_fidelity;

/// Random-Pauli outcome on `A`, one symbol per qubit.
pub type ShadowOutcome = Outcome;

/// `<phi| ⊗_j (3|x_j><x_j| - I) |phi>` for unnormalized amplitudes on `n`
/// qubits, applied one qubit at a time.
pub fn shadow_overlap(phi: &[C64], n: usize, digits: &[u8]) -> f64 {
    debug_assert_eq!(phi.len(), 1 << n);
    let mut v = phi.to_vec();
    for (q, &d) in digits.iter().enumerate() {
        let e = outcome_ket(d);
        let low = 1usize << (n - 1 - q);
        for base in (0..v.len()).step_by(2 * low) {
            for l in base..base + low {
                let (a0, a1) = (v[l], v[l + low]);
                // 3 <e|a> e - a
                let s = (e[0].conj() * a0 + e[1].conj() * a1) * 3.0;
                v[l] = s * e[0] - a0;
                v[l + low] = s * e[1] - a1;
            }
        }
    }
    phi.iter().zip(&v).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Unbiased single-shot estimate of `tr(psi_z rho_z)` from the Pauli outcome
/// `x` measured on `rho_z`.
pub fn shadow_fidelity_estimate(target: &PureState, x: &ShadowOutcome) -> Result<f64> {
    if x.len() != target.n() {
        return Err(Error::SizeMismatch(format!(
            "{}-symbol outcome for a {}-qubit state",
            x.len(),
            target.n()
        )));
    }
    if x.digits().iter().any(|&d| d > 5) {
        return Err(Error::InvalidArgument(format!(
            "outcome digit out of range in {x:?}"
        )));
    }
    Ok(shadow_overlap(target.amplitudes(), target.n(), x.digits()))
}

/// Block size `b` and block count `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoMParameters {
    pub b: usize,
    pub k: usize,
}

impl MoMParameters {
    pub fn total(&self) -> usize {
        self.b * self.k
    }
}

/// `B = ceil(6 sigma^2 / eps^2)`, `K = ceil(4.5 ln(1/delta))`, both at least 1.
pub fn mom_parameters(sigma2: f64, epsilon: f64, delta: f64) -> Result<MoMParameters> {
    if !(sigma2 > 0.0 && epsilon > 0.0 && delta > 0.0 && delta < 1.0)
        || !sigma2.is_finite()
        || !epsilon.is_finite()
    {
        return Err(Error::InvalidArgument(format!(
            "median-of-means needs sigma2 > 0, epsilon > 0, 0 < delta < 1 (got {sigma2}, {epsilon}, {delta})"
        )));
    }
    let b = (6.0 * sigma2 / (epsilon * epsilon)).ceil().max(1.0);
    let k = (4.5 * (1.0 / delta).ln()).ceil().max(1.0);
    if b * k > 1e12 {
        return Err(Error::TooLarge(format!(
            "median-of-means needs {b} x {k} samples"
        )));
    }
    Ok(MoMParameters {
        b: b as usize,
        k: k as usize,
    })
}

/// Median of the `k` block means, blocks taken in input order. An even
/// count takes the lower middle value.
pub fn median_of_means(values: &[f64], params: MoMParameters) -> Result<f64> {
    if params.b == 0 || params.k == 0 || values.len() != params.total() {
        return Err(Error::LengthMismatch {
            expected: params.total(),
            got: values.len(),
        });
    }
    let mut means: Vec<f64> = values
        .chunks(params.b)
        .map(|c| c.iter().sum::<f64>() / params.b as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    Ok(means[(params.k - 1) / 2])
}

/// Worst-case single-shot variance `4^{n_A} + 1`.
pub fn shadow_variance_bound(n_a: usize) -> f64 {
    4f64.powi(n_a as i32) + 1.0
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "delta = {delta} must lie in (0, 1)"
        )))
    }
}

/// `ceil(243 ln(1/delta) sigma^2 / LQ^2)` with `sigma^2 = 4^{n_A} + 1`.
pub fn protocol_sample_size(lq: f64, delta: f64, n_a: usize) -> Result<u64> {
    sample_size_with_variance(lq, delta, shadow_variance_bound(n_a))
}

/// As [`protocol_sample_size`] with a caller-supplied variance, e.g. an
/// empirical estimate from pilot rounds.
pub fn sample_size_with_variance(lq: f64, delta: f64, sigma2: f64) -> Result<u64> {
    if lq.is_nan() || lq <= 0.0 {
        return Err(Error::ZeroGap(Some(format!(
            "localizable quantumness {lq}"
        ))));
    }
    check_delta(delta)?;
    Ok((243.0 * (1.0 / delta).ln() * sigma2 / (lq * lq)).ceil() as u64)
}

/// `ceil(27 ln(1/delta) (4^{n_A} + 1) / (c gap (1 - F))^2)`.
pub fn fidelity_sample_size(
    gap: f64,
    fidelity: f64,
    c: f64,
    delta: f64,
    n_a: usize,
) -> Result<u64> {
    if gap.is_nan() || gap <= 0.0 {
        return Err(Error::ZeroGap(Some(format!("spectral gap {gap}"))));
    }
    check_delta(delta)?;
    let eps = c * gap * (1.0 - fidelity);
    Ok((27.0 * (1.0 / delta).ln() * shadow_variance_bound(n_a) / (eps * eps)).ceil() as u64)
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{measure_sequence_pure, random_basis};
    use crate::models::haar_state;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn shadow_examples() {
        let zero = PureState::zero(1);
        for (label, want) in [("0", 2.0), ("1", -1.0), ("+", 0.5), ("-i", 0.5)] {
            let x = Outcome::parse(label).unwrap();
            assert!((shadow_fidelity_estimate(&zero, &x).unwrap() - want).abs() < 1e-12);
        }
        assert!(shadow_fidelity_estimate(&zero, &Outcome::parse("00").unwrap()).is_err());
    }

    #[test]
    fn shadow_matches_dense_operator() {
        let mut r = stream(20, 0);
        let psi = haar_state(3, &mut r);
        let x = Outcome(vec![0, 3, 4]);
        // Materialize ⊗(3|x><x| - I) as an explicit 8x8 matrix.
        let factors: Vec<nalgebra::DMatrix<C64>> = x
            .digits()
            .iter()
            .map(|&d| {
                let e = nalgebra::DVector::from_column_slice(&outcome_ket(d));
                (&e * e.adjoint()) * C64::new(3.0, 0.0) - nalgebra::DMatrix::identity(2, 2)
            })
            .collect();
        let m = factors[0].kronecker(&factors[1]).kronecker(&factors[2]);
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let dense = (v.adjoint() * m * &v)[(0, 0)].re;
        assert!((dense - shadow_fidelity_estimate(&psi, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn shadow_is_linear_in_the_target_projector() {
        let mut r = stream(21, 0);
        let (p1, p2) = (haar_state(2, &mut r), haar_state(2, &mut r));
        let a = 0.3;
        let x = Outcome(vec![2, 5]);
        let direct = a * shadow_fidelity_estimate(&p1, &x).unwrap()
            + (1.0 - a) * shadow_fidelity_estimate(&p2, &x).unwrap();
        // Same combination through the mixed-operator expectation: weights on
        // the rank-one projectors add linearly.
        let w1 = shadow_overlap(
            &p1.amplitudes()
                .iter()
                .map(|z| z * a.sqrt())
                .collect::<Vec<_>>(),
            2,
            x.digits(),
        );
        let w2 = shadow_overlap(
            &p2.amplitudes()
                .iter()
                .map(|z| z * (1.0 - a).sqrt())
                .collect::<Vec<_>>(),
            2,
            x.digits(),
        );
        assert!((direct - (w1 + w2)).abs() < 1e-12);
    }

    #[test]
    fn shadow_unbiased_with_bounded_variance() {
        let mut r = stream(22, 0);
        let target = haar_state(2, &mut r);
        let rho = haar_state(2, &mut r);
        let exact = target.inner(&rho).norm_sqr();
        let draws = 100_000;
        let vals: Vec<f64> = (0..draws)
            .map(|_| {
                let bases = [random_basis(&mut r), random_basis(&mut r)];
                let (x, _, _) = measure_sequence_pure(rho.amplitudes(), 2, &[0, 1], &bases, &mut r);
                shadow_overlap(target.amplitudes(), 2, &x)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / draws as f64;
        let var = sample_variance(&vals);
        assert!(
            (mean - exact).abs() < 4.0 * (var / draws as f64).sqrt(),
            "{mean} vs {exact}"
        );
        assert!(var <= shadow_variance_bound(2));
    }

    #[test]
    fn mom_examples() {
        let p = MoMParameters { b: 3, k: 3 };
        let v = [1.0, 1.0, 1.0, 100.0, 100.0, 100.0, 1.0, 1.0, 1.0];
        assert_eq!(median_of_means(&v, p).unwrap(), 1.0);
        assert_eq!(
            median_of_means(&[2.5; 6], MoMParameters { b: 3, k: 2 }).unwrap(),
            2.5
        );
        assert_eq!(
            median_of_means(&[1.0, 2.0, 6.0], MoMParameters { b: 3, k: 1 }).unwrap(),
            3.0
        );
        // Even K: lower middle block mean.
        assert_eq!(
            median_of_means(&[4.0, 1.0, 3.0, 2.0], MoMParameters { b: 1, k: 4 }).unwrap(),
            2.0
        );
        assert!(matches!(
            median_of_means(&v[..8], p),
            Err(Error::LengthMismatch {
                expected: 9,
                got: 8
            })
        ));
    }

    #[test]
    fn mom_parameter_examples() {
        assert_eq!(
            mom_parameters(5.0, 1.0, (-2f64).exp()).unwrap(),
            MoMParameters { b: 30, k: 9 }
        );
        assert_eq!(
            mom_parameters(1.0, 10.0, 0.5).unwrap(),
            MoMParameters { b: 1, k: 4 }
        );
        assert_eq!(mom_parameters(1.0, 1.0, 1.0 - 1e-12).unwrap().k, 1);
        assert_eq!(
            mom_parameters(5.0, 0.2, 0.05).unwrap(),
            MoMParameters { b: 750, k: 14 }
        );
        assert!(mom_parameters(0.0, 1.0, 0.5).is_err());
        assert!(mom_parameters(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sample_size_examples() {
        let e1 = (-1f64).exp();
        assert_eq!(protocol_sample_size(1.0, e1, 1).unwrap(), 1215);
        assert_eq!(protocol_sample_size(0.5, e1, 1).unwrap(), 4860);
        assert!(matches!(
            protocol_sample_size(0.0, e1, 1),
            Err(Error::ZeroGap(_))
        ));
        // With eps = LQ/3 the median-of-means budget reproduces the formula.
        let p = mom_parameters(5.0, 1.0 / 3.0, e1).unwrap();
        assert!((p.b * p.k) as u64 >= 1215);
        let t = fidelity_sample_size(0.5, 0.5, 0.25, e1, 1).unwrap();
        assert_eq!(t, (27.0 * 5.0 / (0.0625f64 * 0.0625)).ceil() as u64);
    }

    #[test]
    fn mom_concentration() {
        // Uniform on [-a, a] with variance 5.
        let a = 15f64.sqrt();
        let (eps, delta) = (0.2, 0.05);
        let p = mom_parameters(5.0, eps, delta).unwrap();
        let reps = 200;
        let bad = (0..reps)
            .filter(|&rep| {
                let mut r = stream(23, rep);
                let v: Vec<f64> = (0..p.total()).map(|_| r.random_range(-a..a)).collect();
                median_of_means(&v, p).unwrap().abs() >= eps
            })
            .count();
        assert!(bad as f64 / reps as f64 <= delta + 0.05);
    }

    proptest! {
        #[test]
        fn shadow_magnitude_bound(seed in any::<u64>(), n in 1usize..4, digits in proptest::collection::vec(0u8..6, 3)) {
            let psi = haar_state(n, &mut stream(seed, 0));
            let w = shadow_overlap(psi.amplitudes(), n, &digits[..n]);
            prop_assert!(w.abs() <= 2f64.powi(n as i32) + 1e-12);
        }

        #[test]
        fn mom_of_constant(c in -1e3f64..1e3, b in 1usize..6, k in 1usize..6) {
            let v = vec![c; b * k];
            let m = median_of_means(&v, MoMParameters { b, k }).unwrap();
            prop_assert!((m - c).abs() <= 1e-9 * c.abs().max(1.0));
        }
    }
}
