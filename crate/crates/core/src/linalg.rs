//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `<a|b>`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let p = u.adjoint() * u;
    let id = DMatrix::<C64>::identity(u.nrows(), u.ncols());
    (p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenpairs of a Hermitian matrix, ascending by eigenvalue.
pub fn hermitian_eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(
        &idx.iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (vals, vecs)
}

pub fn max_eigenvalue(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// Eigenpairs of a real symmetric matrix, ascending.
pub fn symmetric_eigh(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(
        &idx.iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (vals, vecs)
}

pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Lowest `want` eigenpairs of a real symmetric operator given by `apply`.
///
/// Lanczos with full reorthogonalization, restarted against the converged
/// vectors so that degenerate eigenvalues are found one by one.
pub fn lanczos_lowest<F>(
    dim: usize,
    want: usize,
    apply: F,
    seed: u64,
) -> Result<Vec<(f64, DVector<f64>)>>
where
    F: Fn(&[f64], &mut [f64]),
{
    use rand::Rng;
    let mut rng = crate::rng::stream(seed, 0);
    let want = want.min(dim);
    let mut found: Vec<(f64, DVector<f64>)> = Vec::new();
    let max_krylov = dim.min(300);
    let orth = |v: &mut DVector<f64>, basis: &[DVector<f64>]| {
        for _ in 0..2 {
            for b in basis {
                let d = b.dot(v);
                v.axpy(-d, b, 1.0);
            }
        }
    };
    while found.len() < want {
        let locked: Vec<DVector<f64>> = found.iter().map(|(_, v)| v.clone()).collect();
        let mut q = DVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5);
        orth(&mut q, &locked);
        let nq = q.norm();
        if nq < 1e-12 {
            break;
        }
        q /= nq;
        let mut basis: Vec<DVector<f64>> = vec![q];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];
        let mut best: Option<(f64, DVector<f64>)> = None;
        for k in 0..max_krylov.saturating_sub(locked.len()).max(1) {
            apply(basis[k].as_slice(), &mut w);
            let mut wv = DVector::from_column_slice(&w);
            let a = basis[k].dot(&wv);
            alpha.push(a);
            orth(&mut wv, &locked);
            orth(&mut wv, &basis);
            let b = wv.norm();
            let m = alpha.len();
            let t = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j || j + 1 == i {
                    beta[i.min(j)]
                } else {
                    0.0
                }
            });
            let (vals, vecs) = symmetric_eigh(t);
            let resid = (b * vecs[(m - 1, 0)]).abs();
            if resid < 1e-11 || b < 1e-12 || k + 1 == max_krylov.saturating_sub(locked.len()).max(1)
            {
                let mut v = DVector::zeros(dim);
                for (i, bv) in basis.iter().enumerate() {
                    v.axpy(vecs[(i, 0)], bv, 1.0);
                }
                orth(&mut v, &locked);
                let nv = v.norm();
                v /= nv;
                best = Some((vals[0], v));
                if resid < 1e-11 || b < 1e-12 {
                    break;
                }
                return Err(Error::NoConvergence(format!(
                    "Lanczos residual {resid:.2e} after {} steps",
                    k + 1
                )));
            }
            beta.push(b);
            basis.push(wv / b);
        }
        match best {
            Some(pair) => found.push(pair),
            None => break,
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(found)
}

/// Rayleigh residual `||H v - e v||` for a real operator.
pub fn residual<F: Fn(&[f64], &mut [f64])>(apply: F, v: &[f64], e: f64) -> f64 {
    let mut w = vec![0.0; v.len()];
    apply(v, &mut w);
    w.iter()
        .zip(v)
        .map(|(a, b)| (a - e * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanczos_finds_degenerate_pairs() {
        // diag(-1, -1, 0, 1, ...) with a random orthogonal rotation is overkill;
        // a diagonal operator already exercises the deflated restarts.
        let diag: Vec<f64> = (0..50)
            .map(|i| if i < 2 { -1.0 } else { i as f64 })
            .collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = diag[i] * x[i];
            }
        };
        let pairs = lanczos_lowest(50, 3, apply, 4).unwrap();
        assert!((pairs[0].0 + 1.0).abs() < 1e-10);
        assert!((pairs[1].0 + 1.0).abs() < 1e-10);
        assert!((pairs[2].0 - 2.0).abs() < 1e-10);
        assert!(pairs[0].1.dot(&pairs[1].1).abs() < 1e-8);
    }

    #[test]
    fn eigh_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (v, _) = symmetric_eigh(m);
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 3.0).abs() < 1e-12);
    }
}
