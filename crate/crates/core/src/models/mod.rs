//! State families and noise models: Haar-random states and unitaries,
//! brickwork and Clifford circuits, the magic-injection model, spin-chain
//! ground states, depolarizing noise and the complexity lattice geometry.

mod circuit;
mod clifford;
mod geometry;
mod hamiltonian;

pub use circuit::{
    apply_gate, brickwork_circuit, brickwork_pairs, run_circuit, CircuitSpec, Gate, GateOp, Layer,
    Measurement, RunResult,
};
pub use clifford::{magic_injection_state, random_clifford_unitary, PauliString};
pub use geometry::LatticeGeometry;
pub use hamiltonian::{
    dimer_state, ground_space, j1j2_ground_state, xxz_ground_state, GroundState, SpinChain,
};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qstate::{DensityState, PureState};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Haar-random pure state on `n` qubits (normalized complex Gaussian vector).
pub fn haar_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PureState {
    let amps = (0..1usize << n).map(|_| gaussian(rng)).collect();
    PureState::normalized(n, amps).expect("Gaussian vector is nonzero")
}

/// Haar-random `dim x dim` unitary: QR of a Ginibre matrix with the phases
/// of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let z = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        q.column_mut(j).iter_mut().for_each(|x| *x *= ph);
    }
    q
}

pub fn haar_two_qubit_unitary<R: Rng + ?Sized>(rng: &mut R) -> DMatrix<C64> {
    haar_unitary(4, rng)
}

/// Experimental state produced by global depolarizing noise.
#[derive(Clone, Debug)]
pub enum Depolarized {
    /// Explicit density matrix (`n <= 10`).
    Matrix(DensityState),
    /// Branch mixture: `psi` with probability `1 - p`, otherwise a uniformly
    /// random computational basis state.
    Mixture { psi: PureState, p: f64 },
}

pub const DENSE_MIXED_MAX: usize = 10;

/// `(1 - p) psi + p I / 2^n`.
pub fn depolarize(psi: &PureState, p: f64) -> Result<Depolarized> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if psi.n() > DENSE_MIXED_MAX {
        return Ok(Depolarized::Mixture {
            psi: psi.clone(),
            p,
        });
    }
    Ok(Depolarized::Matrix(depolarize_matrix(psi, p)))
}

pub fn depolarize_matrix(psi: &PureState, p: f64) -> DensityState {
    let dim = psi.dim();
    let mut m = psi.to_density().matrix() * C64::new(1.0 - p, 0.0);
    for i in 0..dim {
        m[(i, i)] += C64::new(p / dim as f64, 0.0);
    }
    DensityState::from_raw(psi.n(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_defect;
    use crate::qstate::{self, QuantumState};
    use crate::rng::stream;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = stream(11, 0);
        for _ in 0..20 {
            let u = haar_two_qubit_unitary(&mut rng);
            assert!(unitarity_defect(&u) < 1e-10);
            assert!((u.clone() * u.adjoint() - DMatrix::identity(4, 4)).norm() < 1e-10);
            for col in u.column_iter() {
                assert!((col.norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn depolarize_examples() {
        let mut rng = stream(12, 0);
        let psi = haar_state(3, &mut rng);
        let d0 = depolarize_matrix(&psi, 0.0);
        assert!((d0.matrix() - psi.to_density().matrix()).norm() < 1e-14);
        let d1 = depolarize_matrix(&psi, 1.0);
        assert!((d1.matrix() - DensityState::maximally_mixed(3).matrix()).norm() < 1e-14);
        for &p in &[0.1, 0.37, 0.9] {
            let rho = depolarize_matrix(&psi, p);
            let f = qstate::state_fidelity(&psi, &QuantumState::Mixed(rho.clone())).unwrap();
            assert!((f - ((1.0 - p) + p / 8.0)).abs() < 1e-12);
            let d = 8.0;
            let closed = (1.0 - p).powi(2) + 2.0 * p * (1.0 - p) / d + p * p / d;
            assert!((rho.purity() - closed).abs() < 1e-12);
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            depolarize(&psi, 1.5),
            Err(Error::InvalidProbability(_))
        ));
    }
}
