//! Closed-form conditional fidelity under global depolarizing noise.
//!
//! The witness is linear in the input, and for `I / 2^n` every outcome has
//! probability `1 / d_B` given its basis with projected state `I / d_A`, so
//! `eta(p) = (1 - p) LQ + p (S1 - S2)` with
//! `S1 = sum_x w / (d_A d_B)` and `S2 = sum_x w Fid(psi_x) / d_B`, both over
//! the outcomes where the target projection is defined.

use serde::{Deserialize, Serialize};

use crate::ensemble::{table_fidelities, BasisAssignment, ProjectionTable};
use crate::error::{Error, Result};
use crate::freeset::FidelityOracle;
use crate::qstate::{Bipartition, PureState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepolarizedTerms {
    /// Noiseless value (localizable quantumness).
    pub lm: f64,
    pub s1: f64,
    pub s2: f64,
    /// Outcomes with a defined target projection.
    pub support: usize,
}

impl DepolarizedTerms {
    pub fn eta(&self, p: f64) -> f64 {
        (1.0 - p) * self.lm + p * (self.s1 - self.s2)
    }

    /// Noise level where `eta` vanishes, if it lies in `(0, 1]`.
    pub fn crossover(&self) -> Option<f64> {
        let denom = self.lm - self.s1 + self.s2;
        if denom <= 0.0 {
            return None;
        }
        let p = self.lm / denom;
        (p > 0.0 && p <= 1.0).then_some(p)
    }
}

pub fn depolarized_terms(
    psi: &PureState,
    part: &Bipartition,
    oracle: &FidelityOracle,
    basis: &BasisAssignment,
) -> Result<DepolarizedTerms> {
    let table = ProjectionTable::new(psi, part, basis)?;
    let fids = table_fidelities(&table, oracle)?;
    let w = table.basis_weight();
    let d_a = (1u64 << part.n_a()) as f64;
    let d_b = (1u64 << part.n_b()) as f64;
    let mut t = DepolarizedTerms {
        lm: 0.0,
        s1: 0.0,
        s2: 0.0,
        support: fids.len(),
    };
    for &(x, f) in &fids {
        t.lm += w * table.probability(x) * (1.0 - f);
        t.s1 += w / (d_a * d_b);
        t.s2 += w * f / d_b;
    }
    Ok(t)
}

/// `eta_psi((1 - p) psi + p I / 2^n)`.
pub fn analytic_eta_depolarized(
    psi: &PureState,
    part: &Bipartition,
    oracle: &FidelityOracle,
    basis: &BasisAssignment,
    p: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(depolarized_terms(psi, part, oracle, basis)?.eta(p))
}
