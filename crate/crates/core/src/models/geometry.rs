use serde::Serialize;

use crate::error::{Error, Result};
use crate::qstate::Bipartition;

/// Complexity-witness partition of a line or square lattice.
///
/// `A` is a `2w x 2w` block (a `2w` segment in 1D) split into left and right
/// halves `L` and `R`. `L1`/`R1` hold the qubits within lattice distance `d`
/// of `B`; `L2`/`R2` the rest. Qubits are indexed row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LatticeGeometry {
    pub dims: Vec<usize>,
    pub w: usize,
    pub d: usize,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub l: Vec<usize>,
    pub r: Vec<usize>,
    pub l1: Vec<usize>,
    pub l2: Vec<usize>,
    pub r1: Vec<usize>,
    pub r2: Vec<usize>,
}

impl LatticeGeometry {
    /// Block placed as centrally as the lattice allows.
    pub fn centered(dims: &[usize], w: usize, d: usize) -> Result<Self> {
        let offset: Vec<usize> = dims.iter().map(|&m| m.saturating_sub(2 * w) / 2).collect();
        LatticeGeometry::new(dims, w, d, &offset)
    }

    pub fn new(dims: &[usize], w: usize, d: usize, offset: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 2 || offset.len() != dims.len() {
            return Err(Error::GeometryInvalid(format!(
                "dims {dims:?} / offset {offset:?}: need a line or square lattice"
            )));
        }
        if w == 0 {
            return Err(Error::GeometryInvalid("w must be positive".into()));
        }
        for (&m, &o) in dims.iter().zip(offset) {
            if o + 2 * w > m {
                return Err(Error::GeometryInvalid(format!(
                    "block of side 2w = {} at offset {o} does not fit in extent {m}",
                    2 * w
                )));
            }
        }
        let coords = |q: usize| -> Vec<usize> {
            if dims.len() == 1 {
                vec![q]
            } else {
                vec![q / dims[1], q % dims[1]]
            }
        };
        let n: usize = dims.iter().product();
        let in_block = |c: &[usize]| c.iter().zip(offset).all(|(&x, &o)| x >= o && x < o + 2 * w);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for q in 0..n {
            if in_block(&coords(q)) {
                a.push(q);
            } else {
                b.push(q);
            }
        }
        if b.is_empty() {
            return Err(Error::GeometryInvalid("region B is empty".into()));
        }
        let last = dims.len() - 1;
        let (mut l, mut r) = (Vec::new(), Vec::new());
        for &q in &a {
            if coords(q)[last] < offset[last] + w {
                l.push(q);
            } else {
                r.push(q);
            }
        }
        let dist_to_b = |q: usize| {
            let cq = coords(q);
            b.iter()
                .map(|&p| {
                    coords(p)
                        .iter()
                        .zip(&cq)
                        .map(|(&x, &y)| x.abs_diff(y))
                        .sum::<usize>()
                })
                .min()
                .unwrap()
        };
        let split = |side: &[usize]| -> (Vec<usize>, Vec<usize>) {
            side.iter().partition(|&&q| dist_to_b(q) <= d)
        };
        let (l1, l2) = split(&l);
        let (r1, r2) = split(&r);
        Ok(LatticeGeometry {
            dims: dims.to_vec(),
            w,
            d,
            a,
            b,
            l,
            r,
            l1,
            l2,
            r1,
            r2,
        })
    }

    pub fn n(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn partition(&self) -> Bipartition {
        Bipartition {
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }

    /// Positions of `L` inside the ordered list `A`.
    pub fn left_positions(&self) -> Vec<usize> {
        self.l
            .iter()
            .map(|q| self.a.iter().position(|x| x == q).unwrap())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_block_halves() {
        let g = LatticeGeometry::centered(&[8, 8], 2, 1).unwrap();
        assert_eq!(g.a.len(), 16);
        assert_eq!(g.l.len(), 2 * g.w * g.w);
        assert_eq!(g.r.len(), 8);
        // 4x4 block in the middle of 8x8: the ring of 12 touches B.
        assert_eq!(g.l1.len() + g.r1.len(), 12);
        assert_eq!(g.l2.len() + g.r2.len(), 4);
        let mut all: Vec<_> = g.l.iter().chain(&g.r).copied().collect();
        all.sort();
        assert_eq!(all, g.a);
    }

    #[test]
    fn line_segment() {
        let g = LatticeGeometry::centered(&[12], 4, 1).unwrap();
        assert_eq!(g.a, (2..10).collect::<Vec<_>>());
        assert_eq!(g.l, vec![2, 3, 4, 5]);
        assert_eq!(g.l1, vec![2]);
        assert_eq!(g.r1, vec![9]);
    }

    #[test]
    fn oversize_block_rejected() {
        assert!(LatticeGeometry::centered(&[4, 4], 3, 1).is_err());
        assert!(LatticeGeometry::centered(&[4, 4], 2, 1).is_err());
    }
}
