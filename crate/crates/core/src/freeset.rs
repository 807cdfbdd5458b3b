//! Fidelity oracles over free projected-state sets and the complexity
//! witness bounds.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{self, Bipartition, PureState, QuantumState};

/// Which free set `Fid(psi)` maximizes over.
#[derive(Clone)]
pub enum FidelityOracle {
    /// Product states across `cut` (positions inside the retained register)
    /// versus the remaining positions.
    Separable { cut: Vec<usize> },
    /// Pure stabilizer states.
    Stabilizer(Arc<StabilizerDictionary>),
    /// States with bounded entanglement across `left | rest`, through
    /// [`complexity_fidelity_bound`] or [`plikely_fidelity_bound`].
    EntanglementThreshold {
        w: usize,
        d: usize,
        variant: ThresholdVariant,
        left: Vec<usize>,
    },
    /// Caller-supplied upper bound.
    Explicit {
        name: String,
        f: Arc<dyn Fn(&PureState) -> f64 + Send + Sync>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdVariant {
    Unitary,
    PLikely { p_prime: f64 },
}

impl fmt::Debug for FidelityOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl FidelityOracle {
    pub fn separable(cut: Vec<usize>) -> Self {
        FidelityOracle::Separable { cut }
    }

    pub fn stabilizer(n: usize) -> Result<Self> {
        Ok(FidelityOracle::Stabilizer(stabilizer_dictionary(n)?))
    }

    pub fn explicit<F: Fn(&PureState) -> f64 + Send + Sync + 'static>(name: &str, f: F) -> Self {
        FidelityOracle::Explicit {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FidelityOracle::Separable { cut } => format!("separable{cut:?}"),
            FidelityOracle::Stabilizer(d) => format!("stabilizer(n={})", d.n),
            FidelityOracle::EntanglementThreshold {
                w,
                d,
                variant,
                left,
            } => {
                format!("entanglement-threshold(w={w}, d={d}, {variant:?}, L={left:?})")
            }
            FidelityOracle::Explicit { name, .. } => format!("explicit({name})"),
        }
    }

    /// `Fid(phi)` for a pure state on the retained register.
    pub fn fidelity(&self, phi: &PureState) -> Result<f64> {
        let v = match self {
            FidelityOracle::Separable { cut } => {
                let part = Bipartition::complement(phi.n(), cut)?;
                separable_fidelity(phi, &part)
            }
            FidelityOracle::Stabilizer(dict) => stabilizer_fidelity(phi, dict)?,
            FidelityOracle::EntanglementThreshold {
                w,
                d,
                variant,
                left,
            } => {
                let part = Bipartition::complement(phi.n(), left)?;
                let e = qstate::entanglement_entropy(phi, &part);
                match *variant {
                    ThresholdVariant::Unitary => complexity_fidelity_bound(e, *w, *d),
                    ThresholdVariant::PLikely { p_prime } => {
                        plikely_fidelity_bound(e, *w, *d, p_prime)?
                    }
                }
            }
            FidelityOracle::Explicit { f, .. } => f(phi),
        };
        Ok(v.clamp(0.0, 1.0))
    }

    /// Oracles act on pure projections only.
    pub fn fidelity_of(&self, state: &QuantumState) -> Result<f64> {
        match state {
            QuantumState::Pure(p) => self.fidelity(p),
            QuantumState::Mixed(_) => Err(Error::InvalidArgument(
                "fidelity oracles accept pure states only".into(),
            )),
        }
    }
}

/// Largest squared Schmidt coefficient across `cut`.
pub fn separable_fidelity(phi: &PureState, cut: &Bipartition) -> f64 {
    qstate::schmidt_spectrum(phi, cut)[0]
}

/// Every pure stabilizer state on `n <= 3` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilizerDictionary {
    pub n: usize,
    pub states: Vec<PureState>,
}

/// `2^n prod_{k=1}^n (2^k + 1)`.
pub fn stabilizer_count(n: usize) -> usize {
    (1..=n).fold(1usize << n, |acc, k| acc * ((1usize << k) + 1))
}

type Row = (u32, u32); // (x bits, z bits); bit j is qubit j

fn commute(a: Row, b: Row) -> bool {
    ((a.0 & b.1).count_ones() + (a.1 & b.0).count_ones()).is_multiple_of(2)
}

/// Row-reduced echelon form over GF(2) of 2n-bit vectors; `None` if the rows
/// are dependent.
fn rref(rows: &[Row], n: usize) -> Option<Vec<u64>> {
    let mut v: Vec<u64> = rows
        .iter()
        .map(|&(x, z)| (x as u64) << n | z as u64)
        .collect();
    let width = 2 * n;
    let mut r = 0;
    for col in (0..width).rev() {
        let bit = 1u64 << col;
        if let Some(p) = (r..v.len()).find(|&i| v[i] & bit != 0) {
            v.swap(r, p);
            for i in 0..v.len() {
                if i != r && v[i] & bit != 0 {
                    v[i] ^= v[r];
                }
            }
            r += 1;
        }
    }
    (r == v.len()).then_some(v)
}

fn apply_pauli(amps: &[C64], n: usize, row: Row) -> Vec<C64> {
    // Y = i X Z, so X^x Z^z carries a factor i per Y.
    let ys = (row.0 & row.1).count_ones();
    let phase = [
        C64::new(1., 0.),
        C64::new(0., 1.),
        C64::new(-1., 0.),
        C64::new(0., -1.),
    ][(ys % 4) as usize];
    let bits_x: usize = (0..n)
        .filter(|j| row.0 >> j & 1 == 1)
        .map(|j| qstate::bit_of(n, j))
        .sum();
    let bits_z: usize = (0..n)
        .filter(|j| row.1 >> j & 1 == 1)
        .map(|j| qstate::bit_of(n, j))
        .sum();
    let mut out = vec![C64::default(); amps.len()];
    for (i, &a) in amps.iter().enumerate() {
        let sign = if (i & bits_z).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        out[i ^ bits_x] = phase * a * sign;
    }
    out
}

fn stabilizer_state(n: usize, gens: &[Row], signs: u32) -> PureState {
    let dim = 1usize << n;
    for start in 0..dim {
        let mut v = PureState::basis(n, start).into_amplitudes();
        for (k, &g) in gens.iter().enumerate() {
            let s = if signs >> k & 1 == 1 { -1.0 } else { 1.0 };
            let gv = apply_pauli(&v, n, g);
            v.iter_mut()
                .zip(&gv)
                .for_each(|(a, b)| *a = (*a + b * s) * 0.5);
        }
        if crate::linalg::norm_sqr(&v) > 1e-6 {
            return PureState::normalized(n, v).unwrap();
        }
    }
    unreachable!("a maximal commuting set fixes a nonzero vector")
}

/// Phase-invariant key: rotate the first largest amplitude to the positive
/// real axis and round to 1e-9.
pub fn fingerprint(psi: &PureState) -> Vec<(i64, i64)> {
    let amps = psi.amplitudes();
    let max = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let lead = amps.iter().find(|a| a.norm() >= max - 1e-9).unwrap();
    let rot = lead.conj() / lead.norm();
    amps.iter()
        .map(|a| a * rot)
        .map(|a| ((a.re * 1e9).round() as i64, (a.im * 1e9).round() as i64))
        .collect()
}

impl StabilizerDictionary {
    /// Enumerates maximal commuting Pauli subgroups by canonical check
    /// matrices, then every sign pattern of their generators.
    pub fn build(n: usize) -> Result<Self> {
        if n == 0 || n > 3 {
            return Err(Error::UnsupportedSize(format!(
                "stabilizer dictionary for {n} qubits (supported: 1..=3)"
            )));
        }
        let paulis: Vec<Row> = (1u32..1 << (2 * n))
            .map(|c| (c >> n, c & ((1 << n) - 1)))
            .collect();
        let mut groups: HashSet<Vec<u64>> = HashSet::new();
        let mut gens_of = Vec::new();
        let mut stack: Vec<Row> = Vec::new();
        fn grow(
            n: usize,
            paulis: &[Row],
            from: usize,
            stack: &mut Vec<Row>,
            groups: &mut HashSet<Vec<u64>>,
            gens_of: &mut Vec<Vec<Row>>,
        ) {
            if stack.len() == n {
                if let Some(key) = rref(stack, n) {
                    if groups.insert(key) {
                        gens_of.push(stack.clone());
                    }
                }
                return;
            }
            for i in from..paulis.len() {
                let p = paulis[i];
                if stack.iter().all(|&q| commute(p, q)) {
                    stack.push(p);
                    if rref(stack, n).is_some() {
                        grow(n, paulis, i + 1, stack, groups, gens_of);
                    }
                    stack.pop();
                }
            }
        }
        grow(n, &paulis, 0, &mut stack, &mut groups, &mut gens_of);
        let mut seen = HashSet::new();
        let mut states = Vec::new();
        for gens in &gens_of {
            for signs in 0..1u32 << n {
                let s = stabilizer_state(n, gens, signs);
                if seen.insert(fingerprint(&s)) {
                    states.push(s);
                }
            }
        }
        if states.len() != stabilizer_count(n) {
            return Err(Error::InvalidState(format!(
                "enumerated {} stabilizer states, expected {}",
                states.len(),
                stabilizer_count(n)
            )));
        }
        Ok(StabilizerDictionary { n, states })
    }

    fn cache_file(dir: &Path, n: usize) -> PathBuf {
        dir.join(format!("stabilizer_n{n}.json"))
    }

    /// Loads the cached dictionary from `dir` or rebuilds and stores it.
    pub fn load_or_build(n: usize, dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Self::build(n);
        };
        let path = Self::cache_file(dir, n);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(d) = Self::from_json(n, &text) {
                return Ok(d);
            }
        }
        let d = Self::build(n)?;
        std::fs::create_dir_all(dir)?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, d.to_json())?;
        std::fs::rename(&tmp, &path)?;
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        let states: Vec<Vec<[f64; 2]>> = self
            .states
            .iter()
            .map(|s| s.amplitudes().iter().map(|a| [a.re, a.im]).collect())
            .collect();
        serde_json::to_string(&CacheFile {
            n: self.n,
            count: self.states.len(),
            states,
        })
        .unwrap()
    }

    pub fn from_json(n: usize, text: &str) -> Result<Self> {
        let file: CacheFile = serde_json::from_str(text)?;
        if file.n != n || file.count != stabilizer_count(n) || file.states.len() != file.count {
            return Err(Error::InvalidState(format!(
                "stabilizer cache header n={} count={} ({} states) does not match n={n}",
                file.n,
                file.count,
                file.states.len()
            )));
        }
        let states = file
            .states
            .into_iter()
            .map(|v| PureState::new(n, v.into_iter().map(|[re, im]| C64::new(re, im)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(StabilizerDictionary { n, states })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheFile {
    n: usize,
    count: usize,
    states: Vec<Vec<[f64; 2]>>,
}

/// Shared dictionary for `n` qubits, built once per process. When
/// `LOCQ_CACHE_DIR` is set the dictionary is also persisted there.
pub fn stabilizer_dictionary(n: usize) -> Result<Arc<StabilizerDictionary>> {
    static DICTS: [OnceLock<Arc<StabilizerDictionary>>; 3] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    if n == 0 || n > 3 {
        return Err(Error::UnsupportedSize(format!(
            "stabilizer dictionary for {n} qubits (supported: 1..=3)"
        )));
    }
    let dir = std::env::var_os("LOCQ_CACHE_DIR").map(PathBuf::from);
    Ok(DICTS[n - 1]
        .get_or_init(|| {
            let d = StabilizerDictionary::load_or_build(n, dir.as_deref())
                .or_else(|_| StabilizerDictionary::build(n))
                .expect("stabilizer enumeration for n <= 3 cannot fail");
            Arc::new(d)
        })
        .clone())
}

/// `max_s |<s|phi>|^2` over the dictionary.
pub fn stabilizer_fidelity(phi: &PureState, dict: &StabilizerDictionary) -> Result<f64> {
    if phi.n() != dict.n {
        return Err(Error::SizeMismatch(format!(
            "{}-qubit state vs {}-qubit dictionary",
            phi.n(),
            dict.n
        )));
    }
    Ok(dict
        .states
        .iter()
        .map(|s| s.inner(phi).norm_sqr())
        .fold(0.0, f64::max))
}

/// Fidelity upper bound for states with `e` bits of entanglement across the
/// halves of a `2w x 2w` block, against depth-`d` circuit states. Returns 1
/// (vacuous) unless `e > 8wd + 1`.
pub fn complexity_fidelity_bound(e: f64, w: usize, d: usize) -> f64 {
    let (w, d) = (w as f64, d as f64);
    if e <= 8.0 * w * d + 1.0 {
        return 1.0;
    }
    let t = (e - 1.0) / (4.0 * w * w) - 2.0 * d / w;
    (1.0 - t * t).clamp(0.0, 1.0)
}

/// Measurement-assisted analogue with the `p'`-likely free set. Returns 1
/// unless the inner distance term is positive.
pub fn plikely_fidelity_bound(e: f64, w: usize, d: usize, p_prime: f64) -> Result<f64> {
    if !(p_prime > 0.0 && p_prime < 1.0) {
        return Err(Error::InvalidProbability(p_prime));
    }
    let (w, d) = (w as f64, d as f64);
    let t = (e - 1.0) / (4.0 * w * w) - 3.0 * d / ((1.0 - p_prime) * w);
    if t <= 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 - t * t).clamp(0.0, 1.0))
}

/// `t + (1 - t) 1[fid <= t]`.
pub fn thresholded_witness_weight(fid: f64, t: f64) -> f64 {
    if fid <= t {
        1.0
    } else {
        t
    }
}
