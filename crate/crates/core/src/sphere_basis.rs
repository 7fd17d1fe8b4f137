//! Orthonormal harmonic basis on the boundary sphere, Sobolev norms, and
//! operator-norm bounds computed from matrix elements.
//!
//! For `d = 2` the basis is `f_k(theta) = e^{i k theta} / sqrt(2 pi)` and a
//! mode `(j, p)` corresponds to the signed frequency `0`, `+j` (`p = 1`) or
//! `-j` (`p = 2`).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::xreal::XReal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("invalid mode index: {0}")]
    InvalidIndex(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

fn binomial(n: i64, k: i64) -> u128 {
    if n < 0 || k < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Dimension of the degree-`j` spherical harmonics on `S^{d-1}`.
pub fn dim_harmonics(d: u32, j: u32) -> u128 {
    assert!(d >= 2, "dimension must be at least 2");
    let (d, j) = (d as i64, j as i64);
    binomial(j + d - 1, d - 1) - binomial(j + d - 3, d - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub d: u32,
    pub j: u32,
    pub p: u32,
}

impl ModeIndex {
    pub fn new(d: u32, j: u32, p: u32) -> Result<Self, BasisError> {
        if d < 2 {
            return Err(BasisError::InvalidIndex(format!("dimension {d} < 2")));
        }
        let pj = dim_harmonics(d, j);
        if p == 0 || p as u128 > pj {
            return Err(BasisError::InvalidIndex(format!(
                "p = {p} outside [1, {pj}] for d = {d}, j = {j}"
            )));
        }
        Ok(Self { d, j, p })
    }

    /// The `d = 2` mode carrying frequency `k`.
    pub fn from_frequency(k: i64) -> Self {
        let j = k.unsigned_abs() as u32;
        let p = if k < 0 { 2 } else { 1 };
        Self { d: 2, j, p }
    }

    /// Signed frequency of a `d = 2` mode.
    pub fn frequency(&self) -> Option<i64> {
        if self.d != 2 {
            return None;
        }
        Some(if self.p == 2 {
            -(self.j as i64)
        } else {
            self.j as i64
        })
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frequency() {
            Some(k) => write!(f, "k={k}"),
            None => write!(f, "(d={}, j={}, p={})", self.d, self.j, self.p),
        }
    }
}

/// Finitely supported coefficients of a boundary function.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoefVector {
    pub d: u32,
    pub entries: BTreeMap<ModeIndex, Complex64>,
}

impl CoefVector {
    pub fn new(d: u32) -> Self {
        Self {
            d,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, idx: ModeIndex, c: Complex64) {
        assert_eq!(idx.d, self.d, "mode dimension mismatch");
        self.entries.insert(idx, c);
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries
            .values()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Values on the circle at angle `theta` (`d = 2` only).
    pub fn eval_circle(&self, theta: f64) -> Complex64 {
        assert_eq!(self.d, 2, "circle evaluation is defined for d = 2");
        let norm = (2.0 * PI).sqrt();
        self.entries
            .iter()
            .map(|(idx, c)| {
                let k = idx.frequency().unwrap() as f64;
                c * Complex64::from_polar(1.0 / norm, k * theta)
            })
            .sum()
    }
}

/// `(sum (1 + j)^{2 sigma} |c_jp|^2)^{1/2}`.
pub fn sobolev_norm(c: &CoefVector, sigma: f64) -> f64 {
    c.entries
        .iter()
        .map(|(idx, v)| (1.0 + idx.j as f64).powf(2.0 * sigma) * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Complex number stored as log-domain modulus and phase in `(-pi, pi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogComplex {
    pub modulus: XReal,
    pub phase: f64,
}

impl LogComplex {
    /// Real value; negative reals carry phase `pi`.
    pub fn from_real(x: &XReal) -> Self {
        let phase = if x.sign() < 0 { PI } else { 0.0 };
        Self {
            modulus: x.abs(),
            phase,
        }
    }

    pub fn conj(&self) -> Self {
        let phase = if self.phase == PI || self.phase == 0.0 {
            self.phase
        } else {
            -self.phase
        };
        Self {
            modulus: self.modulus.clone(),
            phase,
        }
    }

    /// Nearest double complex value; underflows to zero below the double range.
    pub fn to_complex64(&self) -> Complex64 {
        Complex64::from_polar(self.modulus.to_f64(), self.phase)
    }

    /// Real part as an extended real; `cos(phase)` is applied in double precision.
    pub fn real_part(&self) -> XReal {
        let c = self.phase.cos();
        if c.abs() == 1.0 {
            return if c > 0.0 {
                self.modulus.clone()
            } else {
                -&self.modulus
            };
        }
        &self.modulus * &XReal::from_f64(c, self.modulus.precision_bits())
    }
}

/// JSON record for one matrix entry.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EntryRecord {
    pub j1: u32,
    pub p1: u32,
    pub j2: u32,
    pub p2: u32,
    pub log10_mag: f64,
    pub phase: f64,
}

/// Sparse matrix of `<f_{i1}, A f_{i2}>`.
#[derive(Clone, Debug, PartialEq)]
pub struct DtnMatrix {
    pub d: u32,
    pub energy: f64,
    pub tag: String,
    entries: BTreeMap<(ModeIndex, ModeIndex), LogComplex>,
}

impl DtnMatrix {
    pub fn new(d: u32, energy: f64, tag: impl Into<String>) -> Self {
        Self {
            d,
            energy,
            tag: tag.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, row: ModeIndex, col: ModeIndex, value: LogComplex) {
        assert!(
            row.d == self.d && col.d == self.d,
            "mode dimension mismatch"
        );
        self.entries.insert((row, col), value);
    }

    pub fn get(&self, row: ModeIndex, col: ModeIndex) -> Option<&LogComplex> {
        self.entries.get(&(row, col))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(ModeIndex, ModeIndex), &LogComplex)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Absorbs the entries of `other`; keys must be disjoint.
    pub fn merge(&mut self, other: DtnMatrix) {
        for (k, v) in other.entries {
            let prev = self.entries.insert(k, v);
            assert!(prev.is_none(), "overlapping matrix keys in merge");
        }
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::new(self.d, self.energy, format!("{}^*", self.tag));
        for ((r, c), v) in &self.entries {
            out.entries.insert((*c, *r), v.conj());
        }
        out
    }

    pub fn records(&self) -> Vec<EntryRecord> {
        self.entries
            .iter()
            .map(|((r, c), v)| EntryRecord {
                j1: r.j,
                p1: r.p,
                j2: c.j,
                p2: c.p,
                log10_mag: v.modulus.log10_mag(),
                phase: v.phase,
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.records()).expect("records serialize")
    }

    /// Matrix-vector product in double precision.
    pub fn apply_f64(&self, c: &CoefVector) -> CoefVector {
        let mut out = CoefVector::new(self.d);
        for ((r, col), v) in &self.entries {
            if let Some(x) = c.entries.get(col) {
                *out.entries.entry(*r).or_insert(Complex64::new(0.0, 0.0)) += v.to_complex64() * x;
            }
        }
        out
    }
}

/// `4 sup (1 + max(j1, j2))^{2 sigma + d} |a|`, an upper bound for the `H^{-sigma} -> H^sigma` norm.
pub fn op_norm_sobolev_bound(a: &DtnMatrix, sigma: f64, d: u32) -> XReal {
    let mut best: Option<XReal> = None;
    for ((r, c), v) in a.iter() {
        if v.modulus.is_zero() {
            continue;
        }
        let prec = v.modulus.precision_bits();
        let weight =
            XReal::from_f64(1.0 + r.j.max(c.j) as f64, prec).abs_powf(2.0 * sigma + d as f64);
        let term = &weight * &v.modulus;
        best = Some(match best {
            Some(b) => XReal::max_abs(&b, &term),
            None => term,
        });
    }
    match best {
        Some(b) => &b * &XReal::from_f64(4.0, b.precision_bits()),
        None => XReal::zero(64),
    }
}

/// `sum |a|`, an upper bound for the `L^inf(S^1) -> L^inf(S^1)` norm of the kernel
/// `sum a f_{i1}(x) conj(f_{i2}(y))`: each term contributes at most
/// `|a| ||f_{i1}||_inf ||f_{i2}||_{L^1} = |a|`.
pub fn op_norm_linf_bound(a: &DtnMatrix) -> Result<XReal, BasisError> {
    if a.d != 2 {
        return Err(BasisError::Unsupported(format!(
            "L^inf operator bound is implemented for d = 2, got d = {}",
            a.d
        )));
    }
    let prec = a
        .iter()
        .map(|(_, v)| v.modulus.precision_bits())
        .max()
        .unwrap_or(64);
    Ok(XReal::sum(a.iter().map(|(_, v)| &v.modulus), prec))
}
