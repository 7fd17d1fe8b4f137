//! Dirichlet spectrum of `-Δ` on the unit ball, Weyl counting, gap-energy
//! selection and resolvent budgets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special_functions::{bessel_j_zeros_below, BesselOrder, SpecialError};
use crate::sphere_basis::dim_harmonics;
use crate::xreal::XReal;

/// Bits used for the Bessel zeros behind every table.
pub const TABLE_PRECISION: u32 = 128;

/// Inflation applied to the measured `max N(rho) / rho^d`.
pub const C1_INFLATION: f64 = 1.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("table cutoff {cutoff} is below the requested {needed}")]
    InsufficientCutoff { cutoff: f64, needed: f64 },
    #[error("resolvent budget undefined: distance {dist} does not exceed eps {eps}")]
    BudgetUndefined { dist: f64, eps: f64 },
    #[error(transparent)]
    Special(#[from] SpecialError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub multiplicity: u64,
    /// Harmonic degree.
    pub j: u32,
    /// Zero index, starting at 1.
    pub s: u32,
}

/// All Dirichlet eigenvalues `<= cutoff`, sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub d: u32,
    pub cutoff: f64,
    pub entries: Vec<SpectrumEntry>,
}

/// Builds the table from the zeros of `J_{j + (d-2)/2}` for every degree whose first zero is below `sqrt(lambda_max)`.
pub fn disk_eigenvalues(d: u32, lambda_max: f64) -> Result<SpectrumTable, GapError> {
    if d < 2 {
        return Err(GapError::InvalidArgument(format!("dimension {d} < 2")));
    }
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(GapError::InvalidArgument(format!(
            "lambda_max = {lambda_max}"
        )));
    }
    let z_max = lambda_max.sqrt();
    let mut entries = Vec::new();
    for j in 0.. {
        let zeros = bessel_j_zeros_below(BesselOrder::from_degree(j, d), z_max, TABLE_PRECISION)?;
        if zeros.is_empty() {
            // First zeros increase with the order.
            break;
        }
        let multiplicity = u64::try_from(dim_harmonics(d, j)).expect("multiplicity fits in u64");
        for (s, z) in zeros.iter().enumerate() {
            let lambda = z.to_f64().powi(2);
            if lambda <= lambda_max {
                entries.push(SpectrumEntry {
                    lambda,
                    multiplicity,
                    j,
                    s: s as u32 + 1,
                });
            }
        }
    }
    entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(SpectrumTable {
        d,
        cutoff: lambda_max,
        entries,
    })
}

impl SpectrumTable {
    /// CSV with header `lambda,multiplicity,j,s`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e).expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    /// Distinct eigenvalues with summed multiplicity.
    pub fn distinct(&self) -> Vec<(f64, u64)> {
        let mut out: Vec<(f64, u64)> = Vec::new();
        for e in &self.entries {
            match out.last_mut() {
                Some((l, m)) if (*l - e.lambda).abs() <= 1e-12 * e.lambda => *m += e.multiplicity,
                _ => out.push((e.lambda, e.multiplicity)),
            }
        }
        out
    }

    /// Lower bound for `dist(E, spectrum)`; eigenvalues above the cutoff are at least `cutoff - E` away.
    pub fn distance(&self, energy: f64) -> Result<f64, GapError> {
        if energy >= self.cutoff {
            return Err(GapError::InsufficientCutoff {
                cutoff: self.cutoff,
                needed: energy,
            });
        }
        let mut best = self.cutoff - energy;
        for e in &self.entries {
            best = best.min((e.lambda - energy).abs());
        }
        Ok(best)
    }
}

/// Multiplicity-weighted count of eigenvalues `< rho^2`.
pub fn weyl_count(table: &SpectrumTable, rho: f64) -> Result<u64, GapError> {
    let needed = rho * rho;
    if table.cutoff < needed {
        return Err(GapError::InsufficientCutoff {
            cutoff: table.cutoff,
            needed,
        });
    }
    Ok(table
        .entries
        .iter()
        .filter(|e| e.lambda < needed)
        .map(|e| e.multiplicity)
        .sum())
}

/// `C1_INFLATION * max N(rho) / rho^d` over `rho_grid`.
pub fn empirical_c1(d: u32, rho_grid: &[f64]) -> Result<f64, GapError> {
    let rho_max = rho_grid.iter().copied().fold(0.0, f64::max);
    if rho_grid.is_empty() || !(rho_max > 0.0) {
        return Err(GapError::InvalidArgument("empty rho grid".into()));
    }
    let table = disk_eigenvalues(d, rho_max * rho_max)?;
    let mut best = 0.0f64;
    for &rho in rho_grid {
        best = best.max(weyl_count(&table, rho)? as f64 / rho.powi(d as i32));
    }
    Ok(C1_INFLATION * best)
}

/// Gap constant for which `k = [(c1 + 1) rho^d]` equal subintervals of `(rho^2, 2 rho^2)`
/// each have length at least `2 c2 rho^{2-d}`.
pub fn gap_constant(c1: f64) -> f64 {
    1.0 / (2.0 * (c1 + 1.0))
}

/// Pigeonhole bookkeeping for the gap lemma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PigeonholeReport {
    pub rho: f64,
    pub c1: f64,
    pub weyl: u64,
    /// `[(c1 + 1) rho^d]`.
    pub k: u64,
    /// Length of each of the `k` equal subintervals.
    pub sub_length: f64,
    /// `2 * gap_constant(c1) * rho^{2-d}`.
    pub required_length: f64,
    pub holds: bool,
}

pub fn pigeonhole_check(
    table: &SpectrumTable,
    rho: f64,
    c1: f64,
) -> Result<PigeonholeReport, GapError> {
    let d = table.d as i32;
    let weyl = weyl_count(table, rho)?;
    let k = ((c1 + 1.0) * rho.powi(d)).floor() as u64;
    let sub_length = rho * rho / k.max(1) as f64;
    let required_length = 2.0 * gap_constant(c1) * rho.powi(2 - d);
    Ok(PigeonholeReport {
        rho,
        c1,
        weyl,
        k,
        sub_length,
        required_length,
        holds: k > weyl && sub_length >= required_length * (1.0 - 1e-12),
    })
}

/// Energy at the middle of the largest eigenvalue-free subinterval of `(rho^2, 2 rho^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEnergy {
    pub rho: f64,
    pub d: u32,
    pub energy: f64,
    pub half_width: f64,
    /// `gap_constant(c1) rho^{2-d}` when `c1` was supplied.
    pub lemma_half_width: Option<f64>,
    /// `half_width >= lemma_half_width`.
    pub meets_lemma: Option<bool>,
}

pub fn find_gap_energy(rho: f64, d: u32) -> Result<GapEnergy, GapError> {
    find_gap_energy_with_c1(rho, d, None)
}

pub fn find_gap_energy_with_c1(rho: f64, d: u32, c1: Option<f64>) -> Result<GapEnergy, GapError> {
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(GapError::InvalidArgument(format!(
            "rho = {rho} must exceed 1"
        )));
    }
    let lo = rho * rho;
    let hi = 2.0 * lo;
    let table = disk_eigenvalues(d, hi * 1.01)?;
    let mut cuts = vec![lo];
    cuts.extend(
        table
            .entries
            .iter()
            .map(|e| e.lambda)
            .filter(|&l| l > lo && l < hi),
    );
    cuts.push(hi);
    cuts.dedup();
    let (a, b) = cuts
        .windows(2)
        .map(|w| (w[0], w[1]))
        .fold((lo, lo), |best, cur| {
            if cur.1 - cur.0 > best.1 - best.0 {
                cur
            } else {
                best
            }
        });
    let energy = 0.5 * (a + b);
    let half_width = 0.5 * (b - a);
    let lemma_half_width = c1.map(|c| gap_constant(c) * rho.powi(2 - d as i32));
    Ok(GapEnergy {
        rho,
        d,
        energy,
        half_width,
        lemma_half_width,
        meets_lemma: lemma_half_width.map(|w| half_width >= w),
    })
}

/// `Q = 1/dist + 1/(dist - eps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventBudget {
    pub energy: f64,
    pub dist_free: f64,
    pub eps: XReal,
    pub q: XReal,
}

pub fn resolvent_budget(
    energy: f64,
    eps: &XReal,
    table: &SpectrumTable,
) -> Result<ResolventBudget, GapError> {
    let prec = eps.precision_bits().max(64);
    let dist_free = table.distance(energy)?;
    let dist = XReal::from_f64(dist_free, prec);
    let perturbed = &dist - &eps.abs();
    if perturbed.sign() <= 0 {
        return Err(GapError::BudgetUndefined {
            dist: dist_free,
            eps: eps.to_f64(),
        });
    }
    let q = &dist.recip() + &perturbed.recip();
    Ok(ResolventBudget {
        energy,
        dist_free,
        eps: eps.clone(),
        q,
    })
}
