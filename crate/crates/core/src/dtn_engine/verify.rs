//! Norm and decay checks on computed chains and matrices.

use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};

use super::{dtn_diff_matrix, DtnEngine, EngineConfig, EngineError, ModeChain};
use crate::potentials::{BumpSpec, PotentialVnm};
use crate::spectral_gap::{disk_eigenvalues, resolvent_budget};
use crate::sphere_basis::{op_norm_sobolev_bound, DtnMatrix};
use crate::xreal::XReal;

/// Constant in the per-entry bound `C (1 + (N + E) Q) 2^{-j_max}`.
pub const LEMMA32_CONSTANT: f64 = 1000.0;

/// `10 (1 + sqrt E)^2`.
fn degree_threshold(energy: f64) -> f64 {
    10.0 * (1.0 + energy.abs().sqrt()).powi(2)
}

/// `1 + (N + |E|) Q`.
fn amplification(q: &XReal, n_sup: &XReal, energy: f64) -> XReal {
    let prec = q.precision_bits();
    let ne = &n_sup.abs() + &XReal::from_f64(energy.abs(), prec);
    &XReal::one(prec) + &(&ne * q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma31Report {
    pub base: i64,
    /// `||psi||_{L^2(D)}`.
    pub lhs: f64,
    /// `(1 + (N + |E|) Q) ||f||_{L^2(∂D)}` with `||f|| = 1`.
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

/// Checks `||psi|| <= (1 + (N + |E|) Q) ||f||` for the unit boundary mode of `chain`.
pub fn verify_lemma31(
    chain: &ModeChain,
    q: &XReal,
    n_sup: &XReal,
    energy: f64,
) -> Result<Lemma31Report, EngineError> {
    let prec = chain.levels[0].values.first().map_or(64, Float::prec);
    let mut sum = Float::with_val(prec, 0);
    for level in &chain.levels {
        let n2 = level
            .norm_sq
            .as_ref()
            .ok_or_else(|| EngineError::Precondition("chain was solved without norms".into()))?;
        sum += n2;
    }
    let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
    let lhs = (sum * two_pi).sqrt().to_f64();
    let rhs = amplification(q, n_sup, energy).to_f64();
    Ok(Lemma31Report {
        base: chain.base,
        lhs,
        rhs,
        margin: rhs - lhs,
        passed: lhs < rhs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma32Report {
    pub threshold: f64,
    pub checked: usize,
    /// `max log2(|a| / bound)` over checked entries.
    pub worst_ratio_log2: f64,
    pub worst_entry: Option<(i64, i64)>,
    /// `max log2(|a| 2^{j_max})` per `j_max`.
    pub scaled_by_jmax: Vec<(u32, f64)>,
    pub passed: bool,
}

/// Checks every entry with `j_max >= 10 (1 + sqrt E)^2` against `C (1 + (N + E) Q) 2^{-j_max}`.
pub fn verify_lemma32(a: &DtnMatrix, q: &XReal, n_sup: &XReal, energy: f64) -> Lemma32Report {
    let threshold = degree_threshold(energy);
    let amp_log2 = amplification(q, n_sup, energy).log2_mag() + LEMMA32_CONSTANT.log2();
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_entry = None;
    let mut scaled: std::collections::BTreeMap<u32, f64> = Default::default();
    for ((row, col), value) in a.iter() {
        let j_max = row.j.max(col.j);
        if (j_max as f64) < threshold {
            continue;
        }
        checked += 1;
        let mag = value.modulus.log2_mag();
        let ratio = mag - (amp_log2 - j_max as f64);
        if ratio > worst {
            worst = ratio;
            worst_entry = row.frequency().zip(col.frequency());
        }
        let s = scaled.entry(j_max).or_insert(f64::NEG_INFINITY);
        *s = s.max(mag + j_max as f64);
    }
    Lemma32Report {
        threshold,
        checked,
        worst_ratio_log2: worst,
        worst_entry,
        scaled_by_jmax: scaled.into_iter().collect(),
        passed: worst <= 0.0,
    }
}

/// Certified bound on `sum |a_{j1 j2}|` over entries with `max(|j1|, |j2|) > degree_max`.
///
/// For a shift `n`, at most `2 floor(2j/n) <= 4j/n` entries have `j_max = j`, and
/// `sum_{j > D} j 2^{-j} = (D + 2) 2^{-D}`, so the bound is
/// `C (1 + (N + E) Q) (4/n) (D + 2) 2^{-D}`.
pub fn tail_bound(
    a: &DtnMatrix,
    degree_max: u32,
    shift: u32,
    q: &XReal,
    n_sup: &XReal,
    energy: f64,
    d: u32,
) -> Result<XReal, EngineError> {
    if d != 2 || a.d != 2 {
        return Err(EngineError::Unsupported(format!(
            "tail bound is implemented for d = 2, got {d}"
        )));
    }
    if shift == 0 {
        return Err(EngineError::Precondition("shift must be positive".into()));
    }
    if (degree_max as f64) < degree_threshold(energy) {
        return Err(EngineError::Precondition(format!(
            "degree_max {degree_max} is below 10 (1 + sqrt E)^2 = {:.2}",
            degree_threshold(energy)
        )));
    }
    let prec = q.precision_bits();
    let count = XReal::from_f64(4.0 * (degree_max as f64 + 2.0) / shift as f64, prec);
    let c = XReal::from_f64(LEMMA32_CONSTANT, prec);
    Ok(&(&c * &amplification(q, n_sup, energy))
        * &(&count * &XReal::pow2(-(degree_max as f64), prec)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub n: u32,
    pub degree_max: u32,
    pub entries: usize,
    /// `log2` of the Sobolev operator-norm bound at `sigma`.
    pub bound_log2: f64,
    /// Same at `2 sigma`.
    pub bound_doubled_sigma_log2: f64,
    /// `log2((1 + Q + E Q) 2^{-n/4})`.
    pub reference_log2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub energy: f64,
    pub m: u32,
    pub sigma: f64,
    pub points: Vec<DecayPoint>,
    /// Least-squares slope of `bound_log2` against `n`.
    pub slope: f64,
    pub slope_doubled_sigma: f64,
    /// `log2 C_2` fitted on the first point.
    pub c2_log2: f64,
    /// Remaining points satisfy `bound <= C_2 (1 + Q + E Q) 2^{-n/4}`.
    pub holdout_passed: bool,
    pub passed: bool,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Degree cutoff used per `n` in the decay check.
pub fn decay_degree_max(n: u32) -> u32 {
    (3 * n).div_ceil(2)
}

/// Fits the slope of `log2 ||Φ_nm - Φ_0||_{H^{-σ} -> H^σ}` bounds against `n`.
pub fn prop21_decay_check(
    energy: f64,
    m: u32,
    n_list: &[u32],
    sigma: f64,
    cfg: EngineConfig,
) -> Result<DecayReport, EngineError> {
    if n_list.len() < 2 {
        return Err(EngineError::Precondition(
            "need at least two values of n".into(),
        ));
    }
    let floor = 20.0 * (1.0 + energy.sqrt()).powi(2);
    if let Some(bad) = n_list.iter().find(|&&n| (n as f64) <= floor) {
        return Err(EngineError::Precondition(format!(
            "n = {bad} does not exceed 20 (1 + sqrt E)^2 = {floor:.2}"
        )));
    }
    let bump = BumpSpec::default();
    let max_order = n_list
        .iter()
        .map(|&n| decay_degree_max(n))
        .max()
        .unwrap_or(0);
    let engine = DtnEngine::new(energy, &bump, max_order, cfg)?;
    let table = disk_eigenvalues(2, 4.0 * (energy + 10.0))?;
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let v = PotentialVnm::new(n, m, 2, bump, cfg.prec)?;
        let degree_max = decay_degree_max(n);
        let a = dtn_diff_matrix(&engine, &v, degree_max)?;
        let budget = resolvent_budget(energy, &v.eps, &table)?;
        let prec = budget.q.precision_bits();
        let one = XReal::one(prec);
        let e = XReal::from_f64(energy, prec);
        let pre = &(&one + &budget.q) + &(&e * &budget.q);
        points.push(DecayPoint {
            n,
            degree_max,
            entries: a.len(),
            bound_log2: op_norm_sobolev_bound(&a, sigma, 2).log2_mag(),
            bound_doubled_sigma_log2: op_norm_sobolev_bound(&a, 2.0 * sigma, 2).log2_mag(),
            reference_log2: pre.log2_mag() - n as f64 / 4.0,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.bound_log2).collect();
    let ys2: Vec<f64> = points.iter().map(|p| p.bound_doubled_sigma_log2).collect();
    let slope = ls_slope(&xs, &ys);
    let slope_doubled_sigma = ls_slope(&xs, &ys2);
    let c2_log2 = points[0].bound_log2 - points[0].reference_log2;
    let holdout_passed = points[1..]
        .iter()
        .all(|p| p.bound_log2 <= c2_log2 + p.reference_log2);
    Ok(DecayReport {
        energy,
        m,
        sigma,
        points,
        slope,
        slope_doubled_sigma,
        c2_log2,
        holdout_passed,
        passed: slope <= -0.25 && holdout_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{ChainOptions, EngineConfig};
    use super::*;
    use crate::radial::PanelQuadrature;
    use crate::sphere_basis::{LogComplex, ModeIndex};

    fn cfg(prec: u32) -> EngineConfig {
        EngineConfig {
            panels: 32,
            per_panel: 16,
            prec,
        }
    }

    #[test]
    fn harmonic_extension_norm_is_below_boundary_norm() {
        // E = 0, v = 0: psi = r^{|j|} e^{ij theta} / sqrt(2 pi), ||psi||^2 = 1 / (2|j| + 2).
        let q = PanelQuadrature::new(0.0, 1.0, 4, 16, 128);
        for j in [0u32, 1, 5, 30] {
            let f: Vec<Float> = q
                .nodes()
                .iter()
                .map(|r| Float::with_val(128, rug::ops::Pow::pow(r, 2 * j + 1)))
                .collect();
            let n2 = q.integrate(&f).to_f64();
            assert!((n2 - 1.0 / (2.0 * j as f64 + 2.0)).abs() < 1e-25);
            assert!(n2 <= 1.0);
        }
    }

    #[test]
    fn lemma31_on_chains() {
        let engine = DtnEngine::new(3.375, &BumpSpec::default(), 30, cfg(160)).unwrap();
        let v = PotentialVnm::new(12, 3, 2, BumpSpec::default(), 160).unwrap();
        let table = disk_eigenvalues(2, 60.0).unwrap();
        let b = resolvent_budget(3.375, &v.eps, &table).unwrap();
        for j2 in [-30i64, -6, 0, 7] {
            let l_max = super::super::levels_within(j2, 12, 30);
            let chain = engine
                .solve_boundary_mode(j2, &v, l_max, ChainOptions { with_norms: true })
                .unwrap();
            let r = verify_lemma31(&chain, &b.q, &v.eps, 3.375).unwrap();
            assert!(r.passed && r.margin > 0.0, "{r:?}");
            // Level 0 dominates: ||psi||^2 = 2 pi int |u_0|^2 r dr.
            let free =
                (chain.levels[0].norm_sq.as_ref().unwrap().to_f64() * 2.0 * std::f64::consts::PI)
                    .sqrt();
            assert!((r.lhs - free).abs() < 1e-3 * free);
        }
        let no_norms = engine
            .solve_boundary_mode(0, &v, 1, ChainOptions::default())
            .unwrap();
        assert!(verify_lemma31(&no_norms, &b.q, &v.eps, 3.375).is_err());
    }

    #[test]
    fn free_level_norm_matches_quadrature() {
        // int_0^1 J_j(kr)^2 r dr by a composite rule vs the Lommel closed form.
        let engine = DtnEngine::new(3.375, &BumpSpec::default(), 10, cfg(128)).unwrap();
        let v = PotentialVnm::new(12, 3, 2, BumpSpec::default(), 128).unwrap();
        let k = 3.375f64.sqrt();
        let q = PanelQuadrature::new(0.0, 1.0, 8, 16, 128);
        for j in [0u32, 4] {
            let chain = engine
                .solve_boundary_mode(j as i64, &v, 0, ChainOptions { with_norms: true })
                .unwrap();
            let o = crate::special_functions::BesselOrder::integer(j);
            let jk = crate::special_functions::bessel_j(o, k, 128)
                .unwrap()
                .to_f64();
            let f: Vec<Float> = q
                .nodes()
                .iter()
                .map(|r| {
                    let val = crate::special_functions::bessel_j(o, k * r.to_f64(), 128)
                        .unwrap()
                        .to_f64();
                    Float::with_val(128, val * val * r.to_f64())
                })
                .collect();
            let expected = q.integrate(&f).to_f64() / (jk * jk * 2.0 * std::f64::consts::PI);
            let got = chain.levels[0].norm_sq.as_ref().unwrap().to_f64();
            assert!(
                (got - expected).abs() < 1e-12 * expected,
                "j={j}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn lemma32_edge_cases() {
        let q = XReal::from_f64(0.5, 64);
        let n = XReal::from_f64(1e-3, 64);
        let empty = DtnMatrix::new(2, 1.0, "empty");
        let r = verify_lemma32(&empty, &q, &n, 1.0);
        assert!(r.passed && r.checked == 0);
        let mut a = DtnMatrix::new(2, 1.0, "one");
        let big = XReal::pow2(-30.0, 64);
        a.insert(
            ModeIndex::from_frequency(52),
            ModeIndex::from_frequency(40),
            LogComplex::from_real(&big),
        );
        let r = verify_lemma32(&a, &q, &n, 1.0);
        assert!(!r.passed);
        assert_eq!(r.worst_entry, Some((52, 40)));
    }

    #[test]
    fn tail_bound_closed_form() {
        let q = XReal::from_f64(0.8, 128);
        let n = XReal::from_f64(1.0 / 1728.0, 128);
        let a = DtnMatrix::new(2, 1.0, "t");
        let t = tail_bound(&a, 60, 12, &q, &n, 1.0, 2).unwrap();
        let amp = 1.0 + (1.0 / 1728.0 + 1.0) * 0.8;
        let expected = 1000.0 * amp * 4.0 * 62.0 / 12.0 * 2f64.powi(-60);
        assert!((t.to_f64() - expected).abs() < 1e-12 * expected);
        let t2 = tail_bound(&a, 120, 12, &q, &n, 1.0, 2).unwrap();
        assert!(t2.log2_mag() < t.log2_mag() - 59.0);
        assert!(tail_bound(&a, 30, 12, &q, &n, 1.0, 2).is_err());
        assert!(tail_bound(&a, 60, 12, &q, &n, 1.0, 3).is_err());
    }

    #[test]
    fn tail_pair_count_is_an_upper_bound() {
        // Count pairs with max(|j1|, |j2|) = j and j1 - j2 in {n, 2n, ...} directly.
        for n in [5i64, 12] {
            for j in 1..80i64 {
                let mut count = 0;
                for j1 in -j..=j {
                    for j2 in -j..=j {
                        let diff = j1 - j2;
                        if j1.abs().max(j2.abs()) == j && diff > 0 && diff % n == 0 {
                            count += 1;
                        }
                    }
                }
                assert!(
                    count as f64 <= 4.0 * j as f64 / n as f64,
                    "n={n} j={j} count={count}"
                );
            }
        }
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0, 2.0, 3.0];
        assert!((ls_slope(&xs, &[3.0, 1.0, -1.0]) + 2.0).abs() < 1e-15);
        assert_eq!(decay_degree_max(91), 137);
    }
}
