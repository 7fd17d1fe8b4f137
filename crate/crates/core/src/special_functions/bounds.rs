//! Two-sided bounds on `J_alpha`, `Y_alpha` and their derivatives for large order.
//!
//! For `n >= 10 (rho + 1)^2`, `alpha = n + (d - 2)/2` and `0 < z <= rho`:
//!
//! ```text
//! 1/2 (z/2)^a / G(a+1)  <= |J_a(z)|  <= 3/2 (z/2)^a / G(a+1)
//!                          |J'_a(z)| <= 3 (z/2)^(a-1) / G(a)
//! 1/(2 pi) (z/2)^-a G(a) <= |Y_a(z)| <= 3/(2 pi) (z/2)^-a G(a)
//!                          |Y'_a(z)| <= 3/pi (z/2)^(-a-1) G(a+1)
//! ```
//!
//! The bounds hold for every `n > n0` once `n0` satisfies three scalar
//! conditions, which are evaluated here for `n0 = [10 (rho + 1)^2] - 1`.

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;
use serde::Serialize;

use super::bessel::{j_pair, y_pair};
use super::gamma::gamma_float;
use super::{BesselOrder, SpecialError};

const SAMPLES: u32 = 48;

/// One inequality family evaluated over the sample points.
///
/// `worst_ratio` is the largest `|f| / upper` for upper bounds and the largest
/// `lower / |f|` for lower bounds; the check passes when it is at most 1.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub worst_ratio: f64,
    pub worst_z: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BesselBoundReport {
    pub rho: f64,
    pub d: u32,
    pub n: u32,
    pub alpha: f64,
    pub checks: Vec<BoundCheck>,
    pub n0: u32,
    /// Left-hand sides of the three threshold conditions, each compared with its limit.
    pub n0_condition_values: [f64; 3],
    pub n0_conditions_passed: [bool; 3],
    pub passed: bool,
}

struct Tracker {
    name: &'static str,
    worst: f64,
    worst_z: f64,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            worst: 0.0,
            worst_z: 0.0,
        }
    }

    fn record(&mut self, ratio: &Float, z: f64) {
        let r = ratio.to_f64();
        if r > self.worst || r.is_nan() {
            self.worst = r;
            self.worst_z = z;
        }
    }

    fn finish(self) -> BoundCheck {
        BoundCheck {
            name: self.name.to_string(),
            worst_ratio: self.worst,
            worst_z: self.worst_z,
            passed: self.worst <= 1.0,
        }
    }
}

/// Values of the three threshold conditions at `n0` (limits: `n0 > 3`, `<= 1/2`, `<= 1/2`).
pub(crate) fn n0_conditions(rho: f64, n0: u32, prec: u32) -> ([f64; 3], [bool; 3]) {
    let r = Float::with_val(prec, rho);
    let r2 = Float::with_val(prec, r.square_ref());
    let quarter = Float::with_val(prec, &r2 / 4u32);
    let c2 = Float::with_val(prec, &quarter / (n0 + 1)).exp_m1();
    let half_rho = Float::with_val(prec, &r / 2u32);
    let g = if n0 >= 1 {
        gamma_float(&Float::with_val(prec, n0), prec).expect("positive")
    } else {
        Float::with_val(prec, f64::INFINITY)
    };
    let pow_odd = Float::with_val(prec, (&half_rho).pow(2 * n0 + 1));
    let max1 = if pow_odd > 1 {
        pow_odd
    } else {
        Float::with_val(prec, 1)
    };
    let pi = Float::with_val(prec, Constant::Pi);
    let t1 = Float::with_val(prec, &pi * 3u32) * &max1 / &g;
    let denom = Float::with_val(prec, 2 * n0) - &r2;
    let t2 = if denom > 0 {
        Float::with_val(prec, &r2 / &denom)
    } else {
        Float::with_val(prec, f64::INFINITY)
    };
    let t3 = Float::with_val(prec, (&half_rho).pow(2 * n0)) * quarter.exp() / &g;
    let c3 = t1 + t2 + t3;
    let values = [n0 as f64, c2.to_f64(), c3.to_f64()];
    let passed = [n0 > 3, values[1] <= 0.5, denom > 0 && values[2] <= 0.5];
    (values, passed)
}

/// Evaluates the four bounds at `z_i = rho i / 48`, `i = 1..=48`, and the `n0` conditions.
pub fn certify_bessel_bounds(
    rho: f64,
    d: u32,
    n: u32,
    prec: u32,
) -> Result<BesselBoundReport, SpecialError> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(SpecialError::Domain(format!(
            "rho must be positive, got {rho}"
        )));
    }
    if d < 2 {
        return Err(SpecialError::Domain(format!(
            "dimension must be >= 2, got {d}"
        )));
    }
    let threshold = 10.0 * (rho + 1.0).powi(2);
    if (n as f64) < threshold {
        return Err(SpecialError::Precondition(format!(
            "n = {n} is below 10 (rho + 1)^2 = {threshold}"
        )));
    }
    let order = BesselOrder::from_degree(n, d);
    let wp = prec + 32;
    let a = order.to_float(wp);
    let a1 = Float::with_val(wp, &a + 1u32);
    let g_a = gamma_float(&a, wp)?;
    let g_a1 = gamma_float(&a1, wp)?;
    let pi = Float::with_val(wp, Constant::Pi);

    let mut j_lo = Tracker::new("J lower");
    let mut j_hi = Tracker::new("J upper");
    let mut dj_hi = Tracker::new("J' upper");
    let mut y_lo = Tracker::new("Y lower");
    let mut y_hi = Tracker::new("Y upper");
    let mut dy_hi = Tracker::new("Y' upper");

    for i in 1..=SAMPLES {
        let z = Float::with_val(wp, rho) * i / SAMPLES;
        let zf = z.to_f64();
        let (j, dj) = j_pair(order, &z, prec)?;
        let (y, dy) = y_pair(order, &z, prec)?;
        let h = Float::with_val(wp, &z / 2u32);
        let pa = Float::with_val(wp, (&h).pow(&a));
        let pa_m1 = Float::with_val(wp, &pa / &h);
        let j_ref = Float::with_val(wp, &pa / &g_a1);
        let dj_ref = Float::with_val(wp, &pa_m1 / &g_a) * 3u32;
        let y_ref = Float::with_val(wp, &g_a / &pa) / &pi;
        let dy_ref = Float::with_val(wp, &g_a1 / &pa) / &h / &pi * 3u32;
        let jabs = Float::with_val(wp, j.abs_ref());
        let yabs = Float::with_val(wp, y.abs_ref());
        j_lo.record(&(Float::with_val(wp, &j_ref / 2u32) / &jabs), zf);
        j_hi.record(&(Float::with_val(wp, &jabs / &j_ref) / 1.5f64), zf);
        dj_hi.record(&(Float::with_val(wp, dj.abs_ref()) / &dj_ref), zf);
        y_lo.record(&(Float::with_val(wp, &y_ref / 2u32) / &yabs), zf);
        y_hi.record(&(Float::with_val(wp, &yabs / &y_ref) / 1.5f64), zf);
        dy_hi.record(&(Float::with_val(wp, dy.abs_ref()) / &dy_ref), zf);
    }
    let checks: Vec<BoundCheck> = [j_lo, j_hi, dj_hi, y_lo, y_hi, dy_hi]
        .into_iter()
        .map(Tracker::finish)
        .collect();
    let n0 = threshold.floor() as u32 - 1;
    let (n0_condition_values, n0_conditions_passed) = n0_conditions(rho, n0, prec);
    let passed = checks.iter().all(|c| c.passed) && n0_conditions_passed.iter().all(|&p| p);
    Ok(BesselBoundReport {
        rho,
        d,
        n,
        alpha: order.value(),
        checks,
        n0,
        n0_condition_values,
        n0_conditions_passed,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_case_passes() {
        let r = certify_bessel_bounds(1.0, 2, 40, 128).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.n0, 39);
        assert_eq!(r.checks.len(), 6);
        for c in &r.checks {
            assert!(c.worst_ratio > 0.0 && c.worst_ratio <= 1.0);
        }
    }

    #[test]
    fn below_threshold_is_precondition_error() {
        assert!(matches!(
            certify_bessel_bounds(1.0, 2, 39, 128),
            Err(SpecialError::Precondition(_))
        ));
    }

    #[test]
    fn n0_conditions_for_integer_rho() {
        for rho in [1.0, 2.0, 3.0] {
            let n0 = (10.0 * (rho + 1.0f64).powi(2)).floor() as u32 - 1;
            let (_, ok) = n0_conditions(rho, n0, 128);
            assert!(ok.iter().all(|&p| p), "rho={rho}");
        }
    }

    #[test]
    fn n0_conditions_fail_for_tiny_n0() {
        let (_, ok) = n0_conditions(3.0, 3, 128);
        assert!(!ok[0]);
        let (_, ok) = n0_conditions(3.0, 5, 128);
        assert!(!ok[2]);
    }

    #[test]
    fn leading_term_ratio_near_one_at_small_z() {
        // At z -> 0 the series is dominated by its first term, so |J| / ((z/2)^a / G(a+1)) -> 1.
        let r = certify_bessel_bounds(2.0, 3, 90, 128).unwrap();
        let upper = &r.checks[1];
        assert!(upper.worst_ratio < 1.0 / 1.5 + 1e-3);
        assert!(r.passed);
    }
}
