//! Radial solutions of the free Schrödinger equation on the unit ball.
//!
//! For the degree-`j` harmonic in dimension `d`, with `alpha = j + (d-2)/2`
//! and `E = k^2`, the regular solution is `r^{-(d-2)/2} J_alpha(kr)` and the
//! solution vanishing at `r = 1` is
//! `R_j(k, r) = r^{-(d-2)/2} (Y_alpha(kr) J_alpha(k) - J_alpha(kr) Y_alpha(k))`.

mod fd;
mod green;
mod quadrature;

use rug::ops::Pow;
use rug::Float;
use thiserror::Error;

use crate::special_functions::{j_pair, rgamma_float, y_pair, BesselOrder, SpecialError};
use crate::xreal::XReal;

pub use fd::{fd_solve_mode, fd_solve_sampled, FdGrid, FdSolution};
pub use green::{green_apply, GreenKernel, GreenSolution};
pub use quadrature::{gauss_legendre, PanelQuadrature, DEFAULT_NODES_PER_PANEL, DEFAULT_PANELS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("energy is within the near-eigenvalue guard for order {order}: log2 margin {log2_margin:.2}")]
    NearEigenvalue { order: String, log2_margin: f64 },
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// `(d - 2) / 2` as a float.
pub(crate) fn nu_shift(d: u32, prec: u32) -> Float {
    Float::with_val(prec, d - 2) / 2u32
}

fn wavenumber(energy: f64, prec: u32) -> Result<Float, RadialError> {
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(RadialError::Unsupported(format!(
            "closed-form radial solutions need E > 0, got {energy}"
        )));
    }
    Ok(Float::with_val(prec, energy).sqrt())
}

/// `log2 (|J_alpha(k)| / ((k/2)^alpha / Gamma(alpha + 1)))`, i.e. how far `J_alpha(k)`
/// sits below its small-argument size.
pub fn eigen_margin_log2(order: BesselOrder, k: &Float, j_at_k: &Float) -> f64 {
    let prec = k.prec();
    let alpha = order.to_float(prec);
    let half = Float::with_val(prec, k / 2u32);
    let scale = Float::with_val(prec, (&half).pow(&alpha))
        * rgamma_float(&Float::with_val(prec, &alpha + 1u32), prec);
    let ratio = Float::with_val(prec, j_at_k.abs_ref()) / scale;
    if ratio.is_zero() {
        return f64::NEG_INFINITY;
    }
    ratio.log2().to_f64()
}

/// Rejects `k` when `|J_alpha(k)| < 2^{-prec/2} (k/2)^alpha / Gamma(alpha + 1)`.
pub fn eigen_guard(
    order: BesselOrder,
    k: &Float,
    j_at_k: &Float,
    prec: u32,
) -> Result<f64, RadialError> {
    let margin = eigen_margin_log2(order, k, j_at_k);
    if margin < -(prec as f64) / 2.0 {
        return Err(RadialError::NearEigenvalue {
            order: order.to_string(),
            log2_margin: margin,
        });
    }
    Ok(margin)
}

/// `R_j(k, r)` for `E = k^2 > 0`, `r in (0, 1]`.
pub fn r_tilde(j: u32, d: u32, energy: f64, r: f64, prec: u32) -> Result<XReal, RadialError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(RadialError::Unsupported(format!("r = {r} outside (0, 1]")));
    }
    let wp = prec + 16;
    let k = wavenumber(energy, wp)?;
    let order = BesselOrder::from_degree(j, d);
    let (jk, _) = j_pair(order, &k, wp)?;
    let (yk, _) = y_pair(order, &k, wp)?;
    let kr = Float::with_val(wp, &k * r);
    let (jr, yr) = if r == 1.0 {
        (jk.clone(), yk.clone())
    } else {
        (j_pair(order, &kr, wp)?.0, y_pair(order, &kr, wp)?.0)
    };
    let c = Float::with_val(wp, &yr * &jk) - Float::with_val(wp, &jr * &yk);
    let scale = Float::with_val(wp, r).pow(-nu_shift(d, wp));
    Ok(XReal::from_float(&(c * scale), prec))
}

/// `d/dr R_j(k, r)` at `r = 1`, i.e. `k (Y'_alpha(k) J_alpha(k) - J'_alpha(k) Y_alpha(k))`.
///
/// By the Wronskian `J Y' - J' Y = 2 / (pi z)` this equals `+2/pi` for every `j` and `E`.
pub fn r_tilde_deriv_at_1(j: u32, d: u32, energy: f64, prec: u32) -> Result<XReal, RadialError> {
    let wp = prec + 16;
    let k = wavenumber(energy, wp)?;
    let order = BesselOrder::from_degree(j, d);
    let (jk, djk) = j_pair(order, &k, wp)?;
    let (yk, dyk) = y_pair(order, &k, wp)?;
    let w = Float::with_val(wp, &dyk * &jk) - Float::with_val(wp, &djk * &yk);
    Ok(XReal::from_float(&(w * &k), prec))
}

/// Logarithmic normal derivative at `r = 1` of the regular free solution.
pub fn free_dtn_eigenvalue(d: u32, j: u32, energy: f64, prec: u32) -> Result<f64, RadialError> {
    if energy == 0.0 {
        return Ok(j as f64);
    }
    let wp = prec + 16;
    let k = wavenumber(energy, wp)?;
    let order = BesselOrder::from_degree(j, d);
    let (jk, djk) = j_pair(order, &k, wp)?;
    eigen_guard(order, &k, &jk, prec)?;
    let v = Float::with_val(wp, &k * &djk) / &jk - nu_shift(d, wp);
    Ok(v.to_f64())
}

/// `int x C(x)^2 dx` antiderivative `(x^2/2) (C'(x)^2 + (1 - alpha^2/x^2) C(x)^2)`
/// for any cylinder function `C` of order `alpha`.
pub fn lommel_antiderivative(alpha: &Float, x: &Float, c: &Float, dc: &Float) -> Float {
    let prec = x.prec();
    if x.is_zero() {
        return Float::with_val(prec, 0);
    }
    let x2 = Float::with_val(prec, x.square_ref());
    let a2 = Float::with_val(prec, alpha.square_ref());
    let t = Float::with_val(prec, dc.square_ref()) * &x2
        + Float::with_val(prec, &x2 - &a2) * Float::with_val(prec, c.square_ref());
    t / 2u32
}

/// `||R_j(k, .) f_jp||^2_{L^2(r0 < |x| < r1)}` via the Lommel integral.
pub fn vanishing_mode_norm_sq(
    j: u32,
    d: u32,
    energy: f64,
    r0: f64,
    r1: f64,
    prec: u32,
) -> Result<Float, RadialError> {
    let wp = prec + 32;
    let k = wavenumber(energy, wp)?;
    let order = BesselOrder::from_degree(j, d);
    let alpha = order.to_float(wp);
    let (jk, _) = j_pair(order, &k, wp)?;
    let (yk, _) = y_pair(order, &k, wp)?;
    let mut ends = Vec::with_capacity(2);
    for r in [r0, r1] {
        let x = Float::with_val(wp, &k * r);
        let (jx, djx) = j_pair(order, &x, wp)?;
        let (yx, dyx) = y_pair(order, &x, wp)?;
        let c = Float::with_val(wp, &yx * &jk) - Float::with_val(wp, &jx * &yk);
        let dc = Float::with_val(wp, &dyx * &jk) - Float::with_val(wp, &djx * &yk);
        ends.push(lommel_antiderivative(&alpha, &x, &c, &dc));
    }
    let k2 = Float::with_val(wp, k.square_ref());
    Ok(Float::with_val(
        prec,
        Float::with_val(wp, &ends[1] - &ends[0]) / k2,
    ))
}

/// Closed-form or sampled radial profile.
#[derive(Clone, Debug, PartialEq)]
pub enum RadialFunction {
    /// `r^{-(d-2)/2} J_alpha(kr)`.
    Regular { j: u32, d: u32, energy: f64 },
    /// `R_j(k, r)`.
    Vanishing { j: u32, d: u32, energy: f64 },
    /// Values on a strictly increasing grid ending at `r = 1`.
    Sampled { nodes: Vec<f64>, values: Vec<f64> },
}

impl RadialFunction {
    pub fn sampled(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self, RadialError> {
        if nodes.len() != values.len() || nodes.is_empty() {
            return Err(RadialError::Unsupported(
                "node/value length mismatch".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) || *nodes.last().unwrap() != 1.0 {
            return Err(RadialError::Unsupported(
                "grid must be strictly increasing and end at r = 1".into(),
            ));
        }
        Ok(Self::Sampled { nodes, values })
    }

    /// Evaluates at `r`; sampled profiles interpolate linearly.
    pub fn eval(&self, r: f64, prec: u32) -> Result<f64, RadialError> {
        match self {
            Self::Regular { j, d, energy } => {
                let wp = prec + 16;
                let k = wavenumber(*energy, wp)?;
                let order = BesselOrder::from_degree(*j, *d);
                let jx =
                    crate::special_functions::bessel_j(order, (k * r).to_f64(), wp)?.to_float(wp);
                let scale = if r == 0.0 {
                    Float::with_val(wp, 1)
                } else {
                    Float::with_val(wp, r).pow(-nu_shift(*d, wp))
                };
                Ok((jx * scale).to_f64())
            }
            Self::Vanishing { j, d, energy } => Ok(r_tilde(*j, *d, *energy, r, prec)?.to_f64()),
            Self::Sampled { nodes, values } => {
                let i = nodes.partition_point(|&x| x < r);
                if i == 0 {
                    return Ok(values[0]);
                }
                if i >= nodes.len() {
                    return Ok(*values.last().unwrap());
                }
                let t = (r - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
                Ok(values[i - 1] * (1.0 - t) + values[i] * t)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::{bessel_j, bessel_y};

    #[test]
    fn r_tilde_vanishes_at_boundary() {
        for (j, d, e) in [(0, 2, 1.0), (7, 2, 3.375), (3, 3, 10.0)] {
            assert!(r_tilde(j, d, e, 1.0, 256).unwrap().is_zero());
        }
        assert!(r_tilde(0, 2, 0.0, 0.5, 128).is_err());
    }

    #[test]
    fn r_tilde_matches_direct_combination() {
        let prec = 512;
        let o = BesselOrder::integer(0);
        let y_half = bessel_y(o, 0.5, prec).unwrap().to_f64();
        let j_one = bessel_j(o, 1.0, prec).unwrap().to_f64();
        let j_half = bessel_j(o, 0.5, prec).unwrap().to_f64();
        let y_one = bessel_y(o, 1.0, prec).unwrap().to_f64();
        let expected = y_half * j_one - j_half * y_one;
        let v = r_tilde(0, 2, 1.0, 0.5, 256).unwrap().to_f64();
        assert!((v - expected).abs() < 1e-14 * expected.abs());
    }

    #[test]
    fn boundary_derivative_is_two_over_pi() {
        let target = 2.0 / std::f64::consts::PI;
        for (j, d, e) in [(0, 2, 1.0), (5, 2, 3.375), (40, 2, 1.0), (4, 3, 2.0)] {
            let v = r_tilde_deriv_at_1(j, d, e, 256).unwrap();
            assert_eq!(v.sign(), 1);
            assert!((v.to_f64() - target).abs() < 1e-15);
        }
    }

    #[test]
    fn r_tilde_ode_residual() {
        // r^2 R'' + r R' + (E r^2 - j^2) R = 0 for d = 2, by central differences at 256 bits.
        let prec = 256;
        let (j, e) = (3u32, 2.0);
        let k = Float::with_val(prec, e).sqrt();
        let order = BesselOrder::integer(j);
        let (jk, _) = j_pair(order, &k, prec).unwrap();
        let (yk, _) = y_pair(order, &k, prec).unwrap();
        let eval = |r: &Float| -> Float {
            let x = Float::with_val(prec, &k * r);
            let (jx, _) = j_pair(order, &x, prec).unwrap();
            let (yx, _) = y_pair(order, &x, prec).unwrap();
            Float::with_val(prec, &yx * &jk) - Float::with_val(prec, &jx * &yk)
        };
        let h = Float::with_val(prec, Float::i_exp(1, -40));
        for r in [0.3, 0.55, 0.9] {
            let r = Float::with_val(prec, r);
            let up = eval(&Float::with_val(prec, &r + &h));
            let mid = eval(&r);
            let dn = eval(&Float::with_val(prec, &r - &h));
            let h2 = Float::with_val(prec, h.square_ref());
            let d2 = (Float::with_val(prec, &up + &dn) - Float::with_val(prec, &mid * 2u32)) / &h2;
            let d1 = Float::with_val(prec, &up - &dn) / Float::with_val(prec, &h * 2u32);
            let r2 = Float::with_val(prec, r.square_ref());
            let coef = Float::with_val(prec, &r2 * e) - (j * j);
            let res = Float::with_val(prec, &d2 * &r2)
                + Float::with_val(prec, &d1 * &r)
                + Float::with_val(prec, &coef * &mid);
            let scale =
                Float::with_val(prec, &d2 * &r2).abs() + Float::with_val(prec, &coef * &mid).abs();
            assert!((res / scale).abs().to_f64() < 1e-8);
        }
    }

    #[test]
    fn free_dtn_values() {
        assert_eq!(free_dtn_eigenvalue(2, 4, 0.0, 128).unwrap(), 4.0);
        let v = free_dtn_eigenvalue(2, 0, 1.0, 256).unwrap();
        let j0 = bessel_j(BesselOrder::integer(0), 1.0, 256)
            .unwrap()
            .to_f64();
        let j1 = bessel_j(BesselOrder::integer(1), 1.0, 256)
            .unwrap()
            .to_f64();
        assert!((v + j1 / j0).abs() < 1e-12);
        assert!((v + 0.5750815).abs() < 1e-6);
        for j in 0..=20 {
            let v = free_dtn_eigenvalue(2, j, 1e-4, 128).unwrap();
            assert!((v - j as f64).abs() <= 0.01);
        }
    }

    #[test]
    fn near_eigenvalue_is_rejected() {
        let z = crate::special_functions::bessel_j_zeros(BesselOrder::integer(0), 1, 256).unwrap();
        let e = Float::with_val(256, z[0].square_ref()).to_f64();
        // At 64 bits the guard threshold is 2^{-32}; the double-rounded zero leaves |J_0| near 1e-16.
        assert!(matches!(
            free_dtn_eigenvalue(2, 0, e, 64),
            Err(RadialError::NearEigenvalue { .. })
        ));
        assert!(free_dtn_eigenvalue(2, 0, e + 0.1, 512).is_ok());
    }

    #[test]
    fn lommel_matches_quadrature() {
        let prec = 256;
        let (j, d, e) = (6u32, 2u32, 3.375);
        let exact = vanishing_mode_norm_sq(j, d, e, 1.0 / 3.0, 0.4, prec).unwrap();
        let q = PanelQuadrature::new(1.0 / 3.0, 0.4, 4, 16, prec);
        let vals: Vec<Float> = q
            .nodes()
            .iter()
            .map(|r| {
                let v = r_tilde(j, d, e, r.to_f64(), prec).unwrap().to_float(prec);
                Float::with_val(prec, v.square_ref()) * r
            })
            .collect();
        // Nodes are rounded to double inside r_tilde, so compare at double accuracy.
        let approx = q.integrate(&vals);
        let rel = (Float::with_val(prec, &approx - &exact) / &exact)
            .abs()
            .to_f64();
        assert!(rel < 1e-12, "rel={rel:e}");
    }

    #[test]
    fn psi_lower_bound_and_boundary_derivative_bounds() {
        // j >= 10 (1 + k)^2 with k = 0.5 gives j >= 22.5.
        let e = 0.25;
        let k = 0.5;
        for j in [23u32, 30, 45] {
            let prec = 256;
            let order = BesselOrder::from_degree(j, 2);
            let alpha = order.value();
            let jk = bessel_j(order, k, prec).unwrap();
            let yk = bessel_y(order, k, prec).unwrap();
            let yj = (&jk * &yk).abs();
            let norm_sq = vanishing_mode_norm_sq(j, 2, e, 1.0 / 3.0, 0.4, prec).unwrap();
            let norm = XReal::from_float(&norm_sq.sqrt(), prec);
            let ratio = (&norm / &yj).to_f64();
            assert!(ratio > 6.0 / 1000.0 * 2.5f64.powf(alpha));
            let deriv = r_tilde_deriv_at_1(j, 2, e, prec).unwrap();
            assert!((&deriv / &yj).abs().to_f64() <= 6.0 * alpha);
            let full = vanishing_mode_norm_sq(j, 2, e, 1.0 / 3.0, 1.0, prec).unwrap();
            let full = XReal::from_float(&full.sqrt(), prec);
            let rhs = &XReal::from_f64(1000.0 * alpha, prec)
                * &(&XReal::from_f64(2.5, prec).abs_powf(-alpha) * &full);
            assert!(deriv.to_f64() <= rhs.to_f64());
        }
    }

    #[test]
    fn sampled_profile_interpolates() {
        let f = RadialFunction::sampled(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(f.eval(0.25, 64).unwrap(), 0.5);
        assert_eq!(f.eval(0.75, 64).unwrap(), 2.0);
        assert!(RadialFunction::sampled(vec![0.0, 0.5], vec![0.0, 1.0]).is_err());
        let g = RadialFunction::Regular {
            j: 0,
            d: 2,
            energy: 1.0,
        };
        assert!((g.eval(0.0, 64).unwrap() - 1.0).abs() < 1e-15);
        let v = RadialFunction::Vanishing {
            j: 2,
            d: 2,
            energy: 1.0,
        };
        assert_eq!(v.eval(1.0, 128).unwrap(), 0.0);
    }
}
