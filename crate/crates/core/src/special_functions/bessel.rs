//! Bessel functions of the first and second kind for real argument.
//!
//! `J_nu` is summed from its power series for any real `nu`. `Y_alpha` uses
//! the quotient `(J_a cos(pi a) - J_{-a}) / sin(pi a)`; at integer orders the
//! limit is taken by symmetric order offsets `alpha +- h`, `h = 2^{-10-i}`,
//! and Richardson extrapolation in `h^2`.

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use super::gamma::rgamma_float;
use super::{cos_pi, sin_pi, BesselOrder, SpecialError};
use crate::xreal::XReal;

const MAX_SERIES_TERMS: u32 = 200_000;
const FIRST_OFFSET_EXP: i32 = 10;
const MAX_RICHARDSON_LEVELS: usize = 28;

/// Guard bits for a series evaluation at argument `z`.
///
/// The alternating series of `J` has terms up to about `e^z` times its sum.
fn series_precision(prec: u32, z: &Float) -> u32 {
    let zf = z.to_f64().abs();
    prec + 32 + (1.45 * zf).ceil() as u32
}

/// Value and z-derivative of `J_nu(z)` for real `nu`, `z > 0`, at `prec` bits.
pub fn j_pair_real_order(nu: &Float, z: &Float, prec: u32) -> Result<(Float, Float), SpecialError> {
    if *z <= 0 {
        return Err(SpecialError::Domain(
            "series evaluation needs a positive argument".into(),
        ));
    }
    if *nu < 0 && nu.is_integer() {
        // J_{-n} = (-1)^n J_n
        let n = Float::with_val(nu.prec(), -nu);
        let (v, d) = j_pair_real_order(&n, z, prec)?;
        let odd = !Float::with_val(n.prec(), &n / 2u32).is_integer();
        return Ok(if odd { (-v, -d) } else { (v, d) });
    }
    let wp = series_precision(prec, z);
    let nu = Float::with_val(wp, nu);
    let z = Float::with_val(wp, z);
    let half = Float::with_val(wp, &z / 2u32);
    let q = -Float::with_val(wp, half.square_ref());
    let nu_plus_one = Float::with_val(wp, &nu + 1u32);
    let mut term = Float::with_val(wp, (&half).pow(&nu)) * rgamma_float(&nu_plus_one, wp);
    let mut sum = term.clone();
    let mut dsum = Float::with_val(wp, &term * &nu);

    // Terms may grow until m exceeds -nu and (z/2)^2.
    let m_min = {
        let neg = (-nu.to_f64()).max(0.0);
        (neg.ceil() as u32).max((half.to_f64() * half.to_f64()).ceil() as u32) + 1
    };
    let tiny = Float::with_val(wp, Float::i_exp(1, -(wp as i32)));
    let mut m: u32 = 0;
    loop {
        m += 1;
        if m > MAX_SERIES_TERMS {
            return Err(SpecialError::PrecisionExhausted(format!(
                "J series did not converge within {MAX_SERIES_TERMS} terms"
            )));
        }
        let mut denom = Float::with_val(wp, &nu + m);
        denom *= m;
        term *= &q;
        term /= &denom;
        sum += &term;
        let weight = Float::with_val(wp, &nu + 2 * m);
        let dterm = Float::with_val(wp, &term * &weight);
        dsum += &dterm;
        if m >= m_min {
            let t_abs = Float::with_val(wp, term.abs_ref())
                * (Float::with_val(wp, weight.abs_ref()) + 1u32);
            let bound_v = Float::with_val(wp, sum.abs_ref()) * &tiny;
            let bound_d = Float::with_val(wp, dsum.abs_ref()) * &tiny;
            if t_abs <= bound_v && t_abs <= bound_d {
                break;
            }
            if term.is_zero() {
                break;
            }
        }
    }
    let deriv = Float::with_val(wp, &dsum / &z);
    Ok((Float::with_val(prec, sum), Float::with_val(prec, deriv)))
}

/// Value and derivative of `J_alpha(z)`; `z = 0` is handled for the value.
pub fn j_pair(order: BesselOrder, z: &Float, prec: u32) -> Result<(Float, Float), SpecialError> {
    if *z < 0 {
        return Err(SpecialError::Domain(format!(
            "J requires a nonnegative argument, got {}",
            z.to_f64()
        )));
    }
    if z.is_zero() {
        let value = if order.half_units() == 0 { 1 } else { 0 };
        let deriv = match order.half_units() {
            2 => Float::with_val(prec, 0.5f64),
            h if h > 2 => Float::with_val(prec, 0),
            _ => {
                return Err(SpecialError::Domain(format!(
                    "J' of order {order} is singular or undefined at z = 0"
                )))
            }
        };
        return Ok((Float::with_val(prec, value), deriv));
    }
    j_pair_real_order(&order.to_float(prec + 8), z, prec)
}

/// `Y_n(z)` for integer `n` from the logarithmic series
///
/// ```text
/// Y_n = -(h^{-n}/pi) sum_{k<n} ((n-k-1)!/k!) h^{2k} + (2/pi) ln(h) J_n
///       - (h^n/pi) sum_k (psi(k+1) + psi(n+k+1)) (-h^2)^k / (k! (n+k)!),   h = z/2.
/// ```
///
/// Independent of [`y_pair_order_limit`].
pub fn y_integer_series(n: u32, z: &Float, prec: u32) -> Result<Float, SpecialError> {
    if *z <= 0 {
        return Err(SpecialError::Domain("Y needs a positive argument".into()));
    }
    let wp = series_precision(prec, z) + 16;
    let z = Float::with_val(wp, z);
    let h = Float::with_val(wp, &z / 2u32);
    let h2 = Float::with_val(wp, h.square_ref());
    let pi = Float::with_val(wp, Constant::Pi);
    let euler = Float::with_val(wp, Constant::Euler);

    let mut finite = Float::with_val(wp, 0);
    if n > 0 {
        // k = 0 term is (n-1)!, then ratio h^2 / ((n-k-1) (k+1)).
        let mut t = Float::with_val(wp, Float::factorial(n - 1));
        for k in 0..n {
            finite += &t;
            if k + 1 < n {
                t *= &h2;
                t /= (n - k - 1) * (k + 1);
            }
        }
        finite *= Float::with_val(wp, (&h).pow(-(n as i32)));
    }

    let (jn, _) = j_pair(BesselOrder::integer(n), &z, wp)?;
    let log_part = Float::with_val(wp, h.ln_ref()) * jn * 2u32;

    let q = -h2.clone();
    let mut term = Float::with_val(wp, (&h).pow(n)) / Float::with_val(wp, Float::factorial(n));
    let mut h_k = Float::with_val(wp, 0);
    let mut h_nk = Float::with_val(wp, 0);
    for i in 1..=n {
        h_nk += Float::with_val(wp, 1u32) / i;
    }
    let two_gamma = Float::with_val(wp, &euler * 2u32);
    let mut sum = Float::with_val(wp, 0);
    let tiny = Float::with_val(wp, Float::i_exp(1, -(wp as i32)));
    let k_min = h2.to_f64().ceil() as u32 + 1;
    let mut k: u32 = 0;
    loop {
        let coef = Float::with_val(wp, &h_k + &h_nk) - &two_gamma;
        let contrib = Float::with_val(wp, &term * &coef);
        sum += &contrib;
        if k >= k_min {
            let bound =
                (Float::with_val(wp, coef.abs_ref()) + 1u32) * Float::with_val(wp, term.abs_ref());
            if bound <= Float::with_val(wp, sum.abs_ref()) * &tiny || term.is_zero() {
                break;
            }
        }
        k += 1;
        if k > MAX_SERIES_TERMS {
            return Err(SpecialError::PrecisionExhausted(format!(
                "Y series did not converge within {MAX_SERIES_TERMS} terms"
            )));
        }
        term *= &q;
        term /= k * (n + k);
        h_k += Float::with_val(wp, 1u32) / k;
        h_nk += Float::with_val(wp, 1u32) / (n + k);
    }
    let total = log_part - finite - sum;
    Ok(Float::with_val(prec, total / pi))
}

/// Y and Y' at a non-integer real order via the quotient formula.
fn y_pair_quotient(nu: &Float, z: &Float, prec: u32) -> Result<(Float, Float), SpecialError> {
    let wp = prec + 16;
    let (jp, djp) = j_pair_real_order(nu, z, wp)?;
    let neg = Float::with_val(nu.prec(), -nu);
    let (jm, djm) = j_pair_real_order(&neg, z, wp)?;
    let s = sin_pi(&Float::with_val(wp, nu));
    let c = cos_pi(&Float::with_val(wp, nu));
    let y = (Float::with_val(wp, &jp * &c) - &jm) / &s;
    let dy = (Float::with_val(wp, &djp * &c) - &djm) / &s;
    Ok((Float::with_val(prec, y), Float::with_val(prec, dy)))
}

/// `Y_n` and `Y_n'` from the logarithmic series, with `Y_n' = Y_{n-1} - (n/z) Y_n` and `Y_0' = -Y_1`.
fn y_pair_series(n: u32, z: &Float, prec: u32) -> Result<(Float, Float), SpecialError> {
    let wp = prec + 16;
    let y = y_integer_series(n, z, wp)?;
    let dy = if n == 0 {
        -y_integer_series(1, z, wp)?
    } else {
        let prev = y_integer_series(n - 1, z, wp)?;
        prev - Float::with_val(wp, &y * n) / Float::with_val(wp, z)
    };
    Ok((Float::with_val(prec, y), Float::with_val(prec, dy)))
}

/// Integer-order `Y_n`, `Y_n'` as the limit of the non-integer quotient formula, by symmetric
/// order offsets and Richardson extrapolation in h^2.
///
/// Independent of [`y_integer_series`]; kept as its cross-check.
pub fn y_pair_order_limit(n: u32, z: &Float, prec: u32) -> Result<(Float, Float), SpecialError> {
    if *z <= 0 {
        return Err(SpecialError::Domain("Y needs a positive argument".into()));
    }
    let wp = prec + 96;
    let tol_exp = -(prec as i32 + 8);
    let mut table: Vec<Vec<(Float, Float)>> = Vec::new();
    for level in 0..MAX_RICHARDSON_LEVELS {
        let h = Float::with_val(wp, Float::i_exp(1, -(FIRST_OFFSET_EXP + level as i32)));
        let up = Float::with_val(wp, &h + n);
        let down = Float::with_val(wp, n) - &h;
        let (y1, d1) = y_pair_quotient(&up, z, wp)?;
        let (y2, d2) = y_pair_quotient(&down, z, wp)?;
        let mut row = vec![(
            Float::with_val(wp, &y1 + &y2) / 2u32,
            Float::with_val(wp, &d1 + &d2) / 2u32,
        )];
        for k in 1..=level {
            let factor = Float::with_val(wp, Float::i_exp(1, 2 * k as i32)) - 1u32;
            let (a, da) = &row[k - 1];
            let (b, db) = &table[level - 1][k - 1];
            let next = Float::with_val(wp, a - b) / &factor + a;
            let dnext = Float::with_val(wp, da - db) / &factor + da;
            row.push((next, dnext));
        }
        table.push(row);
        if level >= 2 {
            let (cur, dcur) = &table[level][level];
            let (prev, dprev) = &table[level - 1][level - 1];
            let tol = Float::with_val(wp, Float::i_exp(1, tol_exp));
            let ok_v =
                Float::with_val(wp, cur - prev).abs() <= Float::with_val(wp, cur.abs_ref()) * &tol;
            let ok_d = Float::with_val(wp, dcur - dprev).abs()
                <= Float::with_val(wp, dcur.abs_ref()) * &tol;
            if ok_v && ok_d {
                return Ok((Float::with_val(prec, cur), Float::with_val(prec, dcur)));
            }
        }
    }
    Err(SpecialError::PrecisionExhausted(format!(
        "Richardson extrapolation for Y_{n} did not converge in {MAX_RICHARDSON_LEVELS} levels"
    )))
}

/// Value and derivative of `Y_alpha(z)` for `z > 0`.
pub fn y_pair(order: BesselOrder, z: &Float, prec: u32) -> Result<(Float, Float), SpecialError> {
    if *z <= 0 {
        return Err(SpecialError::Domain(format!(
            "Y requires a positive argument, got {}",
            z.to_f64()
        )));
    }
    if order.is_integer() {
        y_pair_series(order.half_units() / 2, z, prec)
    } else {
        y_pair_quotient(&order.to_float(prec + 8), z, prec)
    }
}

fn arg(z: f64, prec: u32) -> Float {
    Float::with_val(prec + 64, z)
}

pub fn bessel_j(order: BesselOrder, z: f64, prec: u32) -> Result<XReal, SpecialError> {
    if !(z >= 0.0) {
        return Err(SpecialError::Domain(format!("J requires z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(if order.half_units() == 0 {
            XReal::one(prec)
        } else {
            XReal::zero(prec)
        });
    }
    let (v, _) = j_pair(order, &arg(z, prec), prec + 16)?;
    Ok(XReal::from_float(&v, prec))
}

pub fn bessel_j_prime(order: BesselOrder, z: f64, prec: u32) -> Result<XReal, SpecialError> {
    if !(z >= 0.0) {
        return Err(SpecialError::Domain(format!("J' requires z >= 0, got {z}")));
    }
    let (_, d) = j_pair(order, &arg(z, prec), prec + 16)?;
    Ok(XReal::from_float(&d, prec))
}

pub fn bessel_y(order: BesselOrder, z: f64, prec: u32) -> Result<XReal, SpecialError> {
    if !(z > 0.0) {
        return Err(SpecialError::Domain(format!("Y requires z > 0, got {z}")));
    }
    let (v, _) = y_pair(order, &arg(z, prec), prec + 16)?;
    Ok(XReal::from_float(&v, prec))
}

pub fn bessel_y_prime(order: BesselOrder, z: f64, prec: u32) -> Result<XReal, SpecialError> {
    if !(z > 0.0) {
        return Err(SpecialError::Domain(format!("Y' requires z > 0, got {z}")));
    }
    let (_, d) = y_pair(order, &arg(z, prec), prec + 16)?;
    Ok(XReal::from_float(&d, prec))
}

/// `2 / (pi z)`, the Wronskian `J Y' - J' Y`.
pub fn wronskian_reference(z: &Float, prec: u32) -> Float {
    let pi = Float::with_val(prec, Constant::Pi);
    Float::with_val(prec, 2u32) / (pi * z)
}
