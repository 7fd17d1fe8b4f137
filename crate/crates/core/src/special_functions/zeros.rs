//! Positive zeros of `J_alpha` by sign-change scanning and bisection.

use rug::Float;

use super::bessel::j_pair;
use super::{BesselOrder, SpecialError};

const SCAN_STEP: f64 = 0.5;

fn j_value(order: BesselOrder, z: &Float, prec: u32) -> Result<Float, SpecialError> {
    Ok(j_pair(order, z, prec)?.0)
}

/// Bisects a verified sign change of `J_order` on `[lo, hi]`.
fn bisect(order: BesselOrder, lo: f64, hi: f64, prec: u32) -> Result<Float, SpecialError> {
    let wp = prec + 16;
    let mut a = Float::with_val(wp, lo);
    let mut b = Float::with_val(wp, hi);
    let fa = j_value(order, &a, wp)?;
    let positive_left = fa.is_sign_positive();
    let rel_width = Float::with_val(wp, Float::i_exp(1, -(prec as i32 - 8)));
    loop {
        let width = Float::with_val(wp, &b - &a);
        if width <= Float::with_val(wp, &a * &rel_width) {
            break;
        }
        let mid = Float::with_val(wp, &a + &b) / 2u32;
        if mid == a || mid == b {
            break;
        }
        let fm = j_value(order, &mid, wp)?;
        if fm.is_zero() {
            return Ok(Float::with_val(prec, mid));
        }
        if fm.is_sign_positive() == positive_left {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Float::with_val(prec, (a + b) / 2u32))
}

/// Scans for sign changes starting just above the order, where the first zero lies beyond.
fn scan<F: FnMut(f64, f64) -> bool>(
    order: BesselOrder,
    prec: u32,
    mut visit: F,
) -> Result<(), SpecialError> {
    let scan_prec = 64.max(prec / 4);
    let mut lo = order.value().max(0.1);
    let mut f_lo = j_value(order, &Float::with_val(scan_prec + 32, lo), scan_prec)?;
    loop {
        let hi = lo + SCAN_STEP;
        let f_hi = j_value(order, &Float::with_val(scan_prec + 32, hi), scan_prec)?;
        if f_lo.is_sign_positive() != f_hi.is_sign_positive() && !f_hi.is_zero() {
            if !visit(lo, hi) {
                return Ok(());
            }
        }
        lo = hi;
        f_lo = f_hi;
    }
}

/// The first `count` positive zeros of `J_order`, strictly increasing.
pub fn bessel_j_zeros(
    order: BesselOrder,
    count: usize,
    prec: u32,
) -> Result<Vec<Float>, SpecialError> {
    if count == 0 {
        return Err(SpecialError::Domain("zero count must be at least 1".into()));
    }
    let mut brackets = Vec::with_capacity(count);
    scan(order, prec, |lo, hi| {
        brackets.push((lo, hi));
        brackets.len() < count
    })?;
    brackets
        .into_iter()
        .map(|(lo, hi)| bisect(order, lo, hi, prec))
        .collect()
}

/// All positive zeros of `J_order` that are at most `z_max`.
pub fn bessel_j_zeros_below(
    order: BesselOrder,
    z_max: f64,
    prec: u32,
) -> Result<Vec<Float>, SpecialError> {
    let mut brackets = Vec::new();
    if z_max <= order.value() {
        return Ok(Vec::new());
    }
    scan(order, prec, |lo, hi| {
        if lo > z_max {
            return false;
        }
        brackets.push((lo, hi));
        true
    })?;
    let mut zeros = Vec::with_capacity(brackets.len());
    for (lo, hi) in brackets {
        let z = bisect(order, lo, hi, prec)?;
        if z <= z_max {
            zeros.push(z);
        }
    }
    Ok(zeros)
}
