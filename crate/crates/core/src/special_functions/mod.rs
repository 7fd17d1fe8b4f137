//! Extended-precision Gamma and Bessel functions of real argument.
//!
//! Orders are restricted to the values `j + (d-2)/2` that occur for
//! spherical harmonics on `S^{d-1}`, i.e. nonnegative integers and
//! half-integers. Everything is computed with MPFR at a caller-chosen
//! precision plus internal guard bits.

mod bessel;
mod bounds;
mod gamma;
mod zeros;

use std::fmt;

use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bessel::{
    bessel_j, bessel_j_prime, bessel_y, bessel_y_prime, j_pair, j_pair_real_order,
    wronskian_reference, y_integer_series, y_pair, y_pair_order_limit,
};
pub use bounds::{certify_bessel_bounds, BesselBoundReport, BoundCheck};
pub use gamma::{gamma, gamma_float, rgamma_float};
pub use zeros::{bessel_j_zeros, bessel_j_zeros_below};

/// Default working precision in bits.
pub const DEFAULT_PRECISION: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Bessel order `alpha = half_units / 2`, always a nonnegative integer or half-integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BesselOrder {
    half_units: u32,
}

impl BesselOrder {
    /// The order `j + (d-2)/2` attached to degree-`j` harmonics in dimension `d`.
    pub fn from_degree(j: u32, d: u32) -> Self {
        assert!(d >= 2, "dimension must be at least 2");
        Self {
            half_units: 2 * j + d - 2,
        }
    }

    pub fn integer(n: u32) -> Self {
        Self { half_units: 2 * n }
    }

    pub fn from_half_units(half_units: u32) -> Self {
        Self { half_units }
    }

    /// Parses a real order; it must be a nonnegative multiple of 1/2.
    pub fn new(alpha: f64) -> Result<Self, SpecialError> {
        let twice = 2.0 * alpha;
        if !(alpha >= 0.0) || twice.fract() != 0.0 || twice > u32::MAX as f64 {
            return Err(SpecialError::Domain(format!(
                "order {alpha} is not a nonnegative integer or half-integer"
            )));
        }
        Ok(Self {
            half_units: twice as u32,
        })
    }

    pub fn half_units(self) -> u32 {
        self.half_units
    }

    pub fn is_integer(self) -> bool {
        self.half_units % 2 == 0
    }

    pub fn value(self) -> f64 {
        self.half_units as f64 / 2.0
    }

    pub fn to_float(self, prec: u32) -> Float {
        Float::with_val(prec, self.half_units) / 2u32
    }
}

impl fmt::Display for BesselOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.half_units / 2)
        } else {
            write!(f, "{}/2", self.half_units)
        }
    }
}

/// `sin(pi x)` with exact argument reduction.
pub(crate) fn sin_pi(x: &Float) -> Float {
    let prec = x.prec();
    let n = Float::with_val(prec, x.round_ref());
    let frac = Float::with_val(prec, x - &n);
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let s = Float::with_val(prec, &frac * &pi).sin();
    if is_odd_integer(&n) {
        -s
    } else {
        s
    }
}

/// `cos(pi x)` with exact argument reduction.
pub(crate) fn cos_pi(x: &Float) -> Float {
    let prec = x.prec();
    let n = Float::with_val(prec, x.round_ref());
    let frac = Float::with_val(prec, x - &n);
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let c = Float::with_val(prec, &frac * &pi).cos();
    if is_odd_integer(&n) {
        -c
    } else {
        c
    }
}

fn is_odd_integer(n: &Float) -> bool {
    let half = Float::with_val(n.prec(), n / 2u32);
    !half.is_integer()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_from_degree() {
        assert_eq!(BesselOrder::from_degree(3, 2).value(), 3.0);
        assert_eq!(BesselOrder::from_degree(3, 3).value(), 3.5);
        assert!(BesselOrder::new(0.25).is_err());
        assert!(BesselOrder::new(-1.0).is_err());
        assert_eq!(BesselOrder::new(2.5).unwrap().half_units(), 5);
    }

    #[test]
    fn trig_reduction() {
        let x = Float::with_val(128, 1e6) + Float::with_val(128, 0.25);
        let s = sin_pi(&x).to_f64();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let y = Float::with_val(128, -3.0);
        assert_eq!(sin_pi(&y).to_f64(), 0.0);
        assert_eq!(cos_pi(&y).to_f64(), -1.0);
    }
}
