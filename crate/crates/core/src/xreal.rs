//! Log-domain extended real numbers.
//!
//! An [`XReal`] stores a sign and the natural logarithm of the magnitude as
//! an MPFR float, so values such as `2^{-400}` or `Γ(200)` are carried
//! without underflow or overflow and multiplication is exact up to the
//! rounding of one addition.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Sign and log-magnitude representation of a real number.
#[derive(Clone)]
pub struct XReal {
    sign: i8,
    log_mag: Float,
}

impl XReal {
    pub fn zero(prec: u32) -> Self {
        Self {
            sign: 0,
            log_mag: Float::with_val(prec, 0),
        }
    }

    pub fn one(prec: u32) -> Self {
        Self {
            sign: 1,
            log_mag: Float::with_val(prec, 0),
        }
    }

    /// Builds a value from its parts; `sign == 0` forces zero.
    pub fn from_parts(sign: i8, log_mag: Float) -> Self {
        let sign = sign.signum();
        if sign == 0 {
            return Self::zero(log_mag.prec());
        }
        Self { sign, log_mag }
    }

    pub fn from_f64(x: f64, prec: u32) -> Self {
        assert!(x.is_finite(), "XReal::from_f64 requires a finite value");
        if x == 0.0 {
            return Self::zero(prec);
        }
        let mag = Float::with_val(prec, x.abs());
        Self {
            sign: if x > 0.0 { 1 } else { -1 },
            log_mag: mag.ln(),
        }
    }

    /// Converts a linear-domain MPFR value, keeping `prec` bits for the logarithm.
    pub fn from_float(x: &Float, prec: u32) -> Self {
        assert!(
            !x.is_nan() && !x.is_infinite(),
            "XReal::from_float requires a finite value"
        );
        if x.is_zero() {
            return Self::zero(prec);
        }
        let mag = Float::with_val(prec + 16, x.abs_ref());
        Self {
            sign: if x.is_sign_positive() { 1 } else { -1 },
            log_mag: Float::with_val(prec, mag.ln_ref()),
        }
    }

    /// Builds `sign * exp(log_mag)` from a natural-log magnitude given as f64.
    pub fn from_ln(sign: i8, ln_mag: f64, prec: u32) -> Self {
        Self::from_parts(sign, Float::with_val(prec, ln_mag))
    }

    /// `2^exponent` exactly up to the rounding of `exponent * ln 2`.
    pub fn pow2(exponent: f64, prec: u32) -> Self {
        let ln2 = Float::with_val(prec, Constant::Log2);
        Self::from_parts(1, ln2 * exponent)
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Natural logarithm of the magnitude; meaningless for zero.
    pub fn log_mag(&self) -> &Float {
        &self.log_mag
    }

    pub fn precision_bits(&self) -> u32 {
        self.log_mag.prec()
    }

    pub fn with_precision(&self, prec: u32) -> Self {
        Self {
            sign: self.sign,
            log_mag: Float::with_val(prec, &self.log_mag),
        }
    }

    /// `log10 |x|`, `-inf` for zero.
    pub fn log10_mag(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.log_mag.to_f64() / std::f64::consts::LN_10
    }

    /// `log2 |x|`, `-inf` for zero.
    pub fn log2_mag(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.log_mag.to_f64() / std::f64::consts::LN_2
    }

    /// Nearest f64; saturates to 0 or ±inf outside the double range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mag = Float::with_val(self.precision_bits() + 16, self.log_mag.exp_ref()).to_f64();
        if self.sign > 0 {
            mag
        } else {
            -mag
        }
    }

    /// Linear-domain MPFR value at `prec` bits.
    pub fn to_float(&self, prec: u32) -> Float {
        if self.is_zero() {
            return Float::with_val(prec, 0);
        }
        let guard = Float::with_val(prec + 16, &self.log_mag);
        let v = Float::with_val(prec, guard.exp_ref());
        if self.sign > 0 {
            v
        } else {
            -v
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            sign: self.sign.abs(),
            log_mag: self.log_mag.clone(),
        }
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Self {
            sign: self.sign,
            log_mag: -self.log_mag.clone(),
        }
    }

    /// `|x|^p` with the sign dropped; `0^p = 0` for `p > 0`.
    pub fn abs_powf(&self, p: f64) -> Self {
        if self.is_zero() {
            assert!(p > 0.0, "0 raised to a non-positive power");
            return self.clone();
        }
        Self {
            sign: 1,
            log_mag: self.log_mag.clone() * p,
        }
    }

    pub fn powi(&self, p: i32) -> Self {
        if self.is_zero() {
            assert!(p > 0, "0 raised to a non-positive power");
            return self.clone();
        }
        let sign = if p % 2 == 0 { 1 } else { self.sign };
        Self {
            sign,
            log_mag: self.log_mag.clone() * p,
        }
    }

    pub fn sqrt(&self) -> Self {
        assert!(self.sign >= 0, "square root of a negative value");
        if self.is_zero() {
            return self.clone();
        }
        Self {
            sign: 1,
            log_mag: self.log_mag.clone() / 2u32,
        }
    }

    /// Natural logarithm as a linear-domain MPFR value (requires `x > 0`).
    pub fn ln(&self) -> Float {
        assert!(self.sign > 0, "logarithm of a non-positive value");
        self.log_mag.clone()
    }

    /// Compares magnitudes, treating zero as the smallest.
    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => self
                .log_mag
                .partial_cmp(&other.log_mag)
                .expect("log magnitudes are finite"),
        }
    }

    pub fn max_abs(a: &Self, b: &Self) -> Self {
        if a.cmp_abs(b) == Ordering::Less {
            b.abs()
        } else {
            a.abs()
        }
    }

    fn prec_of(&self, other: &Self) -> u32 {
        self.precision_bits().max(other.precision_bits())
    }

    fn add_impl(&self, other: &Self) -> Self {
        let prec = self.prec_of(other);
        if self.is_zero() {
            return other.with_precision(prec);
        }
        if other.is_zero() {
            return self.with_precision(prec);
        }
        let (big, small) = if self.cmp_abs(other) == Ordering::Less {
            (other, self)
        } else {
            (self, other)
        };
        let wp = prec + 16;
        let diff = Float::with_val(wp, &small.log_mag - &big.log_mag);
        let ratio = diff.exp();
        let correction = if big.sign == small.sign {
            ratio.ln_1p()
        } else {
            if ratio == 1 {
                return Self::zero(prec);
            }
            (-ratio).ln_1p()
        };
        Self {
            sign: big.sign,
            log_mag: Float::with_val(prec, &big.log_mag + &correction),
        }
    }

    pub fn sum<'a, I: IntoIterator<Item = &'a XReal>>(iter: I, prec: u32) -> Self {
        iter.into_iter()
            .fold(Self::zero(prec), |acc, x| acc.add_impl(x))
    }
}

impl fmt::Debug for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "XReal(0)");
        }
        write!(
            f,
            "XReal({}10^{:.6})",
            if self.sign < 0 { "-" } else { "" },
            self.log10_mag()
        )
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let l10 = self.log10_mag();
        let exp = l10.floor();
        let mantissa = 10f64.powf(l10 - exp);
        let sign = if self.sign < 0 { "-" } else { "" };
        write!(f, "{sign}{mantissa:.10}e{exp}")
    }
}

impl PartialEq for XReal {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && (self.sign == 0 || self.log_mag == other.log_mag)
    }
}

impl PartialOrd for XReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let by_sign = self.sign.cmp(&other.sign);
        if by_sign != Ordering::Equal {
            return Some(by_sign);
        }
        Some(match self.sign {
            0 => Ordering::Equal,
            1 => self.cmp_abs(other),
            _ => other.cmp_abs(self),
        })
    }
}

impl Neg for XReal {
    type Output = XReal;
    fn neg(self) -> XReal {
        XReal {
            sign: -self.sign,
            log_mag: self.log_mag,
        }
    }
}

impl Neg for &XReal {
    type Output = XReal;
    fn neg(self) -> XReal {
        -(self.clone())
    }
}

impl Mul for &XReal {
    type Output = XReal;
    fn mul(self, rhs: &XReal) -> XReal {
        let prec = self.prec_of(rhs);
        if self.is_zero() || rhs.is_zero() {
            return XReal::zero(prec);
        }
        XReal {
            sign: self.sign * rhs.sign,
            log_mag: Float::with_val(prec, &self.log_mag + &rhs.log_mag),
        }
    }
}

impl Div for &XReal {
    type Output = XReal;
    fn div(self, rhs: &XReal) -> XReal {
        assert!(!rhs.is_zero(), "XReal division by zero");
        let prec = self.prec_of(rhs);
        if self.is_zero() {
            return XReal::zero(prec);
        }
        XReal {
            sign: self.sign * rhs.sign,
            log_mag: Float::with_val(prec, &self.log_mag - &rhs.log_mag),
        }
    }
}

impl Add for &XReal {
    type Output = XReal;
    fn add(self, rhs: &XReal) -> XReal {
        self.add_impl(rhs)
    }
}

impl Sub for &XReal {
    type Output = XReal;
    fn sub(self, rhs: &XReal) -> XReal {
        self.add_impl(&-rhs)
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait for XReal {
            type Output = XReal;
            fn $method(self, rhs: XReal) -> XReal {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&XReal> for XReal {
            type Output = XReal;
            fn $method(self, rhs: &XReal) -> XReal {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

/// Serialized form: `(sign, log10_magnitude)`.
#[derive(Serialize, Deserialize)]
struct LogPair {
    sign: i8,
    log10_mag: f64,
}

impl Serialize for XReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let log10_mag = if self.is_zero() {
            0.0
        } else {
            self.log10_mag()
        };
        LogPair {
            sign: self.sign,
            log10_mag,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for XReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pair = LogPair::deserialize(deserializer)?;
        let prec = 64;
        let ln10 = Float::with_val(prec, 10).ln();
        Ok(XReal::from_parts(pair.sign, ln10 * pair.log10_mag))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_iff_sign_zero() {
        let z = XReal::zero(128);
        assert!(z.is_zero());
        assert_eq!(z.to_f64(), 0.0);
        let x = XReal::from_f64(3.0, 128);
        let d = &x - &x;
        assert!(d.is_zero());
    }

    #[test]
    fn f64_roundtrip_is_exact() {
        for &v in &[1.0, -2.5, 1e-300, 7.0e300, std::f64::consts::PI, -1.0 / 3.0] {
            assert_eq!(XReal::from_f64(v, 256).to_f64(), v);
        }
    }

    #[test]
    fn arithmetic_matches_linear_domain() {
        let prec = 256;
        let a = XReal::from_f64(1.25, prec);
        let b = XReal::from_f64(-0.75, prec);
        assert!(((&a + &b).to_f64() - 0.5).abs() < 1e-15);
        assert!(((&a - &b).to_f64() - 2.0).abs() < 1e-15);
        assert!(((&a * &b).to_f64() + 0.9375).abs() < 1e-15);
        assert!(((&a / &b).to_f64() + 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tiny_values_survive() {
        let prec = 256;
        let tiny = XReal::pow2(-5000.0, prec);
        let sq = &tiny * &tiny;
        assert!((sq.log2_mag() + 10000.0).abs() < 1e-9);
        let sum = &tiny + &tiny;
        assert!((sum.log2_mag() + 4999.0).abs() < 1e-9);
    }

    #[test]
    fn ordering() {
        let prec = 64;
        let a = XReal::from_f64(-3.0, prec);
        let b = XReal::from_f64(-1.0, prec);
        let c = XReal::zero(prec);
        let d = XReal::from_f64(2.0, prec);
        assert!(a < b && b < c && c < d);
    }

    #[test]
    fn serde_pair() {
        let x = XReal::from_f64(-1000.0, 128);
        let s = serde_json::to_string(&x).unwrap();
        assert!(s.contains("\"sign\":-1"));
        let back: XReal = serde_json::from_str(&s).unwrap();
        assert!((back.to_f64() + 1000.0).abs() < 1e-9);
    }
}
