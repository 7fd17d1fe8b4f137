//! Gamma function via Spouge's approximation with exact fast paths.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use super::{sin_pi, SpecialError};
use crate::xreal::XReal;

/// Spouge coefficients for a given target precision.
struct Spouge {
    a: u32,
    wp: u32,
    coeffs: Vec<Float>,
}

impl Spouge {
    fn new(target_bits: u32) -> Self {
        // Relative error is below a^{-1/2} (2 pi)^{-(a + 1/2)}.
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let a = ((target_bits as f64 + 8.0) * std::f64::consts::LN_2 / ln2pi).ceil() as u32 + 1;
        let wp = target_bits + 2 * a + 32;
        let mut coeffs = Vec::with_capacity(a as usize);
        let two_pi = Float::with_val(wp, Constant::Pi) * 2u32;
        coeffs.push(two_pi.sqrt());
        let mut fact = Float::with_val(wp, 1); // (k-1)!
        for k in 1..a {
            if k > 1 {
                fact *= k - 1;
            }
            let base = Float::with_val(wp, a - k);
            let power = Float::with_val(wp, k) - 0.5f64;
            let mut c = Float::with_val(wp, (&base).pow(&power));
            c *= Float::with_val(wp, a - k).exp();
            c /= &fact;
            if k % 2 == 0 {
                c = -c;
            }
            coeffs.push(c);
        }
        Self { a, wp, coeffs }
    }

    /// Gamma(z + 1) for z > -1.
    fn gamma_shifted(&self, z: &Float) -> Float {
        let wp = self.wp;
        let z = Float::with_val(wp, z);
        let mut series = self.coeffs[0].clone();
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let denom = Float::with_val(wp, &z + k as u32);
            series += Float::with_val(wp, c / &denom);
        }
        let za = Float::with_val(wp, &z + self.a);
        let expo = Float::with_val(wp, &z + 0.5f64);
        let mut out = Float::with_val(wp, (&za).pow(&expo));
        out *= Float::with_val(wp, -za).exp();
        out * series
    }
}

fn spouge_for(bits: u32) -> Arc<Spouge> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Spouge>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("spouge cache poisoned");
    guard
        .entry(bits)
        .or_insert_with(|| Arc::new(Spouge::new(bits)))
        .clone()
}

/// Memoized Gamma on the reduction interval [1, 2).
fn gamma_reduced(x0: &Float, prec: u32) -> Float {
    static CACHE: OnceLock<Mutex<HashMap<(u32, String), Float>>> = OnceLock::new();
    let key = (prec, x0.to_string_radix(16, None));
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("gamma cache poisoned").get(&key) {
        return v.clone();
    }
    let spouge = spouge_for(prec);
    let z = Float::with_val(spouge.wp, x0 - 1u32);
    let v = Float::with_val(prec, spouge.gamma_shifted(&z));
    let mut guard = cache.lock().expect("gamma cache poisoned");
    if guard.len() > 1 << 14 {
        guard.clear();
    }
    guard.insert(key, v.clone());
    v
}

fn is_half_integer(x: &Float) -> bool {
    let twice = Float::with_val(x.prec() + 1, x * 2u32);
    twice.is_integer() && !x.is_integer()
}

/// Gamma(x) for x > 0 as an MPFR float at `prec` bits.
pub fn gamma_float(x: &Float, prec: u32) -> Result<Float, SpecialError> {
    if x.is_nan() || *x <= 0 {
        return Err(SpecialError::Domain(format!(
            "gamma requires a positive argument, got {}",
            x.to_f64()
        )));
    }
    let wp = prec + 16;
    if x.is_integer() {
        if let Some(n) = x.to_u32_saturating() {
            if Float::with_val(64, n) == *x && n <= 100_000 {
                return Ok(Float::with_val(prec, Float::factorial(n - 1)));
            }
        }
    }
    if is_half_integer(x) && *x < 1e6 {
        // Gamma(n + 1/2) = sqrt(pi) * prod_{i=1}^{n} (i - 1/2)
        let n = Float::with_val(wp, x.floor_ref())
            .to_u32_saturating()
            .unwrap_or(0);
        let mut acc = Float::with_val(wp, Constant::Pi).sqrt();
        for i in 1..=n {
            acc *= Float::with_val(wp, i) - 0.5f64;
        }
        return Ok(Float::with_val(prec, acc));
    }
    let floor = Float::with_val(wp, x.floor_ref());
    let frac = Float::with_val(wp, x - &floor);
    let x0 = Float::with_val(wp, &frac + 1u32);
    let g0 = gamma_reduced(&x0, wp);
    let mut acc = Float::with_val(wp, &g0);
    if *x < 1 {
        // x = x0 - 1
        acc /= x;
        return Ok(Float::with_val(prec, acc));
    }
    let steps = floor.to_u32_saturating().unwrap_or(0).saturating_sub(1);
    let mut t = x0;
    for _ in 0..steps {
        acc *= &t;
        t += 1u32;
    }
    Ok(Float::with_val(prec, acc))
}

/// 1/Gamma(x) for any real x; zero at the nonpositive integers.
pub fn rgamma_float(x: &Float, prec: u32) -> Float {
    if *x > 0 {
        let g = gamma_float(x, prec + 8).expect("positive argument");
        return Float::with_val(prec, g.recip());
    }
    if x.is_integer() {
        return Float::with_val(prec, 0);
    }
    // 1/Gamma(x) = Gamma(1 - x) sin(pi x) / pi
    let wp = prec + 16;
    let one_minus = Float::with_val(wp, 1u32 - x);
    let g = gamma_float(&one_minus, wp).expect("positive argument");
    let s = sin_pi(&Float::with_val(wp, x));
    let pi = Float::with_val(wp, Constant::Pi);
    Float::with_val(prec, g * s / pi)
}

/// Gamma(x) for x > 0, relative error below 2^{-(prec-8)}.
pub fn gamma(x: f64, prec: u32) -> Result<XReal, SpecialError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecialError::Domain(format!(
            "gamma requires a positive finite argument, got {x}"
        )));
    }
    let g = gamma_float(&Float::with_val(prec + 16, x), prec + 16)?;
    Ok(XReal::from_float(&g, prec))
}
