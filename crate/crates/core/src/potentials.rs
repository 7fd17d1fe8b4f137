//! Bump profile and the oscillating potentials
//! `v_nm(x) = eps e^{i n theta} phi(r_1, |x'|)`, `eps = n^{-m}`.

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radial::{PanelQuadrature, RadialError, RadialFunction};
use crate::xreal::XReal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("invalid bump: {0}")]
    InvalidBump(String),
    #[error("invalid potential parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Radial(#[from] RadialError),
}

/// Standard mollifier centered at `center` with support radius `radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Default for BumpSpec {
    fn default() -> Self {
        Self {
            center: [0.29, 0.0],
            radius: 0.03,
        }
    }
}

impl BumpSpec {
    /// Checks `B(center, radius) ⊂ B(0, 1/3) ∩ {x_1 > 1/4}`.
    pub fn validate(&self) -> Result<(), PotentialError> {
        let [c1, c2] = self.center;
        if !(self.radius > 0.0) || !c1.is_finite() || !c2.is_finite() {
            return Err(PotentialError::InvalidBump(format!(
                "radius {} must be positive",
                self.radius
            )));
        }
        if c1.hypot(c2) + self.radius >= 1.0 / 3.0 {
            return Err(PotentialError::InvalidBump("ball leaves B(0, 1/3)".into()));
        }
        if c1 - self.radius <= 0.25 {
            return Err(PotentialError::InvalidBump("ball crosses x_1 = 1/4".into()));
        }
        Ok(())
    }

    /// Support of `r -> phi(r, 0)`, i.e. the radial support for `d = 2`.
    pub fn radial_support(&self) -> (f64, f64) {
        let half = (self.radius * self.radius - self.center[1] * self.center[1])
            .max(0.0)
            .sqrt();
        (self.center[0] - half, self.center[0] + half)
    }
}

/// `exp(1 - 1/(1 - |q-c|^2/rho^2))` inside the ball, 0 outside.
pub fn bump_phi(bump: &BumpSpec, q: [f64; 2]) -> f64 {
    let dx = q[0] - bump.center[0];
    let dy = q[1] - bump.center[1];
    let s = (dx * dx + dy * dy) / (bump.radius * bump.radius);
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s)).exp()
    }
}

/// [`bump_phi`] at `(r, 0)` in MPFR arithmetic.
pub fn bump_phi_radial(bump: &BumpSpec, r: &Float) -> Float {
    let prec = r.prec();
    let dx = Float::with_val(prec, r - bump.center[0]);
    let dy = Float::with_val(prec, bump.center[1]);
    let rho2 = Float::with_val(prec, bump.radius).square();
    let s = (dx.square() + dy.square()) / rho2;
    if s >= 1 {
        return Float::with_val(prec, 0);
    }
    let one_minus = Float::with_val(prec, 1u32) - s;
    (Float::with_val(prec, 1u32) - Float::with_val(prec, one_minus.recip_ref())).exp()
}

/// The potential `eps e^{± i n theta} phi(r_1, |x'|)` on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialVnm {
    pub n: u32,
    pub m: u32,
    pub eps: XReal,
    pub bump: BumpSpec,
    pub d: u32,
    /// Uses `e^{-i n theta}` (the complex conjugate potential).
    pub conjugate: bool,
}

impl PotentialVnm {
    /// `eps = n^{-m}` at `prec` bits.
    pub fn new(n: u32, m: u32, d: u32, bump: BumpSpec, prec: u32) -> Result<Self, PotentialError> {
        if n == 0 || m == 0 {
            return Err(PotentialError::InvalidParams(format!(
                "n = {n} and m = {m} must be positive"
            )));
        }
        if d < 2 {
            return Err(PotentialError::InvalidParams(format!("dimension {d} < 2")));
        }
        bump.validate()?;
        let eps = XReal::from_f64(n as f64, prec).powi(-(m as i32));
        Ok(Self {
            n,
            m,
            eps,
            bump,
            d,
            conjugate: false,
        })
    }

    /// Same profile with amplitude replaced by `eps` (e.g. zero).
    pub fn with_amplitude(mut self, eps: XReal) -> Self {
        self.eps = eps;
        self
    }

    /// `\bar v_nm`.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.conjugate = !self.conjugate;
        out
    }

    /// Signed angular frequency carried by the potential.
    pub fn frequency(&self) -> i64 {
        if self.conjugate {
            -(self.n as i64)
        } else {
            self.n as i64
        }
    }

    /// `‖v‖_∞`.
    pub fn sup_norm(&self) -> XReal {
        self.eps.abs()
    }
}

/// `v(x)` for `x ∈ R^d` (`x.len() == d`).
pub fn v_nm_eval(v: &PotentialVnm, x: &[f64]) -> Complex64 {
    assert_eq!(x.len(), v.d as usize, "point dimension mismatch");
    let r1 = x[0].hypot(x[1]);
    let xp = x[2..].iter().map(|t| t * t).sum::<f64>().sqrt();
    let phi = bump_phi(&v.bump, [r1, xp]);
    if phi == 0.0 || v.eps.is_zero() {
        return Complex64::new(0.0, 0.0);
    }
    let theta = x[1].atan2(x[0]);
    let eps = v.eps.to_f64();
    Complex64::from_polar(eps * phi, v.frequency() as f64 * theta)
}

/// `phi(r, 0)` sampled on the quadrature nodes plus the endpoints `0` and `1`.
pub fn radial_profile(
    v: &PotentialVnm,
    quad: &PanelQuadrature,
) -> Result<RadialFunction, PotentialError> {
    if v.d != 2 {
        return Err(PotentialError::InvalidParams(format!(
            "radial profile needs d = 2, got {}",
            v.d
        )));
    }
    let (a, b) = v.bump.radial_support();
    if quad.a > a || quad.b < b {
        return Err(PotentialError::InvalidParams(format!(
            "quadrature [{}, {}] does not cover the support [{a}, {b}]",
            quad.a, quad.b
        )));
    }
    let mut nodes = vec![0.0, quad.a];
    nodes.extend(quad.nodes().iter().map(Float::to_f64));
    nodes.extend([quad.b, 1.0]);
    nodes.dedup();
    let values = nodes.iter().map(|&r| bump_phi(&v.bump, [r, 0.0])).collect();
    Ok(RadialFunction::sampled(nodes, values)?)
}

/// Truncated Taylor series `sum c_i (r - r0)^i`.
#[derive(Clone, Debug)]
struct Jet(Vec<f64>);

impl Jet {
    fn constant(c: f64, order: usize) -> Self {
        let mut v = vec![0.0; order + 1];
        v[0] = c;
        Self(v)
    }

    fn variable(r0: f64, order: usize) -> Self {
        let mut v = Self::constant(r0, order);
        if order >= 1 {
            v.0[1] = 1.0;
        }
        v
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }

    fn add(&self, o: &Self) -> Self {
        let n = self.len().min(o.len());
        Self((0..n).map(|i| self.0[i] + o.0[i]).collect())
    }

    fn mul(&self, o: &Self) -> Self {
        let n = self.len().min(o.len());
        Self(
            (0..n)
                .map(|k| (0..=k).map(|i| self.0[i] * o.0[k - i]).sum())
                .collect(),
        )
    }

    fn recip(&self) -> Self {
        let u = &self.0;
        let mut q = vec![0.0; u.len()];
        q[0] = 1.0 / u[0];
        for k in 1..u.len() {
            let s: f64 = (1..=k).map(|j| u[j] * q[k - j]).sum();
            q[k] = -s * q[0];
        }
        Self(q)
    }

    fn exp(&self) -> Self {
        let g = &self.0;
        let mut f = vec![0.0; g.len()];
        f[0] = g[0].exp();
        for k in 1..g.len() {
            let s: f64 = (1..=k).map(|j| j as f64 * g[j] * f[k - j]).sum();
            f[k] = s / k as f64;
        }
        Self(f)
    }

    fn deriv(&self) -> Self {
        Self((1..self.len()).map(|i| i as f64 * self.0[i]).collect())
    }
}

/// Taylor jet of `r -> phi(r, 0)` at `r0` to `order`.
fn bump_jet(bump: &BumpSpec, r0: f64, order: usize) -> Jet {
    let rho2 = bump.radius * bump.radius;
    let dy2 = bump.center[1] * bump.center[1];
    let dx = Jet::variable(r0, order).add(&Jet::constant(-bump.center[0], order));
    let s = dx
        .mul(&dx)
        .add(&Jet::constant(dy2, order))
        .scale(1.0 / rho2);
    if s.0[0] >= 1.0 {
        return Jet::constant(0.0, order);
    }
    let w = Jet::constant(1.0, order).add(&s.scale(-1.0)).recip();
    if 1.0 - w.0[0] < -700.0 {
        return Jet::constant(0.0, order);
    }
    Jet::constant(1.0, order).add(&w.scale(-1.0)).exp()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `∂_z^a ∂_{\bar z}^b` applied to `e^{i k theta} g(r)`: returns the new frequency and radial jet.
fn wirtinger(mut k: i64, mut g: Jet, a: u32, b: u32, r0: f64) -> (i64, Jet) {
    let inv_r = Jet::variable(r0, g.len().saturating_sub(1)).recip();
    for _ in 0..a {
        let t = g.mul(&inv_r).scale(k as f64);
        g = g.deriv().add(&t).scale(0.5);
        k -= 1;
    }
    for _ in 0..b {
        let t = g.mul(&inv_r).scale(k as f64);
        g = g.deriv().add(&t.scale(-1.0)).scale(0.5);
        k += 1;
    }
    (k, g)
}

/// `∂_x^p ∂_y^q v` at polar point `(r, theta)` for `d = 2`.
pub fn cartesian_derivative(v: &PotentialVnm, p: u32, q: u32, r: f64, theta: f64) -> Complex64 {
    let eps = v.eps.to_f64();
    if eps == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let order = (p + q) as usize;
    let base = bump_jet(&v.bump, r, order);
    let iq = Complex64::i().powu(q);
    let mut acc = Complex64::new(0.0, 0.0);
    for a1 in 0..=p {
        for a2 in 0..=q {
            let a = a1 + a2;
            let b = p + q - a;
            let sign = if (q - a2) % 2 == 0 { 1.0 } else { -1.0 };
            let c = binomial(p, a1) * binomial(q, a2) * sign;
            let (k, g) = wirtinger(v.frequency(), base.clone(), a, b, r);
            acc += iq * c * Complex64::from_polar(g.0[0], k as f64 * theta);
        }
    }
    acc * eps
}

/// Grid estimate of `max_{|gamma| <= m_order} sup |∂^gamma v|` for `d = 2`.
pub fn cm_norm_estimate(v: &PotentialVnm, m_order: u32) -> Result<f64, PotentialError> {
    if v.d != 2 {
        return Err(PotentialError::InvalidParams(format!(
            "C^m estimate needs d = 2, got {}",
            v.d
        )));
    }
    if m_order == 0 {
        return Ok(v.eps.to_f64().abs());
    }
    let (a, b) = v.bump.radial_support();
    let radial = 800;
    // Each derivative mixes at most 2 m_order + 1 neighbouring frequencies.
    let angular = 16 * (m_order as usize + 1);
    let mut best = 0.0f64;
    for i in 1..radial {
        let r = a + (b - a) * i as f64 / radial as f64;
        for t in 0..angular {
            let theta = 2.0 * std::f64::consts::PI * t as f64 / angular as f64;
            for total in 0..=m_order {
                for p in 0..=total {
                    best = best.max(cartesian_derivative(v, p, total - p, r, theta).norm());
                }
            }
        }
    }
    Ok(best)
}
