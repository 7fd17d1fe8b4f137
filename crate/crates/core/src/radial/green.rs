//! Variation-of-parameters solver for the sourced radial equation
//!
//! ```text
//! -u'' - ((d-1)/r) u' + (j(j+d-2)/r^2) u - E u = g,   u regular at 0,  u(1) = 0,
//! ```
//!
//! with `g` supported in `[a, b]`. With `y1 = r^{-nu} J_alpha(kr)` and
//! `y2 = R_j(k, r)`, `nu = (d-2)/2`, the Wronskian gives
//! `r^{d-1} (y1 y2' - y1' y2) = 2 J_alpha(k) / pi` and
//!
//! ```text
//! u(r) = -(pi / (2 J_alpha(k))) [ y2(r) int_a^r y1 g s^{d-1} ds + y1(r) int_r^b y2 g s^{d-1} ds ].
//! ```
//!
//! Since `y2'(1) = 2/pi`, `u'(1) = -(1/J_alpha(k)) int_a^b y1 g s^{d-1} ds`.

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use super::quadrature::{gauss_legendre, PanelQuadrature};
#[cfg(test)]
use super::quadrature::{DEFAULT_NODES_PER_PANEL, DEFAULT_PANELS};
use super::{eigen_guard, lommel_antiderivative, nu_shift, RadialError};
use crate::special_functions::{j_pair, y_pair, BesselOrder};

/// Basis solutions of one radial mode tabulated at the quadrature nodes.
#[derive(Clone, Debug)]
pub struct GreenKernel {
    pub d: u32,
    pub j: u32,
    pub energy: f64,
    pub prec: u32,
    order: BesselOrder,
    k: Float,
    j_k: Float,
    y_k: Float,
    y1: Vec<Float>,
    y2: Vec<Float>,
    weight: Vec<Float>,
    log2_margin: f64,
}

/// Solution of one sourced radial problem.
#[derive(Clone, Debug)]
pub struct GreenSolution {
    /// `u` at the quadrature nodes.
    pub values: Vec<Float>,
    /// `int_a^{r_i} y1 g s^{d-1}`.
    pub left: Vec<Float>,
    /// `int_{r_i}^b y2 g s^{d-1}`.
    pub right: Vec<Float>,
    /// `u = c_in y1` on `r < a`.
    pub c_in: Float,
    /// `u = c_out y2` on `r > b`.
    pub c_out: Float,
    pub deriv_at_1: Float,
}

fn pow_nu(r: &Float, d: u32, prec: u32) -> Float {
    if d == 2 {
        return Float::with_val(prec, 1);
    }
    Float::with_val(prec, r.pow(-nu_shift(d, prec)))
}

impl GreenKernel {
    /// Evaluates the Bessel tables directly at every node.
    pub fn new(
        quad: &PanelQuadrature,
        d: u32,
        j: u32,
        energy: f64,
        prec: u32,
    ) -> Result<Self, RadialError> {
        if !(energy > 0.0) {
            return Err(RadialError::Unsupported(format!(
                "Green kernel needs E > 0, got {energy}"
            )));
        }
        let order = BesselOrder::from_degree(j, d);
        let k = Float::with_val(prec, energy).sqrt();
        let (j_k, _) = j_pair(order, &k, prec)?;
        let (y_k, _) = y_pair(order, &k, prec)?;
        let mut j_nodes = Vec::with_capacity(quad.len());
        let mut y_nodes = Vec::with_capacity(quad.len());
        for r in quad.nodes() {
            let x = Float::with_val(prec, &k * r);
            j_nodes.push(j_pair(order, &x, prec)?.0);
            y_nodes.push(y_pair(order, &x, prec)?.0);
        }
        Self::from_tables(quad, d, j, energy, k, j_k, y_k, &j_nodes, &y_nodes, prec)
    }

    /// Builds the kernel from precomputed `J_alpha(k r_i)`, `Y_alpha(k r_i)`, `J_alpha(k)`, `Y_alpha(k)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_tables(
        quad: &PanelQuadrature,
        d: u32,
        j: u32,
        energy: f64,
        k: Float,
        j_k: Float,
        y_k: Float,
        j_nodes: &[Float],
        y_nodes: &[Float],
        prec: u32,
    ) -> Result<Self, RadialError> {
        assert_eq!(j_nodes.len(), quad.len());
        assert_eq!(y_nodes.len(), quad.len());
        let order = BesselOrder::from_degree(j, d);
        let log2_margin = eigen_guard(order, &k, &j_k, prec)?;
        let mut y1 = Vec::with_capacity(quad.len());
        let mut y2 = Vec::with_capacity(quad.len());
        let mut weight = Vec::with_capacity(quad.len());
        for ((r, jr), yr) in quad.nodes().iter().zip(j_nodes).zip(y_nodes) {
            let s = pow_nu(r, d, prec);
            y1.push(Float::with_val(prec, jr * &s));
            let c = Float::with_val(prec, yr * &j_k) - Float::with_val(prec, jr * &y_k);
            y2.push(c * &s);
            weight.push(Float::with_val(prec, r.pow(d - 1)));
        }
        Ok(Self {
            d,
            j,
            energy,
            prec,
            order,
            k,
            j_k,
            y_k,
            y1,
            y2,
            weight,
            log2_margin,
        })
    }

    pub fn order(&self) -> BesselOrder {
        self.order
    }

    /// `J_alpha(k)`.
    pub fn j_at_boundary(&self) -> &Float {
        &self.j_k
    }

    /// Log2 distance of `|J_alpha(k)|` below its small-argument scale.
    pub fn eigen_margin_log2(&self) -> f64 {
        self.log2_margin
    }

    /// Regular solution `y1` at the nodes.
    pub fn regular_at_nodes(&self) -> &[Float] {
        &self.y1
    }

    fn prefactor(&self) -> Float {
        let pi = Float::with_val(self.prec, Constant::Pi);
        -(pi / Float::with_val(self.prec, &self.j_k * 2u32))
    }

    /// Solves for the source given at the quadrature nodes.
    pub fn apply(&self, quad: &PanelQuadrature, g: &[Float]) -> GreenSolution {
        assert_eq!(g.len(), quad.len());
        let prec = self.prec;
        let f: Vec<Float> = (0..g.len())
            .map(|i| Float::with_val(prec, &self.y1[i] * &g[i]) * &self.weight[i])
            .collect();
        let h: Vec<Float> = (0..g.len())
            .map(|i| Float::with_val(prec, &self.y2[i] * &g[i]) * &self.weight[i])
            .collect();
        let left = quad.left_cumulative(&f);
        let right = quad.right_cumulative(&h);
        let total_left = quad.integrate(&f);
        let total_right = quad.integrate(&h);
        let pref = self.prefactor();
        let values = (0..g.len())
            .map(|i| {
                let t = Float::with_val(prec, &self.y2[i] * &left[i])
                    + Float::with_val(prec, &self.y1[i] * &right[i]);
                t * &pref
            })
            .collect();
        let deriv_at_1 = -Float::with_val(prec, &total_left / &self.j_k);
        GreenSolution {
            values,
            left,
            right,
            c_in: Float::with_val(prec, &total_right * &pref),
            c_out: Float::with_val(prec, &total_left * &pref),
            deriv_at_1,
        }
    }

    fn basis_at(&self, r: &Float) -> Result<(Float, Float, Float, Float), RadialError> {
        let prec = self.prec;
        let x = Float::with_val(prec, &self.k * r);
        let (jx, djx) = j_pair(self.order, &x, prec)?;
        let (yx, dyx) = y_pair(self.order, &x, prec)?;
        let c = Float::with_val(prec, &yx * &self.j_k) - Float::with_val(prec, &jx * &self.y_k);
        let dc = Float::with_val(prec, &dyx * &self.j_k) - Float::with_val(prec, &djx * &self.y_k);
        Ok((jx, djx, c, dc))
    }

    /// `u(r)` for `r` outside the source support.
    pub fn eval_outside(
        &self,
        sol: &GreenSolution,
        quad: &PanelQuadrature,
        r: f64,
    ) -> Result<Float, RadialError> {
        let prec = self.prec;
        let rf = Float::with_val(prec, r);
        if r > quad.a && r < quad.b {
            return Err(RadialError::Unsupported(format!(
                "r = {r} lies inside the source support [{}, {}]",
                quad.a, quad.b
            )));
        }
        let (jx, _, c, _) = self.basis_at(&rf)?;
        let s = pow_nu(&rf, self.d, prec);
        Ok(if r <= quad.a {
            Float::with_val(prec, &sol.c_in * &jx) * s
        } else {
            Float::with_val(prec, &sol.c_out * &c) * s
        })
    }

    /// `int_0^1 u^2 r^{d-1} dr`, exact (Lommel) off the support and by quadrature on it.
    pub fn norm_sq(
        &self,
        sol: &GreenSolution,
        quad: &PanelQuadrature,
    ) -> Result<Float, RadialError> {
        let prec = self.prec;
        let alpha = self.order.to_float(prec);
        let k2 = Float::with_val(prec, self.k.square_ref());
        let a = Float::with_val(prec, quad.a);
        let b = Float::with_val(prec, quad.b);
        let (ja, dja, _, _) = self.basis_at(&a)?;
        let xa = Float::with_val(prec, &self.k * &a);
        let inner = lommel_antiderivative(&alpha, &xa, &ja, &dja) / &k2;
        let (_, _, cb, dcb) = self.basis_at(&b)?;
        let xb = Float::with_val(prec, &self.k * &b);
        // C(k) = 0 at r = 1, C'(k) = 2 / (pi k).
        let pi = Float::with_val(prec, Constant::Pi);
        let dc1 = Float::with_val(prec, 2u32) / (pi * &self.k);
        let zero = Float::with_val(prec, 0);
        let at_one = lommel_antiderivative(&alpha, &self.k, &zero, &dc1);
        let outer = (at_one - lommel_antiderivative(&alpha, &xb, &cb, &dcb)) / &k2;
        let sq: Vec<Float> = (0..quad.len())
            .map(|i| Float::with_val(prec, sol.values[i].square_ref()) * &self.weight[i])
            .collect();
        let middle = quad.integrate(&sq);
        let c_in2 = Float::with_val(prec, sol.c_in.square_ref());
        let c_out2 = Float::with_val(prec, sol.c_out.square_ref());
        Ok(inner * c_in2 + middle + outer * c_out2)
    }

    /// Relative residual `|L_h u - g| / |g|` at node `i` by a central difference with
    /// step `2^{-prec/4}`, treating the source as constant across the stencil.
    pub fn residual_at(
        &self,
        sol: &GreenSolution,
        quad: &PanelQuadrature,
        i: usize,
        g_i: &Float,
    ) -> Result<Float, RadialError> {
        let prec = self.prec;
        let r = &quad.nodes()[i];
        let h = Float::with_val(prec, Float::i_exp(1, -(prec as i32 / 4)));
        let (x3, w3) = gauss_legendre(3, prec);
        let pref = self.prefactor();
        let mut shifted = Vec::with_capacity(2);
        for sign in [1i32, -1] {
            let r_s = Float::with_val(prec, &h * sign) + r;
            let (lo, hi) = if sign > 0 {
                (r.clone(), r_s.clone())
            } else {
                (r_s.clone(), r.clone())
            };
            let half = Float::with_val(prec, &hi - &lo) / 2u32;
            let mid = Float::with_val(prec, &hi + &lo) / 2u32;
            let mut int1 = Float::with_val(prec, 0);
            let mut int2 = Float::with_val(prec, 0);
            for (x, w) in x3.iter().zip(&w3) {
                let s = Float::with_val(prec, x * &half) + &mid;
                let (js, _, cs, _) = self.basis_at(&s)?;
                let sc = Float::with_val(
                    prec,
                    pow_nu(&s, self.d, prec) * Float::with_val(prec, s.pow(self.d - 1)),
                );
                int1 += Float::with_val(prec, &js * &sc) * w;
                int2 += Float::with_val(prec, &cs * &sc) * w;
            }
            int1 *= &half;
            int2 *= &half;
            int1 *= g_i;
            int2 *= g_i;
            let (left, right) = if sign > 0 {
                (
                    Float::with_val(prec, &sol.left[i] + &int1),
                    Float::with_val(prec, &sol.right[i] - &int2),
                )
            } else {
                (
                    Float::with_val(prec, &sol.left[i] - &int1),
                    Float::with_val(prec, &sol.right[i] + &int2),
                )
            };
            let (jx, _, c, _) = self.basis_at(&r_s)?;
            let s = pow_nu(&r_s, self.d, prec);
            let u = (Float::with_val(prec, &c * &left) + Float::with_val(prec, &jx * &right))
                * s
                * &pref;
            shifted.push(u);
        }
        let u0 = &sol.values[i];
        let h2 = Float::with_val(prec, h.square_ref());
        let second = (Float::with_val(prec, &shifted[0] + &shifted[1])
            - Float::with_val(prec, u0 * 2u32))
            / &h2;
        let first =
            Float::with_val(prec, &shifted[0] - &shifted[1]) / Float::with_val(prec, &h * 2u32);
        let jj = (self.j * (self.j + self.d - 2)) as f64;
        let r2 = Float::with_val(prec, r.square_ref());
        let centrifugal = Float::with_val(prec, jj) / &r2 - self.energy;
        let lu = -second - Float::with_val(prec, &first * (self.d - 1)) / r
            + Float::with_val(prec, &centrifugal * u0);
        let res = Float::with_val(prec, &lu - g_i).abs();
        Ok(res / Float::with_val(prec, g_i.abs_ref()))
    }
}

/// Solves the sourced radial problem with `g` sampled at the quadrature nodes.
pub fn green_apply(
    j: u32,
    d: u32,
    energy: f64,
    source: &dyn Fn(&Float) -> Float,
    quad: &PanelQuadrature,
    prec: u32,
) -> Result<(GreenKernel, GreenSolution), RadialError> {
    let kernel = GreenKernel::new(quad, d, j, energy, prec)?;
    let g: Vec<Float> = quad.nodes().iter().map(source).collect();
    let sol = kernel.apply(quad, &g);
    Ok((kernel, sol))
}
