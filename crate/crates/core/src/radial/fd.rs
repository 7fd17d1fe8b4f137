//! Finite-volume oracle for the sourced radial equation in double precision.
//!
//! The substitution `u = r^j w` removes the centrifugal term and turns the
//! problem into `-(r^q w')' / r^q - E w = g r^{-j}` with `q = 2j + d - 1`,
//! regular at the origin with zero flux there. The grid
//! `r(xi) = xi - (1/(4 pi)) sin(2 pi xi)` clusters nodes at both ends.

use super::RadialError;

#[derive(Clone, Debug, PartialEq)]
pub struct FdGrid {
    pub r: Vec<f64>,
}

impl FdGrid {
    /// `n + 1` nodes from `r = 0` to `r = 1`.
    pub fn graded(n: usize) -> Self {
        assert!(n >= 4, "grid needs at least four cells");
        let r = (0..=n)
            .map(|i| {
                let xi = i as f64 / n as f64;
                if i == n {
                    1.0
                } else {
                    xi - (0.5 / (2.0 * std::f64::consts::PI))
                        * (2.0 * std::f64::consts::PI * xi).sin()
                }
            })
            .collect();
        Self { r }
    }

    pub fn cells(&self) -> usize {
        self.r.len() - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdSolution {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub deriv_at_1: f64,
}

/// `ln(b^{p} - a^{p})` for `0 <= a < b`.
fn ln_power_difference(a: f64, b: f64, p: f64) -> f64 {
    let ratio = if a == 0.0 {
        0.0
    } else {
        (p * (a / b).ln()).exp()
    };
    p * b.ln() + (-ratio).ln_1p()
}

/// Solves on `grid` with the source sampled at its nodes and `u(1) = boundary`.
pub fn fd_solve_sampled(
    grid: &FdGrid,
    j: u32,
    d: u32,
    energy: f64,
    g: &[f64],
    boundary: f64,
) -> Result<FdSolution, RadialError> {
    let r = &grid.r;
    let n = grid.cells();
    if n < 1000 {
        return Err(RadialError::Unsupported(format!(
            "grid size {n} is below 1000"
        )));
    }
    assert_eq!(g.len(), r.len());
    let q = (2 * j + d - 1) as f64;
    let mid: Vec<f64> = (0..n).map(|i| 0.5 * (r[i] + r[i + 1])).collect();
    // Row i: -lo_i w_{i-1} + (lo_i + hi_i - E) w_i - hi_i w_{i+1} = g_i r_i^{-j}.
    let mut diag = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { mid[i - 1] };
        let right = mid[i];
        let ln_vol = ln_power_difference(left, right, q + 1.0) - (q + 1.0).ln();
        let hi = (q * right.ln() - ln_vol).exp() / (r[i + 1] - r[i]);
        let lo = if i == 0 {
            0.0
        } else {
            (q * left.ln() - ln_vol).exp() / (r[i] - r[i - 1])
        };
        diag[i] = lo + hi - energy;
        lower[i] = -lo;
        upper[i] = -hi;
        rhs[i] = if g[i] == 0.0 {
            0.0
        } else {
            g[i] * r[i].powi(-(j as i32))
        };
    }
    rhs[n - 1] -= upper[n - 1] * boundary;
    // Thomas algorithm.
    let mut c = vec![0.0; n];
    let mut y = vec![0.0; n];
    let scale = diag.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for i in 0..n {
        let pivot = diag[i] - if i == 0 { 0.0 } else { lower[i] * c[i - 1] };
        if pivot.abs() < 1e-14 * scale {
            return Err(RadialError::Singular(format!("vanishing pivot at row {i}")));
        }
        c[i] = upper[i] / pivot;
        y[i] = (rhs[i] - if i == 0 { 0.0 } else { lower[i] * y[i - 1] }) / pivot;
    }
    let mut w = vec![0.0; n + 1];
    w[n] = boundary;
    w[n - 1] = y[n - 1];
    for i in (0..n - 1).rev() {
        w[i] = y[i] - c[i] * w[i + 1];
    }
    let u: Vec<f64> = w
        .iter()
        .zip(r)
        .map(|(wi, ri)| if j == 0 { *wi } else { wi * ri.powi(j as i32) })
        .collect();
    let h1 = r[n] - r[n - 1];
    let h2 = r[n] - r[n - 2];
    let dw = w[n] * (1.0 / h1 + 1.0 / h2) - w[n - 1] * h2 / (h1 * (h2 - h1))
        + w[n - 2] * h1 / (h2 * (h2 - h1));
    Ok(FdSolution {
        r: r.clone(),
        u,
        deriv_at_1: j as f64 * boundary + dw,
    })
}

/// Solves on a graded grid of `n` cells, then on `2n` cells, and Richardson-extrapolates
/// `u` at the coarse nodes and `u'(1)`.
pub fn fd_solve_mode(
    j: u32,
    d: u32,
    energy: f64,
    g: &dyn Fn(f64) -> f64,
    boundary: f64,
    n: usize,
) -> Result<FdSolution, RadialError> {
    let coarse_grid = FdGrid::graded(n);
    let fine_grid = FdGrid::graded(2 * n);
    let gc: Vec<f64> = coarse_grid.r.iter().map(|&r| g(r)).collect();
    let gf: Vec<f64> = fine_grid.r.iter().map(|&r| g(r)).collect();
    let coarse = fd_solve_sampled(&coarse_grid, j, d, energy, &gc, boundary)?;
    let fine = fd_solve_sampled(&fine_grid, j, d, energy, &gf, boundary)?;
    Ok(richardson(&coarse, &fine))
}

/// Combines solutions on nested grids (`fine` has twice the cells).
pub(crate) fn richardson(coarse: &FdSolution, fine: &FdSolution) -> FdSolution {
    let u = coarse
        .u
        .iter()
        .enumerate()
        .map(|(i, uc)| (4.0 * fine.u[2 * i] - uc) / 3.0)
        .collect();
    FdSolution {
        r: coarse.r.clone(),
        u,
        deriv_at_1: (4.0 * fine.deriv_at_1 - coarse.deriv_at_1) / 3.0,
    }
}
