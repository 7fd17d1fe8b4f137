//! DtN-difference matrix elements for `v_nm` on the unit disk.
//!
//! With boundary data `f = e^{i j_2 theta} / sqrt(2 pi)` the solution of
//! `-Δψ + vψ = Eψ` is `ψ = sum_l u_l(r) e^{i (j_2 + l s) theta}` where `s = ±n`
//! is the potential's frequency. Level 0 is the free solution
//! `J_{|j_2|}(kr) / (J_{|j_2|}(k) sqrt(2 pi))`; level `l >= 1` solves the radial
//! problem at frequency `j_2 + l s` with source `-eps phi u_{l-1}` and zero
//! boundary value. The coupling is strictly triangular, so each chain is a finite
//! sequence of Green solves and `a_{j_2 + l s, j_2} = sqrt(2 pi) u_l'(1)`.

mod oracle;
mod verify;

use std::f64::consts::PI;

use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::{bump_phi_radial, BumpSpec, PotentialError, PotentialVnm};
use crate::radial::{
    eigen_guard, lommel_antiderivative, GreenKernel, PanelQuadrature, RadialError,
    DEFAULT_NODES_PER_PANEL, DEFAULT_PANELS,
};
use crate::special_functions::{j_pair_real_order, y_integer_series, BesselOrder, SpecialError};
use crate::spectral_gap::GapError;
use crate::sphere_basis::{BasisError, DtnMatrix, LogComplex, ModeIndex};
use crate::xreal::XReal;

pub use oracle::{fd_chain_entries, FD_ORACLE_CELLS};
pub use verify::{
    prop21_decay_check, tail_bound, verify_lemma31, verify_lemma32, DecayPoint, DecayReport,
    Lemma31Report, Lemma32Report, LEMMA32_CONSTANT,
};

/// Bits used for the per-order Green-operator bounds.
const BOUND_PRECISION: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("order {order} exceeds the tabulated maximum {max}")]
    OrderOutOfRange { order: u32, max: u32 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("Green bound eps * K_G = {0:.3e} is not below 1")]
    TailDiverges(f64),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Quadrature layout and working precision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub panels: usize,
    pub per_panel: usize,
    pub prec: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            panels: DEFAULT_PANELS,
            per_panel: DEFAULT_NODES_PER_PANEL,
            prec: 512,
        }
    }
}

/// Sup-norm bounds for the Green operator of one order on the support.
#[derive(Clone, Debug)]
struct OrderBounds {
    /// `2 max_i sum_k |G(r_i, s_k)| w_k s_k`.
    k_g: Float,
    /// `2 sum_k |y1(s_k)| w_k s_k / |J(k)|`, bounding `|u'(1)| / sup|g|`.
    d_fn: Float,
}

/// Bessel tables at the support nodes for orders `0..=max_order` at one energy.
pub struct DtnEngine {
    pub energy: f64,
    pub prec: u32,
    pub max_order: u32,
    pub bump: BumpSpec,
    quad: PanelQuadrature,
    k: Float,
    /// `J_nu(k)` for `nu = 0..=max_order + 1`.
    jk: Vec<Float>,
    yk: Vec<Float>,
    /// `[order][node]`.
    jn: Vec<Vec<Float>>,
    yn: Vec<Vec<Float>>,
    phi: Vec<Float>,
    bounds: Vec<OrderBounds>,
}

/// `J_nu(x)` for `nu = 0..=top` by downward recurrence from two series values.
fn j_column(x: &Float, top: u32, wp: u32) -> Result<Vec<Float>, SpecialError> {
    let (a, _) = j_pair_real_order(&Float::with_val(wp, top + 1), x, wp)?;
    let (b, _) = j_pair_real_order(&Float::with_val(wp, top), x, wp)?;
    let mut out = vec![Float::with_val(wp, 0); top as usize + 2];
    out[top as usize + 1] = a;
    out[top as usize] = b;
    for nu in (1..=top).rev() {
        // J_{nu-1} = (2 nu / x) J_nu - J_{nu+1}
        let t = Float::with_val(wp, &out[nu as usize] * (2 * nu)) / x;
        out[nu as usize - 1] = t - &out[nu as usize + 1];
    }
    Ok(out)
}

/// `Y_nu(x)` for `nu = 0..=top` by forward recurrence from the series values of `Y_0`, `Y_1`.
fn y_column(x: &Float, top: u32, wp: u32) -> Result<Vec<Float>, SpecialError> {
    let mut out = Vec::with_capacity(top as usize + 1);
    out.push(y_integer_series(0, x, wp)?);
    if top >= 1 {
        out.push(y_integer_series(1, x, wp)?);
    }
    for nu in 1..top {
        let t = Float::with_val(wp, &out[nu as usize] * (2 * nu)) / x;
        let next = t - &out[nu as usize - 1];
        out.push(next);
    }
    Ok(out)
}

fn round_all(v: Vec<Float>, prec: u32) -> Vec<Float> {
    v.into_iter().map(|x| Float::with_val(prec, x)).collect()
}

impl DtnEngine {
    /// Tabulates `J_nu, Y_nu` for `nu <= max_order` on the radial support of `bump`.
    pub fn new(
        energy: f64,
        bump: &BumpSpec,
        max_order: u32,
        cfg: EngineConfig,
    ) -> Result<Self, EngineError> {
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(EngineError::Unsupported(format!(
                "engine needs E > 0, got {energy}"
            )));
        }
        bump.validate()?;
        let prec = cfg.prec;
        let wp = prec + 32;
        let (a, b) = bump.radial_support();
        let quad = PanelQuadrature::new(a, b, cfg.panels, cfg.per_panel, prec);
        let k = Float::with_val(wp, energy).sqrt();

        let nodes: Vec<Float> = quad.nodes().to_vec();
        let columns = std::thread::available_parallelism()
            .map_or(1, usize::from)
            .max(1);
        let chunk = nodes.len().div_ceil(columns);
        let results: Vec<Result<Vec<(Vec<Float>, Vec<Float>)>, SpecialError>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = nodes
                    .chunks(chunk)
                    .map(|part| {
                        let k = &k;
                        scope.spawn(move || {
                            part.iter()
                                .map(|r| {
                                    let x = Float::with_val(wp, k * r);
                                    let mut j = j_column(&x, max_order, wp)?;
                                    j.truncate(max_order as usize + 1);
                                    Ok((
                                        round_all(j, prec),
                                        round_all(y_column(&x, max_order, wp)?, prec),
                                    ))
                                })
                                .collect()
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("table worker panicked"))
                    .collect()
            });
        let mut jn = vec![Vec::with_capacity(nodes.len()); max_order as usize + 1];
        let mut yn = vec![Vec::with_capacity(nodes.len()); max_order as usize + 1];
        for part in results {
            for (jcol, ycol) in part? {
                for (nu, (jv, yv)) in jcol.into_iter().zip(ycol).enumerate() {
                    jn[nu].push(jv);
                    yn[nu].push(yv);
                }
            }
        }
        let jk = round_all(j_column(&k, max_order, wp)?, prec);
        let yk = round_all(y_column(&k, max_order, wp)?, prec);
        let k = Float::with_val(prec, k);
        let phi = quad
            .nodes()
            .iter()
            .map(|r| bump_phi_radial(bump, r))
            .collect();
        let mut engine = Self {
            energy,
            prec,
            max_order,
            bump: *bump,
            quad,
            k,
            jk,
            yk,
            jn,
            yn,
            phi,
            bounds: Vec::new(),
        };
        engine.bounds = (0..=max_order).map(|nu| engine.order_bounds(nu)).collect();
        Ok(engine)
    }

    pub fn quadrature(&self) -> &PanelQuadrature {
        &self.quad
    }

    pub fn wavenumber(&self) -> &Float {
        &self.k
    }

    /// `J_nu(k r_i)` at the support nodes.
    pub fn j_table(&self, order: u32) -> Result<&[Float], EngineError> {
        self.check_order(order)?;
        Ok(&self.jn[order as usize])
    }

    pub fn y_table(&self, order: u32) -> Result<&[Float], EngineError> {
        self.check_order(order)?;
        Ok(&self.yn[order as usize])
    }

    /// `(J_nu(k), Y_nu(k))`.
    pub fn boundary_values(&self, order: u32) -> Result<(&Float, &Float), EngineError> {
        self.check_order(order)?;
        Ok((&self.jk[order as usize], &self.yk[order as usize]))
    }

    /// Certified `K_G` of the given order, inflated 2x.
    pub fn green_bound(&self, order: u32) -> Result<f64, EngineError> {
        self.check_order(order)?;
        Ok(self.bounds[order as usize].k_g.to_f64())
    }

    fn check_order(&self, order: u32) -> Result<(), EngineError> {
        if order > self.max_order {
            return Err(EngineError::OrderOutOfRange {
                order,
                max: self.max_order,
            });
        }
        Ok(())
    }

    fn order_bounds(&self, nu: u32) -> OrderBounds {
        let bp = BOUND_PRECISION;
        let i = nu as usize;
        let jk = &self.jk[i];
        let yk = &self.yk[i];
        let n = self.quad.len();
        let mut y1 = Vec::with_capacity(n);
        let mut y2 = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for idx in 0..n {
            let jr = &self.jn[i][idx];
            let yr = &self.yn[i][idx];
            let c = Float::with_val(self.prec, yr * jk) - Float::with_val(self.prec, jr * yk);
            y1.push(Float::with_val(bp, jr.abs_ref()));
            y2.push(Float::with_val(bp, c.abs_ref()));
            w.push(Float::with_val(
                bp,
                &self.quad.weights()[idx] * &self.quad.nodes()[idx],
            ));
        }
        let mut left = Vec::with_capacity(n);
        let mut acc = Float::with_val(bp, 0);
        for idx in 0..n {
            acc += Float::with_val(bp, &y1[idx] * &w[idx]);
            left.push(acc.clone());
        }
        let total_left = acc;
        let mut right = vec![Float::with_val(bp, 0); n];
        let mut acc = Float::with_val(bp, 0);
        for idx in (0..n).rev() {
            acc += Float::with_val(bp, &y2[idx] * &w[idx]);
            right[idx] = acc.clone();
        }
        let abs_jk = Float::with_val(bp, jk.abs_ref());
        let pref = Float::with_val(bp, Constant::Pi) / Float::with_val(bp, &abs_jk * 2u32);
        let mut row_max = Float::with_val(bp, 0);
        for idx in 0..n {
            let row = Float::with_val(bp, &y2[idx] * &left[idx])
                + Float::with_val(bp, &y1[idx] * &right[idx]);
            if row > row_max {
                row_max = row;
            }
        }
        OrderBounds {
            k_g: row_max * pref * 2u32,
            d_fn: total_left / abs_jk * 2u32,
        }
    }

    fn kernel(&self, order: u32) -> Result<GreenKernel, EngineError> {
        self.check_order(order)?;
        let i = order as usize;
        Ok(GreenKernel::from_tables(
            &self.quad,
            2,
            order,
            self.energy,
            self.k.clone(),
            self.jk[i].clone(),
            self.yk[i].clone(),
            &self.jn[i],
            &self.yn[i],
            self.prec,
        )?)
    }

    fn check_potential(&self, v: &PotentialVnm) -> Result<(), EngineError> {
        if v.d != 2 {
            return Err(EngineError::Unsupported(format!(
                "DtN engine is two-dimensional, got d = {}",
                v.d
            )));
        }
        if v.bump != self.bump {
            return Err(EngineError::Precondition(
                "potential bump differs from the tabulated support".into(),
            ));
        }
        Ok(())
    }

    /// `sqrt(2 pi)` at working precision.
    fn sqrt_two_pi(&self) -> Float {
        (Float::with_val(self.prec, Constant::Pi) * 2u32).sqrt()
    }
}

/// One level of a mode chain.
#[derive(Clone, Debug)]
pub struct ChainLevel {
    pub level: usize,
    pub frequency: i64,
    /// `u_l` at the support nodes.
    pub values: Vec<Float>,
    pub deriv_at_1: Float,
    /// `max_i |u_l(r_i)|` over the support nodes.
    pub sup_support: Float,
    /// `int_0^1 |u_l|^2 r dr` when requested.
    pub norm_sq: Option<Float>,
    pub eigen_margin_log2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainStop {
    /// Reached the requested number of levels.
    LevelLimit,
    /// Remaining levels are certified below `2^{-prec}` of the running scale.
    Negligible,
    /// `eps = 0`: only the free level exists.
    ZeroAmplitude,
}

/// Measured and certified per-level decay, in log2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDecay {
    pub level: usize,
    pub measured_log2: f64,
    pub bound_log2: f64,
}

#[derive(Clone, Debug)]
pub struct ModeChain {
    pub base: i64,
    pub shift: i64,
    pub levels: Vec<ChainLevel>,
    pub l_max: usize,
    pub stop: ChainStop,
    /// Bound on `sqrt(2 pi) sum |u_l'(1)|` over the levels in `(stop, l_max]` that were skipped.
    pub tail_bound: XReal,
    pub decay: Vec<LevelDecay>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChainOptions {
    /// Also compute `int_0^1 |u_l|^2 r dr` for every level.
    pub with_norms: bool,
}

fn max_abs(values: &[Float], prec: u32) -> Float {
    let mut best = Float::with_val(prec, 0);
    for v in values {
        if v.cmp_abs(&best) == Some(std::cmp::Ordering::Greater) {
            best = Float::with_val(prec, v.abs_ref());
        }
    }
    best
}

impl DtnEngine {
    /// `u_0 = J(kr) / (J(k) sqrt(2 pi))` at the nodes and `u_0'(1)`.
    fn free_level(&self, j2: i64, opts: ChainOptions) -> Result<ChainLevel, EngineError> {
        let order = j2.unsigned_abs() as u32;
        self.check_order(order)?;
        let prec = self.prec;
        let i = order as usize;
        let jk = &self.jk[i];
        let margin = eigen_guard(BesselOrder::integer(order), &self.k, jk, prec)?;
        let norm = self.sqrt_two_pi() * jk;
        let values: Vec<Float> = self.jn[i]
            .iter()
            .map(|v| Float::with_val(prec, v / &norm))
            .collect();
        // J_nu'(k) = J_{nu-1}(k) - (nu/k) J_nu(k); J_0' = -J_1.
        let djk = if order == 0 {
            -self.jk[1].clone()
        } else {
            Float::with_val(
                prec,
                &self.jk[i - 1] - Float::with_val(prec, jk * order) / &self.k,
            )
        };
        let deriv_at_1 = Float::with_val(prec, &djk * &self.k) / &norm;
        let norm_sq = if opts.with_norms {
            let alpha = Float::with_val(prec, order);
            let l = lommel_antiderivative(&alpha, &self.k, jk, &djk);
            let k2 = Float::with_val(prec, self.k.square_ref());
            let n2 = Float::with_val(prec, norm.square_ref());
            Some(l / k2 / n2)
        } else {
            None
        };
        Ok(ChainLevel {
            level: 0,
            frequency: j2,
            sup_support: max_abs(&values, prec),
            values,
            deriv_at_1,
            norm_sq,
            eigen_margin_log2: margin,
        })
    }

    /// Solves the chain for base frequency `j2` up to level `l_max`.
    pub fn solve_boundary_mode(
        &self,
        j2: i64,
        v: &PotentialVnm,
        l_max: usize,
        opts: ChainOptions,
    ) -> Result<ModeChain, EngineError> {
        self.check_potential(v)?;
        let prec = self.prec;
        let shift = v.frequency();
        let freq = |l: usize| j2 + l as i64 * shift;
        for l in 0..=l_max {
            self.check_order(freq(l).unsigned_abs() as u32)?;
        }
        let mut levels = vec![self.free_level(j2, opts)?];
        let mut decay = Vec::new();
        let eps = v.eps.to_float(prec);
        if eps.is_zero() {
            return Ok(ModeChain {
                base: j2,
                shift,
                levels,
                l_max,
                stop: ChainStop::ZeroAmplitude,
                tail_bound: XReal::zero(prec),
                decay,
            });
        }
        let eps_b = Float::with_val(BOUND_PRECISION, eps.abs_ref());
        let threshold = Float::with_val(BOUND_PRECISION, Float::i_exp(1, -(prec as i32)));
        let mut scale = Float::with_val(BOUND_PRECISION, levels[0].deriv_at_1.abs_ref());
        let mut stop = ChainStop::LevelLimit;
        let mut tail = Float::with_val(BOUND_PRECISION, 0);
        for l in 1..=l_max {
            let order = freq(l).unsigned_abs() as u32;
            let kernel = self.kernel(order)?;
            let prev = &levels[l - 1];
            let g: Vec<Float> = prev
                .values
                .iter()
                .zip(&self.phi)
                .map(|(u, p)| -(Float::with_val(prec, u * p) * &eps))
                .collect();
            let sol = kernel.apply(&self.quad, &g);
            let norm_sq = if opts.with_norms {
                Some(kernel.norm_sq(&sol, &self.quad)?)
            } else {
                None
            };
            let sup = max_abs(&sol.values, prec);
            let bound = Float::with_val(BOUND_PRECISION, &eps_b * &self.bounds[order as usize].k_g);
            let measured = Float::with_val(BOUND_PRECISION, &sup / &prev.sup_support);
            decay.push(LevelDecay {
                level: l,
                measured_log2: log2(&measured),
                bound_log2: log2(&bound),
            });
            let level = ChainLevel {
                level: l,
                frequency: freq(l),
                values: sol.values,
                deriv_at_1: sol.deriv_at_1,
                sup_support: sup,
                norm_sq,
                eigen_margin_log2: kernel.eigen_margin_log2(),
            };
            let d_abs = Float::with_val(BOUND_PRECISION, level.deriv_at_1.abs_ref());
            if d_abs > scale {
                scale = d_abs;
            }
            levels.push(level);
            if l < l_max {
                tail = self.remaining_bound(&levels[l], l, l_max, &eps_b, |i| {
                    freq(i).unsigned_abs() as u32
                });
                if tail <= Float::with_val(BOUND_PRECISION, &scale * &threshold) {
                    stop = ChainStop::Negligible;
                    break;
                }
            }
        }
        if stop == ChainStop::LevelLimit {
            tail = Float::with_val(BOUND_PRECISION, 0);
        }
        let tail_bound = XReal::from_float(&(tail * self.sqrt_two_pi()), prec);
        Ok(ModeChain {
            base: j2,
            shift,
            levels,
            l_max,
            stop,
            tail_bound,
            decay,
        })
    }

    /// `sum_{i = from+1}^{l_max} D(f_i) eps sup|u_from| prod_{from < t < i} eps K(f_t)`.
    fn remaining_bound(
        &self,
        last: &ChainLevel,
        from: usize,
        l_max: usize,
        eps: &Float,
        order_of: impl Fn(usize) -> u32,
    ) -> Float {
        let bp = BOUND_PRECISION;
        let mut carry = Float::with_val(bp, &last.sup_support * eps);
        let mut total = Float::with_val(bp, 0);
        for i in from + 1..=l_max {
            let b = &self.bounds[order_of(i) as usize];
            total += Float::with_val(bp, &carry * &b.d_fn);
            carry *= Float::with_val(bp, &b.k_g * eps);
        }
        total
    }

    /// Relative ODE residual of level `level` of `chain` at node `node`.
    pub fn chain_residual(
        &self,
        chain: &ModeChain,
        v: &PotentialVnm,
        level: usize,
        node: usize,
    ) -> Result<Float, EngineError> {
        if level == 0 || level >= chain.levels.len() {
            return Err(EngineError::Precondition(format!(
                "level {level} has no sourced solve"
            )));
        }
        let prec = self.prec;
        let eps = v.eps.to_float(prec);
        let order = chain.levels[level].frequency.unsigned_abs() as u32;
        let kernel = self.kernel(order)?;
        let g: Vec<Float> = chain.levels[level - 1]
            .values
            .iter()
            .zip(&self.phi)
            .map(|(u, p)| -(Float::with_val(prec, u * p) * &eps))
            .collect();
        let sol = kernel.apply(&self.quad, &g);
        Ok(kernel.residual_at(&sol, &self.quad, node, &g[node])?)
    }
}

fn log2(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    Float::with_val(x.prec(), x.abs_ref()).log2().to_f64()
}

/// Number of levels whose frequency stays within `degree_max`.
fn levels_within(j2: i64, shift: i64, degree_max: u32) -> usize {
    let d = degree_max as i64;
    let mut l = 0usize;
    while (j2 + (l as i64 + 1) * shift).abs() <= d {
        l += 1;
    }
    l
}

/// Matrix plus the chain-truncation bookkeeping.
#[derive(Clone, Debug)]
pub struct DtnAssembly {
    pub matrix: DtnMatrix,
    /// Sum of the chain tail bounds (levels skipped as negligible).
    pub chain_tail: XReal,
    pub chains: usize,
    pub levels: usize,
    /// Largest `measured - bound` over all levels (log2); nonpositive when decay respects `eps K_G`.
    pub worst_decay_excess_log2: f64,
    /// Smallest eigen-guard margin met (log2).
    pub min_eigen_margin_log2: f64,
}

/// Assembles `a_{j1 j2}` for all `|j1|, |j2| <= degree_max`.
pub fn dtn_assemble(
    engine: &DtnEngine,
    v: &PotentialVnm,
    degree_max: u32,
) -> Result<DtnAssembly, EngineError> {
    engine.check_potential(v)?;
    engine.check_order(degree_max)?;
    let prec = engine.prec;
    let tag = format!(
        "v_nm(n={}, m={}{}) E={}",
        v.n,
        v.m,
        if v.conjugate { ", conj" } else { "" },
        engine.energy
    );
    let bases: Vec<i64> = (-(degree_max as i64)..=degree_max as i64).collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, usize::from)
        .max(1);
    let chunk = bases.len().div_ceil(workers).max(1);
    let sqrt_two_pi = engine.sqrt_two_pi();
    let parts: Vec<Result<DtnAssembly, EngineError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = bases
            .chunks(chunk)
            .map(|part| {
                let tag = tag.clone();
                let sqrt_two_pi = &sqrt_two_pi;
                scope.spawn(move || {
                    let mut out = DtnAssembly {
                        matrix: DtnMatrix::new(2, engine.energy, tag),
                        chain_tail: XReal::zero(prec),
                        chains: 0,
                        levels: 0,
                        worst_decay_excess_log2: f64::NEG_INFINITY,
                        min_eigen_margin_log2: f64::INFINITY,
                    };
                    for &j2 in part {
                        let l_max = levels_within(j2, v.frequency(), degree_max);
                        let chain =
                            engine.solve_boundary_mode(j2, v, l_max, ChainOptions::default())?;
                        out.chains += 1;
                        out.chain_tail = &out.chain_tail + &chain.tail_bound;
                        for d in &chain.decay {
                            out.worst_decay_excess_log2 = out
                                .worst_decay_excess_log2
                                .max(d.measured_log2 - d.bound_log2);
                        }
                        for level in &chain.levels {
                            out.min_eigen_margin_log2 =
                                out.min_eigen_margin_log2.min(level.eigen_margin_log2);
                        }
                        for level in chain.levels.iter().skip(1) {
                            out.levels += 1;
                            let a = Float::with_val(prec, &level.deriv_at_1 * sqrt_two_pi);
                            if a.is_zero() {
                                continue;
                            }
                            out.matrix.insert(
                                ModeIndex::from_frequency(level.frequency),
                                ModeIndex::from_frequency(j2),
                                LogComplex::from_real(&XReal::from_float(&a, prec)),
                            );
                        }
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("assembly worker panicked"))
            .collect()
    });
    let mut total: Option<DtnAssembly> = None;
    for part in parts {
        let part = part?;
        total = Some(match total {
            None => part,
            Some(mut acc) => {
                acc.matrix.merge(part.matrix);
                acc.chain_tail = &acc.chain_tail + &part.chain_tail;
                acc.chains += part.chains;
                acc.levels += part.levels;
                acc.worst_decay_excess_log2 = acc
                    .worst_decay_excess_log2
                    .max(part.worst_decay_excess_log2);
                acc.min_eigen_margin_log2 =
                    acc.min_eigen_margin_log2.min(part.min_eigen_margin_log2);
                acc
            }
        });
    }
    Ok(total.expect("at least one base frequency"))
}

/// The DtN-difference matrix for `|j1|, |j2| <= degree_max`.
pub fn dtn_diff_matrix(
    engine: &DtnEngine,
    v: &PotentialVnm,
    degree_max: u32,
) -> Result<DtnMatrix, EngineError> {
    Ok(dtn_assemble(engine, v, degree_max)?.matrix)
}

/// One ODE residual sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub base: i64,
    pub level: usize,
    pub node: usize,
    pub relative: f64,
}

/// Outcome of one matrix solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub energy: f64,
    pub n: u32,
    pub m: u32,
    pub degree_max: u32,
    pub precision_bits: u32,
    pub entries: usize,
    pub chains: usize,
    pub levels: usize,
    pub residuals: Vec<ResidualSample>,
    pub residual_tolerance: f64,
    pub q: XReal,
    pub chain_tail: XReal,
    pub matrix_tail: XReal,
    pub worst_decay_excess_log2: f64,
    pub min_eigen_margin_log2: f64,
    pub passed: bool,
}

/// Residual bases sampled in a [`SolveReport`].
fn residual_bases(v: &PotentialVnm, degree_max: u32) -> Vec<i64> {
    let d = degree_max as i64;
    let s = v.frequency();
    [0i64, -s / 2, -d]
        .into_iter()
        .filter(|j2| (j2 + s).abs() <= d)
        .collect()
}

/// Assembles the matrix and records residuals, tails and budgets.
pub fn solve_with_report(
    engine: &DtnEngine,
    v: &PotentialVnm,
    degree_max: u32,
    q: &XReal,
    residual_tolerance: f64,
) -> Result<(DtnMatrix, SolveReport), EngineError> {
    let asm = dtn_assemble(engine, v, degree_max)?;
    let n_sup = v.sup_norm();
    let matrix_tail = tail_bound(&asm.matrix, degree_max, v.n, q, &n_sup, engine.energy, 2)?;
    let mut residuals = Vec::new();
    if !v.eps.is_zero() {
        let mid = engine.quad.len() / 2;
        for j2 in residual_bases(v, degree_max) {
            let chain = engine.solve_boundary_mode(j2, v, 1, ChainOptions::default())?;
            for node in [mid, mid + engine.quad.len() / 8] {
                let r = engine.chain_residual(&chain, v, 1, node)?;
                residuals.push(ResidualSample {
                    base: j2,
                    level: 1,
                    node,
                    relative: r.to_f64(),
                });
            }
        }
    }
    let passed = residuals.iter().all(|r| r.relative <= residual_tolerance)
        && asm.worst_decay_excess_log2 <= 0.0;
    let report = SolveReport {
        energy: engine.energy,
        n: v.n,
        m: v.m,
        degree_max,
        precision_bits: engine.prec,
        entries: asm.matrix.len(),
        chains: asm.chains,
        levels: asm.levels,
        residuals,
        residual_tolerance,
        q: q.clone(),
        chain_tail: asm.chain_tail,
        matrix_tail,
        worst_decay_excess_log2: asm.worst_decay_excess_log2,
        min_eigen_margin_log2: asm.min_eigen_margin_log2,
        passed,
    };
    Ok((asm.matrix, report))
}

/// `sqrt(2 pi)` as a double, for oracle comparisons.
pub(crate) fn sqrt_two_pi_f64() -> f64 {
    (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::{j_pair, y_pair_order_limit};

    fn small_engine(energy: f64, max_order: u32, prec: u32) -> DtnEngine {
        let cfg = EngineConfig {
            panels: 32,
            per_panel: 16,
            prec,
        };
        DtnEngine::new(energy, &BumpSpec::default(), max_order, cfg).unwrap()
    }

    #[test]
    fn tables_match_direct_evaluation() {
        let prec = 192;
        let e = small_engine(3.375, 40, prec);
        let tol = Float::with_val(prec, Float::i_exp(1, -(prec as i32 - 24)));
        for order in [0u32, 1, 5, 40] {
            for idx in [0usize, 100, 511] {
                let x = Float::with_val(prec, e.wavenumber() * &e.quadrature().nodes()[idx]);
                let (jd, _) = j_pair(BesselOrder::integer(order), &x, prec).unwrap();
                let (yd, _) = y_pair_order_limit(order, &x, prec).unwrap();
                let jt = &e.j_table(order).unwrap()[idx];
                let yt = &e.y_table(order).unwrap()[idx];
                assert!(
                    Float::with_val(prec, jt - &jd).abs()
                        <= Float::with_val(prec, jd.abs_ref()) * &tol,
                    "J order {order}"
                );
                assert!(
                    Float::with_val(prec, yt - &yd).abs()
                        <= Float::with_val(prec, yd.abs_ref()) * &tol,
                    "Y order {order}"
                );
            }
        }
        assert!(e.j_table(41).is_err());
    }

    #[test]
    fn zero_amplitude_chain_is_free() {
        let e = small_engine(3.375, 20, 128);
        let v = PotentialVnm::new(5, 3, 2, BumpSpec::default(), 128)
            .unwrap()
            .with_amplitude(XReal::zero(128));
        let c = e
            .solve_boundary_mode(2, &v, 3, ChainOptions::default())
            .unwrap();
        assert_eq!(c.levels.len(), 1);
        assert_eq!(c.stop, ChainStop::ZeroAmplitude);
        assert!(dtn_diff_matrix(&e, &v, 10).unwrap().is_empty());
    }

    #[test]
    fn free_level_derivative_is_free_dtn_eigenvalue() {
        let e = small_engine(3.375, 20, 128);
        let v = PotentialVnm::new(5, 3, 2, BumpSpec::default(), 128).unwrap();
        for j in [0i64, 3, -7] {
            let c = e
                .solve_boundary_mode(j, &v, 0, ChainOptions::default())
                .unwrap();
            let lam =
                crate::radial::free_dtn_eigenvalue(2, j.unsigned_abs() as u32, 3.375, 128).unwrap();
            let got = c.levels[0].deriv_at_1.to_f64() * sqrt_two_pi_f64();
            assert!(
                (got - lam).abs() < 1e-14 * lam.abs().max(1.0),
                "j={j}: {got} vs {lam}"
            );
        }
    }

    #[test]
    fn levels_decay_within_green_bound() {
        let e = small_engine(3.375, 40, 512);
        let v = PotentialVnm::new(6, 2, 2, BumpSpec::default(), 512).unwrap();
        let c = e
            .solve_boundary_mode(-12, &v, 5, ChainOptions::default())
            .unwrap();
        assert_eq!(c.stop, ChainStop::LevelLimit);
        assert_eq!(c.levels.len(), 6);
        for d in &c.decay {
            assert!(d.measured_log2 <= d.bound_log2, "{d:?}");
        }
    }

    #[test]
    fn selection_rule_and_small_degrees() {
        let e = small_engine(3.375, 30, 128);
        let v = PotentialVnm::new(12, 3, 2, BumpSpec::default(), 128).unwrap();
        let a = dtn_diff_matrix(&e, &v, 30).unwrap();
        assert!(!a.is_empty());
        for ((row, col), _) in a.iter() {
            let diff = row.frequency().unwrap() - col.frequency().unwrap();
            assert!(diff > 0 && diff % 12 == 0, "{row} {col}");
            assert!(row.j.max(col.j) > 5);
        }
    }

    #[test]
    fn residual_is_small() {
        let e = small_engine(3.375, 20, 256);
        let v = PotentialVnm::new(5, 3, 2, BumpSpec::default(), 256).unwrap();
        let c = e
            .solve_boundary_mode(1, &v, 2, ChainOptions::default())
            .unwrap();
        let r = e.chain_residual(&c, &v, 2, 256).unwrap().to_f64();
        assert!(r < 1e-20, "residual {r:e}");
    }

    #[test]
    fn negligible_levels_are_skipped_with_a_tail() {
        let e = small_engine(3.375, 60, 64);
        let v = PotentialVnm::new(4, 6, 2, BumpSpec::default(), 64).unwrap();
        let c = e
            .solve_boundary_mode(0, &v, 12, ChainOptions::default())
            .unwrap();
        assert_eq!(c.stop, ChainStop::Negligible);
        assert!(c.levels.len() < 13);
        let scale = c
            .levels
            .iter()
            .map(|l| l.deriv_at_1.to_f64().abs())
            .fold(0.0, f64::max);
        assert!(c.tail_bound.to_f64() > 0.0);
        assert!(c.tail_bound.to_f64() <= scale * 2f64.powi(-64) * sqrt_two_pi_f64() * (1.0 + 1e-9));
    }
}
