//! Stability and instability right-hand sides, the end-to-end certification
//! pipeline, parameter sweeps and invariant suites.

mod pipeline;
mod suites;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtn_engine::EngineError;
use crate::potentials::PotentialError;
use crate::spectral_gap::GapError;
use crate::xreal::XReal;

pub use pipeline::{
    cmd_theorem22, pipeline_degree_max, PipelineReport, PrecisionRerun, RhsPoint, Timings,
};
pub use suites::{cmd_verify, CheckResult, SuiteReport, SUITES};
pub use sweep::{cmd_sweep, SweepAxis, SWEEP_HEADER};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
}

/// Stability and instability parameters plus numerical controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub d: u32,
    #[serde(alias = "A")]
    pub a: f64,
    #[serde(alias = "B")]
    pub b: f64,
    pub kappa: f64,
    pub tau: f64,
    /// Radius of the admissible ball for `||v_nm||_inf`.
    pub eps_ball: f64,
    pub m: u32,
    pub s2: f64,
    pub s_grid: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub sigma: f64,
    pub precision: u32,
    /// Relative ODE residual accepted in the solve report; defaults to `2^{-precision/4}`.
    pub residual_tolerance: Option<f64>,
    /// Rerun at doubled precision and require `|delta' - delta| / delta <= 2^{-rerun_tolerance_bits}`.
    pub precision_rerun: bool,
    pub rerun_tolerance_bits: f64,
    /// Extra degrees beyond `2n` in the truncated matrix.
    pub degree_margin: u32,
    /// Overrides `n = [20 (1 + sqrt E)^2] + 1`.
    pub n: Option<u32>,
    /// Overrides the gap energy.
    pub energy: Option<f64>,
    /// Overrides `eps = n^{-m}`.
    pub amplitude: Option<f64>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            d: 2,
            a: 1.0,
            b: 1.0,
            kappa: 1.0,
            tau: 0.9,
            eps_ball: 0.01,
            m: 3,
            s2: 10.0,
            s_grid: (0..=10).map(f64::from).collect(),
            alpha: 0.0,
            beta: 0.5,
            rho: 1.5,
            sigma: 1.0,
            precision: 512,
            residual_tolerance: None,
            precision_rerun: true,
            rerun_tolerance_bits: 32.0,
            degree_margin: 16,
            n: None,
            energy: None,
            amplitude: None,
        }
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ExperimentError> {
    if ok {
        Ok(())
    } else {
        Err(ExperimentError::Params(msg()))
    }
}

impl ExperimentParams {
    /// Parses TOML and validates ranges.
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let p: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    /// `s_1 = (m - d) / d`.
    pub fn s1(&self) -> f64 {
        (self.m as f64 - self.d as f64) / self.d as f64
    }

    pub fn residual_tolerance(&self) -> f64 {
        self.residual_tolerance
            .unwrap_or_else(|| 2f64.powf(-(self.precision as f64) / 4.0))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        require(self.d >= 2, || format!("d = {} must be at least 2", self.d))?;
        require(pos(self.a) && pos(self.b), || {
            format!("A = {}, B = {} must be positive", self.a, self.b)
        })?;
        require(self.kappa.is_finite(), || {
            format!("kappa = {} must be finite", self.kappa)
        })?;
        require(self.tau > 0.0 && self.tau < 1.0, || {
            format!("tau = {} must lie in (0, 1)", self.tau)
        })?;
        require(pos(self.eps_ball), || {
            format!("eps_ball = {} must be positive", self.eps_ball)
        })?;
        require(self.m > self.d, || {
            format!("m = {} must exceed d = {}", self.m, self.d)
        })?;
        require(self.s2 > self.m as f64 && self.s2.is_finite(), || {
            format!("s2 = {} must exceed m = {}", self.s2, self.m)
        })?;
        require(!self.s_grid.is_empty(), || "s_grid is empty".into())?;
        if let Some(s) = self.s_grid.iter().find(|s| !(**s >= 0.0 && **s <= self.s2)) {
            return Err(ExperimentError::Params(format!(
                "s = {s} lies outside [0, s2 = {}]",
                self.s2
            )));
        }
        require(self.alpha >= 0.0 && self.beta >= 0.0, || {
            format!(
                "alpha = {}, beta = {} must be nonnegative",
                self.alpha, self.beta
            )
        })?;
        require((self.alpha + self.beta - self.s1()).abs() <= 1e-12, || {
            format!(
                "alpha + beta = {} must equal s1 = (m - d)/d = {}",
                self.alpha + self.beta,
                self.s1()
            )
        })?;
        require(self.rho > 1.0 && self.rho.is_finite(), || {
            format!("rho = {} must exceed 1", self.rho)
        })?;
        require(pos(self.sigma), || {
            format!("sigma = {} must be positive", self.sigma)
        })?;
        require((64..=16384).contains(&self.precision), || {
            format!("precision = {} must lie in [64, 16384]", self.precision)
        })?;
        if let Some(t) = self.residual_tolerance {
            require(pos(t), || "residual_tolerance must be positive".into())?;
        }
        require(pos(self.rerun_tolerance_bits), || {
            "rerun_tolerance_bits must be positive".into()
        })?;
        if let Some(n) = self.n {
            require(n > 0, || "n must be positive".into())?;
        }
        if let Some(e) = self.energy {
            require(pos(e), || format!("energy = {e} must be positive"))?;
        }
        if let Some(a) = self.amplitude {
            require(a >= 0.0 && a.is_finite(), || {
                format!("amplitude = {a} must be nonnegative")
            })?;
        }
        Ok(())
    }
}

/// `ln(3 + 1/delta)` for `delta > 0`, as an extended real.
fn log_term(delta: &XReal, prec: u32) -> XReal {
    let inv = &delta.recip() + &XReal::from_f64(3.0, prec);
    XReal::from_float(&inv.ln(), prec)
}

fn check_delta(delta: &XReal) -> Result<(), ExperimentError> {
    require(delta.sign() > 0, || {
        format!("delta = {delta} must be positive")
    })
}

/// `A (1 + sqrt E)^kappa delta^tau`, shared by both right-hand sides when `kappa` is supplied.
fn power_term(coef: f64, energy: f64, exponent: f64, delta: &XReal, tau: f64, prec: u32) -> XReal {
    let base = XReal::from_f64(1.0 + energy.sqrt(), prec).abs_powf(exponent);
    &(&XReal::from_f64(coef, prec) * &base) * &delta.abs_powf(tau)
}

/// `A (1 + sqrt E) delta^tau + B (1 + sqrt E)^{-alpha} (ln(3 + 1/delta))^{-beta}`.
pub fn stability_rhs(
    delta: &XReal,
    energy: f64,
    p: &ExperimentParams,
) -> Result<XReal, ExperimentError> {
    check_delta(delta)?;
    require(energy >= 0.0, || {
        format!("E = {energy} must be nonnegative")
    })?;
    require((p.alpha + p.beta - p.s1()).abs() <= 1e-12, || {
        "alpha + beta must equal s1".into()
    })?;
    let prec = delta.precision_bits();
    let first = power_term(p.a, energy, 1.0, delta, p.tau, prec);
    let base = XReal::from_f64(1.0 + energy.sqrt(), prec).abs_powf(-p.alpha);
    let second = &(&XReal::from_f64(p.b, prec) * &base) * &log_term(delta, prec).abs_powf(-p.beta);
    Ok(&first + &second)
}

/// `A (1 + sqrt E)^kappa delta^tau + B (1 + sqrt E)^{2(s - s2)} (ln(3 + 1/delta))^{-s}`.
pub fn instability_rhs(
    delta: &XReal,
    energy: f64,
    s: f64,
    p: &ExperimentParams,
) -> Result<XReal, ExperimentError> {
    check_delta(delta)?;
    require(energy >= 0.0, || {
        format!("E = {energy} must be nonnegative")
    })?;
    require(s >= 0.0 && s <= p.s2, || {
        format!("s = {s} lies outside [0, {}]", p.s2)
    })?;
    let prec = delta.precision_bits();
    let first = power_term(p.a, energy, p.kappa, delta, p.tau, prec);
    let base = XReal::from_f64(1.0 + energy.sqrt(), prec).abs_powf(2.0 * (s - p.s2));
    let second = &(&XReal::from_f64(p.b, prec) * &base) * &log_term(delta, prec).abs_powf(-s);
    Ok(&first + &second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stability_params() -> ExperimentParams {
        ExperimentParams {
            m: 4,
            alpha: 0.0,
            beta: 1.0,
            tau: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn defaults_are_valid() {
        ExperimentParams::default().validate().unwrap();
        assert_eq!(ExperimentParams::default().s_grid.len(), 11);
    }

    #[test]
    fn stability_rhs_direct_arithmetic() {
        let p = stability_params();
        let v = stability_rhs(&XReal::one(128), 0.0, &p).unwrap().to_f64();
        assert!((v - (1.0 + 1.0 / 4f64.ln())).abs() < 1e-15, "{v}");
        assert!((v - 1.7213).abs() < 1e-4);
    }

    #[test]
    fn stability_rhs_vanishes_as_delta_shrinks() {
        let p = stability_params();
        let tiny = XReal::pow2(-1e6, 128);
        assert!(stability_rhs(&tiny, 4.0, &p).unwrap().to_f64() < 1e-5);
        assert!(stability_rhs(&XReal::zero(128), 4.0, &p).is_err());
    }

    #[test]
    fn instability_rhs_endpoints() {
        let p = ExperimentParams::default();
        let delta = XReal::pow2(-300.0, 256);
        let e = 3.375f64;
        let first = (1.0 + e.sqrt()) * 2f64.powf(-270.0);
        let ln = 300.0 * 2f64.ln();
        let at_s2 = instability_rhs(&delta, e, 10.0, &p).unwrap().to_f64();
        assert!((at_s2 - (first + ln.powf(-10.0))).abs() < 1e-12 * at_s2);
        let at_0 = instability_rhs(&delta, e, 0.0, &p).unwrap().to_f64();
        let expected = first + (1.0 + e.sqrt()).powf(-20.0);
        assert!((at_0 - expected).abs() < 1e-12 * expected);
        assert!(instability_rhs(&delta, e, 10.5, &p).is_err());
    }

    #[test]
    fn log_domain_matches_double_where_representable() {
        let p = ExperimentParams::default();
        for delta in [1e-3, 1e-30, 1e-200] {
            let x = XReal::from_f64(delta, 128);
            let got = instability_rhs(&x, 2.0, 3.0, &p).unwrap().to_f64();
            let want = (1.0 + 2f64.sqrt()) * delta.powf(0.9)
                + (1.0 + 2f64.sqrt()).powf(2.0 * (3.0 - 10.0))
                    * (3.0 + 1.0 / delta).ln().powf(-3.0);
            assert!(
                (got - want).abs() < 1e-13 * want,
                "{delta}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn params_reject_out_of_range_values() {
        let bad = [
            "tau = 1.0",
            "m = 2",
            "s2 = 2.5",
            "s_grid = [0.0, 11.0]",
            "beta = 0.7",
            "rho = 1.0",
            "sigma = 0.0",
            "A = -1.0",
            "precision = 16",
            "unknown_key = 1",
        ];
        for text in bad {
            assert!(ExperimentParams::from_toml(text).is_err(), "{text}");
        }
        let p = ExperimentParams::from_toml("A = 2.0\nrho = 2.0\nn = 50").unwrap();
        assert_eq!(p.a, 2.0);
        assert_eq!(p.n, Some(50));
    }

    proptest! {
        #[test]
        fn stability_rhs_is_monotone_in_delta(x in 1e-6f64..0.999, bump in 1e-6f64..1e-3) {
            let p = stability_params();
            let lo = stability_rhs(&XReal::from_f64(x, 128), 2.0, &p).unwrap().to_f64();
            let hi = stability_rhs(&XReal::from_f64((x + bump).min(1.0), 128), 2.0, &p).unwrap().to_f64();
            prop_assert!(hi >= lo);
        }

        #[test]
        fn instability_rhs_is_positive(s in 0.0f64..10.0, lg in -2000.0f64..-1.0) {
            let p = ExperimentParams::default();
            let v = instability_rhs(&XReal::pow2(lg, 128), 3.0, s, &p).unwrap();
            prop_assert!(v.sign() > 0);
        }
    }
}
