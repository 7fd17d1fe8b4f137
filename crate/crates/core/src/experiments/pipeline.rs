use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{instability_rhs, ExperimentError, ExperimentParams};
use crate::dtn_engine::{
    solve_with_report, verify_lemma32, DtnEngine, EngineConfig, Lemma32Report, SolveReport,
};
use crate::potentials::{BumpSpec, PotentialVnm};
use crate::spectral_gap::{
    disk_eigenvalues, empirical_c1, find_gap_energy_with_c1, resolvent_budget, GapEnergy,
};
use crate::sphere_basis::op_norm_linf_bound;
use crate::xreal::XReal;

/// Radii used for the empirical Weyl constant.
const C1_GRID: [f64; 5] = [2.0, 5.0, 10.0, 15.0, 20.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhsPoint {
    pub s: f64,
    pub rhs: XReal,
    pub rhs_log2: f64,
    /// `log2(LHS) - log2(RHS)`.
    pub margin_log2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRerun {
    pub precision_bits: u32,
    pub delta: XReal,
    /// `log2(|delta' - delta| / delta)`.
    pub relative_change_log2: f64,
    pub verdict: bool,
    pub passed: bool,
}

/// Wall-clock seconds per stage; only reported on request so outputs stay deterministic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub gap_s: f64,
    pub assembly_s: f64,
    pub rerun_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub d: u32,
    pub gap: GapEnergy,
    pub energy: f64,
    pub n: u32,
    pub m: u32,
    pub eps: XReal,
    pub eps_ball: f64,
    pub sup_norm_ok: bool,
    pub degree_max: u32,
    pub precision_bits: u32,
    pub distance: f64,
    pub q: XReal,
    pub entries: usize,
    /// `sum |a|` over the computed entries, rounded up.
    pub entry_sum: XReal,
    pub chain_tail: XReal,
    pub matrix_tail: XReal,
    /// Certified upper bound on `||Φ_v - Φ_0||_{L^inf -> L^inf}`.
    pub delta: XReal,
    pub delta_log2: f64,
    /// `log2((1 + Q + E Q) 2^{-n/4})`, for comparison with `delta_log2`.
    pub decay_reference_log2: f64,
    pub lhs: XReal,
    pub lhs_log2: f64,
    pub rhs: Vec<RhsPoint>,
    pub solve: SolveReport,
    pub lemma32: Lemma32Report,
    pub precision_rerun: Option<PrecisionRerun>,
    pub flags: Vec<String>,
    pub timings: Option<Timings>,
    pub verdict: bool,
}

/// `max(2n + margin, ceil(10 (1 + sqrt E)^2))`.
pub fn pipeline_degree_max(n: u32, energy: f64, margin: u32) -> u32 {
    let floor = (10.0 * (1.0 + energy.sqrt()).powi(2)).ceil() as u32;
    (2 * n + margin).max(floor)
}

/// `n = [20 (1 + sqrt E)^2] + 1`.
pub(crate) fn default_n(energy: f64) -> u32 {
    (20.0 * (1.0 + energy.sqrt()).powi(2)).floor() as u32 + 1
}

struct Certified {
    entries: usize,
    entry_sum: XReal,
    chain_tail: XReal,
    matrix_tail: XReal,
    delta: XReal,
    solve: SolveReport,
    lemma32: Lemma32Report,
}

fn certify_delta(
    energy: f64,
    v: &PotentialVnm,
    degree_max: u32,
    q: &XReal,
    p: &ExperimentParams,
    prec: u32,
) -> Result<Certified, ExperimentError> {
    let cfg = EngineConfig {
        prec,
        ..EngineConfig::default()
    };
    let engine = DtnEngine::new(energy, &v.bump, degree_max, cfg)?;
    let (matrix, solve) = solve_with_report(&engine, v, degree_max, q, p.residual_tolerance())?;
    let n_sup = v.sup_norm();
    let lemma32 = verify_lemma32(&matrix, q, &n_sup, energy);
    // Rounding in the entries and the summation is covered by a relative 2^{-prec/2}.
    let raw = op_norm_linf_bound(&matrix).map_err(crate::dtn_engine::EngineError::from)?;
    let entry_sum = &raw * &(&XReal::one(prec) + &XReal::pow2(-(prec as f64) / 2.0, prec));
    let chain_tail = solve.chain_tail.clone();
    let matrix_tail = if v.eps.is_zero() {
        XReal::zero(prec)
    } else {
        solve.matrix_tail.clone()
    };
    let delta = &(&entry_sum + &chain_tail) + &matrix_tail;
    Ok(Certified {
        entries: matrix.len(),
        entry_sum,
        chain_tail,
        matrix_tail,
        delta,
        solve,
        lemma32,
    })
}

fn evaluate_rhs(
    delta: &XReal,
    lhs: &XReal,
    energy: f64,
    p: &ExperimentParams,
) -> Result<Vec<RhsPoint>, ExperimentError> {
    p.s_grid
        .iter()
        .map(|&s| {
            let rhs = instability_rhs(delta, energy, s, p)?;
            let rhs_log2 = rhs.log2_mag();
            Ok(RhsPoint {
                s,
                margin_log2: lhs.log2_mag() - rhs_log2,
                rhs,
                rhs_log2,
            })
        })
        .collect()
}

fn verdict_of(lhs: &XReal, rhs: &[RhsPoint]) -> bool {
    !rhs.is_empty() && lhs.sign() > 0 && rhs.iter().all(|r| lhs.cmp_abs(&r.rhs).is_gt())
}

/// Gap energy, `n`, the potential, certified `delta`, and the inequality on `s_grid`.
pub fn cmd_theorem22(
    p: &ExperimentParams,
    with_timings: bool,
) -> Result<PipelineReport, ExperimentError> {
    p.validate()?;
    if p.d != 2 {
        return Err(ExperimentError::Params(format!(
            "the certification pipeline runs in d = 2, got d = {}",
            p.d
        )));
    }
    let start = Instant::now();
    let prec = p.precision;
    let mut flags = Vec::new();

    let c1 = empirical_c1(p.d, &C1_GRID)?;
    let gap = find_gap_energy_with_c1(p.rho, p.d, Some(c1))?;
    let energy = p.energy.unwrap_or(gap.energy);
    if p.energy.is_some() {
        flags.push(format!("energy overridden to {energy}"));
    }
    let n = p.n.unwrap_or_else(|| default_n(energy));
    let mut v = PotentialVnm::new(n, p.m, p.d, BumpSpec::default(), prec)?;
    if let Some(a) = p.amplitude {
        v = v.with_amplitude(XReal::from_f64(a, prec));
        flags.push(format!("amplitude overridden to {a}"));
    }
    let degree_max = pipeline_degree_max(n, energy, p.degree_margin);
    let table = disk_eigenvalues(p.d, 4.0 * (energy + 10.0))?;
    let budget = resolvent_budget(energy, &v.sup_norm(), &table)?;
    let gap_s = start.elapsed().as_secs_f64();

    let t = Instant::now();
    let cert = certify_delta(energy, &v, degree_max, &budget.q, p, prec)?;
    let assembly_s = t.elapsed().as_secs_f64();

    let lhs = v.sup_norm();
    let sup_norm_ok = lhs.cmp_abs(&XReal::from_f64(p.eps_ball, prec)).is_lt();
    let rhs = if cert.delta.is_zero() {
        flags.push(
            "zero amplitude: Φ_v = Φ_0 exactly, delta = 0 and the inequality is vacuous".into(),
        );
        Vec::new()
    } else {
        evaluate_rhs(&cert.delta, &lhs, energy, p)?
    };
    let one = XReal::one(prec);
    let e = XReal::from_f64(energy, prec);
    let decay_reference_log2 =
        (&(&one + &budget.q) + &(&e * &budget.q)).log2_mag() - n as f64 / 4.0;
    let mut verdict = verdict_of(&lhs, &rhs);

    let t = Instant::now();
    let precision_rerun = if p.precision_rerun && !cert.delta.is_zero() {
        let prec2 = 2 * prec;
        let v2 = PotentialVnm {
            eps: v.eps.with_precision(prec2),
            ..v.clone()
        };
        let budget2 = resolvent_budget(energy, &v2.sup_norm(), &table)?;
        let cert2 = certify_delta(energy, &v2, degree_max, &budget2.q, p, prec2)?;
        let diff = (&cert2.delta - &cert.delta.with_precision(prec2)).abs();
        let relative_change_log2 = if diff.is_zero() {
            f64::NEG_INFINITY
        } else {
            diff.log2_mag() - cert.delta.log2_mag()
        };
        let rhs2 = evaluate_rhs(&cert2.delta, &lhs.with_precision(prec2), energy, p)?;
        let verdict2 = verdict_of(&lhs.with_precision(prec2), &rhs2);
        Some(PrecisionRerun {
            precision_bits: prec2,
            delta: cert2.delta,
            relative_change_log2,
            verdict: verdict2,
            passed: verdict2 == verdict && relative_change_log2 <= -p.rerun_tolerance_bits,
        })
    } else {
        None
    };
    let rerun_s = t.elapsed().as_secs_f64();

    if !sup_norm_ok {
        flags.push(format!(
            "||v||_inf = {} is not below eps_ball = {}",
            lhs, p.eps_ball
        ));
    }
    if gap.meets_lemma == Some(false) {
        flags.push("gap half-width is below the lemma half-width".into());
    }
    if !cert.solve.passed {
        flags.push("solve report failed (residual or decay check)".into());
    }
    if !cert.lemma32.passed {
        flags.push("an entry exceeds the per-entry decay bound".into());
    }
    if let Some(r) = &precision_rerun {
        if !r.passed {
            flags.push("doubled-precision rerun disagrees".into());
        }
    }
    verdict = verdict
        && sup_norm_ok
        && gap.meets_lemma != Some(false)
        && cert.solve.passed
        && cert.lemma32.passed
        && precision_rerun.as_ref().is_none_or(|r| r.passed);

    let timings = with_timings.then(|| Timings {
        gap_s,
        assembly_s,
        rerun_s,
        total_s: start.elapsed().as_secs_f64(),
    });
    Ok(PipelineReport {
        d: p.d,
        energy,
        n,
        m: p.m,
        eps: v.eps.clone(),
        eps_ball: p.eps_ball,
        sup_norm_ok,
        degree_max,
        precision_bits: prec,
        distance: budget.dist_free,
        q: budget.q,
        entries: cert.entries,
        entry_sum: cert.entry_sum,
        chain_tail: cert.chain_tail,
        matrix_tail: cert.matrix_tail,
        delta_log2: cert.delta.log2_mag(),
        delta: cert.delta,
        decay_reference_log2,
        lhs_log2: lhs.log2_mag(),
        lhs,
        rhs,
        solve: cert.solve,
        lemma32: cert.lemma32,
        precision_rerun,
        flags,
        timings,
        gap,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operating_point_arithmetic() {
        assert_eq!(default_n(3.375), 161);
        assert_eq!(pipeline_degree_max(161, 3.375, 16), 338);
        assert_eq!(pipeline_degree_max(5, 3.375, 0), 81);
    }

    #[test]
    fn small_pipeline_is_consistent() {
        let p = ExperimentParams {
            n: Some(20),
            precision: 128,
            degree_margin: 20,
            rerun_tolerance_bits: 20.0,
            ..Default::default()
        };
        let r = cmd_theorem22(&p, false).unwrap();
        assert_eq!(r.n, 20);
        assert!((r.energy - 3.375).abs() < 0.05, "{}", r.energy);
        assert!(r.delta.sign() > 0);
        let parts = &(&r.entry_sum + &r.chain_tail) + &r.matrix_tail;
        assert_eq!(parts.log2_mag(), r.delta_log2);
        assert_eq!(r.rhs.len(), 11);
        let rerun = r.precision_rerun.as_ref().unwrap();
        assert!(rerun.passed, "{rerun:?}");
        assert!(r.timings.is_none());
    }

    #[test]
    fn zero_amplitude_is_vacuous() {
        let p = ExperimentParams {
            n: Some(12),
            precision: 128,
            amplitude: Some(0.0),
            ..Default::default()
        };
        let r = cmd_theorem22(&p, false).unwrap();
        assert!(r.delta.is_zero());
        assert!(r.lhs.is_zero());
        assert!(r.rhs.is_empty());
        assert!(!r.verdict);
        assert!(r.flags.iter().any(|f| f.contains("zero amplitude")));
    }
}
