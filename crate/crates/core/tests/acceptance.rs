//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use rug::Float;

use dtn_core::dtn_engine::{
    dtn_assemble, fd_chain_entries, prop21_decay_check, verify_lemma31, verify_lemma32,
    ChainOptions, DtnEngine, EngineConfig, FD_ORACLE_CELLS,
};
use dtn_core::experiments::{cmd_theorem22, ExperimentParams};
use dtn_core::potentials::{BumpSpec, PotentialVnm};
use dtn_core::radial::free_dtn_eigenvalue;
use dtn_core::special_functions::{
    bessel_j, certify_bessel_bounds, j_pair, wronskian_reference, y_pair, BesselOrder,
};
use dtn_core::spectral_gap::{disk_eigenvalues, find_gap_energy, resolvent_budget, weyl_count};
use dtn_core::sphere_basis::ModeIndex;
use dtn_core::XReal;

const WRONSKIAN_TOL: f64 = 1e-25;
const ORACLE_TOL: f64 = 1e-4;
const LEMMA32_CONSTANT_CHECKED: f64 = 1000.0;
const DECAY_SLOPE_MAX: f64 = -0.25;
const SPECTRUM_TOL: f64 = 1e-9;
const FREE_DTN_TOL: f64 = 0.01;
const FREE_DTN_E1_TOL: f64 = 1e-10;
const RHO_GAP: f64 = 1.5;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

type Check = fn(&mut Shared) -> Result<Outcome, String>;

/// Results reused by later criteria.
#[derive(Default)]
struct Shared {
    oracle_cases: Vec<(u32, u32, u32)>,
}

fn gap_energy() -> Result<f64, String> {
    Ok(find_gap_energy(RHO_GAP, 2)
        .map_err(|e| e.to_string())?
        .energy)
}

fn engine(energy: f64, max_order: u32, prec: u32) -> Result<DtnEngine, String> {
    let cfg = EngineConfig {
        prec,
        ..EngineConfig::default()
    };
    DtnEngine::new(energy, &BumpSpec::default(), max_order, cfg).map_err(|e| e.to_string())
}

fn c1_wronskian(_: &mut Shared) -> Result<Outcome, String> {
    let prec = 256;
    let mut worst = 0.0f64;
    let mut at = (0.0, 0.0);
    for half in 0..=120u32 {
        let order = BesselOrder::from_half_units(half);
        for zi in 1..=100u32 {
            let x = Float::with_val(prec, zi as f64 / 10.0);
            let (j, dj) = j_pair(order, &x, prec).map_err(|e| e.to_string())?;
            let (y, dy) = y_pair(order, &x, prec).map_err(|e| e.to_string())?;
            let w = Float::with_val(prec, &j * &dy) - Float::with_val(prec, &dj * &y);
            let reference = wronskian_reference(&x, prec);
            let rel = ((w - &reference) / reference).abs().to_f64();
            if rel > worst {
                worst = rel;
                at = (half as f64 / 2.0, zi as f64 / 10.0);
            }
        }
    }
    Ok(outcome(
        worst <= WRONSKIAN_TOL,
        format!(
            "max relative error {worst:.3e} (alpha={}, z={}) over 121 orders x 100 arguments, tolerance {WRONSKIAN_TOL:e}",
            at.0, at.1
        ),
    ))
}

fn c2_bessel_bounds(_: &mut Shared) -> Result<Outcome, String> {
    let mut failed = Vec::new();
    let mut cases = 0;
    for d in [2u32, 3] {
        for (rho, n) in [(1.0, 40u32), (2.0, 90), (3.0, 160)] {
            let rep = certify_bessel_bounds(rho, d, n, 256).map_err(|e| e.to_string())?;
            cases += 1;
            let expected_n0 = (10.0 * (rho + 1.0) * (rho + 1.0)).floor() as u32 - 1;
            let conditions = rep.n0_conditions_passed.iter().all(|&b| b);
            if !rep.passed || !conditions || rep.n0 != expected_n0 {
                failed.push(format!("(d={d}, rho={rho}, n={n})"));
            }
        }
    }
    Ok(outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{cases} cases certified, threshold conditions hold")
        } else {
            format!("failed: {}", failed.join(", "))
        },
    ))
}

fn c3_selection_rule(_: &mut Shared) -> Result<Outcome, String> {
    let energy = gap_energy()?;
    let (n, degree_max) = (12u32, 30u32);
    let eng = engine(energy, degree_max, 512)?;
    let v = PotentialVnm::new(n, 3, 2, BumpSpec::default(), 512).map_err(|e| e.to_string())?;
    let a = dtn_assemble(&eng, &v, degree_max)
        .map_err(|e| e.to_string())?
        .matrix;
    let mut diffs = BTreeSet::new();
    let mut small = 0;
    for ((row, col), _) in a.iter() {
        diffs.insert(row.frequency().unwrap_or(0) - col.frequency().unwrap_or(0));
        if row.j.max(col.j) <= (n - 1) / 2 {
            small += 1;
        }
    }
    let multiples = diffs.iter().all(|&d| d > 0 && d % n as i64 == 0);
    Ok(outcome(
        multiples && small == 0 && !a.is_empty(),
        format!(
            "{} entries, j1 - j2 in {:?} (positive multiples of n), {small} entries with max degree <= {}",
            a.len(),
            diffs,
            (n - 1) / 2
        ),
    ))
}

fn c4_oracle(shared: &mut Shared) -> Result<Outcome, String> {
    let energy = gap_energy()?;
    let cases = [(12u32, 3u32, 30u32), (8, 3, 24), (5, 2, 12)];
    let eng = engine(energy, 30, 256)?;
    let mut worst = 0.0f64;
    let mut compared = 0;
    for &(n, m, degree_max) in &cases {
        let v = PotentialVnm::new(n, m, 2, BumpSpec::default(), 256).map_err(|e| e.to_string())?;
        let a = dtn_assemble(&eng, &v, degree_max)
            .map_err(|e| e.to_string())?
            .matrix;
        let fd =
            fd_chain_entries(energy, &v, degree_max, FD_ORACLE_CELLS).map_err(|e| e.to_string())?;
        for (&(row, col), &want) in &fd {
            let got = a
                .get(
                    ModeIndex::from_frequency(row),
                    ModeIndex::from_frequency(col),
                )
                .map_or(0.0, |e| e.to_complex64().re);
            worst = worst.max((got - want).abs() / want.abs());
            compared += 1;
        }
    }
    shared.oracle_cases = cases.to_vec();
    Ok(outcome(
        worst <= ORACLE_TOL && compared > 0,
        format!("{compared} entries over (n, m, D) in {cases:?}, worst relative deviation {worst:.3e}, tolerance {ORACLE_TOL:e}"),
    ))
}

fn c5_lemma32(_: &mut Shared) -> Result<Outcome, String> {
    let (energy, n, degree_max) = (1.0, 12u32, 120u32);
    let eng = engine(energy, degree_max, 512)?;
    let v = PotentialVnm::new(n, 3, 2, BumpSpec::default(), 512).map_err(|e| e.to_string())?;
    let a = dtn_assemble(&eng, &v, degree_max)
        .map_err(|e| e.to_string())?
        .matrix;
    let table = disk_eigenvalues(2, 60.0).map_err(|e| e.to_string())?;
    let b = resolvent_budget(energy, &v.sup_norm(), &table).map_err(|e| e.to_string())?;
    let r = verify_lemma32(&a, &b.q, &v.sup_norm(), energy);
    let in_window = a
        .iter()
        .filter(|((r, c), _)| (40..=120).contains(&r.j.max(c.j)))
        .count();
    Ok(outcome(
        r.passed && r.checked == in_window && r.checked > 0 && r.threshold == 40.0,
        format!(
            "{} entries with j_max in [40, 120], worst log2(|a| / bound) = {:.2} at {:?}, C = {LEMMA32_CONSTANT_CHECKED}",
            r.checked, r.worst_ratio_log2, r.worst_entry
        ),
    ))
}

fn c6_decay(_: &mut Shared) -> Result<Outcome, String> {
    let cfg = EngineConfig {
        prec: 512,
        ..EngineConfig::default()
    };
    let r =
        prop21_decay_check(1.0, 3, &[90, 100, 110, 120], 1.0, cfg).map_err(|e| e.to_string())?;
    Ok(outcome(
        r.slope <= DECAY_SLOPE_MAX,
        format!(
            "slope {:.4} per unit n (bound {DECAY_SLOPE_MAX}); at 2 sigma {:.4}, shift {:.4}; held-out points within fitted C2: {}",
            r.slope,
            r.slope_doubled_sigma,
            (r.slope_doubled_sigma - r.slope).abs(),
            r.holdout_passed
        ),
    ))
}

fn c7_theorem22(_: &mut Shared) -> Result<Outcome, String> {
    let p = ExperimentParams::default();
    let r = cmd_theorem22(&p, false).map_err(|e| e.to_string())?;
    let grid_ok = r.rhs.len() == 11 && r.rhs.iter().all(|x| x.margin_log2 > 0.0);
    let tail_included = r.matrix_tail.sign() > 0 && r.delta.cmp_abs(&r.matrix_tail).is_gt();
    let sup_ok = r.eps.cmp_abs(&XReal::from_f64(0.01, 64)).is_lt();
    let min_margin = r
        .rhs
        .iter()
        .map(|x| x.margin_log2)
        .fold(f64::INFINITY, f64::min);
    Ok(outcome(
        r.verdict && grid_ok && tail_included && sup_ok && r.precision_bits == 512,
        format!(
            "E={}, n={}, D={}, log2 delta={:.2}, log2 LHS={:.2}, min margin {:.2} bits over {} s-values, flags {:?}",
            r.energy,
            r.n,
            r.degree_max,
            r.delta_log2,
            r.lhs_log2,
            min_margin,
            r.rhs.len(),
            r.flags
        ),
    ))
}

fn c8_spectrum(_: &mut Shared) -> Result<Outcome, String> {
    let t = disk_eigenvalues(2, 40.0).map_err(|e| e.to_string())?;
    let distinct = t.distinct();
    let e1 = (distinct[0].0 / 5.783185962946784 - 1.0).abs();
    let e2 = (distinct[1].0 / 14.681970642123893 - 1.0).abs();
    let w3 = weyl_count(&t, 3.0).map_err(|e| e.to_string())?;
    let w4 = weyl_count(&t, 4.0).map_err(|e| e.to_string())?;
    let g = find_gap_energy(2.0, 2).map_err(|e| e.to_string())?;
    let recheck =
        disk_eigenvalues(2, 2.0 * (g.energy + g.half_width)).map_err(|e| e.to_string())?;
    let free = recheck
        .entries
        .iter()
        .all(|e| (e.lambda - g.energy).abs() >= g.half_width * (1.0 - 1e-12));
    Ok(outcome(
        e1 <= SPECTRUM_TOL && e2 <= SPECTRUM_TOL && distinct[1].1 == 2 && w3 == 1 && w4 == 3 && g.energy > 4.0 && g.energy < 8.0 && free,
        format!(
            "lambda1 rel {e1:.1e}, lambda2 rel {e2:.1e} (mult {}), N(3)={w3}, N(4)={w4}, gap E={:.4} +/- {:.4}",
            distinct[1].1, g.energy, g.half_width
        ),
    ))
}

fn c9_free_dtn(_: &mut Shared) -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    for j in 0..=20u32 {
        let lam = free_dtn_eigenvalue(2, j, 1e-4, 256).map_err(|e| e.to_string())?;
        worst = worst.max((lam - j as f64).abs());
    }
    let lam = free_dtn_eigenvalue(2, 0, 1.0, 256).map_err(|e| e.to_string())?;
    let j0 = bessel_j(BesselOrder::integer(0), 1.0, 256)
        .map_err(|e| e.to_string())?
        .to_f64();
    let j1 = bessel_j(BesselOrder::integer(1), 1.0, 256)
        .map_err(|e| e.to_string())?
        .to_f64();
    let e1 = (lam + j1 / j0).abs();
    Ok(outcome(
        worst <= FREE_DTN_TOL && e1 <= FREE_DTN_E1_TOL,
        format!("max |lambda_j - j| at E=1e-4: {worst:.2e}; E=1, j=0 deviation {e1:.1e}"),
    ))
}

fn c10_lemma31(shared: &mut Shared) -> Result<Outcome, String> {
    if shared.oracle_cases.is_empty() {
        return Err("criterion 4 did not run".into());
    }
    let energy = gap_energy()?;
    let eng = engine(energy, 30, 256)?;
    let table = disk_eigenvalues(2, 60.0).map_err(|e| e.to_string())?;
    let mut chains = 0;
    let mut min_margin = f64::INFINITY;
    let mut all = true;
    for &(n, m, degree_max) in &shared.oracle_cases {
        let v = PotentialVnm::new(n, m, 2, BumpSpec::default(), 256).map_err(|e| e.to_string())?;
        let b = resolvent_budget(energy, &v.sup_norm(), &table).map_err(|e| e.to_string())?;
        let d = degree_max as i64;
        for j2 in -d..=d {
            let mut l_max = 0;
            while (j2 + (l_max + 1) * n as i64).abs() <= d {
                l_max += 1;
            }
            let chain = eng
                .solve_boundary_mode(j2, &v, l_max as usize, ChainOptions { with_norms: true })
                .map_err(|e| e.to_string())?;
            let r =
                verify_lemma31(&chain, &b.q, &v.sup_norm(), energy).map_err(|e| e.to_string())?;
            chains += 1;
            all &= r.passed && r.margin > 0.0;
            min_margin = min_margin.min(r.margin);
        }
    }
    Ok(outcome(
        all,
        format!("{chains} chains, smallest margin {min_margin:.4}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, f64, Check); 10] = [
        ("C1 Wronskian identity", 30.0, c1_wronskian),
        ("C2 Bessel bound certification", 60.0, c2_bessel_bounds),
        ("C3 selection rule", 120.0, c3_selection_rule),
        ("C4 oracle equivalence", 300.0, c4_oracle),
        ("C5 per-entry decay bound", 600.0, c5_lemma32),
        ("C6 exponential decay slope", 900.0, c6_decay),
        ("C7 end-to-end instability certificate", 900.0, c7_theorem22),
        ("C8 spectrum and gap", 10.0, c8_spectrum),
        ("C9 free DtN consistency", 5.0, c9_free_dtn),
        ("C10 harmonic extension norm", f64::INFINITY, c10_lemma31),
    ];
    let mut shared = Shared::default();
    let mut failures = 0;
    for (name, budget, check) in criteria {
        let t = Instant::now();
        let result = check(&mut shared);
        let secs = t.elapsed().as_secs_f64();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && secs <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        let budget_text = if budget.is_finite() {
            format!(" <= {budget:.0} s")
        } else {
            String::new()
        };
        println!(
            "[{}] {name}: {detail} ({secs:.1} s{budget_text})",
            if passed { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
