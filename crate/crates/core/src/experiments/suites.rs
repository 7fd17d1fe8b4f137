use rug::Float;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::dtn_engine::{
    dtn_assemble, fd_chain_entries, verify_lemma32, DtnEngine, EngineConfig, EngineError,
    FD_ORACLE_CELLS,
};
use crate::potentials::{cm_norm_estimate, v_nm_eval, BumpSpec, PotentialVnm};
use crate::radial::{free_dtn_eigenvalue, GreenKernel, PanelQuadrature};
use crate::special_functions::{
    bessel_j, certify_bessel_bounds, j_pair, wronskian_reference, y_pair, BesselOrder,
};
use crate::spectral_gap::{disk_eigenvalues, find_gap_energy, resolvent_budget, weyl_count};
use crate::sphere_basis::{dim_harmonics, op_norm_linf_bound, sobolev_norm, CoefVector, ModeIndex};

pub const SUITES: [&str; 7] = [
    "bessel",
    "basis",
    "radial",
    "potentials",
    "spectrum",
    "dtn",
    "all",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

struct Suite {
    name: &'static str,
    checks: Vec<CheckResult>,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: Vec::new(),
        }
    }

    /// Records `value <= threshold`.
    fn at_most(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.checks.push(CheckResult {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        });
    }

    fn holds(&mut self, name: impl Into<String>, ok: bool) {
        self.at_most(name, if ok { 0.0 } else { 1.0 }, 0.0);
    }

    fn fallible(&mut self, name: &str, r: Result<(), String>) {
        if let Err(e) = r {
            self.checks.push(CheckResult {
                name: format!("{name}: {e}"),
                value: f64::NAN,
                threshold: 0.0,
                passed: false,
            });
        }
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            suite: self.name.into(),
            passed: !self.checks.is_empty() && self.checks.iter().all(|c| c.passed),
            checks: self.checks,
        }
    }
}

fn bessel() -> SuiteReport {
    let mut s = Suite::new("bessel");
    let r = (|| -> Result<(), String> {
        let prec = 256;
        let mut worst = 0.0f64;
        for half in [0u32, 1, 2, 11, 60, 120] {
            for z in [0.1, 1.0, 4.5, 10.0] {
                let order = BesselOrder::from_half_units(half);
                let x = Float::with_val(prec, z);
                let (j, dj) = j_pair(order, &x, prec).map_err(|e| e.to_string())?;
                let (y, dy) = y_pair(order, &x, prec).map_err(|e| e.to_string())?;
                let w = Float::with_val(prec, &j * &dy) - Float::with_val(prec, &dj * &y);
                let reference = wronskian_reference(&x, prec);
                let rel = ((w - &reference) / reference).abs().to_f64();
                worst = worst.max(rel);
            }
        }
        s.at_most("wronskian max relative error", worst, 1e-25);
        for (rho, n) in [(1.0, 40u32), (2.0, 90)] {
            let rep = certify_bessel_bounds(rho, 2, n, 128).map_err(|e| e.to_string())?;
            s.holds(format!("bessel bounds rho={rho} n={n}"), rep.passed);
        }
        Ok(())
    })();
    s.fallible("bessel", r);
    s.finish()
}

fn basis() -> SuiteReport {
    let mut s = Suite::new("basis");
    s.holds(
        "dim d=2",
        (1..50).all(|j| dim_harmonics(2, j) == 2) && dim_harmonics(2, 0) == 1,
    );
    s.holds(
        "dim d=3",
        (0..50).all(|j| dim_harmonics(3, j) == 2 * j as u128 + 1),
    );
    let mut c = CoefVector::new(2);
    c.insert(
        ModeIndex::from_frequency(3),
        num_complex::Complex64::new(1.0, 0.0),
    );
    s.at_most(
        "sobolev norm of a single mode",
        (sobolev_norm(&c, 1.0) - 4.0).abs(),
        1e-14,
    );
    let round_trip = (-20i64..=20).all(|k| ModeIndex::from_frequency(k).frequency() == Some(k));
    s.holds("frequency round trip", round_trip);
    s.finish()
}

fn radial() -> SuiteReport {
    let mut s = Suite::new("radial");
    let r = (|| -> Result<(), String> {
        let mut worst = 0.0f64;
        for j in 0..=20u32 {
            let lam = free_dtn_eigenvalue(2, j, 1e-4, 128).map_err(|e| e.to_string())?;
            worst = worst.max((lam - j as f64).abs());
        }
        s.at_most("free DtN near zero energy minus j", worst, 0.01);
        let lam = free_dtn_eigenvalue(2, 0, 1.0, 128).map_err(|e| e.to_string())?;
        let j0 = bessel_j(BesselOrder::integer(0), 1.0, 128)
            .map_err(|e| e.to_string())?
            .to_f64();
        let j1 = bessel_j(BesselOrder::integer(1), 1.0, 128)
            .map_err(|e| e.to_string())?
            .to_f64();
        s.at_most("free DtN at E=1, j=0", (lam + j1 / j0).abs(), 1e-10);
        let quad = PanelQuadrature::new(0.0, 1.0, 16, 16, 192);
        let kernel = GreenKernel::new(&quad, 2, 3, 2.0, 192).map_err(|e| e.to_string())?;
        let g: Vec<Float> = quad
            .nodes()
            .iter()
            .map(|r| Float::with_val(192, r * (1 - r.clone())))
            .collect();
        let sol = kernel.apply(&quad, &g);
        let mid = quad.len() / 2;
        let res = kernel
            .residual_at(&sol, &quad, mid, &g[mid])
            .map_err(|e| e.to_string())?;
        s.at_most("green residual", res.to_f64(), 1e-25);
        Ok(())
    })();
    s.fallible("radial", r);
    s.finish()
}

fn potentials() -> SuiteReport {
    let mut s = Suite::new("potentials");
    let r = (|| -> Result<(), String> {
        let v = PotentialVnm::new(7, 3, 2, BumpSpec::default(), 128).map_err(|e| e.to_string())?;
        let peak = v_nm_eval(&v, &[0.29, 0.0]).norm();
        s.at_most(
            "sup norm at the bump centre minus n^-m",
            (peak - 7f64.powi(-3)).abs(),
            1e-15,
        );
        let outside = v_nm_eval(&v, &[0.5, 0.1]).norm();
        s.holds("vanishes off the support", outside == 0.0);
        let cm = cm_norm_estimate(&v, 2).map_err(|e| e.to_string())?;
        s.holds("C^2 estimate is finite", cm.is_finite() && cm > 0.0);
        Ok(())
    })();
    s.fallible("potentials", r);
    s.finish()
}

fn spectrum() -> SuiteReport {
    let mut s = Suite::new("spectrum");
    let r = (|| -> Result<(), String> {
        let t = disk_eigenvalues(2, 20.0).map_err(|e| e.to_string())?;
        let distinct = t.distinct();
        s.at_most(
            "lambda_1",
            (distinct[0].0 / 5.783185962946784 - 1.0).abs(),
            1e-9,
        );
        s.at_most(
            "lambda_2",
            (distinct[1].0 / 14.681970642123893 - 1.0).abs(),
            1e-9,
        );
        s.holds("lambda_2 multiplicity 2", distinct[1].1 == 2);
        let t = disk_eigenvalues(2, 40.0).map_err(|e| e.to_string())?;
        s.holds(
            "weyl_count(3) = 1",
            weyl_count(&t, 3.0).map_err(|e| e.to_string())? == 1,
        );
        s.holds(
            "weyl_count(4) = 3",
            weyl_count(&t, 4.0).map_err(|e| e.to_string())? == 3,
        );
        let g = find_gap_energy(2.0, 2).map_err(|e| e.to_string())?;
        s.holds("gap energy in (4, 8)", g.energy > 4.0 && g.energy < 8.0);
        let t = disk_eigenvalues(2, 16.0).map_err(|e| e.to_string())?;
        let free = t
            .entries
            .iter()
            .all(|e| (e.lambda - g.energy).abs() >= g.half_width * (1.0 - 1e-12));
        s.holds("gap interval is eigenvalue free", free);
        Ok(())
    })();
    s.fallible("spectrum", r);
    s.finish()
}

fn dtn() -> SuiteReport {
    let mut s = Suite::new("dtn");
    let r = (|| -> Result<(), EngineError> {
        let energy = 3.375;
        let cfg = EngineConfig {
            panels: 32,
            per_panel: 16,
            prec: 192,
        };
        let engine = DtnEngine::new(energy, &BumpSpec::default(), 30, cfg)?;
        let v = PotentialVnm::new(12, 3, 2, BumpSpec::default(), 192)?;
        let asm = dtn_assemble(&engine, &v, 30)?;
        let selection = asm.matrix.iter().all(|((r, c), _)| {
            let diff = r.frequency().unwrap_or(0) - c.frequency().unwrap_or(0);
            diff > 0 && diff % 12 == 0 && r.j.max(c.j) > 5
        });
        s.holds("selection rule", selection && !asm.matrix.is_empty());
        let fd = fd_chain_entries(energy, &v, 30, FD_ORACLE_CELLS)?;
        let mut worst = 0.0f64;
        for (&(row, col), &want) in &fd {
            let got = asm
                .matrix
                .get(
                    ModeIndex::from_frequency(row),
                    ModeIndex::from_frequency(col),
                )
                .map_or(0.0, |e| e.to_complex64().re);
            worst = worst.max((got - want).abs() / want.abs());
        }
        s.at_most("finite-volume oracle relative deviation", worst, 1e-4);
        let table = disk_eigenvalues(2, 60.0)?;
        let b = resolvent_budget(energy, &v.sup_norm(), &table)?;
        let l32 = verify_lemma32(&asm.matrix, &b.q, &v.sup_norm(), energy);
        s.at_most(
            "per-entry decay worst log2 ratio",
            l32.worst_ratio_log2,
            0.0,
        );
        s.holds(
            "entry sum is finite",
            op_norm_linf_bound(&asm.matrix)?.to_f64().is_finite(),
        );
        Ok(())
    })();
    s.fallible("dtn", r.map_err(|e| e.to_string()));
    s.finish()
}

/// Runs one named suite, or every suite for `all`.
pub fn cmd_verify(suite: &str) -> Result<Vec<SuiteReport>, ExperimentError> {
    let run = |name: &str| -> SuiteReport {
        match name {
            "bessel" => bessel(),
            "basis" => basis(),
            "radial" => radial(),
            "potentials" => potentials(),
            "spectrum" => spectrum(),
            _ => dtn(),
        }
    };
    match suite {
        "all" => Ok(SUITES[..6].iter().map(|n| run(n)).collect()),
        name if SUITES.contains(&name) => Ok(vec![run(name)]),
        other => Err(ExperimentError::UnknownSuite(other.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_suites_pass() {
        for name in ["basis", "spectrum", "potentials", "radial"] {
            let r = cmd_verify(name).unwrap();
            assert!(r[0].passed, "{:#?}", r[0]);
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(matches!(
            cmd_verify("nope"),
            Err(ExperimentError::UnknownSuite(_))
        ));
    }
}
