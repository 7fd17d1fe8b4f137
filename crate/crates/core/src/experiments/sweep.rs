use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pipeline::{default_n, pipeline_degree_max};
use super::{instability_rhs, stability_rhs, ExperimentError, ExperimentParams};
use crate::dtn_engine::{dtn_assemble, tail_bound, DtnEngine, EngineConfig};
use crate::potentials::{BumpSpec, PotentialVnm};
use crate::spectral_gap::{disk_eigenvalues, find_gap_energy, resolvent_budget};
use crate::sphere_basis::{op_norm_linf_bound, op_norm_sobolev_bound};
use crate::xreal::XReal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    N,
    E,
    M,
}

impl FromStr for SweepAxis {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n" => Ok(Self::N),
            "E" | "e" => Ok(Self::E),
            "m" => Ok(Self::M),
            other => Err(ExperimentError::Params(format!(
                "unknown sweep axis `{other}` (expected n, E or m)"
            ))),
        }
    }
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            Self::N => "n",
            Self::E => "E",
            Self::M => "m",
        }
    }
}

pub const SWEEP_HEADER: [&str; 18] = [
    "axis",
    "value",
    "energy",
    "n",
    "m",
    "degree_max",
    "entries",
    "q",
    "entry_sum_log2",
    "chain_tail_log2",
    "matrix_tail_log2",
    "delta_log2",
    "sobolev_bound_log2",
    "stability_rhs_log2",
    "instability_rhs_min_log2",
    "instability_rhs_max_log2",
    "lhs_log2",
    "status",
];

struct Point {
    energy: f64,
    n: u32,
    m: u32,
}

fn row(
    p: &ExperimentParams,
    engine: &DtnEngine,
    pt: &Point,
) -> Result<Vec<String>, ExperimentError> {
    let prec = p.precision;
    let v = PotentialVnm::new(pt.n, pt.m, 2, BumpSpec::default(), prec)?;
    let degree_max = pipeline_degree_max(pt.n, pt.energy, p.degree_margin);
    let table = disk_eigenvalues(2, 4.0 * (pt.energy + 10.0))?;
    let budget = resolvent_budget(pt.energy, &v.sup_norm(), &table)?;
    let asm = dtn_assemble(engine, &v, degree_max)?;
    let tail = tail_bound(
        &asm.matrix,
        degree_max,
        pt.n,
        &budget.q,
        &v.sup_norm(),
        pt.energy,
        2,
    )?;
    let sum = op_norm_linf_bound(&asm.matrix).map_err(crate::dtn_engine::EngineError::from)?;
    let delta = &(&sum + &asm.chain_tail) + &tail;
    let sobolev = op_norm_sobolev_bound(&asm.matrix, p.sigma, 2);
    // The stability modulus takes alpha = 0 and beta = s1 = (m - d)/d at the same delta.
    let p21 = ExperimentParams {
        m: pt.m,
        alpha: 0.0,
        beta: (pt.m as f64 - 2.0) / 2.0,
        ..p.clone()
    };
    let stab = stability_rhs(&delta, pt.energy, &p21)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &s in &p.s_grid {
        let r = instability_rhs(&delta, pt.energy, s, p)?.log2_mag();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(vec![
        format!("{}", pt.energy),
        pt.n.to_string(),
        pt.m.to_string(),
        degree_max.to_string(),
        asm.matrix.len().to_string(),
        format!("{:.17e}", budget.q.to_f64()),
        fmt_log2(&sum),
        fmt_log2(&asm.chain_tail),
        fmt_log2(&tail),
        fmt_log2(&delta),
        fmt_log2(&sobolev),
        fmt_log2(&stab),
        format!("{lo:.12}"),
        format!("{hi:.12}"),
        fmt_log2(&v.sup_norm()),
        "ok".into(),
    ])
}

fn fmt_log2(x: &XReal) -> String {
    if x.is_zero() {
        "-inf".into()
    } else {
        format!("{:.12}", x.log2_mag())
    }
}

/// One CSV row per value of `axis`; rows that fail carry the error in `status`.
pub fn cmd_sweep(
    axis: SweepAxis,
    values: &[f64],
    p: &ExperimentParams,
) -> Result<String, ExperimentError> {
    p.validate()?;
    if p.d != 2 {
        return Err(ExperimentError::Params(format!(
            "sweeps run in d = 2, got d = {}",
            p.d
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    if values.is_empty() {
        return finish(w);
    }
    let base_energy = match p.energy {
        Some(e) => e,
        None => find_gap_energy(p.rho, 2)?.energy,
    };
    let base_n = p.n.unwrap_or_else(|| default_n(base_energy));
    let points: Vec<Result<Point, ExperimentError>> = values
        .iter()
        .map(|&x| {
            let as_int = |x: f64| -> Result<u32, ExperimentError> {
                if x >= 1.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
                    Ok(x as u32)
                } else {
                    Err(ExperimentError::Params(format!(
                        "{} must be a positive integer, got {x}",
                        axis.name()
                    )))
                }
            };
            Ok(match axis {
                SweepAxis::N => Point {
                    energy: base_energy,
                    n: as_int(x)?,
                    m: p.m,
                },
                SweepAxis::E => Point {
                    energy: x,
                    n: base_n,
                    m: p.m,
                },
                SweepAxis::M => Point {
                    energy: base_energy,
                    n: base_n,
                    m: as_int(x)?,
                },
            })
        })
        .collect();
    let cfg = EngineConfig {
        prec: p.precision,
        ..EngineConfig::default()
    };
    // Rows at a shared energy reuse one engine sized for the largest degree.
    let shared = if axis == SweepAxis::E {
        None
    } else {
        let top = points
            .iter()
            .flatten()
            .map(|pt| pipeline_degree_max(pt.n, pt.energy, p.degree_margin))
            .max();
        match top {
            Some(top) => Some(DtnEngine::new(base_energy, &BumpSpec::default(), top, cfg)?),
            None => None,
        }
    };
    for (x, pt) in values.iter().zip(points) {
        let outcome = pt.and_then(|pt| match &shared {
            Some(engine) => row(p, engine, &pt),
            None => {
                let top = pipeline_degree_max(pt.n, pt.energy, p.degree_margin);
                let engine = DtnEngine::new(pt.energy, &BumpSpec::default(), top, cfg)?;
                row(p, &engine, &pt)
            }
        });
        let mut record = vec![axis.name().to_string(), format!("{x}")];
        match outcome {
            Ok(cells) => record.extend(cells),
            Err(e) => {
                record.extend(std::iter::repeat_n(String::new(), SWEEP_HEADER.len() - 3));
                record.push(format!("failed: {e}"));
            }
        }
        w.write_record(&record)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ExperimentError> {
    let bytes = w
        .into_inner()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
