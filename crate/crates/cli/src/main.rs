use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dtn_core::dtn_engine::{solve_with_report, DtnEngine, EngineConfig};
use dtn_core::experiments::{
    cmd_sweep, cmd_theorem22, cmd_verify, pipeline_degree_max, ExperimentError, ExperimentParams,
    SweepAxis,
};
use dtn_core::potentials::{BumpSpec, PotentialVnm};
use dtn_core::special_functions::{
    bessel_j, bessel_j_prime, bessel_y, bessel_y_prime, BesselOrder,
};
use dtn_core::spectral_gap::{
    disk_eigenvalues, empirical_c1, find_gap_energy_with_c1, resolvent_budget, weyl_count,
};

#[derive(Parser, Debug)]
#[command(
    name = "dtn-instab",
    version,
    about = "Certified DtN instability experiments on the unit disk"
)]
struct Cli {
    /// TOML parameter file; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Working precision in bits (overrides the config).
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Include wall-clock timings (makes output nondeterministic).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an invariant suite.
    Verify {
        #[arg(value_parser = ["bessel", "basis", "radial", "potentials", "spectrum", "dtn", "all"])]
        suite: String,
    },
    /// Evaluate J, Y and their derivatives.
    Bessel {
        /// Order; must be a nonnegative integer or half-integer.
        #[arg(long)]
        order: f64,
        /// Real arguments.
        #[arg(long, num_args = 1.., required = true)]
        z: Vec<f64>,
    },
    /// Locate the gap energy in (rho^2, 2 rho^2) and report the spectrum below it.
    Gap {
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Assemble the truncated DtN-difference matrix for v_nm.
    Dtn {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        degree_max: Option<u32>,
        #[arg(long)]
        energy: Option<f64>,
        /// Use the conjugate potential.
        #[arg(long)]
        conjugate: bool,
    },
    /// Run the end-to-end certification pipeline.
    Theorem22,
    /// Sweep one parameter and emit one CSV row per value.
    Sweep {
        #[arg(long, value_parser = ["n", "E", "m"])]
        axis: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Params(_)
            | ExperimentError::Config(_)
            | ExperimentError::UnknownSuite(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load_params(cli: &Cli) -> Result<ExperimentParams, Failure> {
    let mut p = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            ExperimentParams::from_toml(&text)?
        }
        None => ExperimentParams::default(),
    };
    if let Some(bits) = cli.precision {
        p.precision = bits;
    }
    p.validate()?;
    Ok(p)
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(runtime)?;
    for r in rows {
        w.write_record(r).map_err(runtime)?;
    }
    String::from_utf8(w.into_inner().map_err(runtime)?).map_err(runtime)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Output text and whether the run passed.
fn run(cli: &Cli) -> Result<(String, bool), Failure> {
    let p = load_params(cli)?;
    match &cli.command {
        Command::Verify { suite } => {
            let reports = cmd_verify(suite)?;
            let passed = reports.iter().all(|r| r.passed);
            let text = match cli.format {
                Format::Json => pretty(&json!({ "passed": passed, "suites": reports })),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = reports
                        .iter()
                        .flat_map(|r| {
                            r.checks.iter().map(|c| {
                                vec![
                                    r.suite.clone(),
                                    c.name.clone(),
                                    format!("{:e}", c.value),
                                    format!("{:e}", c.threshold),
                                    c.passed.to_string(),
                                ]
                            })
                        })
                        .collect();
                    csv_table(&["suite", "check", "value", "threshold", "passed"], &rows)?
                }
            };
            Ok((text, passed))
        }
        Command::Bessel { order, z } => {
            let half = order * 2.0;
            if !(half >= 0.0 && half.fract() == 0.0 && half <= u32::MAX as f64) {
                return Err(Failure::Usage(format!(
                    "order {order} is not a nonnegative integer or half-integer"
                )));
            }
            let o = BesselOrder::from_half_units(half as u32);
            let mut rows = Vec::new();
            for &x in z {
                let j = bessel_j(o, x, p.precision).map_err(runtime)?;
                let dj = bessel_j_prime(o, x, p.precision).map_err(runtime)?;
                let y = bessel_y(o, x, p.precision).map_err(runtime)?;
                let dy = bessel_y_prime(o, x, p.precision).map_err(runtime)?;
                let w = &(&j * &dy) - &(&dj * &y);
                let reference = 2.0 / (std::f64::consts::PI * x);
                rows.push((x, j, dj, y, dy, (w.to_f64() - reference).abs() / reference));
            }
            let text = match cli.format {
                Format::Json => pretty(&Value::Array(
                    rows.iter()
                        .map(|(x, j, dj, y, dy, w)| {
                            json!({ "order": order, "z": x, "j": j, "j_prime": dj, "y": y, "y_prime": dy, "wronskian_rel_error": w })
                        })
                        .collect(),
                )),
                Format::Csv => csv_table(
                    &["order", "z", "j", "j_prime", "y", "y_prime", "wronskian_rel_error"],
                    &rows
                        .iter()
                        .map(|(x, j, dj, y, dy, w)| {
                            vec![
                                order.to_string(),
                                x.to_string(),
                                j.to_string(),
                                dj.to_string(),
                                y.to_string(),
                                dy.to_string(),
                                format!("{w:e}"),
                            ]
                        })
                        .collect::<Vec<_>>(),
                )?,
            };
            Ok((text, true))
        }
        Command::Gap { rho } => {
            let rho = rho.unwrap_or(p.rho);
            let c1 =
                empirical_c1(p.d, &[2.0, 5.0, 10.0, 15.0, 20.0]).map_err(ExperimentError::from)?;
            let gap = find_gap_energy_with_c1(rho, p.d, Some(c1)).map_err(ExperimentError::from)?;
            let table =
                disk_eigenvalues(p.d, 2.0 * rho * rho * 1.01).map_err(ExperimentError::from)?;
            let count = weyl_count(&table, rho).map_err(ExperimentError::from)?;
            let text = match cli.format {
                Format::Json => pretty(&json!({ "gap": gap, "c1": c1, "weyl_count": count })),
                Format::Csv => table.to_csv(),
            };
            Ok((text, gap.meets_lemma != Some(false)))
        }
        Command::Dtn {
            n,
            m,
            degree_max,
            energy,
            conjugate,
        } => {
            let m = m.unwrap_or(p.m);
            let energy = match energy.or(p.energy) {
                Some(e) => e,
                None => {
                    find_gap_energy_with_c1(p.rho, 2, None)
                        .map_err(ExperimentError::from)?
                        .energy
                }
            };
            let degree_max =
                degree_max.unwrap_or_else(|| pipeline_degree_max(*n, energy, p.degree_margin));
            let mut v = PotentialVnm::new(*n, m, 2, BumpSpec::default(), p.precision)
                .map_err(ExperimentError::from)?;
            if *conjugate {
                v = v.conj();
            }
            let cfg = EngineConfig {
                prec: p.precision,
                ..EngineConfig::default()
            };
            let engine = DtnEngine::new(energy, &BumpSpec::default(), degree_max, cfg)
                .map_err(ExperimentError::from)?;
            let table =
                disk_eigenvalues(2, 4.0 * (energy + 10.0)).map_err(ExperimentError::from)?;
            let budget =
                resolvent_budget(energy, &v.sup_norm(), &table).map_err(ExperimentError::from)?;
            let (matrix, report) =
                solve_with_report(&engine, &v, degree_max, &budget.q, p.residual_tolerance())
                    .map_err(ExperimentError::from)?;
            let passed = report.passed;
            let text = match cli.format {
                Format::Json => pretty(&json!({ "report": report, "entries": matrix.to_json() })),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = matrix
                        .iter()
                        .map(|((r, c), v)| {
                            vec![
                                r.frequency().unwrap_or_default().to_string(),
                                c.frequency().unwrap_or_default().to_string(),
                                format!("{:.12}", v.modulus.log2_mag()),
                                v.phase.to_string(),
                            ]
                        })
                        .collect();
                    csv_table(
                        &["row_frequency", "col_frequency", "modulus_log2", "phase"],
                        &rows,
                    )?
                }
            };
            Ok((text, passed))
        }
        Command::Theorem22 => {
            let report = cmd_theorem22(&p, cli.timings)?;
            let verdict = report.verdict;
            let text = match cli.format {
                Format::Json => pretty(&serde_json::to_value(&report).map_err(runtime)?),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = report
                        .rhs
                        .iter()
                        .map(|r| {
                            vec![
                                r.s.to_string(),
                                format!("{:.12}", report.lhs_log2),
                                format!("{:.12}", r.rhs_log2),
                                format!("{:.12}", r.margin_log2),
                                format!("{:.12}", report.delta_log2),
                                verdict.to_string(),
                            ]
                        })
                        .collect();
                    csv_table(
                        &[
                            "s",
                            "lhs_log2",
                            "rhs_log2",
                            "margin_log2",
                            "delta_log2",
                            "verdict",
                        ],
                        &rows,
                    )?
                }
            };
            Ok((text, verdict))
        }
        Command::Sweep {
            axis,
            from,
            to,
            step,
        } => {
            if !(*step > 0.0) || !from.is_finite() || !to.is_finite() {
                return Err(Failure::Usage(format!("invalid range {from}:{to}:{step}")));
            }
            let axis: SweepAxis = axis.parse()?;
            let count = if to < from {
                0
            } else {
                ((to - from) / step + 1e-9).floor() as usize + 1
            };
            let values: Vec<f64> = (0..count).map(|i| from + i as f64 * step).collect();
            let csv = cmd_sweep(axis, &values, &p)?;
            let failed = csv.lines().skip(1).any(|l| !l.ends_with(",ok"));
            let text = match cli.format {
                Format::Csv => csv,
                Format::Json => {
                    let mut reader = csv::Reader::from_reader(csv.as_bytes());
                    let header = reader.headers().map_err(runtime)?.clone();
                    let rows: Vec<Value> = reader
                        .records()
                        .map(|r| {
                            r.map(|r| {
                                Value::Object(
                                    header
                                        .iter()
                                        .zip(r.iter())
                                        .map(|(k, v)| (k.into(), v.into()))
                                        .collect(),
                                )
                            })
                        })
                        .collect::<Result<_, _>>()
                        .map_err(runtime)?;
                    pretty(&Value::Array(rows))
                }
            };
            Ok((text, !failed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((text, passed)) => {
            if let Some(path) = &cli.out {
                if let Err(e) = fs::write(path, &text) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            } else {
                print!("{text}");
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
