use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use curvest::comparison::{c_b, c_hat_b, lambda_sup, phi_b, sturm_profile, CurvatureBound};
use curvest::harness::{bundled, emit_report, run_scenario_in, ReportFormat, ScenarioConfig, BUNDLED};
use curvest::Error;
use serde_json::json;

/// Sturm margins below this count as a failure.
const STURM_TOL: f64 = 1e-8;
const STURM_POINTS: usize = 1000;
const LAMBDA_T_MAX: f64 = 50.0;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "curvest", version, about = "Check higher order mean curvature estimates on sampled hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or bundled scenario and report every check.
    Verify {
        /// Path to a scenario JSON file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        /// Write per-sample data as CSV.
        #[arg(long, value_name = "CSV")]
        emit_samples: Option<PathBuf>,
        /// Write the report as JSON (CSV if the path ends in .csv).
        #[arg(long, value_name = "JSON")]
        emit_report: Option<PathBuf>,
        /// Override the grid resolution per axis.
        #[arg(long)]
        resolution: Option<usize>,
        /// Override both the equality and the inequality tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Sturm comparison of g'/g against ψ'/ψ on (0, T].
    Sturm {
        /// Curvature bound: const(c), affine(a,b) or sqrt_growth(a).
        #[arg(long = "G", value_name = "SPEC")]
        g: String,
        #[arg(long = "T", value_name = "T")]
        t: f64,
        /// Write t, g, g', ψ and the margin as CSV.
        #[arg(long, value_name = "CSV")]
        csv: Option<PathBuf>,
    },
    /// Supremum Λ over t >= 2 for a curvature bound.
    Lambda {
        #[arg(long = "G", value_name = "SPEC")]
        g: String,
    },
    /// Comparison functions C_b, Ĉ_b and φ_b at one point.
    Comparison {
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long)]
        t: f64,
    },
    /// Print the names of the bundled scenarios.
    ListScenarios,
}

/// Failure to run at all, as opposed to a check that ran and failed.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(_) | Error::Precondition(_) | Error::Domain(_) => Failure::Usage(e.into()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Verify { scenario, emit_samples, emit_report: report_path, resolution, tol } => {
            verify(&scenario, emit_samples, report_path, resolution, tol)
        }
        Command::Sturm { g, t, csv } => sturm(&g, t, csv.as_deref()),
        Command::Lambda { g } => {
            let bound = parse_bound(&g)?;
            let est = lambda_sup(&bound, LAMBDA_T_MAX)?;
            print_json(&json!({
                "G": bound.to_string(),
                "lambda": est.lambda,
                "argmax": est.argmax,
                "tail_limit": est.tail_limit,
            }));
            Ok(0)
        }
        Command::Comparison { b, t } => {
            print_json(&json!({
                "b": b,
                "t": t,
                "c_b": c_b(b, t)?,
                "c_hat_b": c_hat_b(b, t)?,
                "phi_b": phi_b(b, t),
            }));
            Ok(0)
        }
        Command::ListScenarios => {
            for (name, _) in BUNDLED {
                println!("{name}");
            }
            Ok(0)
        }
    }
}

fn verify(
    scenario: &str,
    samples_path: Option<PathBuf>,
    report_path: Option<PathBuf>,
    resolution: Option<usize>,
    tol: Option<f64>,
) -> Result<u8, Failure> {
    let path = Path::new(scenario);
    let (text, base_dir) = if path.is_file() {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::Usage)?;
        (text, path.parent().map(Path::to_path_buf))
    } else if let Some(text) = bundled(scenario) {
        (text.to_string(), None)
    } else {
        return Err(Failure::Usage(anyhow::anyhow!(
            "no scenario file or bundled scenario named {scenario:?} (see list-scenarios)"
        )));
    };
    let mut config = ScenarioConfig::from_json(&text)?;
    if let Some(r) = resolution {
        config.resolution = r;
    }
    if let Some(x) = tol {
        if !(x > 0.0) {
            return Err(Failure::Usage(anyhow::anyhow!("--tol must be positive, got {x}")));
        }
        config.tolerances = Some(curvest::harness::Tolerances { equality: x, inequality: x });
    }
    config.validate()?;

    let run = run_scenario_in(&config, base_dir.as_deref())?;
    let report_path = report_path.or_else(|| config.outputs.report.as_ref().map(PathBuf::from));
    let samples_path = samples_path.or_else(|| config.outputs.samples.as_ref().map(PathBuf::from));
    if let Some(p) = &report_path {
        let format = match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        };
        emit_report(&run.report, p, format)?;
    }
    if let Some(p) = &samples_path {
        run.samples.write(p)?;
    }
    if report_path.is_none() {
        println!("{}", run.report.to_json());
    } else {
        for c in &run.report.checks {
            let status = serde_json::to_value(c.status).expect("status serializes");
            println!("{:<28} {}", c.id, status.as_str().unwrap_or_default());
        }
    }
    Ok(run.report.exit_code() as u8)
}

fn sturm(spec: &str, t_end: f64, csv: Option<&Path>) -> Result<u8, Failure> {
    let bound = parse_bound(spec)?;
    let prof = sturm_profile(&bound, t_end, STURM_POINTS)?;
    if let Some(p) = csv {
        let mut out = String::from("t,g,g_prime,psi,margin\n");
        for i in 0..prof.t.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                prof.t[i], prof.g[i], prof.g_prime[i], prof.psi[i], prof.margin[i]
            ));
        }
        fs::write(p, out)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(Failure::Runtime)?;
    }
    let pass = prof.min_margin >= -STURM_TOL;
    print_json(&json!({
        "G": bound.to_string(),
        "T": t_end,
        "min_margin": prof.min_margin,
        "argmin": prof.argmin,
        "status": if pass { "pass" } else { "fail" },
    }));
    Ok(if pass { 0 } else { EXIT_FAIL })
}

fn parse_bound(spec: &str) -> Result<CurvatureBound, Failure> {
    spec.parse::<CurvatureBound>().map_err(Failure::from)
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
}
