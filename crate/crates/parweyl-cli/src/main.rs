//! Command-line verification harness.
//!
//! `verify` runs the configured check suite over a metric family and writes
//! a canonical JSON report; `family` emits ready-to-run template configs;
//! `pullback` runs only the exponential-map pullback grid. Exit codes:
//! 0 every enabled check passed, 1 at least one check failed, 2 the config
//! or I/O was invalid.

use clap::{Parser, Subcommand};
use parweyl::verify::{emit_report, run_suite_timed, Report, VerificationConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "parweyl")]
#[command(about = "curvature verification for metrics with parallel Weyl tensor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the verification suite described by a JSON config.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's sample count.
        #[arg(long)]
        samples: Option<usize>,
        /// Override the config's report path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Emit a template config with fixture values for a family.
    Family {
        /// Which family: d1 or d2.
        which: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run only the exponential-map pullback grid (expensive).
    Pullback {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<VerificationConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    VerificationConfig::from_json(&text).map_err(|e| e.to_string())
}

fn print_summary(report: &Report, timings: &[f64]) {
    println!(
        "{:<26} {:<6} {:>13} {:>11} {:>9}",
        "check", "status", "max residual", "tolerance", "time"
    );
    for (c, t) in report.checks.iter().zip(timings) {
        let residual = match c.max_residual {
            Some(r) => format!("{r:.3e}"),
            None => "-".to_string(),
        };
        println!(
            "{:<26} {:<6} {:>13} {:>11.1e} {:>8.2}s",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            residual,
            c.tolerance,
            t
        );
        if let Some(v) = &c.verdict {
            println!("    verdict: {v}");
        }
        if let Some(e) = &c.error {
            println!("    error: {e}");
        }
    }
    println!("overall: {}", if report.overall_pass { "PASS" } else { "FAIL" });
}

fn run_verify(
    config_path: &PathBuf,
    seed: Option<u64>,
    samples: Option<usize>,
    report_path: Option<PathBuf>,
    only_pullback: bool,
) -> ExitCode {
    let mut config = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(k) = samples {
        config.samples = k;
    }
    if let Some(p) = report_path {
        config.report_path = Some(p.display().to_string());
    }
    if only_pullback {
        config.checks = Some(vec!["pullback".to_string()]);
    }
    let started = std::time::Instant::now();
    let (report, timings) = match run_suite_timed(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    print_summary(&report, &timings);
    println!("total: {:.2}s", started.elapsed().as_secs_f64());
    if let Some(path) = &config.report_path {
        let path = PathBuf::from(path);
        if let Err(e) = emit_report(&report, &path) {
            eprintln!("report error: {e}");
            return ExitCode::from(2);
        }
        println!("report written to {}", path.display());
    }
    if report.overall_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

const D1_TEMPLATE: &str = r#"{
  "family": "d1",
  "params": {
    "n": 4,
    "gram": [1.0, 0.0, 0.0, 1.0],
    "f": [{"breakpoints": [-2.0, 2.0], "coefficients": [0.0, 1.0]}],
    "A": [1.0, 0.0, 0.0, -1.0],
    "domain": [[-2.0, 2.0], [-6.0, 6.0], [-3.0, 3.0], [-3.0, 3.0]]
  },
  "samples": 100,
  "box": [[-0.9, 0.9], [-0.9, 0.9], [-0.9, 0.9], [-0.9, 0.9]],
  "seed": 7,
  "tolerances": {},
  "report_path": "d1-report.json",
  "pullback": {
    "base_point": [0.0, 0.0, 0.8, 0.5],
    "t_values": [-0.3, 0.0, 0.3],
    "s_values": [-0.3, 0.0, 0.3],
    "psi_dir": [1.0, 0.0],
    "psi_values": [-0.3, 0.0, 0.3],
    "fd_step": 1e-4,
    "ode_tol": 1e-8
  }
}
"#;

const D2_TEMPLATE: &str = r#"{
  "family": "d2",
  "params": {
    "n": 4,
    "epsilon": 1.0,
    "surface": {
      "gamma_coeffs": {},
      "alpha": [{"powers": [0, 0], "coeff": 1.0}],
      "T": {
        "11": [{"powers": [2, 0], "coeff": 0.5}]
      }
    },
    "gramV": [],
    "domain": [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]]
  },
  "samples": 100,
  "box": [[-0.9, 0.9], [-0.9, 0.9], [-0.9, 0.9], [-0.9, 0.9]],
  "seed": 7,
  "tolerances": {},
  "report_path": "d2-report.json"
}
"#;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify { config, seed, samples, report } => {
            run_verify(&config, seed, samples, report, false)
        }
        Command::Pullback { config } => run_verify(&config, None, None, None, true),
        Command::Family { which, out } => {
            let template = match which.as_str() {
                "d1" => D1_TEMPLATE,
                "d2" => D2_TEMPLATE,
                other => {
                    eprintln!("unknown family `{other}` (expected d1 or d2)");
                    return ExitCode::from(2);
                }
            };
            match std::fs::write(&out, template) {
                Ok(()) => {
                    println!("template written to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("cannot write {}: {e}", out.display());
                    ExitCode::from(2)
                }
            }
        }
    }
}
