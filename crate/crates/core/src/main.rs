use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use eigenbvp::hypotheses::{build_report, ReportOptions};
use eigenbvp::kernel::{green_d2k, green_dk, green_k, KernelPoint};
use eigenbvp::operator::OperatorContext;
use eigenbvp::problem::{parse_problem, SignMode};
use eigenbvp::quadrature::gauss_rule;
use eigenbvp::report::{
    run_example, to_tagged_json, BranchTableRecord, EigenpairRecord, sample_csv, SCHEMA_VERSION,
};
use eigenbvp::solver::{solve, sweep_rho, Sign, SolveOptions};
use eigenbvp::verify::{certify, Thresholds, Verdict};
use eigenbvp::{Error, Result};

const EXIT_VALIDATION: i32 = 1;
const EXIT_SOLVER: i32 = 2;
const EXIT_CERTIFICATION: i32 = 3;

#[derive(Parser)]
#[command(
    name = "eigenbvp",
    version,
    about = "Eigenpairs of a third-order BVP with functional boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Quadrature order; falls back to EIGENBVP_QUAD_ORDER, then 40.
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    /// Uniform grid size for norm search and certification.
    #[arg(long, global = true, default_value_t = 1001)]
    fine_grid: usize,
    /// Seed for the Monte-Carlo bound estimators.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for emitted artifacts (JSON / CSV).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit a CSV table of the kernel and its derivatives on an NxN grid.
    KernelTable {
        #[arg(long)]
        grid: usize,
    },
    /// Evaluate the applicability hypotheses at a given radius.
    CheckHypotheses {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        rho: f64,
        /// Override the sign mode of the problem file (1a or 1b).
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Declared per-radius lower bound for H1 (overrides estimation).
        #[arg(long, allow_hyphen_values = true)]
        eta1: Option<f64>,
        /// Declared per-radius lower bound for H2 (overrides estimation).
        #[arg(long, allow_hyphen_values = true)]
        eta2: Option<f64>,
    },
    /// Compute one eigenpair on the sphere of radius rho.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value = "+", allow_hyphen_values = true)]
        sign: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// Skip the Newton polish stage.
        #[arg(long)]
        no_polish: bool,
        /// Also write an N-point CSV of (t, u, u', u'').
        #[arg(long)]
        emit_samples: Option<usize>,
    },
    /// Solve both signs over a comma-separated increasing list of radii.
    SweepRho {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        rho_list: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
    /// Certify a stored eigenpair against the differential equation.
    Verify {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        eigenpair: PathBuf,
    },
    /// Run the bundled example end to end at a given radius.
    Example {
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
    },
}

fn resolved_quad_order(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("EIGENBVP_QUAD_ORDER") {
        Ok(text) => text.trim().parse::<usize>().map_err(|_| {
            Error::Precondition(format!(
                "EIGENBVP_QUAD_ORDER is not a positive integer: `{text}`"
            ))
        }),
        Err(_) => Ok(40),
    }
}

fn load_context(problem: &PathBuf, order: usize, fine_grid: usize) -> Result<OperatorContext> {
    let text = std::fs::read_to_string(problem)?;
    let spec = parse_problem(&text)?;
    OperatorContext::new(spec, Arc::new(gauss_rule(order)?), fine_grid)
}

fn write_artifact(dir: &Option<PathBuf>, name: &str, contents: &str) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn execute(cli: Cli) -> Result<i32> {
    let order = resolved_quad_order(cli.quad_order)?;
    match cli.cmd {
        Cmd::KernelTable { grid } => {
            if grid < 2 {
                return Err(Error::Precondition(format!(
                    "kernel table grid {grid} must be at least 2"
                )));
            }
            let mut out = String::from("t,s,k,dk,d2k\n");
            for i in 0..grid {
                let t = i as f64 / (grid - 1) as f64;
                for j in 0..grid {
                    let s = j as f64 / (grid - 1) as f64;
                    let p = KernelPoint::new(t, s)?;
                    // adding 0.0 normalizes IEEE negative zeros for output
                    let d2 = match green_d2k(p) {
                        Ok(v) => format!("{:.12e}", v + 0.0),
                        Err(_) => "nan".to_string(),
                    };
                    out.push_str(&format!(
                        "{t:.12e},{s:.12e},{:.12e},{:.12e},{d2}\n",
                        green_k(p) + 0.0,
                        green_dk(p) + 0.0,
                    ));
                }
            }
            print!("{out}");
            write_artifact(&cli.output_dir, "kernel-table.csv", &out)?;
            Ok(0)
        }
        Cmd::CheckHypotheses {
            problem,
            rho,
            mode,
            samples,
            eta1,
            eta2,
        } => {
            let text = std::fs::read_to_string(&problem)?;
            let mut spec = parse_problem(&text)?;
            if let Some(mode) = mode {
                spec.sign_mode = match mode.as_str() {
                    "1a" => SignMode::OneA,
                    "1b" => SignMode::OneB,
                    other => {
                        return Err(Error::Precondition(format!(
                            "mode must be 1a or 1b, got `{other}`"
                        )))
                    }
                };
            }
            let opts = ReportOptions {
                eta1,
                eta2,
                samples,
                seed: cli.seed,
                ..ReportOptions::new(Arc::new(gauss_rule(order)?))
            };
            let report = build_report(&spec, rho, &opts)?;
            let json = to_tagged_json(&report)?;
            println!("{}", serde_json::to_string_pretty(&json)?);
            write_artifact(
                &cli.output_dir,
                "hypotheses.json",
                &serde_json::to_string_pretty(&json)?,
            )?;
            Ok(0)
        }
        Cmd::Solve {
            problem,
            rho,
            sign,
            tol,
            max_iter,
            no_polish,
            emit_samples,
        } => {
            let sign: Sign = sign.parse()?;
            let ctx = load_context(&problem, order, cli.fine_grid)?;
            let opts = SolveOptions {
                tol,
                max_iter,
                polish: !no_polish,
                ..SolveOptions::default()
            };
            let pair = solve(&ctx, rho, sign, &opts)?;
            let record = EigenpairRecord::from_pair(&pair);
            let text = serde_json::to_string_pretty(&record)?;
            println!("{text}");
            write_artifact(&cli.output_dir, "eigenpair.json", &text)?;
            if let Some(n) = emit_samples {
                let csv = sample_csv(&pair.u, n)?;
                match &cli.output_dir {
                    Some(_) => write_artifact(&cli.output_dir, "samples.csv", &csv)?,
                    None => std::fs::write("samples.csv", &csv)?,
                }
            }
            Ok(0)
        }
        Cmd::SweepRho {
            problem,
            rho_list,
            tol,
            max_iter,
        } => {
            let rhos: Vec<f64> = rho_list
                .split(',')
                .map(|part| {
                    part.trim().parse::<f64>().map_err(|_| {
                        Error::Precondition(format!("bad rho value `{}`", part.trim()))
                    })
                })
                .collect::<Result<_>>()?;
            let ctx = load_context(&problem, order, cli.fine_grid)?;
            let table = sweep_rho(&ctx, &rhos, tol, max_iter)?;
            let all_failed = table.entries.is_empty() && !table.failures.is_empty();
            let record = BranchTableRecord::from_table(&table);
            let text = serde_json::to_string_pretty(&record)?;
            println!("{text}");
            write_artifact(&cli.output_dir, "branch-table.json", &text)?;
            Ok(if all_failed { EXIT_SOLVER } else { 0 })
        }
        Cmd::Verify { problem, eigenpair } => {
            let ctx = load_context(&problem, order, cli.fine_grid)?;
            let text = std::fs::read_to_string(&eigenpair)?;
            let record: EigenpairRecord = serde_json::from_str(&text)?;
            let pair = record.to_pair()?;
            let cert = certify(&ctx, &pair, cli.fine_grid.max(201), Thresholds::default())?;
            let json = to_tagged_json(&cert)?;
            let text = serde_json::to_string_pretty(&json)?;
            println!("{text}");
            write_artifact(&cli.output_dir, "certificate.json", &text)?;
            Ok(if cert.verdict == Verdict::Pass {
                0
            } else {
                EXIT_CERTIFICATION
            })
        }
        Cmd::Example { rho } => {
            let run = run_example(rho, cli.seed, order, cli.fine_grid)?;
            let mut out = run.json.clone();
            if let Some(map) = out.as_object_mut() {
                map.insert("timestamp".to_string(), json!(timestamp()));
            }
            let text = serde_json::to_string_pretty(&out)?;
            println!("{text}");
            write_artifact(&cli.output_dir, "example.json", &text)?;
            if cli.output_dir.is_some() {
                for (key, file) in [("plus", "samples-plus.csv"), ("minus", "samples-minus.csv")]
                {
                    let record: EigenpairRecord =
                        serde_json::from_value(run.json[key]["eigenpair"].clone())?;
                    let csv = sample_csv(&record.to_pair()?.u, 201)?;
                    write_artifact(&cli.output_dir, file, &csv)?;
                }
            }
            Ok(if run.certified { 0 } else { EXIT_CERTIFICATION })
        }
    }
}

fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Solver(_) => EXIT_SOLVER,
        _ => EXIT_VALIDATION,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders usage; also emit the machine-readable error line
            eprintln!("{e}");
            eprintln!(
                "{}",
                json!({
                    "schema_version": SCHEMA_VERSION,
                    "error": e.to_string(),
                    "exit_code": EXIT_VALIDATION,
                })
            );
            std::process::exit(EXIT_VALIDATION);
        }
    };
    match execute(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            let code = error_exit_code(&err);
            eprintln!(
                "{}",
                json!({
                    "schema_version": SCHEMA_VERSION,
                    "error": err.to_string(),
                    "exit_code": code,
                })
            );
            std::process::exit(code);
        }
    }
}
