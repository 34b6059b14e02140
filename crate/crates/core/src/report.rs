//! Serializable records for eigenpairs, branch tables, and the bundled
//! end-to-end example run. All JSON artifacts carry a schema-version field
//! and are deterministic for a fixed configuration; timestamps are added
//! only at the CLI boundary.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, Extension};
use crate::hypotheses::{build_report, ReportOptions};
use crate::operator::OperatorContext;
use crate::problem::{parse_problem, PointEval};
use crate::quadrature::gauss_rule;
use crate::solver::{solve, Eigenpair, Method, Sign, SolveOptions};
use crate::verify::{certify, Thresholds, Verdict};

pub const SCHEMA_VERSION: &str = "1";

/// The bundled demonstration problem used by the `example` subcommand.
pub const EXAMPLE_PROBLEM: &str = "\
f = t * exp(abs(u)) * (1 + w^2)
H1 = 1 / (1 + eval(0, 0.5)^2)
H2 = (1/40) * sin(integ(2, t^3))
delta = t
sign = 1a
";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionRecord {
    pub breaks: Vec<f64>,
    pub f_panels: Vec<Vec<f64>>,
    pub h1: f64,
    pub h2: f64,
    pub scale: f64,
}

impl From<&Extension> for ExtensionRecord {
    fn from(e: &Extension) -> Self {
        Self {
            breaks: e.breaks.clone(),
            f_panels: e.f_panels.clone(),
            h1: e.h1,
            h2: e.h2,
            scale: e.scale,
        }
    }
}

impl From<ExtensionRecord> for Extension {
    fn from(r: ExtensionRecord) -> Self {
        Extension {
            breaks: r.breaks,
            f_panels: r.f_panels,
            h1: r.h1,
            h2: r.h2,
            scale: r.scale,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenpairRecord {
    pub schema_version: String,
    pub lambda: f64,
    pub rho: f64,
    pub sign: Sign,
    pub fixed_point_residual: f64,
    pub norm_residual: f64,
    pub iterations: usize,
    pub method: Method,
    pub quadrature_order: usize,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub extension: Option<ExtensionRecord>,
}

impl EigenpairRecord {
    pub fn from_pair(pair: &Eigenpair) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            lambda: pair.lambda,
            rho: pair.rho,
            sign: if pair.lambda >= 0.0 {
                Sign::Plus
            } else {
                Sign::Minus
            },
            fixed_point_residual: pair.fixed_point_residual,
            norm_residual: pair.norm_residual,
            iterations: pair.iterations,
            method: pair.method,
            quadrature_order: pair.u.rule().len(),
            u0: pair.u.u0.clone(),
            u1: pair.u.u1.clone(),
            u2: pair.u.u2.clone(),
            extension: pair.u.extension().map(ExtensionRecord::from),
        }
    }

    /// Reconstruct the eigenpair; with an extension the function is rebuilt
    /// from the stored operator output, otherwise from the raw layers.
    pub fn to_pair(&self) -> Result<Eigenpair> {
        let rule = Arc::new(gauss_rule(self.quadrature_order)?);
        let u = match &self.extension {
            Some(ext) => DiscreteFunction::from_operator_output(rule, ext.clone().into()),
            None => DiscreteFunction::from_layers(
                rule,
                self.u0.clone(),
                self.u1.clone(),
                self.u2.clone(),
            )?,
        };
        Ok(Eigenpair {
            lambda: self.lambda,
            u,
            rho: self.rho,
            fixed_point_residual: self.fixed_point_residual,
            norm_residual: self.norm_residual,
            iterations: self.iterations,
            method: self.method,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchEntryRecord {
    pub rho: f64,
    pub plus: EigenpairRecord,
    pub minus: EigenpairRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureRecord {
    pub rho: f64,
    pub sign: Sign,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchTableRecord {
    pub schema_version: String,
    pub entries: Vec<BranchEntryRecord>,
    pub failures: Vec<FailureRecord>,
}

impl BranchTableRecord {
    pub fn from_table(table: &crate::solver::BranchTable) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            entries: table
                .entries
                .iter()
                .map(|e| BranchEntryRecord {
                    rho: e.rho,
                    plus: EigenpairRecord::from_pair(&e.plus),
                    minus: EigenpairRecord::from_pair(&e.minus),
                })
                .collect(),
            failures: table
                .failures
                .iter()
                .map(|(rho, sign, reason)| FailureRecord {
                    rho: *rho,
                    sign: *sign,
                    reason: reason.clone(),
                })
                .collect(),
        }
    }
}

/// Serialize a report-like value with the schema-version field injected at
/// the top level.
pub fn to_tagged_json<T: Serialize>(value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    if let Some(map) = v.as_object_mut() {
        map.insert(
            "schema_version".to_string(),
            Value::String(SCHEMA_VERSION.to_string()),
        );
    }
    Ok(v)
}

/// CSV of (t, u, u', u'') on a uniform n-point grid including endpoints.
pub fn sample_csv(u: &DiscreteFunction, n: usize) -> Result<String> {
    if n < 2 {
        return Err(Error::Precondition(format!(
            "sample grid {n} must have at least 2 points"
        )));
    }
    let mut out = String::from("t,u,du,d2u\n");
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        out.push_str(&format!(
            "{t:.12e},{:.12e},{:.12e},{:.12e}\n",
            u.point_eval(0, t)?,
            u.point_eval(1, t)?,
            u.point_eval(2, t)?,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExampleRun {
    pub json: Value,
    pub certified: bool,
}

/// Run the bundled example end to end: hypothesis report with the declared
/// per-radius bounds, both eigenpairs, and both certificates. The output is
/// a deterministic JSON value for a fixed configuration.
pub fn run_example(rho: f64, seed: u64, quad_order: usize, fine_grid: usize) -> Result<ExampleRun> {
    let spec = parse_problem(EXAMPLE_PROBLEM)?;
    let rule = Arc::new(gauss_rule(quad_order)?);
    let ctx = OperatorContext::new(spec, Arc::clone(&rule), fine_grid)?;

    // the declared functional bounds are radius-dependent: 1/(1+rho^2) and
    // -1/40, so they are supplied per run rather than in the problem file
    let hyp_opts = ReportOptions {
        eta1: Some(1.0 / (1.0 + rho * rho)),
        eta2: Some(-1.0 / 40.0),
        seed,
        ..ReportOptions::new(Arc::clone(&rule))
    };
    let hypotheses = build_report(&ctx.spec, rho, &hyp_opts)?;

    let opts = SolveOptions::default();
    let plus = solve(&ctx, rho, Sign::Plus, &opts)?;
    let minus = solve(&ctx, rho, Sign::Minus, &opts)?;
    let cert_plus = certify(&ctx, &plus, fine_grid.max(201), Thresholds::default())?;
    let cert_minus = certify(&ctx, &minus, fine_grid.max(201), Thresholds::default())?;
    let certified =
        cert_plus.verdict == Verdict::Pass && cert_minus.verdict == Verdict::Pass;

    let json = json!({
        "schema_version": SCHEMA_VERSION,
        "rho": rho,
        "seed": seed,
        "quadrature_order": quad_order,
        "fine_grid": fine_grid,
        "hypotheses": serde_json::to_value(&hypotheses)?,
        "plus": {
            "eigenpair": serde_json::to_value(EigenpairRecord::from_pair(&plus))?,
            "certificate": serde_json::to_value(&cert_plus)?,
        },
        "minus": {
            "eigenpair": serde_json::to_value(EigenpairRecord::from_pair(&minus))?,
            "certificate": serde_json::to_value(&cert_minus)?,
        },
    });
    Ok(ExampleRun { json, certified })
}
