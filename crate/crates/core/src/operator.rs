//! The perturbed Hammerstein operator T = F + Gamma, discretized by Nystrom
//! quadrature with kink-aware panels, plus the linear Nystrom matrix used as
//! an independent oracle.
//!
//! T carries no eigenvalue factor; the eigen-relation is u = lambda * T u.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, Extension};
use crate::kernel::k_raw;
use crate::problem::{eval_f, eval_functional, Expr, PointEval, ProblemSpec, Scope};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone)]
pub struct OperatorContext {
    pub spec: ProblemSpec,
    pub rule: Arc<QuadratureRule>,
    pub fine_grid: usize,
    /// Arguments of abs() calls in f; their zero crossings are the kinks the
    /// panel decomposition must respect.
    abs_args: Vec<Expr>,
}

impl OperatorContext {
    pub fn new(spec: ProblemSpec, rule: Arc<QuadratureRule>, fine_grid: usize) -> Result<Self> {
        if rule.len() < 8 {
            return Err(Error::Precondition(format!(
                "quadrature order {} below the minimum of 8",
                rule.len()
            )));
        }
        if fine_grid < 101 {
            return Err(Error::Precondition(format!(
                "fine grid {fine_grid} below the minimum of 101"
            )));
        }
        let mut abs_args = Vec::new();
        spec.f.expr().abs_arguments(&mut abs_args);
        Ok(Self {
            spec,
            rule,
            fine_grid,
            abs_args,
        })
    }
}

const KINK_SCAN_POINTS: usize = 201;
const MAX_KINKS: usize = 16;

/// Zero crossings along t of every abs() argument of f, evaluated on the
/// current iterate. Crossings are bisected to ~1e-14.
fn detect_kinks(ctx: &OperatorContext, u: &DiscreteFunction) -> Result<Vec<f64>> {
    if ctx.abs_args.is_empty() {
        return Ok(Vec::new());
    }
    let arg_at = |expr: &Expr, t: f64| -> Result<f64> {
        let scope = Scope::tuvw(
            t,
            u.point_eval(0, t)?,
            u.point_eval(1, t)?,
            u.point_eval(2, t)?,
        );
        expr.eval(&scope, None)
    };
    let mut kinks = Vec::new();
    for expr in &ctx.abs_args {
        let m = KINK_SCAN_POINTS;
        let values: Vec<f64> = (0..m)
            .map(|i| arg_at(expr, i as f64 / (m - 1) as f64))
            .collect::<Result<_>>()?;
        for i in 0..m - 1 {
            if values[i] == 0.0 || values[i] * values[i + 1] >= 0.0 {
                continue;
            }
            let mut a = i as f64 / (m - 1) as f64;
            let mut b = (i + 1) as f64 / (m - 1) as f64;
            let mut fa = values[i];
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                let fm = arg_at(expr, mid)?;
                if fa * fm <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            kinks.push(0.5 * (a + b));
        }
    }
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kinks.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    kinks.retain(|&t| t > 1e-9 && t < 1.0 - 1e-9);
    kinks.truncate(MAX_KINKS);
    Ok(kinks)
}

/// Apply T to a candidate function. The output carries an extension, so it
/// can be evaluated anywhere in [0, 1] at all three derivative orders.
pub fn apply_t(ctx: &OperatorContext, u: &DiscreteFunction) -> Result<DiscreteFunction> {
    if u.rule().len() != ctx.rule.len() || u.rule().nodes() != ctx.rule.nodes() {
        return Err(Error::RuleMismatch);
    }
    let h1 = eval_functional(&ctx.spec.h1, u, &ctx.rule)?;
    let h2 = eval_functional(&ctx.spec.h2, u, &ctx.rule)?;

    let mut breaks = vec![0.0];
    breaks.extend(detect_kinks(ctx, u)?);
    breaks.push(1.0);

    let mut f_panels = Vec::with_capacity(breaks.len() - 1);
    for p in 0..breaks.len() - 1 {
        let (a, b) = (breaks[p], breaks[p + 1]);
        let len = b - a;
        let mut panel = Vec::with_capacity(ctx.rule.len());
        for &x in ctx.rule.nodes() {
            let s = a + len * x;
            let value = eval_f(
                &ctx.spec,
                s,
                u.point_eval(0, s)?,
                u.point_eval(1, s)?,
                u.point_eval(2, s)?,
            )?;
            panel.push(value);
        }
        f_panels.push(panel);
    }

    Ok(DiscreteFunction::from_operator_output(
        Arc::clone(&ctx.rule),
        Extension {
            breaks,
            f_panels,
            h1,
            h2,
            scale: 1.0,
        },
    ))
}

/// Nystrom discretization of the linear map h -> int k(., s) h(s) ds on
/// nodal values: K[i][j] = w_j * k(t_i, s_j).
pub fn nystrom_matrix(ctx: &OperatorContext) -> DMatrix<f64> {
    let n = ctx.rule.len();
    let nodes = ctx.rule.nodes();
    let weights = ctx.rule.weights();
    DMatrix::from_fn(n, n, |i, j| weights[j] * k_raw(nodes[i], nodes[j]))
}
