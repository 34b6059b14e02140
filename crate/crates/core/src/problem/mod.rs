//! The problem definition language: the nonlinearity f(t, u, v, w), the
//! boundary functionals H1, H2, and optional declared bounds for the
//! hypothesis check.
//!
//! File format, one declaration per line, `#` comments:
//!
//! ```text
//! f  = t * exp(abs(u)) * (1 + w^2)
//! H1 = 1 / (1 + eval(0, 0.5)^2)
//! H2 = (1/40) * sin(integ(2, t^3))
//! delta = t          # optional lower bound for f on the box
//! eta1 = 0.5         # optional lower bounds for the functionals
//! eta2 = -0.025
//! sign = 1a          # which sign condition the nonlinearity satisfies
//! ```

pub mod ast;
pub mod parse;

pub use ast::{BinOp, Expr, Func, FunctionalEnv, Scope, Var};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use serde::{Deserialize, Serialize};

/// Which of the two one-sided bounds the nonlinearity satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignMode {
    #[serde(rename = "1a")]
    OneA,
    #[serde(rename = "1b")]
    OneB,
}

/// An expression over {t, u, v, w} with no functional terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr(Expr);

impl ScalarExpr {
    pub fn new(expr: Expr) -> Result<Self> {
        if expr.contains_functional_term() {
            return Err(Error::InvalidProblem(
                "eval/integ terms are not allowed in a scalar expression".into(),
            ));
        }
        Ok(ScalarExpr(expr))
    }

    pub fn expr(&self) -> &Expr {
        &self.0
    }

    pub fn pretty(&self) -> String {
        self.0.pretty()
    }
}

/// An expression whose only access to the unknown function is through
/// `eval(j, tau)` and `integ(j, weight)` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalExpr(Expr);

impl FunctionalExpr {
    pub fn new(expr: Expr) -> Result<Self> {
        let mut vars = Vec::new();
        expr.free_vars(&mut vars);
        if let Some(v) = vars.first() {
            return Err(Error::InvalidProblem(format!(
                "bare variable `{}` in a functional expression; use eval/integ",
                v.name()
            )));
        }
        Ok(FunctionalExpr(expr))
    }

    pub fn expr(&self) -> &Expr {
        &self.0
    }

    pub fn pretty(&self) -> String {
        self.0.pretty()
    }
}

/// Parsed and validated problem definition.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub f: ScalarExpr,
    pub h1: FunctionalExpr,
    pub h2: FunctionalExpr,
    /// Declared t-dependent lower bound for f (mode 1a) or -f (mode 1b).
    pub delta_lower: Option<ScalarExpr>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub sign_mode: SignMode,
}

impl ProblemSpec {
    /// True when f or a functional contains division by a non-constant or a
    /// logarithm, so boundedness on the ball cannot be read off the syntax.
    pub fn unbounded_risk(&self) -> bool {
        self.f.expr().contains_division_or_log()
            || self.h1.expr().contains_division_or_log()
            || self.h2.expr().contains_division_or_log()
    }
}

/// Parse a problem file.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let mut f = None;
    let mut h1 = None;
    let mut h2 = None;
    let mut delta = None;
    let mut eta1 = None;
    let mut eta2 = None;
    let mut sign = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if line.trim().is_empty() {
            continue;
        }
        let eq = line.find('=').ok_or_else(|| Error::Parse {
            line: line_no,
            column: 1,
            message: "expected `name = expression`".into(),
        })?;
        let key = line[..eq].trim();
        let rhs = &line[eq + 1..];
        let rhs_offset = eq + 1;
        match key {
            "f" => {
                let expr = parse::parse_expression(line_no, rhs_offset, rhs)?;
                f = Some(ScalarExpr::new(expr)?);
            }
            "H1" | "H2" => {
                let expr = parse::parse_expression(line_no, rhs_offset, rhs)?;
                let fe = FunctionalExpr::new(expr)?;
                if key == "H1" {
                    h1 = Some(fe);
                } else {
                    h2 = Some(fe);
                }
            }
            "delta" => {
                let expr = parse::parse_expression(line_no, rhs_offset, rhs)?;
                let mut vars = Vec::new();
                expr.free_vars(&mut vars);
                if vars.iter().any(|v| *v != Var::T) {
                    return Err(Error::InvalidProblem(
                        "delta must be an expression in t only".into(),
                    ));
                }
                delta = Some(ScalarExpr::new(expr)?);
            }
            "eta1" | "eta2" => {
                let expr = parse::parse_expression(line_no, rhs_offset, rhs)?;
                let value = expr.eval(&Scope::default(), None)?;
                if key == "eta1" {
                    eta1 = Some(value);
                } else {
                    eta2 = Some(value);
                }
            }
            "sign" => {
                sign = Some(match rhs.trim() {
                    "1a" => SignMode::OneA,
                    "1b" => SignMode::OneB,
                    other => {
                        return Err(Error::Parse {
                            line: line_no,
                            column: rhs_offset + 1,
                            message: format!("sign must be 1a or 1b, got `{other}`"),
                        })
                    }
                });
            }
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("unknown declaration `{other}`"),
                });
            }
        }
    }

    let spec = ProblemSpec {
        f: f.ok_or_else(|| Error::InvalidProblem("missing `f = ...`".into()))?,
        h1: h1.ok_or_else(|| Error::InvalidProblem("missing `H1 = ...`".into()))?,
        h2: h2.ok_or_else(|| Error::InvalidProblem("missing `H2 = ...`".into()))?,
        delta_lower: delta,
        eta1,
        eta2,
        sign_mode: sign.unwrap_or(SignMode::OneA),
    };

    if let Some(delta) = &spec.delta_lower {
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let value = delta.expr().eval(&Scope::t_only(t), None)?;
            if value < 0.0 {
                return Err(Error::InvalidProblem(format!(
                    "declared delta is negative at t = {t} ({value})"
                )));
            }
        }
    }
    Ok(spec)
}

/// Evaluate the nonlinearity at (t, u, v, w).
pub fn eval_f(spec: &ProblemSpec, t: f64, u: f64, v: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) || t.is_nan() {
        return Err(Error::Domain {
            name: "t",
            value: t,
            expected: "[0, 1]",
        });
    }
    spec.f.expr().eval(&Scope::tuvw(t, u, v, w), None)
}

/// A function on [0, 1] that can report derivative values at arbitrary
/// points, and integrate weighted derivative layers.
pub trait PointEval {
    fn point_eval(&self, order: u8, t: f64) -> Result<f64>;

    /// \int_0^1 weight(t) u^(order)(t) dt. The default just applies the rule;
    /// implementations may refine it when they know about interior kinks.
    fn integrate_weighted(
        &self,
        order: u8,
        weight: &dyn Fn(f64) -> Result<f64>,
        rule: &QuadratureRule,
    ) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            acc += w * weight(x)? * self.point_eval(order, x)?;
        }
        Ok(acc)
    }
}

struct Env<'a> {
    u: &'a dyn PointEval,
    rule: &'a QuadratureRule,
}

impl FunctionalEnv for Env<'_> {
    fn eval_point(&self, order: u8, tau: f64) -> Result<f64> {
        self.u.point_eval(order, tau)
    }

    fn eval_integral(&self, order: u8, weight: &Expr) -> Result<f64> {
        self.u.integrate_weighted(
            order,
            &|t| weight.eval(&Scope::t_only(t), None),
            self.rule,
        )
    }
}

/// Evaluate a boundary functional on a candidate function.
pub fn eval_functional(
    expr: &FunctionalExpr,
    u: &dyn PointEval,
    rule: &QuadratureRule,
) -> Result<f64> {
    let env = Env { u, rule };
    expr.expr().eval(&Scope::default(), Some(&env))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE_TEXT: &str = "\
# third-order problem with functional boundary terms
f = t * exp(abs(u)) * (1 + w^2)
H1 = 1 / (1 + eval(0, 0.5)^2)
H2 = (1/40) * sin(integ(2, t^3))
delta = t
sign = 1a
";

    struct Analytic<F: Fn(u8, f64) -> f64>(F);

    impl<F: Fn(u8, f64) -> f64> PointEval for Analytic<F> {
        fn point_eval(&self, order: u8, t: f64) -> Result<f64> {
            Ok((self.0)(order, t))
        }
    }

    #[test]
    fn parses_example() {
        let spec = parse_problem(EXAMPLE_TEXT).unwrap();
        assert_eq!(spec.sign_mode, SignMode::OneA);
        assert!(spec.delta_lower.is_some());
        assert!(spec.unbounded_risk()); // H1 divides by a non-constant
        assert_eq!(eval_f(&spec, 1.0, 0.0, 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(eval_f(&spec, 0.0, 3.0, -1.0, 2.0).unwrap(), 0.0);
        assert_eq!(eval_f(&spec, 0.5, 0.0, 0.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_unknown_identifier() {
        let err = parse_problem("f = q + 1\nH1 = 0\nH2 = 0\n").unwrap_err();
        assert!(err.to_string().contains("`q`"));
    }

    #[test]
    fn rejects_bare_variable_in_functional() {
        let err = parse_problem("f = t\nH1 = u + 1\nH2 = 0\n").unwrap_err();
        assert!(err.to_string().contains("functional"));
    }

    #[test]
    fn rejects_negative_delta() {
        let err = parse_problem("f = t\nH1 = 0\nH2 = 0\ndelta = t - 0.5\n").unwrap_err();
        assert!(err.to_string().contains("negative"));
    }

    #[test]
    fn eval_f_domain_check() {
        let spec = parse_problem(EXAMPLE_TEXT).unwrap();
        assert!(eval_f(&spec, 1.5, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn functional_evaluation() {
        let rule = crate::quadrature::gauss_rule(16).unwrap();
        let square = Analytic(|order, t| match order {
            0 => t * t,
            1 => 2.0 * t,
            _ => 2.0,
        });

        let constant = FunctionalExpr::new(Expr::Num(3.0)).unwrap();
        assert_eq!(eval_functional(&constant, &square, &rule).unwrap(), 3.0);

        let point = FunctionalExpr::new(Expr::Eval { order: 0, tau: 0.5 }).unwrap();
        assert_eq!(eval_functional(&point, &square, &rule).unwrap(), 0.25);

        // integ(2, t^3) on u = t^2 -> int t^3 * 2 dt = 0.5
        let weight = parse::parse_expression(1, 0, "t^3").unwrap();
        let integral = FunctionalExpr::new(Expr::Integ {
            order: 2,
            weight: Box::new(weight),
        })
        .unwrap();
        let got = eval_functional(&integral, &square, &rule).unwrap();
        approx::assert_abs_diff_eq!(got, 0.5, epsilon = 1e-13);
    }

    #[test]
    fn round_trip_pretty_parse() {
        let spec = parse_problem(EXAMPLE_TEXT).unwrap();
        for expr in [spec.f.expr(), spec.h1.expr(), spec.h2.expr()] {
            let printed = expr.pretty();
            let reparsed = parse::parse_expression(1, 0, &printed).unwrap();
            assert_eq!(&reparsed, expr);
        }
    }

    #[test]
    fn nan_policy_reports_subexpression() {
        let spec = parse_problem("f = log(u)\nH1 = 0\nH2 = 0\n").unwrap();
        let err = eval_f(&spec, 0.5, -1.0, 0.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("log"));
    }
}
