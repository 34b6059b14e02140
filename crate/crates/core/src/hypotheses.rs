//! Applicability check: lower bounds for the nonlinearity and the boundary
//! functionals, and the sign of the resulting inequality value. A strictly
//! positive value certifies that both eigenpairs exist on the chosen sphere;
//! with estimated bounds the verdict is advisory only, since grid and
//! Monte-Carlo minima over-estimate true infima.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DiscreteFunction;
use crate::problem::{eval_f, eval_functional, ProblemSpec, Scope, SignMode};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSource {
    Declared,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "holds")]
    Holds,
    #[serde(rename = "fails")]
    Fails,
    #[serde(rename = "estimated-holds")]
    EstimatedHolds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub rho: f64,
    pub mode: SignMode,
    pub delta_source: BoundSource,
    pub delta_ts: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub delta_clamped: bool,
    pub eta1: f64,
    pub eta2: f64,
    pub eta_source: BoundSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound3a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound3b: Option<f64>,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Declared per-radius functional bounds; these win over the problem
    /// file and over estimation.
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub t_grid: usize,
    pub box_grid: usize,
    pub rule: Arc<QuadratureRule>,
}

impl ReportOptions {
    pub fn new(rule: Arc<QuadratureRule>) -> Self {
        Self {
            eta1: None,
            eta2: None,
            samples: 1000,
            seed: 0,
            t_grid: 101,
            box_grid: 21,
            rule,
        }
    }
}

/// Lattice minimum of f (mode 1a) or -f (mode 1b) over [-rho, rho]^3 at each
/// requested t. Negative minima are clamped to zero; the second return value
/// reports whether clamping happened anywhere.
pub fn estimate_delta(
    spec: &ProblemSpec,
    rho: f64,
    mode: SignMode,
    t_points: &[f64],
    box_grid: usize,
) -> Result<(Vec<f64>, bool)> {
    if box_grid < 11 {
        return Err(Error::Precondition(format!(
            "box grid {box_grid} below the minimum of 11"
        )));
    }
    if rho <= 0.0 {
        return Err(Error::Precondition(format!("rho {rho} must be positive")));
    }
    let coords: Vec<f64> = (0..box_grid)
        .map(|i| -rho + 2.0 * rho * i as f64 / (box_grid - 1) as f64)
        .collect();
    let mut clamped = false;
    let mut out = Vec::with_capacity(t_points.len());
    for &t in t_points {
        let mut min = f64::INFINITY;
        for &u in &coords {
            for &v in &coords {
                for &w in &coords {
                    let raw = eval_f(spec, t, u, v, w).map_err(|e| {
                        Error::Precondition(format!(
                            "estimation failed at (t={t}, u={u}, v={v}, w={w}): {e}"
                        ))
                    })?;
                    let value = match mode {
                        SignMode::OneA => raw,
                        SignMode::OneB => -raw,
                    };
                    if value < min {
                        min = value;
                    }
                }
            }
        }
        if min < 0.0 {
            clamped = true;
            min = 0.0;
        }
        out.push(min);
    }
    Ok((out, clamped))
}

/// Monte-Carlo lower estimate of the functional bounds over the sphere of
/// radius rho: random trigonometric polynomials rescaled to the sphere.
pub fn estimate_eta(
    spec: &ProblemSpec,
    rho: f64,
    rule: &Arc<QuadratureRule>,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 100 {
        return Err(Error::Precondition(format!(
            "sample count {samples} below the minimum of 100"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = std::f64::consts::PI;
    let mut min1 = f64::INFINITY;
    let mut min2 = f64::INFINITY;
    let mut done = 0;
    while done < samples {
        let c0: f64 = rng.gen_range(-1.0..1.0);
        let a: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let b: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let u = DiscreteFunction::from_analytic(Arc::clone(rule), |t| {
            let mut u0 = c0;
            let mut u1 = 0.0;
            let mut u2 = 0.0;
            for m in 1..=3usize {
                let om = m as f64 * pi;
                u0 += a[m - 1] * (om * t).sin() + b[m - 1] * (om * t).cos();
                u1 += om * (a[m - 1] * (om * t).cos() - b[m - 1] * (om * t).sin());
                u2 -= om * om * (a[m - 1] * (om * t).sin() + b[m - 1] * (om * t).cos());
            }
            (u0, u1, u2)
        });
        let norm = u.c2_norm(301)?.value;
        if norm < 1e-12 {
            continue;
        }
        let on_sphere = u.scaled(rho / norm);
        let h1 = eval_functional(&spec.h1, &on_sphere, rule)?;
        let h2 = eval_functional(&spec.h2, &on_sphere, rule)?;
        min1 = min1.min(h1);
        min2 = min2.min(h2);
        done += 1;
    }
    Ok((min1, min2))
}

fn inequality_weight(mode: SignMode, s: f64) -> f64 {
    match mode {
        SignMode::OneA => (1.0 - s) * (1.0 - s) * (2.0 * s + 1.0),
        SignMode::OneB => s * s * (3.0 - 2.0 * s),
    }
}

/// B = 6(eta1 + eta2) + int_0^1 w_mode(s) delta(s) ds. The result is the
/// margin of the applicability inequality; eigenpairs of both signs are
/// guaranteed to exist iff B > 0.
pub fn check_inequality<F: Fn(f64) -> Result<f64>>(
    mode: SignMode,
    delta: F,
    eta1: f64,
    eta2: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let mut integral = 0.0;
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let d = delta(x)?;
        if d < -1e-12 {
            return Err(Error::Precondition(format!(
                "delta({x}) = {d} is negative; the lower bound must be nonnegative"
            )));
        }
        integral += w * inequality_weight(mode, x) * d;
    }
    Ok(6.0 * (eta1 + eta2) + integral)
}

/// Assemble the full hypothesis report for one radius, preferring declared
/// bounds and falling back to estimation.
pub fn build_report(spec: &ProblemSpec, rho: f64, opts: &ReportOptions) -> Result<HypothesisReport> {
    if rho <= 0.0 {
        return Err(Error::Precondition(format!("rho {rho} must be positive")));
    }
    let mode = spec.sign_mode;
    let t_grid = opts.t_grid.max(11);
    let report_ts: Vec<f64> = (0..t_grid)
        .map(|i| i as f64 / (t_grid - 1) as f64)
        .collect();

    let mut warnings = Vec::new();
    if spec.unbounded_risk() {
        warnings.push(
            "f or a boundary functional contains division or log; boundedness on the ball \
             is not guaranteed by the syntax"
                .to_string(),
        );
    }

    let (delta_source, delta_values, delta_clamped, delta_at): (
        BoundSource,
        Vec<f64>,
        bool,
        Box<dyn Fn(f64) -> Result<f64>>,
    ) = match &spec.delta_lower {
        Some(expr) => {
            let expr = expr.clone();
            let values: Vec<f64> = report_ts
                .iter()
                .map(|&t| expr.expr().eval(&Scope::t_only(t), None))
                .collect::<Result<_>>()?;
            (
                BoundSource::Declared,
                values,
                false,
                Box::new(move |t| expr.expr().eval(&Scope::t_only(t), None)),
            )
        }
        None => {
            let (values, clamped) =
                estimate_delta(spec, rho, mode, &report_ts, opts.box_grid)?;
            let (node_values, node_clamped) =
                estimate_delta(spec, rho, mode, opts.rule.nodes(), opts.box_grid)?;
            let nodes: Vec<f64> = opts.rule.nodes().to_vec();
            (
                BoundSource::Estimated,
                values,
                clamped || node_clamped,
                Box::new(move |t| {
                    let idx = nodes
                        .iter()
                        .position(|&x| (x - t).abs() < 1e-14)
                        .expect("inequality integrates at rule nodes");
                    Ok(node_values[idx])
                }),
            )
        }
    };
    if delta_clamped {
        warnings.push(
            "the estimated lower bound for f was negative somewhere and has been clamped to 0"
                .to_string(),
        );
    }

    let declared_eta1 = opts.eta1.or(spec.eta1);
    let declared_eta2 = opts.eta2.or(spec.eta2);
    let (eta1, eta2, eta_source) = match (declared_eta1, declared_eta2) {
        (Some(e1), Some(e2)) => (e1, e2, BoundSource::Declared),
        _ => {
            let (est1, est2) = estimate_eta(spec, rho, &opts.rule, opts.samples, opts.seed)?;
            (
                declared_eta1.unwrap_or(est1),
                declared_eta2.unwrap_or(est2),
                BoundSource::Estimated,
            )
        }
    };

    let bound = check_inequality(mode, delta_at, eta1, eta2, &opts.rule)?;
    let declared_everywhere =
        delta_source == BoundSource::Declared && eta_source == BoundSource::Declared;
    let verdict = if bound > 1e-12 {
        if declared_everywhere {
            Verdict::Holds
        } else {
            Verdict::EstimatedHolds
        }
    } else {
        Verdict::Fails
    };

    Ok(HypothesisReport {
        rho,
        mode,
        delta_source,
        delta_ts: report_ts,
        delta_values,
        delta_clamped,
        eta1,
        eta2,
        eta_source,
        bound3a: (mode == SignMode::OneA).then_some(bound),
        bound3b: (mode == SignMode::OneB).then_some(bound),
        verdict,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_problem;
    use crate::quadrature::gauss_rule;
    use approx::assert_abs_diff_eq;

    const EXAMPLE: &str = "\
f = t * exp(abs(u)) * (1 + w^2)
H1 = 1 / (1 + eval(0, 0.5)^2)
H2 = (1/40) * sin(integ(2, t^3))
delta = t
sign = 1a
";

    fn rule() -> Arc<QuadratureRule> {
        Arc::new(gauss_rule(40).unwrap())
    }

    #[test]
    fn weight_integrals_are_one_half() {
        let r = rule();
        let a = r.integrate(|s| inequality_weight(SignMode::OneA, s));
        let b = r.integrate(|s| inequality_weight(SignMode::OneB, s));
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(b, 0.5, epsilon = 1e-13);
    }

    #[test]
    fn closed_form_bound_for_example() {
        let r = rule();
        for rho in [0.5, 1.0, 2.0, 5.0] {
            let eta1 = 1.0 / (1.0 + rho * rho);
            let b = check_inequality(SignMode::OneA, |s| Ok(s), eta1, -1.0 / 40.0, &r).unwrap();
            assert_abs_diff_eq!(b, 6.0 / (1.0 + rho * rho), epsilon = 1e-12);
        }
        let b1 = check_inequality(SignMode::OneA, |s| Ok(s), 0.5, -0.025, &r).unwrap();
        assert_abs_diff_eq!(b1, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_bound_means_fails() {
        let spec = parse_problem("f = 0\nH1 = 0\nH2 = 0\ndelta = 0\n").unwrap();
        let opts = ReportOptions {
            eta1: Some(0.0),
            eta2: Some(0.0),
            ..ReportOptions::new(rule())
        };
        let report = build_report(&spec, 1.0, &opts).unwrap();
        assert_eq!(report.verdict, Verdict::Fails);
        assert_abs_diff_eq!(report.bound3a.unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn estimated_delta_for_example_is_t() {
        let spec = parse_problem(EXAMPLE).unwrap();
        let ts = [0.0, 0.25, 0.5, 1.0];
        for rho in [0.5, 2.0] {
            let (values, clamped) =
                estimate_delta(&spec, rho, SignMode::OneA, &ts, 21).unwrap();
            assert!(!clamped);
            for (t, v) in ts.iter().zip(values) {
                assert_abs_diff_eq!(v, *t, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_and_sign_changing_delta() {
        let spec = parse_problem("f = 1\nH1 = 0\nH2 = 0\n").unwrap();
        let (values, clamped) = estimate_delta(&spec, 1.0, SignMode::OneA, &[0.3], 11).unwrap();
        assert_eq!(values, vec![1.0]);
        assert!(!clamped);

        let spec = parse_problem("f = u\nH1 = 0\nH2 = 0\n").unwrap();
        let (values, clamped) = estimate_delta(&spec, 1.0, SignMode::OneA, &[0.5], 11).unwrap();
        assert_eq!(values, vec![0.0]);
        assert!(clamped);
    }

    #[test]
    fn eta_estimates_bracket_the_true_bounds() {
        let spec = parse_problem(EXAMPLE).unwrap();
        let (eta1, eta2) = estimate_eta(&spec, 1.0, &rule(), 300, 7).unwrap();
        // true infimum of H1 on the sphere is 1/(1+rho^2) = 0.5
        assert!(eta1 >= 0.5 - 1e-9 && eta1 <= 1.0);
        assert!(eta2 >= -0.025 - 1e-9 && eta2 <= 0.025);

        let spec = parse_problem("f = t\nH1 = 1/40\nH2 = 1/40\n").unwrap();
        let (c1, c2) = estimate_eta(&spec, 2.0, &rule(), 100, 0).unwrap();
        assert_abs_diff_eq!(c1, 0.025, epsilon = 1e-15);
        assert_abs_diff_eq!(c2, 0.025, epsilon = 1e-15);
    }

    #[test]
    fn bound_is_monotone_in_its_inputs() {
        let r = rule();
        let base = check_inequality(SignMode::OneA, |s| Ok(s), 0.1, 0.0, &r).unwrap();
        let more_eta = check_inequality(SignMode::OneA, |s| Ok(s), 0.2, 0.0, &r).unwrap();
        let more_delta =
            check_inequality(SignMode::OneA, |s| Ok(s + 0.1), 0.1, 0.0, &r).unwrap();
        assert!(more_eta > base);
        assert!(more_delta > base);
    }

    #[test]
    fn report_with_declared_bounds_holds() {
        let spec = parse_problem(EXAMPLE).unwrap();
        let opts = ReportOptions {
            eta1: Some(0.5),
            eta2: Some(-0.025),
            ..ReportOptions::new(rule())
        };
        let report = build_report(&spec, 1.0, &opts).unwrap();
        assert_eq!(report.verdict, Verdict::Holds);
        assert_eq!(report.delta_source, BoundSource::Declared);
        assert_abs_diff_eq!(report.bound3a.unwrap(), 3.0, epsilon = 1e-12);
        assert!(report.bound3b.is_none());
        // division in H1 is flagged
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn report_with_estimation_is_advisory() {
        let spec = parse_problem(EXAMPLE).unwrap();
        let opts = ReportOptions {
            samples: 200,
            box_grid: 11,
            ..ReportOptions::new(rule())
        };
        let report = build_report(&spec, 2.0, &opts).unwrap();
        assert_eq!(report.verdict, Verdict::EstimatedHolds);
        // the closed form 6/(1+rho^2) = 1.2 lower-bounds the estimated margin
        assert!(report.bound3a.unwrap() >= 1.2 - 1e-9);
    }
}
