//! Discrete representation of candidate eigenfunctions: values of u, u', u''
//! at the quadrature nodes, plus the data needed to evaluate the integral
//! representation off-node.
//!
//! An extension-bearing function evaluates the right-hand side of the
//! integral equation directly: boundary shape terms plus kernel integrals of
//! the stored nonlinearity density. The density is held per panel, with
//! panels split at the detected kinks of the nonlinearity, so off-node
//! evaluation keeps spectral accuracy even when f contains abs().
//! A raw function falls back to barycentric interpolation of its layers.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{d2k_raw, dk_raw, gamma_raw, k_raw};
use crate::problem::PointEval;
use crate::quadrature::QuadratureRule;
use serde::{Deserialize, Serialize};

/// Off-node evaluation data captured at the last operator application.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    /// Panel boundaries, starting at 0 and ending at 1; interior points are
    /// kink locations of the nonlinearity along the current iterate.
    pub breaks: Vec<f64>,
    /// f values at the rule nodes mapped into each panel.
    pub f_panels: Vec<Vec<f64>>,
    pub h1: f64,
    pub h2: f64,
    /// Accumulated scalar factor (the eigenvalue, once applied).
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct DiscreteFunction {
    rule: Arc<QuadratureRule>,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    extension: Option<Extension>,
}

/// The C^2-norm max_j ||u^(j)||_inf together with the achieving derivative
/// order and location. Ties break toward the smaller order, then smaller t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2Norm {
    pub value: f64,
    pub order: u8,
    pub t: f64,
}

impl DiscreteFunction {
    /// Raw nodal vectors; off-node evaluation interpolates.
    pub fn from_layers(
        rule: Arc<QuadratureRule>,
        u0: Vec<f64>,
        u1: Vec<f64>,
        u2: Vec<f64>,
    ) -> Result<Self> {
        for layer in [&u0, &u1, &u2] {
            if layer.len() != rule.len() {
                return Err(Error::LayerLength {
                    expected: rule.len(),
                    got: layer.len(),
                });
            }
        }
        Ok(Self {
            rule,
            u0,
            u1,
            u2,
            extension: None,
        })
    }

    /// Sample an analytically known function (value, first and second
    /// derivative) at the rule nodes.
    pub fn from_analytic<F: Fn(f64) -> (f64, f64, f64)>(rule: Arc<QuadratureRule>, f: F) -> Self {
        let mut u0 = Vec::with_capacity(rule.len());
        let mut u1 = Vec::with_capacity(rule.len());
        let mut u2 = Vec::with_capacity(rule.len());
        for &x in rule.nodes() {
            let (a, b, c) = f(x);
            u0.push(a);
            u1.push(b);
            u2.push(c);
        }
        Self {
            rule,
            u0,
            u1,
            u2,
            extension: None,
        }
    }

    /// Build an extension-bearing function from operator output data. Nodal
    /// values are computed through the same evaluation path used off-node,
    /// so node consistency is exact.
    pub fn from_operator_output(rule: Arc<QuadratureRule>, extension: Extension) -> Self {
        let mut out = Self {
            rule,
            u0: Vec::new(),
            u1: Vec::new(),
            u2: Vec::new(),
            extension: Some(extension),
        };
        let nodes: Vec<f64> = out.rule.nodes().to_vec();
        for j in 0..3u8 {
            let layer: Vec<f64> = nodes.iter().map(|&t| out.phie_eval(j, t)).collect();
            match j {
                0 => out.u0 = layer,
                1 => out.u1 = layer,
                _ => out.u2 = layer,
            }
        }
        out
    }

    pub fn rule(&self) -> &Arc<QuadratureRule> {
        &self.rule
    }

    pub fn extension(&self) -> Option<&Extension> {
        self.extension.as_ref()
    }

    pub fn layer(&self, order: u8) -> &[f64] {
        match order {
            0 => &self.u0,
            1 => &self.u1,
            _ => &self.u2,
        }
    }

    /// Interior kink locations known to this representation.
    pub fn kink_points(&self) -> Vec<f64> {
        match &self.extension {
            Some(ext) => ext.breaks[1..ext.breaks.len() - 1].to_vec(),
            None => Vec::new(),
        }
    }

    /// Multiply by a scalar; an extension survives with its scale folded in.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for layer in [&mut out.u0, &mut out.u1, &mut out.u2] {
            for v in layer.iter_mut() {
                *v *= alpha;
            }
        }
        if let Some(ext) = &mut out.extension {
            ext.scale *= alpha;
        }
        out
    }

    /// alpha * self + beta * other, componentwise on all three layers. The
    /// result is a raw vector.
    pub fn axpy(&self, alpha: f64, beta: f64, other: &DiscreteFunction) -> Result<Self> {
        if self.rule.len() != other.rule.len() || self.rule.nodes() != other.rule.nodes() {
            return Err(Error::RuleMismatch);
        }
        let comb = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(&x, &y)| alpha * x + beta * y)
                .collect()
        };
        Ok(Self {
            rule: Arc::clone(&self.rule),
            u0: comb(&self.u0, &other.u0),
            u1: comb(&self.u1, &other.u1),
            u2: comb(&self.u2, &other.u2),
            extension: None,
        })
    }

    /// Max nodal difference across all three layers.
    pub fn nodal_max_diff(&self, other: &DiscreteFunction) -> f64 {
        let mut m: f64 = 0.0;
        for (a, b) in [
            (&self.u0, &other.u0),
            (&self.u1, &other.u1),
            (&self.u2, &other.u2),
        ] {
            for (x, y) in a.iter().zip(b.iter()) {
                m = m.max((x - y).abs());
            }
        }
        m
    }

    fn phie_eval(&self, order: u8, t: f64) -> f64 {
        let ext = self.extension.as_ref().expect("extension present");
        let mut acc = gamma_raw(1, t, order) * ext.h1 + gamma_raw(2, t, order) * ext.h2;
        let kernel = |t: f64, s: f64| match order {
            0 => k_raw(t, s),
            1 => dk_raw(t, s),
            _ => d2k_raw(t, s),
        };
        let nodes = self.rule.nodes();
        let weights = self.rule.weights();
        for p in 0..ext.breaks.len() - 1 {
            let (a, b) = (ext.breaks[p], ext.breaks[p + 1]);
            let panel_len = b - a;
            if panel_len <= 0.0 {
                continue;
            }
            let sub: [(f64, f64); 2] = if t > a && t < b {
                [(a, t), (t, b)]
            } else {
                [(a, b), (b, b)]
            };
            for (aa, bb) in sub {
                let len = bb - aa;
                if len <= 0.0 {
                    continue;
                }
                for (&x, &w) in nodes.iter().zip(weights) {
                    let s = aa + len * x;
                    // the sub-split keeps s off t except when rounding in a
                    // near-degenerate sub-interval collapses them; that
                    // sample's weight is at rounding level, so skip it
                    if order == 2 && s == t {
                        continue;
                    }
                    let local = (s - a) / panel_len;
                    let density = self.rule.barycentric_eval(&ext.f_panels[p], local);
                    acc += len * w * kernel(t, s) * density;
                }
            }
        }
        ext.scale * acc
    }

    /// Grid search over `fine_grid` uniform points (endpoints included) plus
    /// one parabolic refinement around an interior maximum.
    pub fn c2_norm(&self, fine_grid: usize) -> Result<C2Norm> {
        if fine_grid < 101 {
            return Err(Error::Precondition(format!(
                "fine grid {fine_grid} below the minimum of 101"
            )));
        }
        let n = fine_grid;
        let h = 1.0 / (n - 1) as f64;
        let mut best = C2Norm {
            value: -1.0,
            order: 0,
            t: 0.0,
        };
        let mut best_neighbors: Option<(f64, f64)> = None;
        for order in 0..3u8 {
            let values: Vec<f64> = (0..n)
                .map(|i| self.point_eval(order, (i as f64 * h).min(1.0)).map(f64::abs))
                .collect::<Result<_>>()?;
            for (i, &v) in values.iter().enumerate() {
                if v > best.value {
                    best = C2Norm {
                        value: v,
                        order,
                        t: (i as f64 * h).min(1.0),
                    };
                    best_neighbors = if i > 0 && i + 1 < n {
                        Some((values[i - 1], values[i + 1]))
                    } else {
                        None
                    };
                }
            }
        }
        // one parabolic polish step on the bracketing interval
        if let Some((left, right)) = best_neighbors {
            let denom = left - 2.0 * best.value + right;
            if denom < 0.0 {
                let shift = 0.5 * (left - right) / denom;
                if shift.abs() < 1.0 {
                    let t = (best.t + shift * h).clamp(0.0, 1.0);
                    let v = self.point_eval(best.order, t)?.abs();
                    if v > best.value {
                        best.value = v;
                        best.t = t;
                    }
                }
            }
        }
        Ok(best)
    }
}

impl PointEval for DiscreteFunction {
    fn point_eval(&self, order: u8, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) || t.is_nan() {
            return Err(Error::Domain {
                name: "t",
                value: t,
                expected: "[0, 1]",
            });
        }
        if self.extension.is_some() {
            Ok(self.phie_eval(order, t))
        } else {
            Ok(self.rule.barycentric_eval(self.layer(order), t))
        }
    }

    fn integrate_weighted(
        &self,
        order: u8,
        weight: &dyn Fn(f64) -> Result<f64>,
        rule: &QuadratureRule,
    ) -> Result<f64> {
        let breaks: Vec<f64> = match &self.extension {
            Some(ext) => ext.breaks.clone(),
            None => vec![0.0, 1.0],
        };
        let mut acc = 0.0;
        for p in 0..breaks.len() - 1 {
            let (a, b) = (breaks[p], breaks[p + 1]);
            let len = b - a;
            if len <= 0.0 {
                continue;
            }
            for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
                let t = a + len * x;
                acc += len * w * weight(t)? * self.point_eval(order, t)?;
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_rule;
    use approx::assert_abs_diff_eq;

    fn rule40() -> Arc<QuadratureRule> {
        Arc::new(gauss_rule(40).unwrap())
    }

    fn square(rule: Arc<QuadratureRule>) -> DiscreteFunction {
        DiscreteFunction::from_analytic(rule, |t| (t * t, 2.0 * t, 2.0))
    }

    #[test]
    fn raw_point_eval_interpolates() {
        let u = square(rule40());
        assert_abs_diff_eq!(u.point_eval(0, 0.3).unwrap(), 0.09, epsilon = 1e-10);
        assert_abs_diff_eq!(u.point_eval(1, 0.7).unwrap(), 1.4, epsilon = 1e-10);
        // node pass-through
        let x3 = u.rule().nodes()[3];
        assert_eq!(u.point_eval(0, x3).unwrap(), u.u0[3]);
        assert!(u.point_eval(0, 1.2).is_err());
    }

    #[test]
    fn c2_norm_examples() {
        let rule = rule40();
        let u = square(Arc::clone(&rule));
        let norm = u.c2_norm(1001).unwrap();
        assert_abs_diff_eq!(norm.value, 2.0, epsilon = 1e-9);
        // |u'| and |u''| tie at 2; smaller order wins, at t = 1
        assert_eq!(norm.order, 1);
        assert_abs_diff_eq!(norm.t, 1.0, epsilon = 1e-12);

        let zero = DiscreteFunction::from_analytic(Arc::clone(&rule), |_| (0.0, 0.0, 0.0));
        assert_eq!(zero.c2_norm(1001).unwrap().value, 0.0);

        let pi = std::f64::consts::PI;
        let s = DiscreteFunction::from_analytic(rule, move |t| {
            (
                (pi * t).sin(),
                pi * (pi * t).cos(),
                -pi * pi * (pi * t).sin(),
            )
        });
        let norm = s.c2_norm(1001).unwrap();
        assert_abs_diff_eq!(norm.value, pi * pi, epsilon = 1e-3);
        assert_eq!(norm.order, 2);
    }

    #[test]
    fn c2_norm_dominates_nodal_maxima() {
        let u = square(rule40());
        let norm = u.c2_norm(1001).unwrap().value;
        for layer in [&u.u0, &u.u1, &u.u2] {
            for v in layer {
                assert!(norm >= v.abs() - 1e-12);
            }
        }
        assert!(u.c2_norm(50).is_err());
    }

    #[test]
    fn axpy_and_scale() {
        let rule = rule40();
        let u = square(Arc::clone(&rule));
        let v = DiscreteFunction::from_analytic(Arc::clone(&rule), |t| (t, 1.0, 0.0));

        let id = u.axpy(1.0, 0.0, &v).unwrap();
        assert_eq!(id.u0, u.u0);
        let copy = u.axpy(0.0, 1.0, &v).unwrap();
        assert_eq!(copy.u1, v.u1);
        let doubled = u.scaled(2.0);
        for i in 0..rule.len() {
            assert_abs_diff_eq!(doubled.u0[i], 2.0 * u.u0[i], epsilon = 1e-15);
            assert_abs_diff_eq!(doubled.u2[i], 4.0, epsilon = 1e-15);
        }

        let other = DiscreteFunction::from_analytic(Arc::new(gauss_rule(8).unwrap()), |t| {
            (t, 1.0, 0.0)
        });
        assert!(u.axpy(1.0, 1.0, &other).is_err());
    }

    #[test]
    fn extension_nodes_reproduce_layers() {
        // constant density f = 1, no boundary terms: u = -t^3/6 + t^2/4 - t/12
        let rule = rule40();
        let ext = Extension {
            breaks: vec![0.0, 1.0],
            f_panels: vec![vec![1.0; rule.len()]],
            h1: 0.0,
            h2: 0.0,
            scale: 1.0,
        };
        let u = DiscreteFunction::from_operator_output(Arc::clone(&rule), ext);
        for (i, &x) in rule.nodes().iter().enumerate() {
            assert_abs_diff_eq!(u.point_eval(0, x).unwrap(), u.u0[i], epsilon = 1e-12);
            assert_abs_diff_eq!(u.point_eval(2, x).unwrap(), u.u2[i], epsilon = 1e-12);
        }
        let cubic = |t: f64| -t * t * t / 6.0 + t * t / 4.0 - t / 12.0;
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert_abs_diff_eq!(u.point_eval(0, t).unwrap(), cubic(t), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(u.point_eval(0, 0.25).unwrap(), -1.0 / 128.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.point_eval(2, 0.0).unwrap(), 0.5, epsilon = 1e-12);
    }
}
