//! Gauss-Legendre quadrature on [0, 1] and diagonal-split integration.

use crate::error::{Error, Result};

/// An n-point Gauss-Legendre rule mapped to [0, 1], exact for polynomials of
/// degree <= 2n - 1. Also carries barycentric interpolation weights for the
/// nodes, used for off-node density evaluation elsewhere in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
}

/// Build the n-point Gauss-Legendre rule on [0, 1].
///
/// Nodes are found by Newton iteration on the Legendre polynomial, seeded
/// with the Chebyshev-based asymptotic guess; this is accurate to ~1e-15 for
/// the supported orders.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > 512 {
        return Err(Error::QuadratureOrder(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // root i (descending in x on [-1,1]); converges in a handful of steps
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1], flipping so nodes come out increasing
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    let bary = barycentric_weights(&nodes);
    Ok(QuadratureRule {
        nodes,
        weights,
        bary,
    })
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut b = vec![1.0; n];
    for i in 0..n {
        for j in 0..n {
            if j != i {
                b[i] /= nodes[i] - nodes[j];
            }
        }
    }
    let max = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        for v in &mut b {
            *v /= max;
        }
    }
    b
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bary_weights(&self) -> &[f64] {
        &self.bary
    }

    /// Sum of w_i * g(x_i) over [0, 1].
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// Integrate over [a, b] by affine mapping of the rule.
    pub fn integrate_on<F: Fn(f64) -> f64>(&self, a: f64, b: f64, g: F) -> f64 {
        let len = b - a;
        if len <= 0.0 {
            return 0.0;
        }
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| len * w * g(a + len * x))
            .sum()
    }

    /// Apply the rule on [0, split] and [split, 1] separately; degenerate
    /// subintervals contribute nothing.
    pub fn integrate_split<F: Fn(f64) -> f64>(&self, g: F, split: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&split) || split.is_nan() {
            return Err(Error::Domain {
                name: "split",
                value: split,
                expected: "[0, 1]",
            });
        }
        Ok(self.integrate_on(0.0, split, &g) + self.integrate_on(split, 1.0, &g))
    }

    /// Barycentric interpolation of nodal `values` at `t`. Exact pass-through
    /// when `t` coincides with a node.
    pub fn barycentric_eval(&self, values: &[f64], t: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.nodes.len() {
            let d = t - self.nodes[i];
            if d.abs() < 1e-300 {
                return values[i];
            }
            let c = self.bary[i] / d;
            num += c * values[i];
            den += c;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_point_rule_is_midpoint() {
        let r = gauss_rule(1).unwrap();
        assert_abs_diff_eq!(r.nodes()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_point_rule() {
        let r = gauss_rule(2).unwrap();
        let lo = 0.5 * (1.0 - 1.0 / 3.0_f64.sqrt());
        let hi = 0.5 * (1.0 + 1.0 / 3.0_f64.sqrt());
        assert_abs_diff_eq!(r.nodes()[0], lo, epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes()[1], hi, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn order_bounds() {
        assert!(gauss_rule(0).is_err());
        assert!(gauss_rule(513).is_err());
        assert!(gauss_rule(512).is_ok());
    }

    #[test]
    fn weights_sum_to_one_nodes_increasing() {
        for n in [1, 2, 5, 17, 40, 64] {
            let r = gauss_rule(n).unwrap();
            let sum: f64 = r.weights().iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-14);
            for w in r.weights() {
                assert!(*w > 0.0);
            }
            for i in 1..n {
                assert!(r.nodes()[i] > r.nodes()[i - 1]);
            }
            assert!(r.nodes()[0] > 0.0 && r.nodes()[n - 1] < 1.0);
        }
    }

    #[test]
    fn polynomial_exactness() {
        // degree <= 2n - 1, monomials against 1/(d+1)
        for n in 1..=10 {
            let r = gauss_rule(n).unwrap();
            for d in 0..=(2 * n - 1) {
                let got = r.integrate(|x| x.powi(d as i32));
                assert_abs_diff_eq!(got, 1.0 / (d as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn five_point_rule_integrates_degree_nine() {
        let r = gauss_rule(5).unwrap();
        assert_abs_diff_eq!(r.integrate(|s| s.powi(9)), 0.1, epsilon = 1e-14);
    }

    #[test]
    fn integrate_examples() {
        let r = gauss_rule(8).unwrap();
        assert_eq!(r.integrate(|_| 0.0), 0.0);
        let g = |s: f64| (1.0 - s) * (1.0 - s) * (2.0 * s + 1.0) * s;
        assert_abs_diff_eq!(r.integrate(g), 3.0 / 20.0, epsilon = 1e-14);
        let g2 = |s: f64| s * s * (3.0 - 2.0 * s);
        assert_abs_diff_eq!(r.integrate(g2), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn split_examples() {
        let r = gauss_rule(4).unwrap();
        let g = |s: f64| s * s * s;
        assert_abs_diff_eq!(
            r.integrate_split(g, 0.0).unwrap(),
            r.integrate(g),
            epsilon = 1e-15
        );
        let step = |s: f64| if s < 0.3 { 0.0 } else { 1.0 };
        assert_abs_diff_eq!(r.integrate_split(step, 0.3).unwrap(), 0.7, epsilon = 1e-15);
        let r2 = gauss_rule(2).unwrap();
        assert_abs_diff_eq!(
            r2.integrate_split(|s| s, 0.5).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert!(r.integrate_split(|s| s, 1.5).is_err());
    }

    #[test]
    fn barycentric_reproduces_polynomials() {
        let r = gauss_rule(12).unwrap();
        let vals: Vec<f64> = r.nodes().iter().map(|&x| 3.0 * x * x - x + 0.25).collect();
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let expect = 3.0 * t * t - t + 0.25;
            assert_abs_diff_eq!(r.barycentric_eval(&vals, t), expect, epsilon = 1e-12);
        }
        // node pass-through
        assert_eq!(r.barycentric_eval(&vals, r.nodes()[3]), vals[3]);
    }
}
