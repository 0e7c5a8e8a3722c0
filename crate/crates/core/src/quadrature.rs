//! Gauss–Legendre quadrature on finite intervals.
//!
//! Nodes come from Newton iteration on the three-term Legendre recurrence,
//! which is accurate to a few ulps for the orders used here (n up to a few
//! thousand). Larger node counts go through the composite rule, which tiles
//! the interval with fixed-order panels.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Largest order accepted by the single-panel rule. Node generation is O(n²).
pub const MAX_SINGLE_PANEL_ORDER: usize = 4096;

/// Nodes and weights of an n-point rule on [-1, 1], nodes ascending.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                dp = legendre_with_derivative(n, x).1;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule family used to discretize k-space integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureRule {
    /// One Gauss–Legendre panel with n nodes.
    #[default]
    GaussLegendre,
    /// Equal-width panels of `order` Gauss–Legendre nodes each; n is rounded
    /// up to a multiple of `order`.
    CompositeGaussLegendre { order: usize },
}


impl QuadratureRule {
    pub const COMPOSITE_DEFAULT_ORDER: usize = 16;

    /// Nodes and weights for `n` points on [a, b], nodes ascending.
    pub fn nodes(&self, n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        match *self {
            QuadratureRule::GaussLegendre => {
                let (x, w) = gauss_legendre_unit(n);
                map_to_interval(&x, &w, a, b)
            }
            QuadratureRule::CompositeGaussLegendre { order } => {
                let order = order.max(1);
                let panels = n.div_ceil(order).max(1);
                let (ux, uw) = gauss_legendre_unit(order);
                let width = (b - a) / panels as f64;
                let mut nodes = Vec::with_capacity(panels * order);
                let mut weights = Vec::with_capacity(panels * order);
                for p in 0..panels {
                    let lo = a + width * p as f64;
                    let hi = if p + 1 == panels { b } else { lo + width };
                    let (x, w) = map_to_interval(&ux, &uw, lo, hi);
                    nodes.extend(x);
                    weights.extend(w);
                }
                (nodes, weights)
            }
        }
    }

    /// Actual node count produced for a requested count.
    pub fn effective_count(&self, n: usize) -> usize {
        match *self {
            QuadratureRule::GaussLegendre => n,
            QuadratureRule::CompositeGaussLegendre { order } => {
                let order = order.max(1);
                n.div_ceil(order).max(1) * order
            }
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, n: usize, a: f64, b: f64, f: F) -> f64 {
        let (x, w) = self.nodes(n, a, b);
        x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).sum()
    }
}

fn map_to_interval(x: &[f64], w: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| half * wi).collect(),
    )
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadratureRule::GaussLegendre => write!(f, "gauss_legendre"),
            QuadratureRule::CompositeGaussLegendre { .. } => {
                write!(f, "composite_gauss_legendre")
            }
        }
    }
}

impl FromStr for QuadratureRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gauss_legendre" => Ok(QuadratureRule::GaussLegendre),
            "composite_gauss_legendre" => Ok(QuadratureRule::CompositeGaussLegendre {
                order: Self::COMPOSITE_DEFAULT_ORDER,
            }),
            other => Err(format!("unknown quadrature rule '{other}'")),
        }
    }
}
