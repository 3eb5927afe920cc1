//! Gauss–Legendre rules and tensor-product integration over rectangles.

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("Gauss-Legendre rule needs at least one node".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        // Roots are symmetric; solve for the upper half with Newton on P_n.
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

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

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let xs = self.nodes.iter().map(|&x| mid + half * x).collect();
        let ws = self.weights.iter().map(|&w| half * w).collect();
        (xs, ws)
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        let (xs, ws) = self.mapped(a, b);
        let terms: Vec<f64> = xs.iter().zip(&ws).map(|(&x, &w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Tensor-product rule over `[a, b] × [c, d]`. Empty rectangles integrate to exactly 0.
pub fn integrate_rect<F: FnMut(f64, f64) -> f64>(
    rule: &GaussLegendre,
    (a, b): (f64, f64),
    (c, d): (f64, f64),
    mut f: F,
) -> f64 {
    if b <= a || d <= c {
        return 0.0;
    }
    let (xs, wx) = rule.mapped(a, b);
    let (ys, wy) = rule.mapped(c, d);
    let mut rows = Vec::with_capacity(xs.len());
    let mut inner = Vec::with_capacity(ys.len());
    for (x, w) in xs.iter().zip(&wx) {
        inner.clear();
        inner.extend(ys.iter().zip(&wy).map(|(&y, &v)| v * f(*x, y)));
        rows.push(w * pairwise_sum(&inner));
    }
    pairwise_sum(&rows)
}
