//! Quadrature rules and deterministic reductions shared by the surface and
//! functional code.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Pairwise (cascade) summation; the split points depend only on the length,
/// so the result is independent of how the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    #[default]
    Midpoint,
    GaussLegendre,
}

/// Nodes and weights on [0, 1].
pub fn rule_1d(rule: Rule, n: usize) -> Vec<(f64, f64)> {
    match rule {
        Rule::Midpoint => (0..n).map(|i| ((i as f64 + 0.5) / n as f64, 1.0 / n as f64)).collect(),
        Rule::GaussLegendre => gauss_legendre(n).into_iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect(),
    }
}

/// Gauss-Legendre on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
}

/// Tensor grid on [0,1]² in row-major (t outer, s inner) order: (s, t, weight).
pub fn tensor_grid(rule: Rule, n: usize) -> Vec<(f64, f64, f64)> {
    let r = rule_1d(rule, n);
    let mut out = Vec::with_capacity(n * n);
    for &(t, wt) in &r {
        for &(s, ws) in &r {
            out.push((s, t, ws * wt));
        }
    }
    out
}

/// Σ_{m,n} exp(-beta |x_m - y_n|²) ⟨u_m, v_n⟩ over R^4 points with 6-vector weights.
/// Rows run in parallel; row totals are combined by pairwise summation in index order.
pub fn gaussian_double_sum(xs: &[[f64; 4]], us: &[[f64; 6]], ys: &[[f64; 4]], vs: &[[f64; 6]], beta: f64) -> f64 {
    let rows: Vec<f64> = xs
        .par_iter()
        .zip(us.par_iter())
        .map(|(x, u)| {
            let mut terms = Vec::with_capacity(ys.len());
            for (y, v) in ys.iter().zip(vs.iter()) {
                let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                if dot == 0.0 {
                    terms.push(0.0);
                    continue;
                }
                let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                terms.push((-beta * d2).exp() * dot);
            }
            pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&rows)
}
