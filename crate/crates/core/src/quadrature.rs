//! Gauss–Legendre quadrature on `(0, 1)`.

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Execution};

pub const DEFAULT_NODES: usize = 64;

/// Nodes and weights of the `n`-point rule mapped to `(0, 1)`, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid(
                "nodes",
                "quadrature needs at least one node",
            ));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th largest root on (-1, 1)
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map (-1,1) -> (0,1)
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `int_0^1 f`, with node evaluations possibly parallel and a fixed pairwise reduction.
    pub fn integrate<F>(&self, exec: Execution, f: F) -> f64
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let terms = exec.map_indices(self.len(), |k| self.weights[k] * f(self.nodes[k]));
        pairwise_sum(&terms)
    }

    /// Like [`integrate`](Self::integrate) but also returns the raw integrand values.
    pub fn integrate_with_samples<F>(&self, exec: Execution, f: F) -> (f64, Vec<f64>)
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let values = exec.map_indices(self.len(), |k| f(self.nodes[k]));
        let terms: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .collect();
        (pairwise_sum(&terms), values)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
