//! Composite Gauss-Legendre quadrature on `[0, upper]`.
//!
//! The first panel is refined geometrically toward the origin so that the
//! integrable algebraic endpoint behaviour of sub-Ohmic integrands is
//! resolved without evaluating at `ω = 0`. Scalar integrals double the panel
//! count until the relative change drops below the tolerance; lag transforms
//! reuse one converged node set for every lag.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};

const GL_ORDER: usize = 16;
const GRADING_LEVELS: usize = 30;
const GRADING_RATIO: f64 = 0.25;
const MAX_PANELS: usize = 1 << 20;
/// Lags per work unit in [`lag_transform`]; also the reseed interval of the rotation recurrence.
const LAG_CHUNK: usize = 256;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn reference_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Flattened composite-rule nodes and weights.
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub panels: usize,
}

impl NodeSet {
    /// `panels` uniform panels on `[0, upper]`, the first one graded toward 0.
    pub fn graded(upper: f64, panels: usize) -> Self {
        let (xs, ws) = reference_rule();
        let h = upper / panels as f64;
        let mut edges = Vec::with_capacity(panels + GRADING_LEVELS + 1);
        edges.push(0.0);
        let mut inner = h * GRADING_RATIO.powi(GRADING_LEVELS as i32);
        for _ in 0..GRADING_LEVELS {
            edges.push(inner);
            inner /= GRADING_RATIO;
        }
        for k in 1..=panels {
            edges.push(h * k as f64);
        }
        let mut nodes = Vec::with_capacity(edges.len() * GL_ORDER);
        let mut weights = Vec::with_capacity(edges.len() * GL_ORDER);
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in xs.iter().zip(ws) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        NodeSet { nodes, weights, panels }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Integration {
    pub upper: f64,
    /// Lower bound on the panel count, e.g. to resolve a known oscillation.
    pub min_panels: usize,
    pub rel_tol: f64,
    /// Changes below this absolute size count as converged.
    pub abs_floor: f64,
}

impl Integration {
    pub fn new(upper: f64) -> Self {
        Integration {
            upper,
            min_panels: 8,
            rel_tol: 1e-9,
            abs_floor: 1e-300,
        }
    }

    /// Requests enough panels to resolve `cos(phase_rate · ω)` across the range.
    pub fn oscillating(mut self, phase_rate: f64) -> Self {
        self.min_panels = self.min_panels.max(panels_for_phase(self.upper * phase_rate));
        self
    }
}

pub(crate) fn panels_for_phase(phase: f64) -> usize {
    (phase.abs() / 4.0).ceil() as usize + 8
}

/// Integrates `f` on `[0, upper]`, doubling panels until the relative change
/// is below `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(spec: Integration, f: F) -> Result<f64> {
    if spec.upper.is_nan() || spec.upper < 0.0 {
        return Err(Error::domain(format!("invalid integration bound {}", spec.upper)));
    }
    if spec.upper == 0.0 {
        return Ok(0.0);
    }
    let mut panels = spec.min_panels.max(1);
    let mut prev = NodeSet::graded(spec.upper, panels).integrate(&f);
    loop {
        panels *= 2;
        let set = NodeSet::graded(spec.upper, panels);
        let cur = set.integrate(&f);
        let change = (cur - prev).abs();
        if !cur.is_finite() {
            return Err(Error::Numerical {
                message: "non-finite integrand".into(),
                estimate: cur,
                change,
                nodes: set.len(),
            });
        }
        if change <= spec.rel_tol * cur.abs() || change <= spec.abs_floor {
            return Ok(cur);
        }
        if panels >= MAX_PANELS {
            return Err(Error::Numerical {
                message: "quadrature did not converge".into(),
                estimate: cur,
                change,
                nodes: set.len(),
            });
        }
        prev = cur;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Harmonic {
    Cos,
    Sin,
}

/// Computes `out[m] = Σ_k f_k · h(m · x_k)` for `m in 0..n_lags`, where `h`
/// is cos or sin. `f` already includes the quadrature weights.
///
/// Lags are processed in chunks; within a chunk `(cos, sin)(m x)` advance by
/// rotation and are reseeded exactly at each chunk start. Each output entry
/// is a sum in node order, so the result does not depend on `exec`.
pub fn lag_transform(exec: Execution, f: &[f64], x: &[f64], n_lags: usize, harmonic: Harmonic) -> Vec<f64> {
    debug_assert_eq!(f.len(), x.len());
    let (step_c, step_s): (Vec<f64>, Vec<f64>) = x.iter().map(|&v| (v.cos(), v.sin())).unzip();
    let chunks = map_indexed(exec, n_lags.div_ceil(LAG_CHUNK), |chunk| {
        let start = chunk * LAG_CHUNK;
        let end = (start + LAG_CHUNK).min(n_lags);
        let mut c: Vec<f64> = x.iter().map(|&v| (start as f64 * v).cos()).collect();
        let mut s: Vec<f64> = x.iter().map(|&v| (start as f64 * v).sin()).collect();
        let mut out = Vec::with_capacity(end - start);
        for _ in start..end {
            let basis = match harmonic {
                Harmonic::Cos => &c,
                Harmonic::Sin => &s,
            };
            out.push(f.iter().zip(basis).map(|(a, b)| a * b).sum::<f64>());
            for k in 0..c.len() {
                let (ck, sk) = (c[k], s[k]);
                c[k] = ck * step_c[k] - sk * step_s[k];
                s[k] = sk * step_c[k] + ck * step_s[k];
            }
        }
        out
    });
    chunks.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(GL_ORDER);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // ∫_{-1}^{1} x^30 dx = 2/31
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn graded_rule_handles_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let v = integrate(Integration::new(1.0), |x| x.powf(-0.5)).unwrap();
        assert!((v - 2.0).abs() < 1e-7, "{v}");
    }

    #[test]
    fn exponential_integral() {
        let v = integrate(Integration::new(50.0), |x| (-x).exp()).unwrap();
        assert!((v - (1.0 - (-50.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn lag_transform_matches_direct_cosines() {
        let set = NodeSet::graded(2.0, 64);
        let f: Vec<f64> = set.nodes.iter().zip(&set.weights).map(|(x, w)| w * (-x).exp()).collect();
        let x: Vec<f64> = set.nodes.iter().map(|v| 0.37 * v).collect();
        let fast = lag_transform(Execution::Sequential, &f, &x, 700, Harmonic::Cos);
        let sin = lag_transform(Execution::Sequential, &f, &x, 700, Harmonic::Sin);
        for m in [0usize, 1, 255, 256, 257, 699] {
            let direct: f64 = f.iter().zip(&x).map(|(a, v)| a * (m as f64 * v).cos()).sum();
            let direct_s: f64 = f.iter().zip(&x).map(|(a, v)| a * (m as f64 * v).sin()).sum();
            assert!((fast[m] - direct).abs() < 1e-12, "m={m}");
            assert!((sin[m] - direct_s).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn lag_transform_is_execution_independent() {
        let set = NodeSet::graded(1.0, 40);
        let f: Vec<f64> = set.weights.clone();
        let x: Vec<f64> = set.nodes.iter().map(|v| 3.0 * v).collect();
        let a = lag_transform(Execution::Sequential, &f, &x, 1000, Harmonic::Cos);
        let b = lag_transform(Execution::Parallel, &f, &x, 1000, Harmonic::Cos);
        assert_eq!(a, b);
    }
}
