//! Exact path-sum oracle.
//!
//! `P_S = 4^{−N} Σ_{η,η̄} e^{i Σ_j η⁻_j (θ + (1−s_j)π/2)} G(η, η̄)` with
//! `G = exp(−Σ_{l,j}[2C⁺⁺_{l,j} η⁻_l η⁻_j + 2i C⁺⁻_{l,j} η⁻_l η⁺_j] − Σ_j (η⁻_j)² t/t₂)`,
//! `η⁻ = η − η̄` and `η⁺ = η + η̄ − 1`.
//!
//! All `4^N` configurations are visited in Gray-code order, so each step
//! changes one window and the quadratic forms update in `O(N)`. The
//! outcome string enters only through `e^{iπ η⁻_j} = −1` on windows with
//! `s_j = −1`, so the per-configuration weights are accumulated by the
//! mask of windows with `η⁻ ≠ 0`; a record's probability is then a signed
//! sum over masks and the whole distribution is one Walsh–Hadamard transform.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_corr, check_record, MeasurementProtocol, OutcomeRecord};
use crate::bath::{SpectralDensity, ThermalBath};
use crate::correlations::{CorrelationOptions, CorrelationSet};
use crate::error::{Error, Result};

pub const DEFAULT_EXACT_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactProbability {
    pub value: f64,
    /// Imaginary residue of the path sum; zero up to rounding.
    pub imaginary: f64,
}

#[derive(Debug, Clone)]
pub struct ExactOracle {
    n: usize,
    /// Path weights summed per non-zero-η⁻ mask, already divided by `4^N`.
    by_mask: Vec<Complex64>,
}

impl ExactOracle {
    pub fn new(protocol: &MeasurementProtocol, corr: &CorrelationSet) -> Result<Self> {
        Self::with_capacity(protocol, corr, DEFAULT_EXACT_MAX)
    }

    pub fn with_capacity(protocol: &MeasurementProtocol, corr: &CorrelationSet, n_max: usize) -> Result<Self> {
        let n = protocol.n_measurements;
        if n > n_max {
            return Err(Error::Capacity(format!(
                "exact path sum limited to N ≤ {n_max} (4^N configurations), got N = {n}"
            )));
        }
        check_corr(protocol, corr)?;
        if corr.c_pm.as_ref().is_some_and(|c| c.len() < n) {
            return Err(Error::domain("quantum lag vector shorter than N"));
        }
        let by_mask = accumulate(n, protocol.theta, corr.t_over_t2, &corr.c_pp[..n], corr.c_pm.as_deref());
        Ok(ExactOracle { n, by_mask })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probability(&self, record: &OutcomeRecord) -> Result<ExactProbability> {
        if record.len() != self.n {
            return Err(Error::domain(format!(
                "record has {} outcomes, oracle built for {}",
                record.len(),
                self.n
            )));
        }
        let neg = record.index();
        let sum: Complex64 = self
            .by_mask
            .iter()
            .enumerate()
            .map(|(mask, w)| if (neg & mask).count_ones() % 2 == 1 { -w } else { *w })
            .sum();
        Ok(ExactProbability {
            value: sum.re,
            imaginary: sum.im,
        })
    }

    /// Probabilities of all `2^N` records, indexed as [`OutcomeRecord::index`].
    pub fn distribution(&self) -> Vec<ExactProbability> {
        let mut a = self.by_mask.clone();
        let len = a.len();
        let mut h = 1;
        while h < len {
            for block in (0..len).step_by(2 * h) {
                for k in block..block + h {
                    let (x, y) = (a[k], a[k + h]);
                    a[k] = x + y;
                    a[k + h] = x - y;
                }
            }
            h *= 2;
        }
        a.into_iter()
            .map(|c| ExactProbability {
                value: c.re,
                imaginary: c.im,
            })
            .collect()
    }
}

fn accumulate(n: usize, theta: f64, tau: f64, cpp: &[f64], cpm: Option<&[f64]>) -> Vec<Complex64> {
    let mut by_mask = vec![Complex64::new(0.0, 0.0); 1 << n];
    let norm = 0.25f64.powi(n as i32);
    let damp: Vec<f64> = (0..=n).map(|k| (-(k as f64) * tau).exp() * norm).collect();
    let phase: Vec<Complex64> = (0..=2 * n)
        .map(|k| Complex64::from_polar(1.0, theta * (k as f64 - n as f64)))
        .collect();

    // Per-window state bits: bit 0 = η, bit 1 = η̄.
    let mut state = vec![0u8; n];
    let mut minus = vec![0i32; n];
    let mut plus = vec![-1i32; n];
    // u_l = Σ_j C⁺⁺_{|l−j|} η⁻_j
    let mut u = vec![0.0f64; n];
    // w_j = Σ_l K_{l,j} η⁻_l and z_l = Σ_j K_{l,j} η⁺_j, with K_{l,j} = C⁺⁻_{l−j} for l ≥ j.
    let mut w = vec![0.0f64; n];
    let mut z: Vec<f64> = match cpm {
        Some(c) => (0..n).map(|l| -c[..=l].iter().sum::<f64>()).collect(),
        None => vec![0.0; n],
    };
    let (mut quad, mut q) = (0.0f64, 0.0f64);
    let (mut a, mut nz, mut mask) = (0i32, 0usize, 0usize);

    let total = 1usize << (2 * n);
    for step in 0..total {
        if step > 0 {
            let bit = step.trailing_zeros() as usize;
            let j = bit / 2;
            let flip = 1u8 << (bit % 2);
            let rising = state[j] & flip == 0;
            state[j] ^= flip;
            let delta = if rising { 1 } else { -1 };
            let (dm, dp) = if bit.is_multiple_of(2) { (delta, delta) } else { (-delta, delta) };
            let dmf = f64::from(dm);

            quad += 2.0 * dmf * u[j] + cpp[0] * dmf * dmf;
            for (l, ul) in u.iter_mut().enumerate() {
                *ul += cpp[l.abs_diff(j)] * dmf;
            }
            if let Some(c) = cpm {
                let dpf = f64::from(dp);
                q += dmf * z[j] + dpf * w[j] + c[0] * dmf * dpf;
                for l in j..n {
                    z[l] += c[l - j] * dpf;
                }
                for k in 0..=j {
                    w[k] += c[j - k] * dmf;
                }
            }

            let was_zero = minus[j] == 0;
            minus[j] += dm;
            plus[j] += dp;
            a += dm;
            match (was_zero, minus[j] == 0) {
                (true, false) => {
                    nz += 1;
                    mask |= 1 << j;
                }
                (false, true) => {
                    nz -= 1;
                    mask &= !(1 << j);
                }
                _ => {}
            }
            debug_assert_eq!(minus[j] * plus[j], 0);
        }
        let mut weight = phase[(a + n as i32) as usize] * ((-2.0 * quad).exp() * damp[nz]);
        if cpm.is_some() {
            weight *= Complex64::from_polar(1.0, -2.0 * q);
        }
        by_mask[mask] += weight;
    }
    by_mask
}

/// Exact probability of one record for a bath; blocks are computed with `opts`.
pub fn joint_prob_exact<S: SpectralDensity>(
    protocol: &MeasurementProtocol,
    bath: &ThermalBath<S>,
    record: &OutcomeRecord,
    opts: &CorrelationOptions,
) -> Result<ExactProbability> {
    check_record(protocol, record)?;
    if protocol.n_measurements > DEFAULT_EXACT_MAX {
        return Err(Error::Capacity(format!(
            "exact path sum limited to N ≤ {DEFAULT_EXACT_MAX}, got N = {}",
            protocol.n_measurements
        )));
    }
    let corr = CorrelationSet::compute(bath, protocol.grid(), opts)?;
    ExactOracle::new(protocol, &corr)?.probability(record)
}

/// Exact distribution over all `2^N` records.
pub fn exact_distribution(protocol: &MeasurementProtocol, corr: &CorrelationSet) -> Result<Vec<f64>> {
    Ok(ExactOracle::new(protocol, corr)?
        .distribution()
        .into_iter()
        .map(|p| p.value)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::WindowGrid;
    use crate::sequential::all_records;
    use std::f64::consts::FRAC_PI_2;

    fn synthetic(n: usize, tau: f64, cpp: Vec<f64>, cpm: Option<Vec<f64>>) -> CorrelationSet {
        CorrelationSet::from_lags(WindowGrid::new(0.1, n).unwrap(), tau, cpp, cpm).unwrap()
    }

    #[test]
    fn single_window_closed_form() {
        for theta in [0.0, 0.4, FRAC_PI_2, 2.5] {
            let corr = synthetic(1, 0.8, vec![0.05], Some(vec![0.3]));
            let p = MeasurementProtocol::new(1, 0.1, theta).unwrap();
            let oracle = ExactOracle::new(&p, &corr).unwrap();
            for s in [1i8, -1] {
                let got = oracle.probability(&OutcomeRecord::new(vec![s]).unwrap()).unwrap();
                let expect = 0.5 * (1.0 + f64::from(s) * theta.cos() * (-0.8f64 - 0.1).exp());
                assert!((got.value - expect).abs() < 1e-15);
                assert!(got.imaginary.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pair_correlation_closed_form() {
        // At θ = π/2: ⟨s₁s₂⟩ = e^{−2t/t₂ − 4C₀} sinh(4C₁).
        let (c0, c1, tau) = (0.02, 0.013, 1.0);
        let corr = synthetic(2, tau, vec![c0, c1], None);
        let p = MeasurementProtocol::new(2, 0.1, FRAC_PI_2).unwrap();
        let dist = exact_distribution(&p, &corr).unwrap();
        let corr_12: f64 = all_records(2)
            .map(|r| f64::from(r.outcomes()[0] * r.outcomes()[1]) * dist[r.index()])
            .sum();
        let expect = (-2.0 * tau - 4.0 * c0).exp() * (4.0 * c1).sinh();
        assert!((corr_12 - expect).abs() < 1e-15, "{corr_12} vs {expect}");
    }

    #[test]
    fn distribution_matches_per_record_sum() {
        let corr = synthetic(
            5,
            0.6,
            vec![0.03, 0.02, 0.01, 0.004, 0.001],
            Some(vec![-0.04, -0.09, -0.03, -0.01, -0.005]),
        );
        let p = MeasurementProtocol::new(5, 0.1, 0.9).unwrap();
        let oracle = ExactOracle::new(&p, &corr).unwrap();
        let dist = oracle.distribution();
        for r in all_records(5) {
            let direct = oracle.probability(&r).unwrap();
            assert!((direct.value - dist[r.index()].value).abs() < 1e-15);
        }
        let total: f64 = dist.iter().map(|p| p.value).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(dist.iter().all(|p| p.value >= 0.0 && p.imaginary.abs() < 1e-12));
    }

    #[test]
    fn capacity_enforced() {
        let corr = synthetic(11, 1.0, vec![0.0; 11], None);
        let p = MeasurementProtocol::new(11, 0.1, 0.0).unwrap();
        assert!(matches!(ExactOracle::new(&p, &corr), Err(Error::Capacity(_))));
        assert!(ExactOracle::with_capacity(&p, &corr, 11).is_ok());
    }
}
