//! First-order model of the joint outcome distribution.
//!
//! `P_S ≈ ∏ P_{s_i} ∏_{i<j} [1 + s_i s_j sin²θ C⁺⁺_{j−i} e^{−2t/t₂} / (P_{s_i} P_{s_j})]`
//! with `P_s = ½(1 + s cos θ e^{−t/t₂ − 2C⁺⁺₀})`. The sign of the pair term
//! and the factor 2 in the single-outcome exponent follow the exact path sum.

use serde::{Deserialize, Serialize};

use super::{check_corr, check_record, MeasurementProtocol, OutcomeRecord};
use crate::correlations::CorrelationSet;
use crate::error::{Error, Result};

/// Pair factors are floored here in the log-probability.
pub const PAIR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxProbability {
    pub value: f64,
    pub log_value: f64,
    /// The raw product left `[0, 1]` or a pair factor went non-positive.
    pub clamped: bool,
}

/// Precomputed single-outcome probabilities and pair amplitudes.
#[derive(Debug, Clone)]
pub struct ApproxModel {
    /// Mean outcome `cos θ e^{−t/t₂−2C⁺⁺₀}`.
    pub mean: f64,
    /// `[P_{+1}, P_{−1}]`.
    pub single: [f64; 2],
    /// `q_m = sin²θ C⁺⁺_m e^{−2t/t₂}` for `m < N`.
    pub pair: Vec<f64>,
}

#[inline]
pub(crate) fn slot(s: i8) -> usize {
    usize::from(s < 0)
}

impl ApproxModel {
    pub fn new(protocol: &MeasurementProtocol, corr: &CorrelationSet) -> Result<Self> {
        check_corr(protocol, corr)?;
        let n = protocol.n_measurements;
        let (sin, cos) = protocol.theta.sin_cos();
        let mean = cos * (-corr.t_over_t2 - 2.0 * corr.c_pp[0]).exp();
        let damp = (-2.0 * corr.t_over_t2).exp();
        let pair: Vec<f64> = corr.c_pp[..n].iter().map(|c| sin * sin * c * damp).collect();
        if n > 1 {
            let max_off = corr.c_pp[1..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max_off > 0.1 {
                log::warn!("off-diagonal C⁺⁺ up to {max_off:.3e}: outside the weak-correlation regime");
            }
        }
        Ok(ApproxModel {
            mean,
            single: [0.5 * (1.0 + mean), 0.5 * (1.0 - mean)],
            pair,
        })
    }

    #[inline]
    pub fn p(&self, s: i8) -> f64 {
        self.single[slot(s)]
    }

    /// `1 + s_i s_j q_m / (P_{s_i} P_{s_j})`.
    #[inline]
    pub fn pair_factor(&self, lag: usize, si: i8, sj: i8) -> f64 {
        1.0 + f64::from(si * sj) * self.pair[lag] / (self.p(si) * self.p(sj))
    }

    pub fn evaluate(&self, record: &OutcomeRecord) -> ApproxProbability {
        let s = record.outcomes();
        let mut value = 1.0;
        let mut log_value = 0.0;
        let mut clamped = false;
        for (i, &si) in s.iter().enumerate() {
            let p = self.p(si);
            value *= p;
            log_value += p.ln();
            for (j, &sj) in s.iter().enumerate().skip(i + 1) {
                let f = self.pair_factor(j - i, si, sj);
                value *= f;
                if f <= PAIR_FLOOR {
                    clamped = true;
                }
                log_value += f.max(PAIR_FLOOR).ln();
            }
        }
        if !(0.0..=1.0).contains(&value) {
            clamped = true;
            value = value.clamp(0.0, 1.0);
        }
        ApproxProbability { value, log_value, clamped }
    }
}

/// `P_s = ½ + (s/2) cos θ e^{−t/t₂ − 2C⁺⁺₀}` for outcome `index` (0-based).
pub fn single_outcome_prob(protocol: &MeasurementProtocol, corr: &CorrelationSet, index: usize, s: i8) -> Result<f64> {
    check_corr(protocol, corr)?;
    if index >= protocol.n_measurements {
        return Err(Error::domain(format!(
            "outcome index {index} outside 0..{}",
            protocol.n_measurements
        )));
    }
    if s != 1 && s != -1 {
        return Err(Error::domain(format!("outcome must be ±1, got {s}")));
    }
    let mean = protocol.theta.cos() * (-corr.t_over_t2 - 2.0 * corr.c_pp[0]).exp();
    Ok(0.5 * (1.0 + f64::from(s) * mean))
}

pub fn joint_prob_approx(protocol: &MeasurementProtocol, corr: &CorrelationSet, record: &OutcomeRecord) -> Result<ApproxProbability> {
    check_record(protocol, record)?;
    Ok(ApproxModel::new(protocol, corr)?.evaluate(record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::WindowGrid;
    use crate::sequential::all_records;
    use std::f64::consts::FRAC_PI_2;

    fn synthetic(n: usize, tau: f64, lags: Vec<f64>) -> CorrelationSet {
        CorrelationSet::from_lags(WindowGrid::new(0.1, n).unwrap(), tau, lags, None).unwrap()
    }

    #[test]
    fn equator_gives_half() {
        let corr = synthetic(3, 1.0, vec![0.01, 0.005, 0.001]);
        let p = MeasurementProtocol::new(3, 0.1, FRAC_PI_2).unwrap();
        for s in [1, -1] {
            assert!((single_outcome_prob(&p, &corr, 0, s).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_revival() {
        let corr = synthetic(1, 0.0, vec![0.0]);
        let p = MeasurementProtocol::new(1, 0.1, 0.0).unwrap();
        assert_eq!(single_outcome_prob(&p, &corr, 0, 1).unwrap(), 1.0);
        assert_eq!(single_outcome_prob(&p, &corr, 0, -1).unwrap(), 0.0);
    }

    #[test]
    fn theta_zero_factorises() {
        let corr = synthetic(4, 0.7, vec![0.02, 0.01, 0.008, 0.004]);
        let p = MeasurementProtocol::new(4, 0.1, 0.0).unwrap();
        for r in all_records(4) {
            let prod: f64 = (0..4)
                .map(|i| single_outcome_prob(&p, &corr, i, r.outcomes()[i]).unwrap())
                .product();
            let joint = joint_prob_approx(&p, &corr, &r).unwrap();
            assert!((joint.value - prod).abs() < 1e-15);
            assert!(!joint.clamped);
        }
    }

    #[test]
    fn single_window_matches_marginal() {
        let corr = synthetic(1, 0.4, vec![0.03]);
        let p = MeasurementProtocol::new(1, 0.1, 0.7).unwrap();
        for s in [1i8, -1] {
            let r = OutcomeRecord::new(vec![s]).unwrap();
            let j = joint_prob_approx(&p, &corr, &r).unwrap();
            assert!((j.value - single_outcome_prob(&p, &corr, 0, s).unwrap()).abs() < 1e-15);
            assert!((j.log_value - j.value.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn strong_correlation_is_flagged() {
        let corr = synthetic(3, 0.0, vec![1.0, 1.0, 1.0]);
        let p = MeasurementProtocol::new(3, 0.1, FRAC_PI_2).unwrap();
        let r = OutcomeRecord::new(vec![1, -1, 1]).unwrap();
        let j = joint_prob_approx(&p, &corr, &r).unwrap();
        assert!(j.clamped);
        assert!((0.0..=1.0).contains(&j.value));
    }

    #[test]
    fn wrong_record_length_rejected() {
        let corr = synthetic(3, 1.0, vec![0.0; 3]);
        let p = MeasurementProtocol::new(3, 0.1, 0.0).unwrap();
        assert!(joint_prob_approx(&p, &corr, &OutcomeRecord::new(vec![1, 1]).unwrap()).is_err());
    }
}
