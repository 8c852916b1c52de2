//! Score function `L_β = −∂_β ln P_S` of the first-order model.

use serde::{Deserialize, Serialize};

use crate::bath::{SpectralDensity, ThermalBath};
use crate::correlations::{CorrelationOptions, CorrelationSet};
use crate::error::{Error, Result};
use crate::sequential::approx::{ApproxModel, PAIR_FLOOR};
use crate::sequential::{check_corr, check_record, joint_prob_approx, MeasurementProtocol, OutcomeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Exact β-derivative of the model log-probability, including the
    /// `e^{−2C⁺⁺₀}` factor of the marginals and the pair denominators.
    #[default]
    Full,
    /// `Σ_i s_i D₀ cosθ e^{−t/t₂}/P_i − Σ_{i<j} s_i s_j D_{j−i} sin²θ e^{−2t/t₂}/(P_i P_j)`,
    /// the leading-order form without the marginal factor.
    Leading,
}

/// Per-protocol constants shared by every record's score.
#[derive(Debug, Clone)]
pub struct ScoreKernel {
    model: ApproxModel,
    mode: ScoreMode,
    /// `∂_β P_{±1} = ±a D₀` for [`ScoreMode::Full`].
    dp: [f64; 2],
    /// `∂_β q_m`.
    dq: Vec<f64>,
    single_leading: f64,
    pair_leading: Vec<f64>,
}

impl ScoreKernel {
    pub fn new(protocol: &MeasurementProtocol, corr: &CorrelationSet, mode: ScoreMode) -> Result<Self> {
        check_corr(protocol, corr)?;
        let n = protocol.n_measurements;
        if corr.d_lags.len() < n {
            return Err(Error::Dependency("score needs derivative lags D_l for every lag".into()));
        }
        let model = ApproxModel::new(protocol, corr)?;
        let (sin, cos) = protocol.theta.sin_cos();
        let damp = (-2.0 * corr.t_over_t2).exp();
        let d0 = corr.d_lags[0];
        let da = 2.0 * model.mean * d0;
        Ok(ScoreKernel {
            dp: [0.5 * da, -0.5 * da],
            dq: corr.d_lags[..n].iter().map(|d| -sin * sin * d * damp).collect(),
            single_leading: d0 * cos * (-corr.t_over_t2).exp(),
            pair_leading: corr.d_lags[..n].iter().map(|d| d * sin * sin * damp).collect(),
            model,
            mode,
        })
    }

    pub fn score(&self, record: &OutcomeRecord) -> f64 {
        let s = record.outcomes();
        let m = &self.model;
        match self.mode {
            ScoreMode::Full => {
                let mut dlog = 0.0;
                for (i, &si) in s.iter().enumerate() {
                    let ki = usize::from(si < 0);
                    let (pi, dpi) = (m.single[ki], self.dp[ki]);
                    dlog += dpi / pi;
                    for (j, &sj) in s.iter().enumerate().skip(i + 1) {
                        let kj = usize::from(sj < 0);
                        let (pj, dpj) = (m.single[kj], self.dp[kj]);
                        let lag = j - i;
                        let f = m.pair_factor(lag, si, sj);
                        if f <= PAIR_FLOOR {
                            continue;
                        }
                        let den = pi * pj;
                        let df = f64::from(si * sj) * (self.dq[lag] / den - m.pair[lag] * (dpi * pj + pi * dpj) / (den * den));
                        dlog += df / f;
                    }
                }
                -dlog
            }
            ScoreMode::Leading => {
                let mut l = 0.0;
                for (i, &si) in s.iter().enumerate() {
                    let pi = m.p(si);
                    l += f64::from(si) * self.single_leading / pi;
                    for (j, &sj) in s.iter().enumerate().skip(i + 1) {
                        l -= f64::from(si * sj) * self.pair_leading[j - i] / (pi * m.p(sj));
                    }
                }
                l
            }
        }
    }
}

/// Score of one record. `corr` must carry `d_lags` at the same β as `c_pp`.
pub fn score_function(protocol: &MeasurementProtocol, corr: &CorrelationSet, record: &OutcomeRecord, mode: ScoreMode) -> Result<f64> {
    check_record(protocol, record)?;
    Ok(ScoreKernel::new(protocol, corr, mode)?.score(record))
}

/// `−∂_β ln P_S` by a central difference of the model log-probability with
/// step `rel_step·β`, recomputing the correlation blocks at `β ± h`.
pub fn score_finite_difference<S: SpectralDensity + Clone>(
    protocol: &MeasurementProtocol,
    bath: &ThermalBath<S>,
    record: &OutcomeRecord,
    opts: &CorrelationOptions,
    rel_step: f64,
) -> Result<f64> {
    check_record(protocol, record)?;
    if !(rel_step > 0.0 && rel_step < 1.0) {
        return Err(Error::domain(format!("relative step must lie in (0, 1), got {rel_step}")));
    }
    let h = rel_step * bath.beta;
    let log_p = |beta: f64| -> Result<f64> {
        let b = bath.with_beta(beta);
        let corr = CorrelationSet::compute(&b, protocol.grid(), opts)?;
        Ok(joint_prob_approx(protocol, &corr, record)?.log_value)
    };
    Ok(-(log_p(bath.beta + h)? - log_p(bath.beta - h)?) / (2.0 * h))
}
