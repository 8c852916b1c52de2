//! Joint outcome statistics of `N` sequential Ramsey measurements.
//!
//! Three independent routes are provided:
//! - [`approx`]: first-order product form in the classical blocks,
//! - [`exact`]: the path sum over forward/backward spin trajectories,
//! - [`sampler`]: a Gaussian auxiliary-field representation used for
//!   sampling and Monte Carlo probability estimates.

pub mod approx;
pub mod aux;
pub mod exact;
pub mod sampler;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use approx::{joint_prob_approx, single_outcome_prob, ApproxProbability};
pub use aux::{build_aux_covariance, AuxiliaryCovariance};
pub use exact::{exact_distribution, joint_prob_exact, ExactOracle, ExactProbability, DEFAULT_EXACT_MAX};
pub use sampler::{joint_prob_mc, joint_prob_mc_all, sample_records, sample_records_exact, McEstimate, MC_ALL_MAX};

/// Configuration of a measurement sequence: `N` windows of length `t`,
/// read out along `cos θ x̂ + sin θ ŷ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementProtocol {
    pub n_measurements: usize,
    pub window: f64,
    pub theta: f64,
}

impl MeasurementProtocol {
    pub fn new(n_measurements: usize, window: f64, theta: f64) -> Result<Self> {
        if n_measurements == 0 {
            return Err(Error::domain("need at least one measurement"));
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::domain(format!("window must be positive, got {window}")));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::domain(format!("theta must lie in [0, π], got {theta}")));
        }
        Ok(MeasurementProtocol {
            n_measurements,
            window,
            theta,
        })
    }

    pub fn grid(&self) -> crate::correlations::WindowGrid {
        crate::correlations::WindowGrid {
            t: self.window,
            n_windows: self.n_measurements,
        }
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.window, self.theta)
    }
}

/// Outcome string `s_1, …, s_N` with entries `±1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct OutcomeRecord(Vec<i8>);

impl OutcomeRecord {
    pub fn new(outcomes: Vec<i8>) -> Result<Self> {
        if let Some(bad) = outcomes.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::domain(format!("outcomes must be ±1, found {bad}")));
        }
        Ok(OutcomeRecord(outcomes))
    }

    /// Record whose bit `j` of `index` set means `s_{j+1} = −1`.
    pub fn from_index(index: usize, n: usize) -> Self {
        OutcomeRecord((0..n).map(|j| if index >> j & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &s)| if s < 0 { acc | 1 << j } else { acc })
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn outcomes(&self) -> &[i8] {
        &self.0
    }

    pub fn flipped(&self) -> Self {
        OutcomeRecord(self.0.iter().map(|s| -s).collect())
    }
}

impl TryFrom<Vec<i8>> for OutcomeRecord {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        OutcomeRecord::new(v)
    }
}

impl From<OutcomeRecord> for Vec<i8> {
    fn from(r: OutcomeRecord) -> Self {
        r.0
    }
}

/// All `2^N` records in index order.
pub fn all_records(n: usize) -> impl Iterator<Item = OutcomeRecord> {
    (0..1usize << n).map(move |i| OutcomeRecord::from_index(i, n))
}

pub(crate) fn check_record(protocol: &MeasurementProtocol, record: &OutcomeRecord) -> Result<()> {
    if record.len() != protocol.n_measurements {
        return Err(Error::domain(format!(
            "record has {} outcomes, protocol expects {}",
            record.len(),
            protocol.n_measurements
        )));
    }
    Ok(())
}

pub(crate) fn check_corr(protocol: &MeasurementProtocol, corr: &crate::correlations::CorrelationSet) -> Result<()> {
    if corr.c_pp.len() < protocol.n_measurements {
        return Err(Error::domain(format!(
            "correlation set covers {} lags, protocol needs {}",
            corr.c_pp.len(),
            protocol.n_measurements
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_index_round_trip() {
        for i in 0..64 {
            assert_eq!(OutcomeRecord::from_index(i, 6).index(), i);
        }
        assert!(OutcomeRecord::new(vec![1, 0, -1]).is_err());
    }

    #[test]
    fn protocol_validation() {
        assert!(MeasurementProtocol::new(0, 0.1, 0.0).is_err());
        assert!(MeasurementProtocol::new(1, -0.1, 0.0).is_err());
        assert!(MeasurementProtocol::new(1, 0.1, 4.0).is_err());
        assert!(MeasurementProtocol::new(1, 0.1, std::f64::consts::PI).is_ok());
    }
}
