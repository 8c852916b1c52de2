//! Record sampling and Monte Carlo probability estimates.
//!
//! Record (or sample) `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on
//! stream `i`: first `N` standard normals for the field, then `N` uniforms
//! for the outcomes. Results are therefore independent of the execution
//! strategy and of how work is chunked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::aux::AuxiliaryCovariance;
use super::exact::ExactOracle;
use super::{check_record, MeasurementProtocol, OutcomeRecord};
use crate::error::{Error, Result};
use crate::par::{chunked_reduce, map_indexed, Execution};

const CHUNK: usize = 1024;
/// Largest `N` for which all `2^N` probabilities are estimated at once.
pub const MC_ALL_MAX: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    /// Standard error of the mean.
    pub se: f64,
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws the field for one stream and returns `p_j = ½(1 + cos(2φ_j + θ))`,
/// the conditional probability of `s_j = +1`.
fn conditional_plus(aux: &AuxiliaryCovariance, theta: f64, rng: &mut ChaCha8Rng, z: &mut [f64], phi: &mut [f64], out: &mut [f64]) {
    for zi in z.iter_mut() {
        *zi = rng.sample(StandardNormal);
    }
    aux.field(z, phi);
    for (o, f) in out.iter_mut().zip(phi.iter()) {
        *o = 0.5 * (1.0 + (2.0 * f + theta).cos());
    }
}

fn check_aux(protocol: &MeasurementProtocol, aux: &AuxiliaryCovariance) -> Result<()> {
    if aux.n() != protocol.n_measurements {
        return Err(Error::domain(format!(
            "auxiliary covariance is {0}x{0}, protocol has N = {1}",
            aux.n(),
            protocol.n_measurements
        )));
    }
    Ok(())
}

pub fn sample_records(
    protocol: &MeasurementProtocol,
    aux: &AuxiliaryCovariance,
    n_records: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<OutcomeRecord>> {
    check_aux(protocol, aux)?;
    let n = protocol.n_measurements;
    let theta = protocol.theta;
    Ok(map_indexed(exec, n_records, |i| {
        let mut rng = stream(seed, i);
        let (mut z, mut phi, mut p) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        conditional_plus(aux, theta, &mut rng, &mut z, &mut phi, &mut p);
        let s = p.iter().map(|&pj| if rng.random::<f64>() < pj { 1 } else { -1 }).collect();
        OutcomeRecord::new(s).expect("outcomes are ±1")
    }))
}

/// Records drawn from the exact path-sum distribution by inverse CDF, one
/// uniform per record from stream `i`. Round-off negatives are set to zero.
pub fn sample_records_exact(oracle: &ExactOracle, n_records: usize, seed: u64, exec: Execution) -> Vec<OutcomeRecord> {
    let n = oracle.n();
    let mut cdf: Vec<f64> = oracle.distribution().iter().map(|p| p.value.max(0.0)).collect();
    let mut acc = 0.0;
    for c in cdf.iter_mut() {
        acc += *c;
        *c = acc;
    }
    map_indexed(exec, n_records, |i| {
        let u = stream(seed, i).random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        OutcomeRecord::from_index(k, n)
    })
}

#[derive(Clone)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn merge(mut self, other: Moments) -> Moments {
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(other.sum_sq) {
            *a += b;
        }
        self
    }

    fn finish(self, samples: usize) -> Vec<McEstimate> {
        let m = samples as f64;
        self.sum
            .into_iter()
            .zip(self.sum_sq)
            .map(|(s, q)| {
                let mean = s / m;
                let var = if samples > 1 {
                    ((q - m * mean * mean) / (m - 1.0)).max(0.0)
                } else {
                    0.0
                };
                McEstimate {
                    value: mean,
                    se: (var / m).sqrt(),
                }
            })
            .collect()
    }
}

/// `E_φ[∏_j ½(1 + s_j cos(2φ_j + θ))]` from `n_samples` field draws.
pub fn joint_prob_mc(
    protocol: &MeasurementProtocol,
    aux: &AuxiliaryCovariance,
    record: &OutcomeRecord,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    check_record(protocol, record)?;
    check_aux(protocol, aux)?;
    if n_samples == 0 {
        return Err(Error::InsufficientData("need at least one sample".into()));
    }
    let n = protocol.n_measurements;
    let s = record.outcomes();
    let moments = chunked_reduce(
        exec,
        n_samples,
        CHUNK,
        |range| {
            let (mut z, mut phi, mut p) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let mut m = Moments {
                sum: vec![0.0],
                sum_sq: vec![0.0],
            };
            for i in range {
                let mut rng = stream(seed, i);
                conditional_plus(aux, protocol.theta, &mut rng, &mut z, &mut phi, &mut p);
                let v: f64 = p.iter().zip(s).map(|(&pj, &sj)| if sj > 0 { pj } else { 1.0 - pj }).product();
                m.sum[0] += v;
                m.sum_sq[0] += v * v;
            }
            m
        },
        Moments::merge,
    )
    .expect("n_samples > 0");
    Ok(moments.finish(n_samples)[0])
}

/// Estimates for all `2^N` records from one shared set of field draws,
/// indexed as [`OutcomeRecord::index`]. The values sum to one exactly up to
/// rounding.
pub fn joint_prob_mc_all(
    protocol: &MeasurementProtocol,
    aux: &AuxiliaryCovariance,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<McEstimate>> {
    check_aux(protocol, aux)?;
    let n = protocol.n_measurements;
    if n > MC_ALL_MAX {
        return Err(Error::Capacity(format!("all-record estimate limited to N ≤ {MC_ALL_MAX}, got {n}")));
    }
    if n_samples == 0 {
        return Err(Error::InsufficientData("need at least one sample".into()));
    }
    let size = 1usize << n;
    let moments = chunked_reduce(
        exec,
        n_samples,
        CHUNK,
        |range| {
            let (mut z, mut phi, mut p) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let mut probs = vec![0.0; size];
            let mut m = Moments {
                sum: vec![0.0; size],
                sum_sq: vec![0.0; size],
            };
            for i in range {
                let mut rng = stream(seed, i);
                conditional_plus(aux, protocol.theta, &mut rng, &mut z, &mut phi, &mut p);
                probs[0] = 1.0;
                for (j, &pj) in p.iter().enumerate() {
                    let half = 1usize << j;
                    for k in 0..half {
                        let base = probs[k];
                        probs[k] = base * pj;
                        probs[k + half] = base * (1.0 - pj);
                    }
                }
                for ((s, q), v) in m.sum.iter_mut().zip(m.sum_sq.iter_mut()).zip(&probs) {
                    *s += v;
                    *q += v * v;
                }
            }
            m
        },
        Moments::merge,
    )
    .expect("n_samples > 0");
    Ok(moments.finish(n_samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{CorrelationSet, WindowGrid};
    use crate::sequential::build_aux_covariance;

    fn setup(n: usize, theta: f64) -> (MeasurementProtocol, AuxiliaryCovariance) {
        let lags: Vec<f64> = (0..n).map(|m| 0.02 * 0.6f64.powi(m as i32)).collect();
        let corr = CorrelationSet::from_lags(WindowGrid::new(0.1, n).unwrap(), 0.2, lags, None).unwrap();
        let p = MeasurementProtocol::new(n, 0.1, theta).unwrap();
        let aux = build_aux_covariance(&corr, &p, false).unwrap();
        (p, aux)
    }

    #[test]
    fn sampling_is_reproducible_and_execution_independent() {
        let (p, aux) = setup(5, 0.8);
        let a = sample_records(&p, &aux, 300, 11, Execution::Sequential).unwrap();
        let b = sample_records(&p, &aux, 300, 11, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let c = sample_records(&p, &aux, 300, 12, Execution::Sequential).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn exact_sampler_follows_distribution() {
        let n = 3;
        let lags: Vec<f64> = (0..n).map(|m| 0.05 * 0.5f64.powi(m as i32)).collect();
        let corr = CorrelationSet::from_lags(WindowGrid::new(0.1, n).unwrap(), 0.3, lags, None).unwrap();
        let p = MeasurementProtocol::new(n, 0.1, 0.7).unwrap();
        let oracle = ExactOracle::new(&p, &corr).unwrap();
        let m = 40_000;
        let recs = sample_records_exact(&oracle, m, 5, Execution::Parallel);
        assert_eq!(recs, sample_records_exact(&oracle, m, 5, Execution::Sequential));
        let mut counts = [0usize; 8];
        for r in &recs {
            counts[r.index()] += 1;
        }
        for (k, pk) in oracle.distribution().iter().enumerate() {
            let se = (pk.value * (1.0 - pk.value) / m as f64).sqrt();
            assert!((counts[k] as f64 / m as f64 - pk.value).abs() < 5.0 * se, "record {k}");
        }
    }

    #[test]
    fn all_record_estimates_sum_to_one() {
        let (p, aux) = setup(4, 1.1);
        let est = joint_prob_mc_all(&p, &aux, 2000, 3, Execution::Parallel).unwrap();
        let total: f64 = est.iter().map(|e| e.value).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let single = joint_prob_mc(&p, &aux, &OutcomeRecord::from_index(5, 4), 2000, 3, Execution::Sequential).unwrap();
        assert!((single.value - est[5].value).abs() < 1e-14);
        assert!((single.se - est[5].se).abs() < 1e-14);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let (_, aux) = setup(4, 1.1);
        let p = MeasurementProtocol::new(3, 0.1, 1.1).unwrap();
        assert!(sample_records(&p, &aux, 10, 0, Execution::Sequential).is_err());
    }
}
