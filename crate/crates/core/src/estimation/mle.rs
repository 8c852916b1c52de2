//! Maximum-likelihood estimation of β from outcome records and the
//! empirical Cramér–Rao check.
//!
//! The first-order log-likelihood of a batch depends on the records only
//! through the outcome counts and, for every lag, the counts of equal
//! `(++)`, `(−−)` and mixed pairs. These are accumulated once; each
//! candidate β then costs one lag quadrature and an `O(N)` sum.

use serde::{Deserialize, Serialize};

use super::fisher::{fisher_gaussian, fisher_sequential};
use crate::bath::{SpectralDensity, ThermalBath};
use crate::correlations::{classical_lags, CorrelationOptions, CorrelationSet};
use crate::error::{Error, Result};
use crate::par::{chunked_reduce, map_indexed, Execution};
use crate::sequential::approx::{ApproxModel, PAIR_FLOOR};
use crate::sequential::{build_aux_covariance, sample_records, MeasurementProtocol, OutcomeRecord};

const Z_95: f64 = 1.959_963_984_540_054;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Sufficient statistics of a record batch under the first-order model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordStatistics {
    pub n_measurements: usize,
    pub n_records: usize,
    /// Counts of `+1` and `−1` outcomes.
    pub singles: [u64; 2],
    /// Per lag `m ≥ 1`: counts of `(+,+)`, `(−,−)` and mixed pairs. Index 0 is unused.
    pub pairs: Vec<[u64; 3]>,
}

impl RecordStatistics {
    pub fn from_records(records: &[OutcomeRecord], exec: Execution) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::InsufficientData("no records".into()))?;
        let n = first.len();
        if let Some((k, r)) = records.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::domain(format!("record {k} has {} outcomes, expected {n}", r.len())));
        }
        let empty = || RecordStatistics {
            n_measurements: n,
            n_records: 0,
            singles: [0; 2],
            pairs: vec![[0; 3]; n],
        };
        let stats = chunked_reduce(
            exec,
            records.len(),
            256,
            |range| {
                let mut acc = empty();
                for r in &records[range] {
                    acc.add(r);
                }
                acc
            },
            |mut a, b| {
                a.n_records += b.n_records;
                a.singles[0] += b.singles[0];
                a.singles[1] += b.singles[1];
                for (x, y) in a.pairs.iter_mut().zip(&b.pairs) {
                    for k in 0..3 {
                        x[k] += y[k];
                    }
                }
                a
            },
        )
        .expect("non-empty batch");
        Ok(stats)
    }

    fn add(&mut self, record: &OutcomeRecord) {
        let s = record.outcomes();
        self.n_records += 1;
        for (i, &si) in s.iter().enumerate() {
            self.singles[usize::from(si < 0)] += 1;
            for (j, &sj) in s.iter().enumerate().skip(i + 1) {
                let k = match (si > 0, sj > 0) {
                    (true, true) => 0,
                    (false, false) => 1,
                    _ => 2,
                };
                self.pairs[j - i][k] += 1;
            }
        }
    }

    /// Batch log-likelihood and whether any populated pair factor hit the floor.
    pub fn log_likelihood(&self, model: &ApproxModel) -> (f64, bool) {
        let mut ll = 0.0;
        let mut clamped = false;
        let mut term = |count: u64, p: f64| {
            if count > 0 {
                if p <= PAIR_FLOOR {
                    clamped = true;
                }
                ll += count as f64 * p.max(PAIR_FLOOR).ln();
            }
        };
        term(self.singles[0], model.p(1));
        term(self.singles[1], model.p(-1));
        for (m, c) in self.pairs.iter().enumerate().skip(1) {
            term(c[0], model.pair_factor(m, 1, 1));
            term(c[1], model.pair_factor(m, -1, -1));
            term(c[2], model.pair_factor(m, 1, -1));
        }
        (ll, clamped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub grid_points: usize,
    pub execution: Execution,
    pub correlation: CorrelationOptions,
}

impl MleOptions {
    pub fn new(beta_lo: f64, beta_hi: f64) -> Self {
        MleOptions {
            beta_lo,
            beta_hi,
            grid_points: 64,
            execution: Execution::default(),
            correlation: CorrelationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleEstimate {
    pub beta_hat: f64,
    pub std_error: f64,
    /// 95% interval `β̂ ± 1.96·SE` from the observed information.
    pub ci: [f64; 2],
    pub observed_information: f64,
    pub log_likelihood: f64,
    /// The maximum sits on (or next to) an end of `[β_lo, β_hi]`.
    pub boundary_warning: bool,
    /// Some pair factor was floored; the first-order model is outside its regime.
    pub clamped: bool,
    /// Coarse scan `(β, ln L)`.
    pub curve: Vec<[f64; 2]>,
    pub n_records: usize,
}

struct Likelihood<'a, S> {
    stats: &'a RecordStatistics,
    protocol: &'a MeasurementProtocol,
    template: &'a ThermalBath<S>,
    opts: CorrelationOptions,
}

impl<S: SpectralDensity + Clone> Likelihood<'_, S> {
    fn eval(&self, beta: f64) -> Result<(f64, bool)> {
        let bath = self.template.with_beta(beta);
        let n = self.protocol.n_measurements;
        let c_pp = classical_lags(&bath, self.protocol.window, n, &self.opts)?;
        let corr = CorrelationSet::from_lags(self.protocol.grid(), self.protocol.window / bath.t2, c_pp, None)?;
        Ok(self.stats.log_likelihood(&ApproxModel::new(self.protocol, &corr)?))
    }
}

pub fn mle_estimate<S: SpectralDensity + Clone>(
    records: &[OutcomeRecord],
    protocol: &MeasurementProtocol,
    bath_template: &ThermalBath<S>,
    opts: &MleOptions,
) -> Result<MleEstimate> {
    let stats = RecordStatistics::from_records(records, opts.execution)?;
    mle_from_statistics(&stats, protocol, bath_template, opts)
}

pub fn mle_from_statistics<S: SpectralDensity + Clone>(
    stats: &RecordStatistics,
    protocol: &MeasurementProtocol,
    bath_template: &ThermalBath<S>,
    opts: &MleOptions,
) -> Result<MleEstimate> {
    let (lo, hi) = (opts.beta_lo, opts.beta_hi);
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::domain(format!("need 0 < β_lo < β_hi, got [{lo}, {hi}]")));
    }
    if opts.grid_points < 3 {
        return Err(Error::domain("the β scan needs at least 3 points"));
    }
    if stats.n_measurements != protocol.n_measurements {
        return Err(Error::domain(format!(
            "records have N = {}, protocol has N = {}",
            stats.n_measurements, protocol.n_measurements
        )));
    }
    let like = Likelihood {
        stats,
        protocol,
        template: bath_template,
        opts: opts.correlation,
    };

    let k = opts.grid_points;
    let grid: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
    let scan = map_indexed(opts.execution, k, |i| like.eval(grid[i]));
    let mut curve = Vec::with_capacity(k);
    let mut clamped = false;
    for (b, r) in grid.iter().zip(scan) {
        let (ll, c) = r?;
        clamped |= c;
        curve.push([*b, ll]);
    }
    let (best, ll_max) = curve
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p[1] > acc.1 { (i, p[1]) } else { acc });
    let ll_min = curve.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    if ll_max - ll_min <= 1e-12 * ll_max.abs().max(1.0) {
        return Err(Error::Unidentifiable(
            "log-likelihood is flat in β over the search interval (e.g. N = 1 at θ = π/2)".into(),
        ));
    }

    // Golden-section refinement inside the neighbouring grid cells.
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(k - 1)]);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = like.eval(x1)?.0;
    let mut f2 = like.eval(x2)?.0;
    for _ in 0..200 {
        if b - a <= 1e-9 * b {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = like.eval(x2)?.0;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = like.eval(x1)?.0;
        }
    }
    let (mut beta_hat, mut ll_hat) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    if ll_max > ll_hat {
        beta_hat = grid[best];
        ll_hat = ll_max;
    }
    let (_, c_hat) = like.eval(beta_hat)?;
    clamped |= c_hat;

    let h = 0.01 * beta_hat;
    let boundary_warning = best == 0 || best == k - 1 || beta_hat - h <= lo || beta_hat + h >= hi;
    if boundary_warning {
        log::warn!("likelihood maximum at β = {beta_hat} lies on the search boundary [{lo}, {hi}]");
    }
    let plus = like.eval(beta_hat + h)?.0;
    let minus = like.eval(beta_hat - h)?.0;
    let observed_information = -(plus - 2.0 * ll_hat + minus) / (h * h);
    let std_error = if observed_information > 0.0 {
        observed_information.sqrt().recip()
    } else {
        log::warn!("non-positive observed information at β̂ = {beta_hat}");
        f64::INFINITY
    };
    Ok(MleEstimate {
        beta_hat,
        std_error,
        ci: [beta_hat - Z_95 * std_error, beta_hat + Z_95 * std_error],
        observed_information,
        log_likelihood: ll_hat,
        boundary_warning,
        clamped,
        curve,
        n_records: stats.n_records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbReport {
    /// `var(β̂)·M·F` with `F` from [`fisher_gaussian`].
    pub ratio: f64,
    /// Same with the pairwise closed form [`fisher_sequential`] (θ = π/2 only).
    pub ratio_closed_form: Option<f64>,
    pub variance: f64,
    pub mean: f64,
    pub fisher_per_record: f64,
    pub fisher_closed_form: Option<f64>,
    pub records_per_batch: usize,
    pub estimates: Vec<f64>,
    pub boundary_hits: usize,
}

/// Seed of batch `b`, decorrelated from neighbouring batches.
pub fn batch_seed(seed: u64, batch: usize) -> u64 {
    seed ^ (batch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `n_batches` independent simulate→estimate cycles at the bath's β
/// and compares the spread of `β̂` with the Cramér–Rao bound.
pub fn crb_validation<S: SpectralDensity + Clone>(
    bath: &ThermalBath<S>,
    protocol: &MeasurementProtocol,
    n_batches: usize,
    records_per_batch: usize,
    seed: u64,
    opts: &MleOptions,
) -> Result<CrbReport> {
    if n_batches < 2 {
        return Err(Error::InsufficientData("need at least two batches".into()));
    }
    let corr_opts = CorrelationOptions {
        include_quantum: false,
        ..opts.correlation
    };
    let corr = CorrelationSet::compute(bath, protocol.grid(), &corr_opts)?;
    let aux = build_aux_covariance(&corr, protocol, false)?;
    let fisher = fisher_gaussian(bath, protocol, &corr_opts)?;
    let closed = fisher_sequential(&corr, protocol).ok();
    let mut estimates = Vec::with_capacity(n_batches);
    let mut boundary_hits = 0;
    for b in 0..n_batches {
        let records = sample_records(protocol, &aux, records_per_batch, batch_seed(seed, b), opts.execution)?;
        let est = mle_estimate(&records, protocol, bath, opts)?;
        boundary_hits += usize::from(est.boundary_warning);
        estimates.push(est.beta_hat);
    }
    let m = n_batches as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let variance = estimates.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let m_rec = records_per_batch as f64;
    Ok(CrbReport {
        ratio: variance * m_rec * fisher,
        ratio_closed_form: closed.map(|f| variance * m_rec * f),
        variance,
        mean,
        fisher_per_record: fisher,
        fisher_closed_form: closed,
        records_per_batch,
        estimates,
        boundary_hits,
    })
}
