//! Noise spectroscopy from outcome records.
//!
//! At θ = π/2 the pair covariance of outcomes is proportional to the
//! classical block, `S_{j,i} ≈ κ e^{−2t/t₂} C⁺⁺_{j−i}`. Averaging equal lags,
//! dividing out the prefactor and Fourier transforming the even extension
//! yields the spectrum on a grid `Δω = 2π/(N t)` set by the record length.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::correlations::{CorrelationSet, WindowGrid};
use crate::error::{Error, Result};
use crate::par::{chunked_reduce, Execution};
use crate::sequential::{ExactOracle, MeasurementProtocol, OutcomeRecord};

/// Probe correlation used to calibrate κ in the weak limit.
const KAPPA_PROBE: f64 = 1e-7;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelationMatrix {
    pub n_records: usize,
    pub means: Vec<f64>,
    /// Unbiased sample covariance `⟨s_j s_i⟩ − ⟨s_j⟩⟨s_i⟩`.
    pub s_matrix: DMatrix<f64>,
    pub se_matrix: DMatrix<f64>,
    /// Toeplitz average of `s_matrix` over pairs at lag `m`.
    pub lag_mean: Vec<f64>,
    /// Standard error of `lag_mean` from per-record lag-averaged products.
    pub lag_se: Vec<f64>,
}

impl PairCorrelationMatrix {
    pub fn n(&self) -> usize {
        self.means.len()
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

pub fn pair_correlation_matrix(records: &[OutcomeRecord], exec: Execution) -> Result<PairCorrelationMatrix> {
    let m = records.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 records, got {m}")));
    }
    let n = records[0].len();
    if let Some((k, r)) = records.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::domain(format!("record {k} has {} outcomes, expected {n}", r.len())));
    }

    // First pass: Σ s_j and Σ s_j s_i (upper triangle, row-major).
    let (sum, prod) = chunked_reduce(
        exec,
        m,
        CHUNK,
        |range| {
            let mut sum = vec![0.0; n];
            let mut prod = vec![0.0; n * n];
            for r in &records[range] {
                let s = r.outcomes();
                for (j, &sj) in s.iter().enumerate() {
                    sum[j] += f64::from(sj);
                    let row = &mut prod[j * n..(j + 1) * n];
                    for (i, &si) in s.iter().enumerate().skip(j) {
                        row[i] += f64::from(sj * si);
                    }
                }
            }
            (sum, prod)
        },
        |mut a, b| {
            add_into(&mut a.0, &b.0);
            add_into(&mut a.1, &b.1);
            a
        },
    )
    .expect("m ≥ 2");

    let mf = m as f64;
    let means: Vec<f64> = sum.iter().map(|s| s / mf).collect();
    let mut s_matrix = DMatrix::zeros(n, n);
    let mut se_matrix = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let e_prod = prod[j * n + i] / mf;
            let (mj, mi) = (means[j], means[i]);
            let cov = (e_prod - mj * mi) * mf / (mf - 1.0);
            // E[x²] for x = (s_j − m_j)(s_i − m_i), using s² = 1.
            let e_x2 = if i == j {
                1.0 + 2.0 * mj * mj - 3.0 * mj.powi(4)
            } else {
                let (aj, ai) = (1.0 + mj * mj, 1.0 + mi * mi);
                aj * ai - 2.0 * mi * mi * aj - 2.0 * mj * mj * ai + 4.0 * mj * mi * e_prod
            };
            let x_mean = e_prod - mj * mi;
            let var = (e_x2 - x_mean * x_mean).max(0.0) * mf / (mf - 1.0);
            let se = (var / mf).sqrt();
            s_matrix[(j, i)] = cov;
            s_matrix[(i, j)] = cov;
            se_matrix[(j, i)] = se;
            se_matrix[(i, j)] = se;
        }
    }

    let lag_mean: Vec<f64> = (0..n)
        .map(|lag| (0..n - lag).map(|j| s_matrix[(j, j + lag)]).sum::<f64>() / (n - lag) as f64)
        .collect();

    // Second pass: per-record lag-averaged centred products.
    let (ysum, ysq) = chunked_reduce(
        exec,
        m,
        CHUNK,
        |range| {
            let mut ysum = vec![0.0; n];
            let mut ysq = vec![0.0; n];
            let mut c = vec![0.0; n];
            for r in &records[range] {
                for (cj, (&s, mu)) in c.iter_mut().zip(r.outcomes().iter().zip(&means)) {
                    *cj = f64::from(s) - mu;
                }
                for lag in 0..n {
                    let y = c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n - lag) as f64;
                    ysum[lag] += y;
                    ysq[lag] += y * y;
                }
            }
            (ysum, ysq)
        },
        |mut a, b| {
            add_into(&mut a.0, &b.0);
            add_into(&mut a.1, &b.1);
            a
        },
    )
    .expect("m ≥ 2");
    let lag_se = ysum
        .iter()
        .zip(&ysq)
        .map(|(s, q)| {
            let mean = s / mf;
            (((q - mf * mean * mean) / (mf - 1.0)).max(0.0) / mf).sqrt()
        })
        .collect();

    Ok(PairCorrelationMatrix {
        n_records: m,
        means,
        s_matrix,
        se_matrix,
        lag_mean,
        lag_se,
    })
}

/// Dimensionless prefactor `κ` in `S_{j,i} = κ e^{−2t/t₂} C⁺⁺_{j−i}`, read off
/// the exact two-window path sum in the weak-correlation limit.
pub fn calibrate_kappa(protocol: &MeasurementProtocol, t_over_t2: f64) -> Result<f64> {
    if (protocol.theta - std::f64::consts::FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::Dependency(format!(
            "κ calibration is defined for θ = π/2 records, got θ = {}",
            protocol.theta
        )));
    }
    let two = protocol.with_n(2)?;
    let corr = CorrelationSet::from_lags(WindowGrid::new(protocol.window, 2)?, t_over_t2, vec![0.0, KAPPA_PROBE], None)?;
    let dist = ExactOracle::new(&two, &corr)?.distribution();
    // Records indexed by bit j set ⇔ s_{j+1} = −1.
    let p = |idx: usize| dist[idx].value;
    let mean1 = p(0) + p(2) - p(1) - p(3);
    let mean2 = p(0) + p(1) - p(2) - p(3);
    let corr12 = p(0) + p(3) - p(1) - p(2);
    let s = corr12 - mean1 * mean2;
    Ok(s / ((-2.0 * t_over_t2).exp() * KAPPA_PROBE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagEstimate {
    /// `Ĉ⁺⁺_m`, `m = 0..N−1`. Lag 0 repeats lag 1 (the diagonal holds variance only).
    pub c_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub kappa: f64,
    pub window: f64,
}

/// Inverts `S̄_m = κ e^{−2t/t₂} C⁺⁺_m` for every lag.
pub fn reconstruct_correlation(pcm: &PairCorrelationMatrix, protocol: &MeasurementProtocol, t2: f64) -> Result<LagEstimate> {
    if !(t2 > 0.0) {
        return Err(Error::domain(format!("t2 must be positive, got {t2}")));
    }
    let n = pcm.n();
    if n != protocol.n_measurements {
        return Err(Error::domain(format!(
            "records have N = {n}, protocol has N = {}",
            protocol.n_measurements
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData("lag reconstruction needs N ≥ 2".into()));
    }
    let tau = protocol.window / t2;
    let kappa = calibrate_kappa(protocol, tau)?;
    let scale = kappa * (-2.0 * tau).exp();
    let mut c_hat: Vec<f64> = pcm.lag_mean.iter().map(|s| s / scale).collect();
    let mut se: Vec<f64> = pcm.lag_se.iter().map(|s| s / scale.abs()).collect();
    c_hat[0] = c_hat[1];
    se[0] = se[1];
    Ok(LagEstimate {
        c_hat,
        se,
        kappa,
        window: protocol.window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralWindow {
    #[default]
    Rectangular,
    Hann,
}

impl SpectralWindow {
    fn weight(self, m: usize, n: usize) -> f64 {
        match self {
            SpectralWindow::Rectangular => 1.0,
            SpectralWindow::Hann => 0.5 * (1.0 + (std::f64::consts::PI * m as f64 / n as f64).cos()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
    /// Propagated assuming independent lag errors.
    pub se: Vec<f64>,
}

pub fn frequency_spacing(n: usize, t: f64) -> f64 {
    2.0 * std::f64::consts::PI / (n as f64 * t)
}

/// `P(ω_k) = t [w₀c₀ + 2 Σ_{m≥1} w_m c_m cos(m ω_k t)]` at `ω_k = k·2π/(N t)`,
/// `k = 0..=N/2`.
pub fn noise_spectrum(lags: &[f64], se: Option<&[f64]>, t: f64, window: SpectralWindow) -> Result<Spectrum> {
    let n = lags.len();
    if n < 8 {
        return Err(Error::domain(format!("spectrum needs at least 8 lags, got {n}")));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("window must be positive, got {t}")));
    }
    if se.is_some_and(|s| s.len() != n) {
        return Err(Error::domain("lag and error vectors differ in length"));
    }
    let dw = frequency_spacing(n, t);
    let weights: Vec<f64> = (0..n).map(|m| window.weight(m, n)).collect();
    let mut out = Spectrum {
        omega: Vec::with_capacity(n / 2 + 1),
        power: Vec::with_capacity(n / 2 + 1),
        se: Vec::with_capacity(n / 2 + 1),
    };
    for k in 0..=n / 2 {
        let omega = k as f64 * dw;
        let mut p = weights[0] * lags[0];
        let mut v = se.map_or(0.0, |s| (weights[0] * s[0]).powi(2));
        for m in 1..n {
            let c = (m as f64 * omega * t).cos();
            p += 2.0 * weights[m] * lags[m] * c;
            if let Some(s) = se {
                v += (2.0 * weights[m] * s[m] * c).powi(2);
            }
        }
        out.omega.push(omega);
        out.power.push(t * p);
        out.se.push(t * v.sqrt());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub height: f64,
    pub fwhm: f64,
}

/// Location of the largest bin and its full width at half maximum, with the
/// half-maximum crossings linearly interpolated between bins.
pub fn peak_fwhm(omega: &[f64], power: &[f64]) -> Result<Peak> {
    if omega.len() != power.len() || omega.len() < 3 {
        return Err(Error::domain("peak search needs at least 3 matching bins"));
    }
    let (k, &height) = power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    if !(height > 0.0) {
        return Err(Error::NotFound("spectrum has no positive peak".into()));
    }
    let half = 0.5 * height;
    let cross = |a: usize, b: usize| omega[a] + (half - power[a]) * (omega[b] - omega[a]) / (power[b] - power[a]);
    let right = (k + 1..power.len())
        .find(|&i| power[i] <= half)
        .map(|i| cross(i - 1, i))
        .ok_or_else(|| Error::NotFound("no half-maximum crossing above the peak".into()))?;
    // A peak at ω = 0 is mirrored by the even extension.
    let left = match (0..k).rev().find(|&i| power[i] <= half) {
        Some(i) => cross(i + 1, i),
        None if k == 0 => -right,
        None => return Err(Error::NotFound("no half-maximum crossing below the peak".into())),
    };
    Ok(Peak {
        omega: omega[k],
        height,
        fwhm: right - left,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn kappa_is_four_in_the_weak_limit() {
        let p = MeasurementProtocol::new(10, 0.1, FRAC_PI_2).unwrap();
        let k = calibrate_kappa(&p, 1.0).unwrap();
        assert!((k - 4.0).abs() < 1e-5, "κ = {k}");
        let off = MeasurementProtocol::new(10, 0.1, 0.3).unwrap();
        assert!(matches!(calibrate_kappa(&off, 1.0), Err(Error::Dependency(_))));
    }

    #[test]
    fn zero_lags_give_zero_spectrum() {
        let s = noise_spectrum(&[0.0; 16], None, 0.1, SpectralWindow::Rectangular).unwrap();
        assert!(s.power.iter().all(|&p| p == 0.0));
        assert_eq!(s.omega.len(), 9);
        assert!((s.omega[1] - frequency_spacing(16, 0.1)).abs() < 1e-12);
    }

    #[test]
    fn short_lag_sequence_rejected() {
        assert!(noise_spectrum(&[1.0; 7], None, 0.1, SpectralWindow::Hann).is_err());
    }

    #[test]
    fn single_lag_zero_is_flat() {
        let mut lags = vec![0.0; 12];
        lags[0] = 2.0;
        let s = noise_spectrum(&lags, None, 0.5, SpectralWindow::Rectangular).unwrap();
        assert!(s.power.iter().all(|&p| (p - 1.0).abs() < 1e-15));
    }

    #[test]
    fn triangle_peak_width() {
        let omega: Vec<f64> = (0..5).map(f64::from).collect();
        let power = [0.0, 1.0, 2.0, 1.0, 0.0];
        let pk = peak_fwhm(&omega, &power).unwrap();
        assert_eq!(pk.omega, 2.0);
        assert!((pk.fwhm - 2.0).abs() < 1e-15);
    }

    #[test]
    fn uncorrelated_pairs_have_small_covariance() {
        let records: Vec<OutcomeRecord> = (0..64).map(|i| OutcomeRecord::from_index(i, 6)).collect();
        let pcm = pair_correlation_matrix(&records, Execution::Sequential).unwrap();
        for j in 0..6 {
            assert!(pcm.means[j].abs() < 1e-15);
            for i in 0..6 {
                let expect = if i == j { 64.0 / 63.0 } else { 0.0 };
                assert!((pcm.s_matrix[(j, i)] - expect).abs() < 1e-12);
            }
        }
        assert!(matches!(
            pair_correlation_matrix(&records[..1], Execution::Sequential),
            Err(Error::InsufficientData(_))
        ));
    }
}
