//! Fisher information and QSNR bounds for the independent and sequential schemes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::score::{ScoreKernel, ScoreMode};
use crate::bath::{effective_coupling_g2, SpectralDensity, ThermalBath};
use crate::correlations::{
    classical_lags, correlation_length, decayed_derivative_lags, decoherence_gamma, independent_d0, lag_ratios, model_decoherence, n_cor,
    n_saturation, CorrelationOptions, CorrelationSet,
};
use crate::error::{Error, Result};
use crate::par::{chunked_reduce, Execution};
use crate::sequential::{sample_records, AuxiliaryCovariance, MeasurementProtocol};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// `|θ − π/2|` below which the equator closed form is used.
const EQUATOR_TOL: f64 = 1e-12;
pub const DIAGNOSTIC_LAGS: usize = 64;

/// `2(e^{−2} − e^{−4})`.
pub fn enhancement_prefactor() -> f64 {
    2.0 * ((-2.0f64).exp() - (-4.0f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependentBound {
    /// Fisher information of `N` independent shots.
    pub fisher: f64,
    /// `β²F = 4β²D₀²N/(e^{2Γ}−1)`.
    pub qsnr: f64,
    /// Small-window form `g⁴t⁴N/(e^{2t/t₂}−1)`.
    pub qsnr_small_window: f64,
    /// Landau-bound diagnostic `g·t₂`.
    pub g_t2: f64,
    pub gamma_model: f64,
    pub d0: f64,
}

/// Bound of `n_shots` independent Ramsey measurements of duration `t`.
///
/// Γ is the model decoherence `t/t₂ + 2C⁺⁺₀` (vacuum part absorbed in `t₂`).
pub fn fisher_independent<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64, n_shots: usize) -> Result<IndependentBound> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("window must be positive, got {t}")));
    }
    let gamma = model_decoherence(bath, t)?;
    if gamma <= 0.0 {
        return Err(Error::ModelViolation(
            "Γ(t) = 0: the bound 4β²D₀²N/(e^{2Γ}−1) diverges because a noiseless probe carries no temperature information in this form"
                .into(),
        ));
    }
    let d0 = independent_d0(bath, t)?;
    let n = n_shots as f64;
    let fisher = 4.0 * d0 * d0 * n / (2.0 * gamma).exp_m1();
    let g2 = effective_coupling_g2(bath)?;
    Ok(IndependentBound {
        fisher,
        qsnr: bath.beta * bath.beta * fisher,
        qsnr_small_window: g2 * g2 * t.powi(4) * n / (2.0 * t / bath.t2).exp_m1(),
        g_t2: g2.sqrt() * bath.t2,
        gamma_model: gamma,
        d0,
    })
}

fn check_equator(protocol: &MeasurementProtocol) -> Result<()> {
    if (protocol.theta - std::f64::consts::FRAC_PI_2).abs() > EQUATOR_TOL {
        return Err(Error::domain(format!(
            "closed-form sequential Fisher information needs θ = π/2, got {}",
            protocol.theta
        )));
    }
    Ok(())
}

/// `F = 16 e^{−4t/t₂} Σ_{i<j} D²_{j−i}` at θ = π/2.
pub fn fisher_sequential(corr: &CorrelationSet, protocol: &MeasurementProtocol) -> Result<f64> {
    check_equator(protocol)?;
    let n = protocol.n_measurements;
    if corr.d_lags.len() < n {
        return Err(Error::Dependency("derivative lags shorter than N".into()));
    }
    let pairs: f64 = corr.d_lags[1..n].iter().enumerate().map(|(k, d)| (n - k - 1) as f64 * d * d).sum();
    Ok(16.0 * (-4.0 * corr.t_over_t2).exp() * pairs)
}

/// Exact first two moments of the outcomes under the auxiliary-field model:
/// `⟨s_j⟩ = cosθ e^{−d}` and, for `i ≠ j`,
/// `Cov = ½e^{−2d}[cos2θ e^{−2D_ij} + e^{2D_ij}] − cos²θ e^{−2d}` with
/// `d = t/t₂ + 2C⁺⁺₀` and `D_ij = 2C⁺⁺_{|i−j|}`.
pub fn outcome_moments(c_pp: &[f64], t_over_t2: f64, theta: f64, n: usize) -> (DVector<f64>, DMatrix<f64>) {
    let d = t_over_t2 + 2.0 * c_pp[0];
    let (cos, cos2) = (theta.cos(), (2.0 * theta).cos());
    let mean = cos * (-d).exp();
    let e2d = (-2.0 * d).exp();
    let cov = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 - mean * mean
        } else {
            let dij = 2.0 * c_pp[i.abs_diff(j)];
            0.5 * e2d * (cos2 * (-2.0 * dij).exp() + (2.0 * dij).exp()) - mean * mean
        }
    });
    (DVector::from_element(n, mean), cov)
}

/// Fisher information of a Gaussian vector carrying the outcome means and
/// covariance, `μ'ᵀΣ⁻¹μ' + ½tr(Σ⁻¹Σ'Σ⁻¹Σ')`, with β-derivatives by central
/// differences of step `1e-4·β`.
///
/// At θ = π/2 this reduces to [`fisher_sequential`] when `N·C⁺⁺ → 0`. Beyond
/// that limit the collective mode of the outcome covariance reduces the
/// information below the pairwise sum.
pub fn fisher_gaussian<S: SpectralDensity + Clone>(
    bath: &ThermalBath<S>,
    protocol: &MeasurementProtocol,
    opts: &CorrelationOptions,
) -> Result<f64> {
    let n = protocol.n_measurements;
    let tau = protocol.window / bath.t2;
    let moments = |beta: f64| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let c = classical_lags(&bath.with_beta(beta), protocol.window, n, opts)?;
        Ok(outcome_moments(&c, tau, protocol.theta, n))
    };
    let h = 1e-4 * bath.beta;
    let (mu, sigma) = moments(bath.beta)?;
    let (mu_p, sigma_p) = moments(bath.beta + h)?;
    let (mu_m, sigma_m) = moments(bath.beta - h)?;
    let dmu = (mu_p - mu_m) / (2.0 * h);
    let dsigma = (sigma_p - sigma_m) / (2.0 * h);
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::ModelViolation(format!("outcome covariance not positive definite (N = {}, mean {})", n, mu[0])))?;
    let a = chol.solve(&dsigma);
    let mean_term = dmu.dot(&chol.solve(&dmu));
    Ok(mean_term + 0.5 * (&a * &a).trace())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McFisher {
    /// `E[L²]` over sampled records.
    pub fisher: f64,
    pub se: f64,
    /// `E[L]`, zero under the model.
    pub mean_score: f64,
    pub mean_score_se: f64,
    pub n_records: usize,
}

/// Monte Carlo Fisher information `E[L²]` from records drawn with `aux`.
pub fn fisher_sequential_mc(
    corr: &CorrelationSet,
    protocol: &MeasurementProtocol,
    aux: Option<&AuxiliaryCovariance>,
    n_records: usize,
    seed: u64,
    exec: Execution,
    mode: ScoreMode,
) -> Result<McFisher> {
    let aux = aux.ok_or_else(|| Error::Dependency("Monte Carlo Fisher information needs an auxiliary covariance".into()))?;
    if n_records < 2 {
        return Err(Error::InsufficientData("need at least two records".into()));
    }
    let kernel = ScoreKernel::new(protocol, corr, mode)?;
    let records = sample_records(protocol, aux, n_records, seed, exec)?;
    let sums = chunked_reduce(
        exec,
        records.len(),
        1024,
        |range| {
            let mut acc = [0.0f64; 4];
            for r in &records[range] {
                let l = kernel.score(r);
                let l2 = l * l;
                acc[0] += l;
                acc[1] += l * l;
                acc[2] += l2;
                acc[3] += l2 * l2;
            }
            acc
        },
        |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]],
    )
    .expect("at least two records");
    let m = n_records as f64;
    let se_of = |s: f64, s2: f64| {
        let mean = s / m;
        let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
        (mean, (var / m).sqrt())
    };
    let (mean_score, mean_score_se) = se_of(sums[0], sums[1]);
    let (fisher, se) = se_of(sums[2], sums[3]);
    Ok(McFisher {
        fisher,
        se,
        mean_score,
        mean_score_se,
        n_records,
    })
}

/// `N_cor(N)` from lags that have decayed below `1e-6`; lags past the end
/// of `d_lags` are treated as zero.
pub fn n_cor_with_tail(d_lags: &[f64], n: usize) -> Result<f64> {
    if n <= d_lags.len() {
        return n_cor(d_lags, n);
    }
    let r = lag_ratios(d_lags)?;
    if *r.last().unwrap() >= 1e-6 {
        return Err(Error::domain(format!(
            "N_cor({n}) needs {n} lags; only {} available and the tail has not decayed",
            d_lags.len()
        )));
    }
    let nf = n as f64;
    let s: f64 = r.iter().enumerate().skip(1).map(|(l, v)| (nf - l as f64) * v).sum();
    Ok(2.0 * s / nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `N ≤ N_c/10`: information grows as `N²`.
    Heisenberg,
    Crossover,
    /// `N ≥ 10 N_c`: information grows as `N`.
    Saturated,
}

impl Regime {
    /// Reporting convention: thresholds at `N_c/10` and `10 N_c`.
    pub fn classify(n: usize, n_c: f64) -> Regime {
        let n = n as f64;
        if n <= n_c / 10.0 {
            Regime::Heisenberg
        } else if n >= 10.0 * n_c {
            Regime::Saturated
        } else {
            Regime::Crossover
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub beta: f64,
    pub t2: f64,
    pub n_measurements: usize,
    pub window: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityFlags {
    /// Largest off-diagonal `C⁺⁺` is below 0.1.
    pub weak_correlation: bool,
    /// θ = π/2, where the sequential closed form applies.
    pub equator: bool,
    /// `t = t₂`, where the small-window forms of both bounds are usually stated.
    pub window_equals_t2: bool,
    /// `g t₂ < 1`.
    pub below_landau: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub g2: f64,
    pub beta_d0: f64,
    /// `g²t²/2`, the small-window value of `βD₀`.
    pub half_g2_t2: f64,
    /// Literal `Γ(t)` including the vacuum part.
    pub gamma_t: f64,
    pub gamma_model: f64,
    pub g_t2: f64,
    /// Over the first [`DIAGNOSTIC_LAGS`] lags.
    pub max_off_diagonal: f64,
    pub lags_used: usize,
    pub flags: ValidityFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub schema_version: u32,
    pub input: ReportInput,
    pub fisher_independent: f64,
    pub qsnr_independent: f64,
    pub qsnr_independent_small_window: f64,
    /// `None` off the equator, where only the Monte Carlo estimate exists.
    pub fisher_sequential: Option<f64>,
    pub qsnr_sequential: Option<f64>,
    pub qsnr_sequential_small_window: f64,
    pub n_cor: f64,
    pub n_c: Option<f64>,
    pub n_s: Option<f64>,
    pub enhancement_r: f64,
    pub regime: Option<Regime>,
    pub diagnostics: Diagnostics,
}

/// Decayed derivative lags plus the `(N_c, N_s)` pair they determine.
#[derive(Debug, Clone)]
pub struct LagProfile {
    pub d_lags: Vec<f64>,
    pub n_c: Option<f64>,
    pub n_s: Option<f64>,
}

impl LagProfile {
    pub fn compute<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64, min_lags: usize, opts: &CorrelationOptions) -> Result<Self> {
        let d_lags = decayed_derivative_lags(bath, t, min_lags, opts)?;
        let n_c = correlation_length(&d_lags).ok().map(|c| c.interpolated);
        let n_s = n_saturation(&d_lags).ok().map(|s| s.value);
        Ok(LagProfile { d_lags, n_c, n_s })
    }
}

/// Full precision report for `protocol` on `bath`.
pub fn qsnr_bounds<S: SpectralDensity>(
    bath: &ThermalBath<S>,
    protocol: &MeasurementProtocol,
    opts: &CorrelationOptions,
) -> Result<PrecisionReport> {
    let profile = LagProfile::compute(bath, protocol.window, 64, opts)?;
    qsnr_bounds_with_profile(bath, protocol, opts, &profile)
}

pub fn qsnr_bounds_with_profile<S: SpectralDensity>(
    bath: &ThermalBath<S>,
    protocol: &MeasurementProtocol,
    opts: &CorrelationOptions,
    profile: &LagProfile,
) -> Result<PrecisionReport> {
    let n = protocol.n_measurements;
    let t = protocol.window;
    let tau = t / bath.t2;
    let beta = bath.beta;
    let ind = fisher_independent(bath, t, n)?;
    let g2 = effective_coupling_g2(bath)?;

    // Blocks are only needed for D₀ and the weak-correlation check.
    let head = crate::correlations::WindowGrid::new(t, n.min(DIAGNOSTIC_LAGS))?;
    let corr = CorrelationSet::compute(bath, head, opts)?;
    let d0 = corr.d_lags[0];
    let ncor = n_cor_with_tail(&profile.d_lags, n)?;
    let equator = check_equator(protocol).is_ok();
    let fisher_seq = if equator {
        // Closed form rewritten through N_cor so lags beyond N never enter.
        Some(8.0 * (-4.0 * tau).exp() * d0 * d0 * n as f64 * ncor)
    } else {
        None
    };
    let qsnr_seq_small = 2.0 * (-4.0 * tau).exp() * g2 * g2 * t.powi(4) * n as f64 * ncor;
    if ind.qsnr_small_window <= 0.0 {
        return Err(Error::ModelViolation(
            "independent bound vanishes; enhancement factor diverges".into(),
        ));
    }
    let flags = ValidityFlags {
        weak_correlation: corr.n() < 2 || corr.max_off_diagonal() < 0.1,
        equator,
        window_equals_t2: (tau - 1.0).abs() < 1e-12,
        below_landau: ind.g_t2 < 1.0,
    };
    Ok(PrecisionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        input: ReportInput {
            beta,
            t2: bath.t2,
            n_measurements: n,
            window: t,
            theta: protocol.theta,
        },
        fisher_independent: ind.fisher,
        qsnr_independent: ind.qsnr,
        qsnr_independent_small_window: ind.qsnr_small_window,
        fisher_sequential: fisher_seq,
        qsnr_sequential: fisher_seq.map(|f| beta * beta * f),
        qsnr_sequential_small_window: qsnr_seq_small,
        n_cor: ncor,
        n_c: profile.n_c,
        n_s: profile.n_s,
        enhancement_r: qsnr_seq_small / ind.qsnr_small_window,
        regime: profile.n_c.map(|nc| Regime::classify(n, nc)),
        diagnostics: Diagnostics {
            g2,
            beta_d0: beta * ind.d0,
            half_g2_t2: 0.5 * g2 * t * t,
            gamma_t: decoherence_gamma(bath, t)?,
            gamma_model: ind.gamma_model,
            g_t2: ind.g_t2,
            max_off_diagonal: if corr.n() > 1 { corr.max_off_diagonal() } else { 0.0 },
            lags_used: profile.d_lags.len(),
            flags,
        },
    })
}

/// `R = (Δβ)²_ind/(Δβ)²_cor = 2e^{−4t/t₂}(e^{2t/t₂}−1)·N_cor`, the ratio of
/// the small-window bounds; `2(e^{−2}−e^{−4})N_cor` at `t = t₂`.
pub fn enhancement_factor<S: SpectralDensity>(
    bath: &ThermalBath<S>,
    protocol: &MeasurementProtocol,
    opts: &CorrelationOptions,
) -> Result<f64> {
    let g2 = effective_coupling_g2(bath)?;
    if g2 <= 0.0 {
        return Err(Error::ModelViolation(
            "zero coupling: independent bound vanishes and R diverges".into(),
        ));
    }
    let d = crate::correlations::derivative_lags(bath, protocol.window, protocol.n_measurements, opts)?;
    Ok(enhancement_from_ncor(
        n_cor(&d, protocol.n_measurements)?,
        protocol.window / bath.t2,
    ))
}

pub fn enhancement_from_ncor(ncor: f64, t_over_t2: f64) -> f64 {
    2.0 * (-4.0 * t_over_t2).exp() * (2.0 * t_over_t2).exp_m1() * ncor
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefactor_value() {
        assert!((enhancement_prefactor() - 0.23404).abs() < 1e-5);
        assert!((enhancement_from_ncor(1.0, 1.0) - enhancement_prefactor()).abs() < 1e-16);
    }

    #[test]
    fn regime_thresholds() {
        assert_eq!(Regime::classify(10, 380.0), Regime::Heisenberg);
        assert_eq!(Regime::classify(100, 380.0), Regime::Crossover);
        assert_eq!(Regime::classify(3800, 380.0), Regime::Saturated);
    }

    #[test]
    fn ncor_tail_extension() {
        let d: Vec<f64> = (0..200).map(|l| 0.9f64.powi(l)).collect();
        let direct = n_cor(&d, 200).unwrap();
        assert!((n_cor_with_tail(&d, 200).unwrap() - direct).abs() < 1e-15);
        let mut padded = d.clone();
        padded.resize(1000, 0.0);
        let ext = n_cor_with_tail(&d, 1000).unwrap();
        assert!((ext - n_cor(&padded, 1000).unwrap()).abs() < 1e-12);
        let short: Vec<f64> = (0..10).map(|l| 0.9f64.powi(l)).collect();
        assert!(n_cor_with_tail(&short, 20).is_err());
    }
}
