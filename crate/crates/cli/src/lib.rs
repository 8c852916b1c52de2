//! Pipelines behind the `seqtherm` command: `fig2` sweeps, record
//! simulation, temperature estimation, noise spectroscopy and precision
//! reports. Each `run_*` function writes its files into `out` and returns
//! what it wrote.

pub mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use seqtherm::correlations::{lag_ratios, n_cor_curve, n_saturation, CorrelationSet};
use seqtherm::estimation::{
    enhancement_from_ncor, fisher_sequential_mc, mle_estimate, qsnr_bounds, LagProfile, McFisher, MleEstimate, MleOptions, PrecisionReport,
    ScoreMode, REPORT_SCHEMA_VERSION,
};
use seqtherm::io::{self, RecordMetadata, FIELD_COVARIANCE_CONVENTION};
use seqtherm::sequential::{build_aux_covariance, sample_records, sample_records_exact, ExactOracle};
use seqtherm::spectroscopy::{frequency_spacing, noise_spectrum, pair_correlation_matrix, peak_fwhm, reconstruct_correlation, Peak};

pub use config::{ConfigError, RunConfig, Sampler};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use seqtherm::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Parse { .. } | E::Domain(_) => EXIT_CONFIG,
                E::Capacity(_) => EXIT_CAPACITY,
                E::Io(_) | E::Json(_) => EXIT_IO,
                E::Numerical { .. }
                | E::NotFound(_)
                | E::ModelViolation(_)
                | E::InsufficientData(_)
                | E::Unidentifiable(_)
                | E::Dependency(_) => EXIT_NUMERICAL,
            };
        }
    }
    EXIT_IO
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub n_max: Option<usize>,
    pub beta_lo: Option<f64>,
    pub beta_hi: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig, ConfigError> {
        if let Some(v) = &self.out {
            cfg.run.out = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.run.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.run.trials = v;
        }
        if let Some(v) = self.n_max {
            cfg.run.n_max = v;
        }
        if let Some(v) = self.beta_lo {
            cfg.run.beta_lo = v;
        }
        if let Some(v) = self.beta_hi {
            cfg.run.beta_hi = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Integers `1..=n_max` at `per_decade` points per decade, deduplicated,
/// always including `n_max`.
pub fn log_spaced(n_max: usize, per_decade: usize) -> Vec<usize> {
    let top = (n_max as f64).log10();
    let steps = (top * per_decade as f64).ceil() as usize;
    let mut ns: Vec<usize> = (0..=steps)
        .map(|k| (10f64.powf(k as f64 / per_decade as f64).round() as usize).clamp(1, n_max))
        .collect();
    ns.push(n_max);
    ns.dedup();
    ns
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeBoundaries {
    /// `N < N_c/10`: `N_cor ≈ N − 1`, QSNR ∝ N².
    pub heisenberg_below: f64,
    /// `N > 10 N_c`: `N_cor → N_s`, QSNR ∝ N.
    pub saturated_above: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Summary {
    pub schema_version: u32,
    pub bath: config::BathConfig,
    pub window: f64,
    pub n_max: usize,
    pub lags_used: usize,
    pub n_c: Option<f64>,
    pub n_s: Option<f64>,
    pub ncor_at_n_max: f64,
    /// Least-squares slope of `N_cor` against `N` over the `ncor.csv` rows with `4 ≤ N ≤ 50`.
    pub small_n_slope: f64,
    pub enhancement_prefactor: f64,
    /// `R` as `N → ∞`.
    pub enhancement_plateau: Option<f64>,
    pub regime_boundaries: Option<RegimeBoundaries>,
}

#[derive(Debug, Clone)]
pub struct Fig2Output {
    pub summary: Fig2Summary,
    pub ns: Vec<usize>,
    pub ncor: Vec<f64>,
    pub enhancement: Vec<f64>,
    pub lag_ratio: Vec<f64>,
}

/// Writes `lag_ratio.csv`, `ncor.csv`, `enhancement.csv` and `fig2_summary.json`.
pub fn run_fig2_sweep(cfg: &RunConfig, n_max: usize, out: &Path) -> anyhow::Result<Fig2Output> {
    let bath = cfg.thermal_bath()?;
    let t = cfg.protocol.t;
    let opts = cfg.correlation_options();
    let profile = LagProfile::compute(&bath, t, n_max, &opts)?;
    let ratios = lag_ratios(&profile.d_lags)?;
    let lag_ratio = ratios[..n_max.min(ratios.len())].to_vec();
    let ns = log_spaced(n_max, 40);
    let ncor = n_cor_curve(&profile.d_lags, &ns)?;
    let tau = t / bath.t2;
    let enhancement: Vec<f64> = ncor.iter().map(|&c| enhancement_from_ncor(c, tau)).collect();

    let (xs, ys): (Vec<f64>, Vec<f64>) = ns
        .iter()
        .zip(&ncor)
        .filter(|(n, _)| (4..=50).contains(*n))
        .map(|(&n, &c)| (n as f64, c))
        .unzip();
    let small_n_slope = if xs.len() >= 2 { linear_slope(&xs, &ys) } else { f64::NAN };
    let n_s = n_saturation(&profile.d_lags).ok().map(|s| s.value);

    let summary = Fig2Summary {
        schema_version: REPORT_SCHEMA_VERSION,
        bath: cfg.bath.clone(),
        window: t,
        n_max,
        lags_used: profile.d_lags.len(),
        n_c: profile.n_c,
        n_s,
        ncor_at_n_max: *ncor.last().unwrap(),
        small_n_slope,
        enhancement_prefactor: enhancement_from_ncor(1.0, tau),
        enhancement_plateau: n_s.map(|s| enhancement_from_ncor(s, tau)),
        regime_boundaries: profile.n_c.map(|nc| RegimeBoundaries {
            heisenberg_below: nc / 10.0,
            saturated_above: 10.0 * nc,
        }),
    };

    let idx: Vec<usize> = (0..lag_ratio.len()).collect();
    io::write_series_csv(create(out, "lag_ratio.csv")?, "n", "d2_ratio", &idx, &lag_ratio)?;
    io::write_series_csv(create(out, "ncor.csv")?, "N", "n_cor", &ns, &ncor)?;
    io::write_series_csv(create(out, "enhancement.csv")?, "N", "R", &ns, &enhancement)?;
    io::write_json(create(out, "fig2_summary.json")?, &summary)?;
    log::info!(
        "fig2: N_c = {:?}, N_s = {:?}, N_cor({n_max}) = {:.3}",
        summary.n_c,
        summary.n_s,
        summary.ncor_at_n_max
    );
    Ok(Fig2Output {
        summary,
        ns,
        ncor,
        enhancement,
        lag_ratio,
    })
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub records_path: PathBuf,
    pub metadata_path: PathBuf,
    pub metadata: RecordMetadata,
}

/// Samples `run.trials` records and writes `records.csv` plus `records.json`.
///
/// With `run.sampler = "exact"`, N above `run.exact_max` is a capacity error.
pub fn run_simulate(cfg: &RunConfig, out: &Path) -> anyhow::Result<SimulateOutput> {
    let bath = cfg.thermal_bath()?;
    let protocol = cfg.protocol()?;
    let opts = cfg.correlation_options();
    let corr = CorrelationSet::compute(&bath, protocol.grid(), &opts)?;
    let (records, clipped) = match cfg.run.sampler {
        Sampler::Field => {
            let aux = build_aux_covariance(&corr, &protocol, cfg.run.include_quantum)?;
            (
                sample_records(&protocol, &aux, cfg.run.trials, cfg.run.seed, cfg.run.execution)?,
                aux.clipped,
            )
        }
        Sampler::Exact => {
            let oracle = ExactOracle::with_capacity(&protocol, &corr, cfg.run.exact_max)?;
            (
                sample_records_exact(&oracle, cfg.run.trials, cfg.run.seed, cfg.run.execution),
                false,
            )
        }
    };

    let metadata = RecordMetadata {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.run.seed,
        n_records: records.len(),
        protocol,
        bath: serde_json::to_value(&cfg.bath)?,
        covariance_convention: FIELD_COVARIANCE_CONVENTION.to_string(),
        include_quantum: cfg.run.include_quantum,
        kernel: cfg.run.kernel,
        max_off_diagonal: if corr.n() > 1 { corr.max_off_diagonal() } else { 0.0 },
        clipped_eigenvalues: clipped,
    };
    io::write_records(create(out, "records.csv")?, protocol.n_measurements, &records)?;
    io::write_json(create(out, "records.json")?, &metadata)?;
    Ok(SimulateOutput {
        records_path: out.join("records.csv"),
        metadata_path: out.join("records.json"),
        metadata,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateInput {
    pub records: PathBuf,
    pub n_measurements: usize,
    pub window: f64,
    pub theta: f64,
    pub t2: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub input: EstimateInput,
    pub estimate: MleEstimate,
}

/// Maximum-likelihood β from a records CSV; writes `estimate.json`.
///
/// The protocol's `N` is taken from the file; `t`, `θ` and the bath shape
/// come from the config.
pub fn run_estimate(records_path: &Path, cfg: &RunConfig, beta_bounds: (f64, f64), out: &Path) -> anyhow::Result<EstimateReport> {
    let records = io::read_records(open(records_path)?).with_context(|| format!("reading {}", records_path.display()))?;
    let n = records.first().map_or(cfg.protocol.n, |r| r.len());
    let protocol = cfg.protocol()?.with_n(n)?;
    let bath = cfg.thermal_bath()?;
    let opts = MleOptions {
        execution: cfg.run.execution,
        correlation: cfg.correlation_options(),
        ..MleOptions::new(beta_bounds.0, beta_bounds.1)
    };
    let estimate = mle_estimate(&records, &protocol, &bath, &opts)?;
    if estimate.boundary_warning {
        log::warn!("likelihood maximum at the edge of [{}, {}]", beta_bounds.0, beta_bounds.1);
    }
    let report = EstimateReport {
        schema_version: REPORT_SCHEMA_VERSION,
        input: EstimateInput {
            records: records_path.to_path_buf(),
            n_measurements: n,
            window: protocol.window,
            theta: protocol.theta,
            t2: bath.t2,
            beta_lo: beta_bounds.0,
            beta_hi: beta_bounds.1,
        },
        estimate,
    };
    io::write_json(create(out, "estimate.json")?, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub schema_version: u32,
    pub records: PathBuf,
    pub n_records: usize,
    pub n_measurements: usize,
    pub window: f64,
    pub t2: f64,
    pub kappa: f64,
    pub delta_omega: f64,
    pub spectral_window: seqtherm::spectroscopy::SpectralWindow,
    /// `None` when the spectrum has no interior maximum with a resolvable width.
    pub peak: Option<Peak>,
}

/// Lag and spectrum reconstruction from a records CSV; writes `lags.csv`,
/// `spectrum.csv` and `spectrum.json`.
pub fn run_spectrum(records_path: &Path, cfg: &RunConfig, out: &Path) -> anyhow::Result<SpectrumReport> {
    let records = io::read_records(open(records_path)?).with_context(|| format!("reading {}", records_path.display()))?;
    let n = records.first().map_or(cfg.protocol.n, |r| r.len());
    let protocol = cfg.protocol()?.with_n(n)?;
    let pcm = pair_correlation_matrix(&records, cfg.run.execution)?;
    let lags = reconstruct_correlation(&pcm, &protocol, cfg.bath.t2)?;
    let spectrum = noise_spectrum(&lags.c_hat, Some(&lags.se), protocol.window, cfg.run.spectral_window)?;
    let peak = peak_fwhm(&spectrum.omega, &spectrum.power).ok();
    io::write_lag_csv(create(out, "lags.csv")?, &lags)?;
    io::write_spectrum_csv(create(out, "spectrum.csv")?, &spectrum)?;
    let report = SpectrumReport {
        schema_version: REPORT_SCHEMA_VERSION,
        records: records_path.to_path_buf(),
        n_records: records.len(),
        n_measurements: n,
        window: protocol.window,
        t2: cfg.bath.t2,
        kappa: lags.kappa,
        delta_omega: frequency_spacing(n, protocol.window),
        spectral_window: cfg.run.spectral_window,
        peak,
    };
    io::write_json(create(out, "spectrum.json")?, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherOutput {
    pub report: PrecisionReport,
    /// Off the equator: `E[L²]` over `run.trials` sampled records.
    pub monte_carlo: Option<McFisher>,
}

/// Precision report for the configured protocol; writes `precision_report.json`.
pub fn run_fisher(cfg: &RunConfig, out: &Path) -> anyhow::Result<FisherOutput> {
    let bath = cfg.thermal_bath()?;
    let protocol = cfg.protocol()?;
    let opts = cfg.correlation_options();
    let report = qsnr_bounds(&bath, &protocol, &opts)?;
    let monte_carlo = if report.fisher_sequential.is_none() && cfg.run.trials > 0 {
        let corr = CorrelationSet::compute(&bath, protocol.grid(), &opts)?;
        let aux = build_aux_covariance(&corr, &protocol, cfg.run.include_quantum)?;
        Some(fisher_sequential_mc(
            &corr,
            &protocol,
            Some(&aux),
            cfg.run.trials,
            cfg.run.seed,
            cfg.run.execution,
            ScoreMode::Full,
        )?)
    } else {
        None
    };
    let output = FisherOutput { report, monte_carlo };
    io::write_json(create(out, "precision_report.json")?, &output)?;
    Ok(output)
}
