//! Window-integrated noise correlations.
//!
//! For windows of length `t` the double time integral of `cos(ω(τ₁−τ₂))`
//! over windows `l` and `j` factorises into `K_t(ω)·cos((l−j)ωt)` with
//! `K_t(ω) = 4 sin²(ωt/2)/ω²`. The classical blocks keep only the thermal
//! (`2n̄`) part of the symmetrised correlator; the vacuum part is carried by
//! the white-noise rate `1/t₂`.

use serde::{Deserialize, Serialize};

use crate::bath::{bose_unchecked, thermal_kernel_unchecked, SpectralDensity, ThermalBath};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::quadrature::{integrate, lag_transform, panels_for_phase, Harmonic, Integration, NodeSet};

const MAX_LAG_PANELS: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowGrid {
    pub t: f64,
    pub n_windows: usize,
}

impl WindowGrid {
    pub fn new(t: f64, n_windows: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("window duration must be positive, got {t}")));
        }
        if n_windows == 0 {
            return Err(Error::domain("need at least one window"));
        }
        Ok(WindowGrid { t, n_windows })
    }
}

/// Window factor used for the classical blocks and their β-derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKernel {
    /// `4 sin²(ωt/2)/ω²`.
    #[default]
    Exact,
    /// The small-window limit `t²`.
    #[serde(rename = "small_window", alias = "small-window")]
    SmallWindow,
}

impl WindowKernel {
    #[inline]
    pub fn eval(self, omega: f64, t: f64) -> f64 {
        match self {
            WindowKernel::Exact => exact_window(omega, t),
            WindowKernel::SmallWindow => t * t,
        }
    }
}

#[inline]
fn exact_window(omega: f64, t: f64) -> f64 {
    let x = 0.5 * omega * t;
    if x < 1e-8 {
        return t * t;
    }
    let v = 2.0 * x.sin() / omega;
    v * v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOptions {
    pub kernel: WindowKernel,
    pub include_quantum: bool,
    pub execution: Execution,
    /// Convergence tolerance of lag vectors relative to their largest entry.
    pub tolerance: f64,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        CorrelationOptions {
            kernel: WindowKernel::Exact,
            include_quantum: false,
            execution: Execution::default(),
            tolerance: 1e-10,
        }
    }
}

/// Lag vectors for one `(bath, grid)` pair.
///
/// `c_pp[m]` is the classical block at lag `m`, `d_lags[m] = −∂β c_pp[m]`,
/// and `c_pm[m]` the retarded (quantum) block of a window `m` steps after
/// the source window. Matrices are expanded on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSet {
    pub grid: WindowGrid,
    pub beta: f64,
    pub t_over_t2: f64,
    pub kernel: WindowKernel,
    pub c_pp: Vec<f64>,
    pub c_pm: Option<Vec<f64>>,
    pub d_lags: Vec<f64>,
    pub d0_independent: f64,
    /// Literal Γ(t) of the full symmetrised correlator (diagnostic).
    pub gamma_of_t: f64,
}

impl CorrelationSet {
    pub fn compute<S: SpectralDensity>(bath: &ThermalBath<S>, grid: WindowGrid, opts: &CorrelationOptions) -> Result<Self> {
        let n = grid.n_windows;
        let c_pp = classical_lags(bath, grid.t, n, opts)?;
        let d_lags = derivative_lags(bath, grid.t, n, opts)?;
        let c_pm = if opts.include_quantum {
            Some(quantum_lags(bath, grid.t, n, opts)?)
        } else {
            None
        };
        Ok(CorrelationSet {
            grid,
            beta: bath.beta,
            t_over_t2: grid.t / bath.t2,
            kernel: opts.kernel,
            c_pp,
            c_pm,
            d_lags,
            d0_independent: independent_d0(bath, grid.t)?,
            gamma_of_t: decoherence_gamma(bath, grid.t)?,
        })
    }

    /// Builds a set directly from lag vectors, e.g. for synthetic probes.
    pub fn from_lags(grid: WindowGrid, t_over_t2: f64, c_pp: Vec<f64>, c_pm: Option<Vec<f64>>) -> Result<Self> {
        if c_pp.len() < grid.n_windows || c_pm.as_ref().is_some_and(|v| v.len() < grid.n_windows) {
            return Err(Error::domain("lag vectors shorter than the grid"));
        }
        let n = c_pp.len();
        Ok(CorrelationSet {
            grid,
            beta: f64::NAN,
            t_over_t2,
            kernel: WindowKernel::Exact,
            c_pp,
            c_pm,
            d_lags: vec![0.0; n],
            d0_independent: 0.0,
            gamma_of_t: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n_windows
    }

    /// Decoherence exponent of a single window in the sequential model:
    /// `t/t₂ + 2C⁺⁺₀`.
    pub fn model_decoherence(&self) -> f64 {
        self.t_over_t2 + 2.0 * self.c_pp[0]
    }

    pub fn c_pp_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        nalgebra::DMatrix::from_fn(n, n, |l, j| self.c_pp[l.abs_diff(j)])
    }

    /// `C⁺⁻_{l,j}`: non-zero for `l ≥ j`.
    pub fn c_pm_matrix(&self) -> Option<nalgebra::DMatrix<f64>> {
        let n = self.n();
        self.c_pm
            .as_ref()
            .map(|c| nalgebra::DMatrix::from_fn(n, n, |l, j| if l >= j { c[l - j] } else { 0.0 }))
    }

    pub fn max_off_diagonal(&self) -> f64 {
        self.c_pp[1..self.n()].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `Γ(t) = 4∫dω J(ω)(2n̄+1)(1−cos ωt)/ω²`, the full symmetrised correlator.
pub fn decoherence_gamma<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64) -> Result<f64> {
    Ok(vacuum_decoherence(bath, t)? + thermal_decoherence(bath, t)?)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::domain(format!("time must be non-negative, got {t}")));
    }
    Ok(())
}

fn vacuum_decoherence<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let upper = bath.spectral.upper_frequency();
    let v = integrate(Integration::new(upper).oscillating(t), |w| {
        bath.spectral.value(w) * exact_window(w, t)
    })?;
    Ok(2.0 * v)
}

/// Thermal part of Γ, `8∫J n̄(1−cos ωt)/ω²`. Equals `2C⁺⁺₀` with the exact kernel.
pub fn thermal_decoherence<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let beta = bath.beta;
    let v = integrate(Integration::new(bath.thermal_upper()).oscillating(t), |w| {
        bath.spectral.value(w) * 2.0 * bose_unchecked(beta * w) * exact_window(w, t)
    })?;
    Ok(2.0 * v)
}

/// `t/t₂ + thermal Γ`: the single-window decoherence of the sequential model.
pub fn model_decoherence<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64) -> Result<f64> {
    Ok(t / bath.t2 + thermal_decoherence(bath, t)?)
}

/// `D₀ = ½ ∂Γ/∂(−β) = 4∫dω (J/ω) n̄(1+n̄)(1−cos ωt)`.
pub fn independent_d0<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let beta = bath.beta;
    let v = integrate(Integration::new(bath.thermal_upper()).oscillating(t), |w| {
        bath.spectral.value(w) * w * thermal_kernel_unchecked(beta * w) * exact_window(w, t)
    })?;
    Ok(2.0 * v)
}

/// Finds `t*` with `Γ(t*) = 1` for the literal decoherence function.
pub fn coherence_time_solve<S: SpectralDensity>(bath: &ThermalBath<S>) -> Result<f64> {
    let scale = 50.0 / bath.spectral.upper_frequency();
    solve_unit_crossing(|t| decoherence_gamma(bath, t), scale)
}

/// Solves `gamma(t) = 1` for a continuous increasing `gamma`, bracketing by
/// doubling/halving from `scale` within `[1e-9, 1e9]·scale` and bisecting
/// until `|gamma − 1| < 1e-8`.
pub fn solve_unit_crossing<F: Fn(f64) -> Result<f64>>(gamma: F, scale: f64) -> Result<f64> {
    let (t_min, t_max) = (1e-9 * scale, 1e9 * scale);
    let mut t = scale;
    let g = gamma(t)?;
    let (mut lo, mut hi);
    if g < 1.0 {
        lo = t;
        loop {
            t *= 2.0;
            if t > t_max {
                return Err(Error::NotFound(format!("Γ(t) < 1 for all t ≤ {t_max:e}")));
            }
            if gamma(t)? >= 1.0 {
                hi = t;
                break;
            }
            lo = t;
        }
    } else {
        hi = t;
        loop {
            t *= 0.5;
            if t < t_min {
                return Err(Error::NotFound(format!("Γ(t) ≥ 1 for all t ≥ {t_min:e}")));
            }
            if gamma(t)? < 1.0 {
                lo = t;
                break;
            }
            hi = t;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = gamma(mid)?;
        if (g - 1.0).abs() < 1e-8 {
            return Ok(mid);
        }
        if g < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            return Ok(mid);
        }
    }
    Err(Error::Numerical {
        message: "bisection did not reach |Γ−1| < 1e-8".into(),
        estimate: 0.5 * (lo + hi),
        change: hi - lo,
        nodes: 0,
    })
}

fn check_lag(lag: usize, grid: &WindowGrid) -> Result<()> {
    if lag >= grid.n_windows {
        return Err(Error::domain(format!("lag {lag} outside 0..{} for this grid", grid.n_windows)));
    }
    Ok(())
}

/// `C⁺⁺_m = ∫dω J(ω)·2n̄(ω)·K_t(ω)·cos(mωt)`.
pub fn block_classical_correlation<S: SpectralDensity>(bath: &ThermalBath<S>, grid: &WindowGrid, lag: usize) -> Result<f64> {
    check_lag(lag, grid)?;
    let (beta, t, m) = (bath.beta, grid.t, lag as f64);
    integrate(Integration::new(bath.thermal_upper()).oscillating((m + 1.0) * t), |w| {
        bath.spectral.value(w) * 2.0 * bose_unchecked(beta * w) * exact_window(w, t) * (m * w * t).cos()
    })
}

/// Window integral of the retarded kernel `−2Θ(τ₁−τ₂)∫dω J sin(ω(τ₁−τ₂))`
/// with the first window `lag` steps after the second. Temperature-independent.
pub fn block_quantum_correlation<S: SpectralDensity>(bath: &ThermalBath<S>, grid: &WindowGrid, lag: usize) -> Result<f64> {
    check_lag(lag, grid)?;
    let (t, m) = (grid.t, lag as f64);
    let spec = Integration::new(bath.spectral.upper_frequency()).oscillating((m + 1.0) * t);
    if lag == 0 {
        integrate(spec, |w| -2.0 * bath.spectral.value(w) * same_window_retarded(w, t))
    } else {
        integrate(spec, |w| -2.0 * bath.spectral.value(w) * exact_window(w, t) * (m * w * t).sin())
    }
}

/// `∫∫_{0<τ₂<τ₁<t} sin(ω(τ₁−τ₂)) = (ωt − sin ωt)/ω²`.
#[inline]
fn same_window_retarded(omega: f64, t: f64) -> f64 {
    let x = omega * t;
    if x < 1e-3 {
        let x2 = x * x;
        t * t * x * (1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0)
    } else {
        (x - x.sin()) / (omega * omega)
    }
}

/// `D_l = −∂β C⁺⁺_l`, `l = 0..N−1`.
pub fn temp_derivative_blocks<S: SpectralDensity>(bath: &ThermalBath<S>, grid: &WindowGrid, kernel: WindowKernel) -> Result<Vec<f64>> {
    let opts = CorrelationOptions {
        kernel,
        ..Default::default()
    };
    derivative_lags(bath, grid.t, grid.n_windows, &opts)
}

/// Lag vector of `∫ f(ω) h(mωt) dω` on a node set that is doubled until
/// the whole vector converges.
fn converged_lags<F>(upper: f64, t: f64, n_lags: usize, harmonic: Harmonic, opts: &CorrelationOptions, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    if n_lags == 0 {
        return Ok(Vec::new());
    }
    let phase = upper * t * n_lags.saturating_sub(1).max(1) as f64;
    let mut panels = panels_for_phase(phase).max(32);
    let eval = |panels: usize| {
        let set = NodeSet::graded(upper, panels);
        let fw: Vec<f64> = set.nodes.iter().zip(&set.weights).map(|(&w, &wt)| wt * f(w)).collect();
        let x: Vec<f64> = set.nodes.iter().map(|&w| w * t).collect();
        lag_transform(opts.execution, &fw, &x, n_lags, harmonic)
    };
    let mut prev = eval(panels);
    loop {
        panels *= 2;
        let cur = eval(panels);
        let scale = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let change = cur.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                message: "non-finite lag integral".into(),
                estimate: scale,
                change,
                nodes: panels,
            });
        }
        if change <= opts.tolerance * scale || scale == 0.0 {
            return Ok(cur);
        }
        if panels >= MAX_LAG_PANELS {
            return Err(Error::Numerical {
                message: "lag vector did not converge".into(),
                estimate: scale,
                change,
                nodes: panels,
            });
        }
        prev = cur;
    }
}

/// Classical blocks `C⁺⁺_m`, `m < n_lags`.
pub fn classical_lags<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64, n_lags: usize, opts: &CorrelationOptions) -> Result<Vec<f64>> {
    let (beta, kernel) = (bath.beta, opts.kernel);
    converged_lags(bath.thermal_upper(), t, n_lags, Harmonic::Cos, opts, |w| {
        bath.spectral.value(w) * 2.0 * bose_unchecked(beta * w) * kernel.eval(w, t)
    })
}

/// Temperature derivatives `D_m = −∂β C⁺⁺_m`, `m < n_lags`.
pub fn derivative_lags<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64, n_lags: usize, opts: &CorrelationOptions) -> Result<Vec<f64>> {
    let (beta, kernel) = (bath.beta, opts.kernel);
    converged_lags(bath.thermal_upper(), t, n_lags, Harmonic::Cos, opts, |w| {
        bath.spectral.value(w) * 2.0 * w * thermal_kernel_unchecked(beta * w) * kernel.eval(w, t)
    })
}

/// Quantum blocks `C⁺⁻_m`, `m < n_lags` (always with the exact kernel).
pub fn quantum_lags<S: SpectralDensity>(bath: &ThermalBath<S>, t: f64, n_lags: usize, opts: &CorrelationOptions) -> Result<Vec<f64>> {
    let upper = bath.spectral.upper_frequency();
    let mut lags = converged_lags(upper, t, n_lags, Harmonic::Sin, opts, |w| {
        -2.0 * bath.spectral.value(w) * exact_window(w, t)
    })?;
    if let Some(first) = lags.first_mut() {
        *first = integrate(Integration::new(upper).oscillating(t), |w| {
            -2.0 * bath.spectral.value(w) * same_window_retarded(w, t)
        })?;
    }
    Ok(lags)
}

/// `D_n²/D_0²` for every available lag.
pub fn lag_ratios(d_lags: &[f64]) -> Result<Vec<f64>> {
    let d0 = *d_lags.first().ok_or_else(|| Error::domain("empty lag vector"))?;
    if !(d0 > 0.0) {
        return Err(Error::domain(format!("D_0 must be positive, got {d0}")));
    }
    Ok(d_lags.iter().map(|d| (d / d0).powi(2)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationLength {
    /// Smallest `n` with `D_n²/D_0² ≤ e^{−1}`.
    pub crossing: usize,
    /// Linear interpolation of the crossing between `n−1` and `n`.
    pub interpolated: f64,
}

pub fn correlation_length(d_lags: &[f64]) -> Result<CorrelationLength> {
    let r = lag_ratios(d_lags)?;
    let target = (-1.0f64).exp();
    let n = r.iter().position(|&v| v <= target).ok_or_else(|| {
        Error::NotFound(format!(
            "D_n²/D_0² stays above 1/e for all {} lags; compute more lags (larger N)",
            r.len()
        ))
    })?;
    let interpolated = if n == 0 {
        0.0
    } else {
        (n - 1) as f64 + (r[n - 1] - target) / (r[n - 1] - r[n])
    };
    Ok(CorrelationLength { crossing: n, interpolated })
}

/// `N_cor(N) = (2/N) Σ_{l=1}^{N−1} (N−l) D_l²/D_0²`.
pub fn n_cor(d_lags: &[f64], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("N must be at least 1"));
    }
    if d_lags.len() < n {
        return Err(Error::domain(format!("N_cor({n}) needs {n} lags, have {}", d_lags.len())));
    }
    let r = lag_ratios(&d_lags[..n])?;
    let nf = n as f64;
    let s: f64 = r.iter().enumerate().skip(1).map(|(l, v)| (nf - l as f64) * v).sum();
    Ok(2.0 * s / nf)
}

/// `N_cor` for every `N` in `ns`, from one pass over the lags.
pub fn n_cor_curve(d_lags: &[f64], ns: &[usize]) -> Result<Vec<f64>> {
    let max_n = ns.iter().copied().max().unwrap_or(0);
    if d_lags.len() < max_n {
        return Err(Error::domain(format!("need {max_n} lags, have {}", d_lags.len())));
    }
    let r = lag_ratios(d_lags)?;
    // N·N_cor/2 = N·A(N) − B(N) with prefix sums A = Σ r_l, B = Σ l·r_l.
    let mut a = vec![0.0; max_n + 1];
    let mut b = vec![0.0; max_n + 1];
    for l in 1..max_n {
        a[l + 1] = a[l] + r[l];
        b[l + 1] = b[l] + l as f64 * r[l];
    }
    ns.iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::domain("N must be at least 1"));
            }
            let nf = n as f64;
            Ok(2.0 * (nf * a[n] - b[n]) / nf)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub value: f64,
    pub lags_used: usize,
    /// Estimate of the omitted tail, relative to `value`.
    pub tail_bound: f64,
}

/// `N_s = 2 Σ_{l≥1} D_l²/D_0²`, the `N → ∞` limit of [`n_cor`].
pub fn n_saturation(d_lags: &[f64]) -> Result<Saturation> {
    let r = lag_ratios(d_lags)?;
    let last = *r.last().unwrap();
    if r.len() < 2 || last >= 1e-6 {
        return Err(Error::NotFound(format!(
            "lag ratios have not decayed below 1e-6 within {} lags (last {last:e})",
            r.len()
        )));
    }
    let value = 2.0 * r[1..].iter().sum::<f64>();
    let tail_bound = if value > 0.0 { 2.0 * last * r.len() as f64 / value } else { 0.0 };
    if tail_bound >= 1e-3 {
        return Err(Error::NotFound(format!("tail bound {tail_bound:e} too large; compute more lags")));
    }
    Ok(Saturation {
        value,
        lags_used: r.len(),
        tail_bound,
    })
}

/// Derivative lags out to the point where `D_n²/D_0² < 1e-6`, doubling the
/// lag count from `min_lags`.
pub fn decayed_derivative_lags<S: SpectralDensity>(
    bath: &ThermalBath<S>,
    t: f64,
    min_lags: usize,
    opts: &CorrelationOptions,
) -> Result<Vec<f64>> {
    let mut n = min_lags.max(64);
    loop {
        let d = derivative_lags(bath, t, n, opts)?;
        let r = lag_ratios(&d)?;
        if *r.last().unwrap() < 1e-6 {
            return Ok(d);
        }
        if n > 1 << 22 {
            return Err(Error::NotFound("lag ratios never decayed below 1e-6".into()));
        }
        n *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::OhmicClass;

    fn bath(beta: f64) -> ThermalBath {
        ThermalBath::new(beta, OhmicClass::ohmic(0.1, 10.0).unwrap(), 0.1).unwrap()
    }

    #[test]
    fn zero_window_is_zero() {
        let b = bath(10.0);
        assert_eq!(decoherence_gamma(&b, 0.0).unwrap(), 0.0);
        assert_eq!(independent_d0(&b, 0.0).unwrap(), 0.0);
        assert!(decoherence_gamma(&b, -1.0).is_err());
    }

    #[test]
    fn thermal_gamma_is_twice_zero_lag_block() {
        let b = bath(10.0);
        let grid = WindowGrid::new(0.1, 4).unwrap();
        let c0 = block_classical_correlation(&b, &grid, 0).unwrap();
        let th = thermal_decoherence(&b, 0.1).unwrap();
        assert!(((th - 2.0 * c0) / th).abs() < 1e-9);
    }

    #[test]
    fn exact_d0_equals_zero_lag_derivative() {
        let b = bath(10.0);
        let grid = WindowGrid::new(0.1, 8).unwrap();
        let d = temp_derivative_blocks(&b, &grid, WindowKernel::Exact).unwrap();
        let d0 = independent_d0(&b, 0.1).unwrap();
        assert!(((d[0] - d0) / d0).abs() < 1e-9);
    }

    #[test]
    fn vector_and_scalar_blocks_agree() {
        let b = bath(10.0);
        let grid = WindowGrid::new(0.1, 300).unwrap();
        let v = classical_lags(&b, 0.1, 300, &CorrelationOptions::default()).unwrap();
        for m in [0, 1, 17, 299] {
            let s = block_classical_correlation(&b, &grid, m).unwrap();
            assert!((v[m] - s).abs() < 1e-9 * v[0], "m={m}");
        }
        let q = quantum_lags(&b, 0.1, 5, &CorrelationOptions::default()).unwrap();
        let grid5 = WindowGrid::new(0.1, 5).unwrap();
        for m in 0..5 {
            let s = block_quantum_correlation(&b, &grid5, m).unwrap();
            assert!((q[m] - s).abs() < 1e-9 * q[1].abs(), "m={m}");
        }
    }

    #[test]
    fn lag_out_of_range_rejected() {
        let grid = WindowGrid::new(0.1, 3).unwrap();
        assert!(block_classical_correlation(&bath(10.0), &grid, 3).is_err());
    }

    #[test]
    fn zero_temperature_blocks_vanish() {
        let b = bath(1e7);
        let grid = WindowGrid::new(0.1, 4).unwrap();
        for m in 0..4 {
            assert!(block_classical_correlation(&b, &grid, m).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn geometric_lags_correlation_length_and_saturation() {
        let rho: f64 = 0.99;
        let d: Vec<f64> = (0..5000).map(|l| 2.5 * rho.powi(l)).collect();
        let nc = correlation_length(&d).unwrap();
        let exact = -1.0 / (2.0 * rho.ln());
        assert!((nc.interpolated - exact).abs() < 0.02, "{} vs {exact}", nc.interpolated);
        assert_eq!(nc.crossing, exact.ceil() as usize);
        let ns = n_saturation(&d).unwrap();
        let expect = 2.0 * rho * rho / (1.0 - rho * rho);
        assert!(((ns.value - expect) / expect).abs() < 1e-9);
    }

    #[test]
    fn n_cor_constant_lags_and_bounds() {
        let d = vec![1.0; 50];
        for n in 1..=50 {
            let v = n_cor(&d, n).unwrap();
            assert!((v - (n as f64 - 1.0)).abs() < 1e-12);
        }
        assert_eq!(n_cor(&d, 1).unwrap(), 0.0);
        assert!(n_cor(&d, 51).is_err());
    }

    #[test]
    fn n_cor_curve_matches_direct_sum() {
        let d: Vec<f64> = (0..400)
            .map(|l| (-(l as f64) / 90.0).exp() * (1.0 + 0.1 * (l as f64 * 0.3).cos()))
            .collect();
        let ns = [1usize, 2, 7, 64, 399, 400];
        let curve = n_cor_curve(&d, &ns).unwrap();
        for (n, c) in ns.iter().zip(curve) {
            assert!((c - n_cor(&d, *n).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn correlation_length_not_found_without_decay() {
        let d = vec![1.0; 10];
        assert!(matches!(correlation_length(&d), Err(Error::NotFound(_))));
        assert!(matches!(n_saturation(&d), Err(Error::NotFound(_))));
    }

    #[test]
    fn injected_quadratic_gamma_inverts() {
        let tau = 0.37;
        let t = solve_unit_crossing(|t| Ok((t / tau) * (t / tau)), 1.0).unwrap();
        assert!((t - tau).abs() < 1e-8);
        let t = solve_unit_crossing(|t| Ok((t / tau) * (t / tau)), 1e-3).unwrap();
        assert!((t - tau).abs() < 1e-8);
    }
}
