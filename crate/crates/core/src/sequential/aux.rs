//! Gaussian auxiliary-field representation of the path sum.
//!
//! With `D = (t/t₂) I + 2 C⁺⁺` the classical part of the path weight is
//! `exp(−η⁻ᵀ D η⁻) = E[exp(2i φᵀ η⁻)]` for `φ ~ N(0, D/2)`. Conditional on
//! `φ` the windows are independent Ramsey measurements with phase
//! `θ + 2φ_j`. The quantum blocks are folded in at second order by averaging
//! the sign of `η⁺_j` on windows strictly earlier than both entries.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{check_corr, MeasurementProtocol};
use crate::correlations::CorrelationSet;
use crate::error::{Error, Result};

/// Eigenvalues below `−NEG_TOL · tr D` reject the covariance outright.
const NEG_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct AuxiliaryCovariance {
    /// `D`; the field covariance is `D/2`.
    pub d: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Symmetric square root of `D/2`.
    pub sqrt_half: DMatrix<f64>,
    /// Small negative eigenvalues were set to zero.
    pub clipped: bool,
    pub include_quantum: bool,
}

impl AuxiliaryCovariance {
    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn field_covariance(&self) -> DMatrix<f64> {
        &self.d * 0.5
    }

    /// Writes `φ = sqrt(D/2) z` into `out`.
    pub fn field(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for (k, zk) in z.iter().enumerate().take(n) {
                acc += self.sqrt_half[(i, k)] * zk;
            }
            *o = acc;
        }
    }
}

pub fn build_aux_covariance(corr: &CorrelationSet, protocol: &MeasurementProtocol, include_quantum: bool) -> Result<AuxiliaryCovariance> {
    check_corr(protocol, corr)?;
    let n = protocol.n_measurements;
    let mut d = DMatrix::from_fn(n, n, |l, j| {
        let diag = if l == j { corr.t_over_t2 } else { 0.0 };
        diag + 2.0 * corr.c_pp[l.abs_diff(j)]
    });
    if include_quantum {
        let k = corr
            .c_pm
            .as_ref()
            .ok_or_else(|| Error::Dependency("quantum blocks requested but not computed".into()))?;
        for l in 0..n {
            for lp in l..n {
                let s: f64 = (0..l).map(|j| k[l - j] * k[lp - j]).sum();
                d[(l, lp)] += 2.0 * s;
                if lp != l {
                    d[(lp, l)] += 2.0 * s;
                }
            }
        }
    }

    let trace = d.trace();
    let eig = SymmetricEigen::new(d.clone());
    let mut clipped = false;
    let mut lambda = eig.eigenvalues.as_slice().to_vec();
    for v in lambda.iter_mut() {
        if *v < -NEG_TOL * trace.abs() {
            return Err(Error::ModelViolation(format!(
                "auxiliary covariance not positive semidefinite: eigenvalue {v:.3e}, trace {trace:.3e}"
            )));
        }
        if *v < 0.0 {
            *v = 0.0;
            clipped = true;
        }
    }
    if clipped {
        log::warn!("clipped small negative eigenvalues of the auxiliary covariance");
    }
    let roots = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, lambda.iter().map(|v| (0.5 * v).sqrt())));
    let sqrt_half = &eig.eigenvectors * roots * eig.eigenvectors.transpose();
    Ok(AuxiliaryCovariance {
        d,
        eigenvalues: lambda,
        sqrt_half,
        clipped,
        include_quantum,
    })
}
