//! Relative smoothness from the decay of projection coefficients
//! `p_j = |Y^T v_j|`: a log-log fit over the leading `truncation` indices
//! gives the decay `r` and `s = (2r - 1) / beta`.

use crate::eigensystems::{kernel_spectrum, EmpiricalSpectrum, SpectrumRequest};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::par::{map_indices, Execution};
use crate::points::Points;
use crate::stats;

pub const DEFAULT_TRUNCATION: usize = 100;

/// Coefficients at or below this are left out of the log fit.
pub const COEFFICIENT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessEstimate {
    pub r_hat: f64,
    pub s_hat: f64,
    pub slope: f64,
    pub intercept: f64,
    pub truncation: usize,
    /// Entries that survived the coefficient floor.
    pub n_used: usize,
    /// RMS residual of the log-log fit.
    pub fit_residual: f64,
}

/// `|Y^T v_j|` for every stored eigenvector, in descending-eigenvalue order.
pub fn projection_coefficients(spectrum: &EmpiricalSpectrum, ys: &[f64]) -> Result<Vec<f64>> {
    if ys.len() != spectrum.n() {
        return Err(Error::InvalidArgument(format!(
            "{} responses for a spectrum of size {}",
            ys.len(),
            spectrum.n()
        )));
    }
    Ok(spectrum.project(ys).into_iter().map(f64::abs).collect())
}

/// OLS of `log p_j` on `log j` for `j = 1..=truncation`.
pub fn truncation_estimate(p: &[f64], truncation: usize, beta: f64) -> Result<SmoothnessEstimate> {
    if truncation < 3 {
        return Err(Error::InvalidArgument(format!("truncation must be >= 3, got {truncation}")));
    }
    if p.len() < truncation {
        return Err(Error::InvalidArgument(format!(
            "truncation {truncation} exceeds the {} available coefficients",
            p.len()
        )));
    }
    if !(beta > 1.0) {
        return Err(Error::InvalidArgument(format!("beta must exceed 1, got {beta}")));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = p[..truncation]
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > COEFFICIENT_FLOOR)
        .map(|(j, v)| (((j + 1) as f64).ln(), v.ln()))
        .unzip();
    if lx.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "only {} of {truncation} coefficients exceed {COEFFICIENT_FLOOR:e}",
            lx.len()
        )));
    }
    let fit = stats::ols(&lx, &ly).ok_or_else(|| Error::DegenerateFit("log-log fit failed".into()))?;
    let r_hat = -fit.slope;
    Ok(SmoothnessEstimate {
        r_hat,
        s_hat: (2.0 * r_hat - 1.0) / beta,
        slope: fit.slope,
        intercept: fit.intercept,
        truncation,
        n_used: lx.len(),
        fit_residual: fit.residual,
    })
}

/// Spectrum, projections and truncation fit for one sample.
pub fn estimate_smoothness(
    kernel: &KernelSpec,
    xs: &Points,
    ys: &[f64],
    truncation: usize,
    beta: f64,
    exec: Execution,
) -> Result<SmoothnessEstimate> {
    if truncation > xs.len() {
        return Err(Error::InvalidArgument(format!(
            "truncation {truncation} exceeds the sample size {}",
            xs.len()
        )));
    }
    let spectrum = kernel_spectrum(kernel, xs, SpectrumRequest::Leading(truncation), exec)?;
    let p = projection_coefficients(&spectrum, ys)?;
    truncation_estimate(&p, truncation, beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedEstimate {
    pub mean: f64,
    /// Sample standard deviation (denominator `reps - 1`).
    pub std: f64,
    pub estimates: Vec<SmoothnessEstimate>,
}

impl RepeatedEstimate {
    pub fn s_hats(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.s_hat).collect()
    }
}

/// Runs [`estimate_smoothness`] on `reps` samples drawn by
/// `source(n, base_seed + rep)`.
#[allow(clippy::too_many_arguments)]
pub fn repeated_estimate<F>(
    source: F,
    kernel: &KernelSpec,
    n: usize,
    truncation: usize,
    beta: f64,
    reps: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<RepeatedEstimate>
where
    F: Fn(usize, u64) -> Result<(Points, Vec<f64>)> + Sync + Send,
{
    if reps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replicates, got {reps}")));
    }
    let inner = if exec.is_parallel() {
        Execution::Sequential
    } else {
        exec
    };
    let results = map_indices(exec, reps, |rep| {
        let seed = crate::data_synth::replicate_seed(base_seed, rep);
        source(n, seed)
            .and_then(|(xs, ys)| estimate_smoothness(kernel, &xs, &ys, truncation, beta, inner))
            .map_err(|e| e.in_replicate(n, rep))
    });
    let estimates = results.into_iter().collect::<Result<Vec<_>>>()?;
    let s: Vec<f64> = estimates.iter().map(|e| e.s_hat).collect();
    Ok(RepeatedEstimate {
        mean: stats::mean(&s),
        std: stats::sample_std(&s),
        estimates,
    })
}
