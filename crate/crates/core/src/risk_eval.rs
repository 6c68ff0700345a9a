//! Classification excess risk, 0-1 risk and L2 risk, and convergence-rate
//! studies over a grid of sample sizes.

use std::f64::consts::PI;

use rand::Rng;

use crate::data_synth::{replicate_seed, rng_for, sample_classification_with, ConditionalModel, Design, Marginal};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::par::{map_indices, Execution};
use crate::points::Points;
use crate::spectral_estimator::{fit_with, predict, sign, FilterKind};
use crate::stats;

pub const DEFAULT_QUADRATURE_POINTS: usize = 10_001;
pub const DEFAULT_MONTE_CARLO_POINTS: usize = 20_000;

/// How an expectation over `mu` is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskMethod {
    /// Equispaced nodes weighted by the density of `mu` (trapezoid rule);
    /// for the circle, equispaced angles.
    Quadrature { points: usize },
    MonteCarlo { n_test: usize, seed: u64 },
}

impl Default for RiskMethod {
    fn default() -> Self {
        RiskMethod::Quadrature {
            points: DEFAULT_QUADRATURE_POINTS,
        }
    }
}

/// Nodes and weights integrating against `mu`.
pub fn quadrature_rule(marginal: &Marginal, points: usize) -> Result<(Points, Vec<f64>)> {
    if points < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 quadrature points, got {points}")));
    }
    match marginal {
        Marginal::UniformInterval | Marginal::BallUnion { .. } if marginal.dim() == 1 => {
            let h = 1.0 / (points - 1) as f64;
            let xs: Vec<f64> = (0..points).map(|i| i as f64 * h).collect();
            let w = xs
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let end = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
                    end * h * marginal.density(&[*x])
                })
                .collect();
            Ok((Points::scalars(xs), w))
        }
        Marginal::UniformSphere { dim: 2 } => {
            let mut data = Vec::with_capacity(2 * points);
            for i in 0..points {
                let t = 2.0 * PI * i as f64 / points as f64;
                data.extend([t.cos(), t.sin()]);
            }
            Ok((Points::new(2, data), vec![1.0 / points as f64; points]))
        }
        _ => Err(Error::InvalidArgument(format!(
            "no quadrature rule for {marginal:?}; use Monte Carlo"
        ))),
    }
}

fn expectation<G>(model: &ConditionalModel, method: RiskMethod, g: G) -> Result<(f64, f64)>
where
    G: Fn(&[f64]) -> f64,
{
    match method {
        RiskMethod::Quadrature { points } => {
            let (xs, w) = quadrature_rule(model.marginal(), points)?;
            let v = xs.iter().zip(&w).map(|(x, w)| w * g(x)).sum();
            Ok((v, 0.0))
        }
        RiskMethod::MonteCarlo { n_test, seed } => {
            if n_test < 2 {
                return Err(Error::InvalidArgument("Monte Carlo needs at least 2 points".into()));
            }
            let mut rng = rng_for(seed);
            let xs = model.marginal().sample(&mut rng, n_test, Design::Iid)?;
            let vals: Vec<f64> = xs.iter().map(g).collect();
            Ok((stats::mean(&vals), stats::sample_std(&vals) / (n_test as f64).sqrt()))
        }
    }
}

/// `E_X[|f*(X)| 1{sign f(X) != sign f*(X)}]` with `sign(0) = +1`.
pub fn excess_risk<C>(model: &ConditionalModel, classifier: C, method: RiskMethod) -> Result<f64>
where
    C: Fn(&[f64]) -> f64,
{
    excess_risk_with_error(model, classifier, method).map(|(v, _)| v)
}

/// Excess risk and its standard error (zero for quadrature).
pub fn excess_risk_with_error<C>(model: &ConditionalModel, classifier: C, method: RiskMethod) -> Result<(f64, f64)>
where
    C: Fn(&[f64]) -> f64,
{
    expectation(model, method, |x| {
        let f = model.f_star(x);
        if sign(classifier(x)) != sign(f) {
            f.abs()
        } else {
            0.0
        }
    })
}

/// Bayes risk `E[min(eta, 1 - eta)]`.
pub fn bayes_risk(model: &ConditionalModel, method: RiskMethod) -> Result<f64> {
    expectation(model, method, |x| {
        let eta = model.eta(x);
        eta.min(1.0 - eta)
    })
    .map(|(v, _)| v)
}

/// Fraction of `(x, y)` with `sign(f(x)) != y`.
pub fn zero_one_risk<C>(classifier: C, xs: &Points, ys: &[f64]) -> Result<f64>
where
    C: Fn(&[f64]) -> f64,
{
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "test set needs matching nonempty inputs and labels ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    let wrong = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| sign(classifier(x)) as f64 != **y)
        .count();
    Ok(wrong as f64 / xs.len() as f64)
}

/// `int (f - f*)^2 dmu` by quadrature.
pub fn l2_risk<C>(classifier: C, model: &ConditionalModel, quadrature_points: usize) -> Result<f64>
where
    C: Fn(&[f64]) -> f64,
{
    expectation(model, RiskMethod::Quadrature { points: quadrature_points }, |x| {
        let d = classifier(x) - model.f_star(x);
        d * d
    })
    .map(|(v, _)| v)
}

/// `constant * n^(beta / (s beta + 1))`.
pub fn nu_rule(n: usize, s: f64, beta: f64, constant: f64) -> Result<f64> {
    if n == 0 || !(s > 0.0) || !(beta > 1.0) || !(constant > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nu rule needs n >= 1, s > 0, beta > 1, constant > 0 (got {n}, {s}, {beta}, {constant})"
        )));
    }
    Ok(constant * (n as f64).powf(beta / (s * beta + 1.0)))
}

/// `-s beta / (2 (s beta + 1))`.
pub fn theoretical_slope(s: f64, beta: f64) -> f64 {
    -s * beta / (2.0 * (s * beta + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub mean_excess_risk: f64,
    pub std: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudyResult {
    pub rows: Vec<RateRow>,
    pub fitted_slope: f64,
    pub theoretical_slope: f64,
    /// Per-row excess risks of every replicate.
    pub replicates: Vec<Vec<f64>>,
}

impl RateStudyResult {
    /// Sorts rows by `n` and fits `log mean risk` against `log n`.
    pub fn from_rows(mut rows: Vec<RateRow>, s: f64, beta: f64) -> Result<Self> {
        rows.sort_by_key(|r| r.n);
        let (lx, ly): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .map(|r| ((r.n as f64).ln(), r.mean_excess_risk.ln()))
            .unzip();
        if ly.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateFit("a mean excess risk is zero; the log-log slope is undefined".into()));
        }
        let fit = stats::ols(&lx, &ly).ok_or_else(|| Error::DegenerateFit("need two distinct sample sizes".into()))?;
        Ok(RateStudyResult {
            rows,
            fitted_slope: fit.slope,
            theoretical_slope: theoretical_slope(s, beta),
            replicates: Vec::new(),
        })
    }
}

/// Tunables of [`rate_study`] beyond the statistical setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateStudyOptions {
    pub nu_constant: f64,
    pub design: Design,
    /// `None`: quadrature for one-dimensional marginals, Monte Carlo otherwise.
    pub method: Option<RiskMethod>,
    pub exec: Execution,
}

impl Default for RateStudyOptions {
    fn default() -> Self {
        RateStudyOptions {
            nu_constant: 1.0,
            design: Design::Iid,
            method: None,
            exec: Execution::default(),
        }
    }
}

/// Mean excess risk of the spectral classifier with `nu = nu_rule(n)` for
/// each `n`, over `reps` samples seeded `base_seed + rep`.
#[allow(clippy::too_many_arguments)]
pub fn rate_study(
    model: &ConditionalModel,
    kernel: &KernelSpec,
    filter: FilterKind,
    n_grid: &[usize],
    s: f64,
    beta: f64,
    reps: usize,
    base_seed: u64,
    options: RateStudyOptions,
) -> Result<RateStudyResult> {
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < 3 || grid[0] < 32 {
        return Err(Error::InvalidArgument(
            "rate study needs at least 3 distinct sample sizes, each >= 32".into(),
        ));
    }
    if reps < 3 {
        return Err(Error::InvalidArgument(format!("rate study needs at least 3 replicates, got {reps}")));
    }
    let inner = if options.exec.is_parallel() {
        Execution::Sequential
    } else {
        options.exec
    };
    let mut rows = Vec::with_capacity(grid.len());
    let mut replicates = Vec::with_capacity(grid.len());
    for &n in &grid {
        let nu = nu_rule(n, s, beta, options.nu_constant)?;
        let risks = map_indices(options.exec, reps, |rep| {
            let seed = replicate_seed(base_seed, rep);
            let method = options.method.unwrap_or(if model.dim() == 1 {
                RiskMethod::default()
            } else {
                RiskMethod::MonteCarlo {
                    n_test: DEFAULT_MONTE_CARLO_POINTS,
                    seed: rng_for(seed).random(),
                }
            });
            sample_classification_with(model, n, seed, options.design)
                .and_then(|(xs, ys)| fit_with(kernel, &xs, &ys, filter, nu, inner))
                .and_then(|fitted| {
                    let failure = std::cell::RefCell::new(None);
                    let risk = excess_risk(
                        model,
                        |x| {
                            predict(&fitted, x).unwrap_or_else(|e| {
                                failure.borrow_mut().get_or_insert(e);
                                0.0
                            })
                        },
                        method,
                    )?;
                    match failure.into_inner() {
                        Some(e) => Err(e),
                        None => Ok(risk),
                    }
                })
                .map_err(|e| e.in_replicate(n, rep))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        rows.push(RateRow {
            n,
            mean_excess_risk: stats::mean(&risks),
            std: stats::sample_std(&risks),
            nu,
        });
        replicates.push(risks);
    }
    let mut out = RateStudyResult::from_rows(rows, s, beta)?;
    out.replicates = replicates;
    Ok(out)
}
