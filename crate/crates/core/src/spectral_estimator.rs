//! Filter functions and the spectral-algorithm estimator
//! `f_nu = phi_nu(T_X) g_Z`, realised through the eigendecomposition of
//! `K(X, X) / n`.

use std::fmt;

use faer::Side;

use crate::eigensystems::{kernel_spectrum, SpectrumRequest, EIGENVALUE_FLOOR};
use crate::error::{Error, Result};
use crate::kernels::{kernel_combination, GramMatrix, KernelSpec};
use crate::par::Execution;
use crate::points::Points;

/// A spectral regularisation filter `phi_nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    GradientFlow,
    Ridge,
    SpectralCutoff,
    /// `m >= 1` Tikhonov iterations.
    IteratedTikhonov(u32),
}

impl FilterKind {
    pub fn iterated_tikhonov(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("iterated Tikhonov needs m >= 1".into()));
        }
        Ok(FilterKind::IteratedTikhonov(m))
    }

    /// Every filter shipped here, with `IteratedTikhonov` at `m = 2`.
    pub fn all() -> [FilterKind; 4] {
        [
            FilterKind::GradientFlow,
            FilterKind::Ridge,
            FilterKind::SpectralCutoff,
            FilterKind::IteratedTikhonov(2),
        ]
    }

    /// Qualification `tau`; `+inf` when unbounded.
    pub fn qualification(&self) -> f64 {
        match self {
            FilterKind::GradientFlow | FilterKind::SpectralCutoff => f64::INFINITY,
            FilterKind::Ridge => 1.0,
            FilterKind::IteratedTikhonov(m) => *m as f64,
        }
    }

    /// `E` in `sup_z z^a phi_nu(z) <= E nu^(1 - a)`.
    pub fn e_constant(&self) -> f64 {
        match self {
            FilterKind::IteratedTikhonov(m) => *m as f64,
            _ => 1.0,
        }
    }

    /// `F_tau` in `sup_z |psi_nu(z)| z^a <= F_tau nu^(-a)`, `a <= tau`.
    pub fn f_constant(&self, tau: f64) -> f64 {
        match self {
            FilterKind::GradientFlow => {
                if tau == 0.0 {
                    1.0
                } else {
                    (tau / std::f64::consts::E).powf(tau)
                }
            }
            _ => 1.0,
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterKind::GradientFlow => write!(f, "gradient-flow"),
            FilterKind::Ridge => write!(f, "ridge"),
            FilterKind::SpectralCutoff => write!(f, "spectral-cutoff"),
            FilterKind::IteratedTikhonov(m) => write!(f, "iterated-tikhonov-{m}"),
        }
    }
}

/// `phi_nu(z)`, with the analytic limit at `z = 0`.
pub fn filter_phi(kind: FilterKind, nu: f64, z: f64) -> f64 {
    let w = nu * z;
    match kind {
        FilterKind::GradientFlow => {
            if z == 0.0 {
                nu
            } else {
                -(-w).exp_m1() / z
            }
        }
        FilterKind::Ridge => nu / (w + 1.0),
        FilterKind::SpectralCutoff => {
            if z >= 1.0 / nu {
                1.0 / z
            } else {
                0.0
            }
        }
        FilterKind::IteratedTikhonov(m) => {
            if z == 0.0 {
                m as f64 * nu
            } else {
                -(-(m as f64) * w.ln_1p()).exp_m1() / z
            }
        }
    }
}

/// `psi_nu(z) = 1 - z phi_nu(z)`, evaluated in closed form.
pub fn filter_psi(kind: FilterKind, nu: f64, z: f64) -> f64 {
    let w = nu * z;
    match kind {
        FilterKind::GradientFlow => (-w).exp(),
        FilterKind::Ridge => 1.0 / (w + 1.0),
        FilterKind::SpectralCutoff => {
            if z >= 1.0 / nu {
                0.0
            } else {
                1.0
            }
        }
        FilterKind::IteratedTikhonov(m) => (-(m as f64) * w.ln_1p()).exp(),
    }
}

/// Largest relative violations of the two filter inequalities over a grid.
/// A margin `<= 0` means the inequality held everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBoundsReport {
    pub kind: FilterKind,
    pub tau: f64,
    pub e: f64,
    pub f_tau: f64,
    pub phi_margin: f64,
    pub psi_margin: f64,
    /// `(nu, z, alpha)` at the worst `psi` point.
    pub psi_worst: (f64, f64, f64),
    pub passed: bool,
}

// equality cases (gradient flow at z = 0 or z = tau / nu) must not fail on rounding
const BOUND_SLACK: f64 = 1e-12;

/// Checks `sup_z z^a phi_nu(z) <= E nu^(1-a)` for `a` in `alpha_grid` and
/// `sup_z |psi_nu(z)| z^a <= F_tau nu^(-a)` for `a` in `tau * alpha_grid`.
pub fn verify_filter_bounds(
    kind: FilterKind,
    nu_grid: &[f64],
    alpha_grid: &[f64],
    z_grid: &[f64],
    tau_check: f64,
) -> Result<FilterBoundsReport> {
    if nu_grid.is_empty() || alpha_grid.is_empty() || z_grid.is_empty() {
        return Err(Error::InvalidArgument("filter bound grids must be nonempty".into()));
    }
    if alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidArgument("alpha grid must lie in [0, 1]".into()));
    }
    if !(tau_check >= 1.0 && tau_check <= kind.qualification()) {
        return Err(Error::InvalidArgument(format!(
            "tau = {tau_check} is outside [1, {}] for {kind}",
            kind.qualification()
        )));
    }
    let e = kind.e_constant();
    let f_tau = kind.f_constant(tau_check);
    let mut phi_margin = f64::NEG_INFINITY;
    let mut psi_margin = f64::NEG_INFINITY;
    let mut psi_worst = (f64::NAN, f64::NAN, f64::NAN);
    for &nu in nu_grid {
        for &a in alpha_grid {
            let bound = e * nu.powf(1.0 - a);
            let sup = z_grid
                .iter()
                .map(|&z| z.powf(a) * filter_phi(kind, nu, z))
                .fold(0.0, f64::max);
            phi_margin = phi_margin.max((sup - bound) / bound);

            let alpha = a * tau_check;
            let bound = f_tau * nu.powf(-alpha);
            for &z in z_grid {
                let v = filter_psi(kind, nu, z).abs() * z.powf(alpha);
                let m = (v - bound) / bound;
                if m > psi_margin {
                    psi_margin = m;
                    psi_worst = (nu, z, alpha);
                }
            }
        }
    }
    Ok(FilterBoundsReport {
        kind,
        tau: tau_check,
        e,
        f_tau,
        phi_margin,
        psi_margin,
        psi_worst,
        passed: phi_margin <= BOUND_SLACK && psi_margin <= BOUND_SLACK,
    })
}

/// `f(x) = sum_i c_i K(x, X_i)` produced by a spectral algorithm.
#[derive(Debug, Clone)]
pub struct FittedClassifier {
    kernel: KernelSpec,
    train_x: Points,
    coefficients: Vec<f64>,
    nu: f64,
    filter: FilterKind,
}

impl FittedClassifier {
    /// Assembles a model from explicit coefficients.
    pub fn from_parts(
        kernel: KernelSpec,
        train_x: Points,
        coefficients: Vec<f64>,
        nu: f64,
        filter: FilterKind,
    ) -> Result<Self> {
        if coefficients.len() != train_x.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for {} training points",
                coefficients.len(),
                train_x.len()
            )));
        }
        kernel.check_points(&train_x)?;
        Ok(FittedClassifier {
            kernel,
            train_x,
            coefficients,
            nu,
            filter,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn train_x(&self) -> &Points {
        &self.train_x
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn filter(&self) -> FilterKind {
        self.filter
    }

    /// Same model with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.coefficients.iter_mut().for_each(|c| *c *= factor);
        out
    }
}

/// `sign` with `sign(0) = +1`.
pub fn sign(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

pub fn fit(kernel: &KernelSpec, xs: &Points, ys: &[f64], kind: FilterKind, nu: f64) -> Result<FittedClassifier> {
    fit_with(kernel, xs, ys, kind, nu, Execution::default())
}

/// Coefficients `c = (1/n) V phi_nu(Sigma) V^T Y` from the full spectrum of
/// `K / n`; eigenvalues under the floor enter `phi_nu` as zero.
pub fn fit_with(
    kernel: &KernelSpec,
    xs: &Points,
    ys: &[f64],
    kind: FilterKind,
    nu: f64,
    exec: Execution,
) -> Result<FittedClassifier> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot fit on an empty sample".into()));
    }
    if ys.len() != n {
        return Err(Error::InvalidArgument(format!("{} labels for {n} points", ys.len())));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
    }
    let spectrum = kernel_spectrum(kernel, xs, SpectrumRequest::Full, exec)?;
    let proj = spectrum.project(ys);
    let weights: Vec<f64> = proj
        .iter()
        .enumerate()
        .map(|(j, p)| filter_phi(kind, nu, spectrum.floored_value(j)) * p / n as f64)
        .collect();
    let coefficients = spectrum.combine(&weights);
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite filter coefficients".into()));
    }
    Ok(FittedClassifier {
        kernel: kernel.clone(),
        train_x: xs.clone(),
        coefficients,
        nu,
        filter: kind,
    })
}

/// `f(x)`.
pub fn predict(model: &FittedClassifier, x: &[f64]) -> Result<f64> {
    model.kernel.check_point(x)?;
    Ok(kernel_combination(&model.kernel, x, &model.train_x, &model.coefficients))
}

/// `sign(f(x))` with `sign(0) = +1`.
pub fn classify(model: &FittedClassifier, x: &[f64]) -> Result<i8> {
    predict(model, x).map(sign)
}

/// `k_row^T K^-1 (I - exp(-(t/n) K)) Y` through an eigendecomposition of `K`
/// itself. Directions with eigenvalue under the floor take the limit `t / n`.
pub fn gradient_flow_closed_form(gram: &GramMatrix, ys: &[f64], t: f64, k_row: &[f64]) -> Result<f64> {
    let n = gram.n();
    if ys.len() != n || k_row.len() != n {
        return Err(Error::InvalidArgument(format!(
            "closed form needs {n} labels and kernel entries, got {} and {}",
            ys.len(),
            k_row.len()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t must be nonnegative, got {t}")));
    }
    let k = gram.to_faer_scaled(1.0);
    let evd = k
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let (s, u) = (evd.S(), evd.U());
    let top = (0..n).map(|i| s[i].abs()).fold(0.0, f64::max);
    let floor = EIGENVALUE_FLOOR * top;
    if top == 0.0 || (0..n).all(|i| s[i] < floor) {
        return Err(Error::SingularMatrix);
    }
    let rate = t / n as f64;
    let mut out = 0.0;
    for j in 0..n {
        let lambda = s[j];
        let g = if lambda < floor {
            rate
        } else {
            -(-rate * lambda).exp_m1() / lambda
        };
        let (mut ky, mut kk) = (0.0, 0.0);
        for i in 0..n {
            ky += u[(i, j)] * ys[i];
            kk += u[(i, j)] * k_row[i];
        }
        out += kk * g * ky;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gram_matrix;

    #[test]
    fn phi_examples() {
        assert_eq!(filter_phi(FilterKind::GradientFlow, 2.0, 0.0), 2.0);
        assert!((filter_phi(FilterKind::GradientFlow, 1.0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(filter_phi(FilterKind::Ridge, 1.0, 1.0), 0.5);
        assert_eq!(filter_phi(FilterKind::SpectralCutoff, 2.0, 0.25), 0.0);
        assert_eq!(filter_phi(FilterKind::SpectralCutoff, 2.0, 0.5), 2.0);
        assert_eq!(filter_phi(FilterKind::IteratedTikhonov(3), 2.0, 0.0), 6.0);
        // one Tikhonov step is ridge
        assert!((filter_phi(FilterKind::IteratedTikhonov(1), 3.0, 0.7) - filter_phi(FilterKind::Ridge, 3.0, 0.7)).abs() < 1e-15);
    }

    #[test]
    fn psi_examples() {
        assert!((filter_psi(FilterKind::GradientFlow, 3.0, 2.0) - (-6.0f64).exp()).abs() < 1e-18);
        for kind in FilterKind::all() {
            assert_eq!(filter_psi(kind, 1.7, 0.0), 1.0);
        }
        assert_eq!(filter_psi(FilterKind::Ridge, 1.0, 1.0), 0.5);
    }

    #[test]
    fn psi_is_one_minus_z_phi() {
        for kind in FilterKind::all() {
            for &nu in &[0.3, 1.0, 17.0] {
                for k in 0..=50 {
                    let z = k as f64 / 50.0;
                    let lhs = filter_psi(kind, nu, z);
                    let rhs = 1.0 - z * filter_phi(kind, nu, z);
                    assert!((lhs - rhs).abs() < 1e-12, "{kind} nu={nu} z={z}");
                }
            }
        }
    }

    #[test]
    fn gradient_flow_bound_examples() {
        let zs: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let r = verify_filter_bounds(FilterKind::GradientFlow, &[5.0], &[0.0], &zs, 1.0).unwrap();
        assert!(r.phi_margin.abs() < 1e-15, "sup phi = nu at z = 0");
        // z e^{-nu z} peaks at z = 1/nu = 0.2, which is on the grid
        let r = verify_filter_bounds(FilterKind::GradientFlow, &[5.0], &[1.0], &zs, 1.0).unwrap();
        assert!(r.passed);
        assert!(r.psi_margin.abs() < 1e-12);
    }

    #[test]
    fn gradient_flow_constant_is_sharp_only_at_alpha_tau() {
        // sup |psi| = 1 at alpha = 0, while (1/e)^1 < 1
        let zs: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let r = verify_filter_bounds(FilterKind::GradientFlow, &[5.0], &[0.0, 1.0], &zs, 1.0).unwrap();
        assert!(!r.passed);
        assert_eq!(r.psi_worst.2, 0.0);
    }

    #[test]
    fn ridge_bounds_pass() {
        let zs: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
        let nus: Vec<f64> = (0..20).map(|k| 10f64.powf(-1.0 + 0.25 * k as f64)).collect();
        let r = verify_filter_bounds(FilterKind::Ridge, &nus, &[0.0, 0.5, 1.0], &zs, 1.0).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn tau_above_qualification_is_rejected() {
        assert!(verify_filter_bounds(FilterKind::Ridge, &[1.0], &[0.0], &[0.5], 2.0).is_err());
    }

    #[test]
    fn one_point_ridge_fit() {
        let xs = Points::scalars(vec![0.5]);
        let m = fit(&KernelSpec::min(), &xs, &[1.0], FilterKind::Ridge, 2.0).unwrap();
        assert!((m.coefficients()[0] - 1.0).abs() < 1e-15);
        assert!((predict(&m, &[0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!((predict(&m, &[1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_model_classifies_positive() {
        let xs = Points::scalars(vec![0.2, 0.9]);
        let m = FittedClassifier::from_parts(KernelSpec::min(), xs, vec![0.0, 0.0], 1.0, FilterKind::Ridge).unwrap();
        assert_eq!(predict(&m, &[0.4]).unwrap(), 0.0);
        assert_eq!(classify(&m, &[0.4]).unwrap(), 1);
    }

    #[test]
    fn closed_form_limits() {
        let xs = Points::scalars(vec![0.1, 0.4, 0.8]);
        let g = gram_matrix(&KernelSpec::min(), &xs).unwrap();
        let ys = [1.0, -1.0, 1.0];
        for i in 0..3 {
            assert_eq!(gradient_flow_closed_form(&g, &ys, 0.0, g.row(i)).unwrap(), 0.0);
            let v = gradient_flow_closed_form(&g, &ys, 1e6, g.row(i)).unwrap();
            assert!((v - ys[i]).abs() < 1e-9);
        }
        let zero = GramMatrix::from_row_major(2, vec![0.0; 4]).unwrap();
        assert!(matches!(
            gradient_flow_closed_form(&zero, &[1.0, 1.0], 1.0, &[0.0, 0.0]),
            Err(Error::SingularMatrix)
        ));
    }
}
