//! Analytic Mercer eigensystems, empirical spectra of Gram matrices,
//! effective dimension and eigenvalue-decay diagnostics.

mod tridiagonal;

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::{householder, qr, temp_mat_scratch};
use faer::{Conj, Mat};

pub use tridiagonal::SymTridiagonal;

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix_with, GramMatrix, KernelSpec};
use crate::par::Execution;
use crate::points::Points;
use crate::stats;

/// Relative threshold below which empirical eigenvalues are treated as zero
/// by downstream divisions.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Marginal measure the eigenfunctions are orthonormal under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    UniformInterval,
    UniformSphere { dim: usize },
}

type EigenfunctionFn = dyn Fn(usize, &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Eigenfunctions {
    MinKernel,
    Custom(Arc<EigenfunctionFn>),
}

/// Eigenvalues `lambda_1 >= lambda_2 >= ... > 0`, eigenfunctions and the
/// eigenvalue decay rate `beta` of a kernel under a measure.
#[derive(Clone)]
pub struct EigenSystem {
    lambdas: Vec<f64>,
    beta: f64,
    measure: Measure,
    eigenfunction_sup: f64,
    eigenfunctions: Eigenfunctions,
}

impl fmt::Debug for EigenSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EigenSystem")
            .field("terms", &self.lambdas.len())
            .field("beta", &self.beta)
            .field("measure", &self.measure)
            .finish_non_exhaustive()
    }
}

impl EigenSystem {
    /// A user-supplied system. `eigenfunction(j, x)` takes the 1-based index
    /// `j`; `eigenfunction_sup` bounds `|e_j|` uniformly.
    pub fn custom<F>(
        lambdas: Vec<f64>,
        beta: f64,
        measure: Measure,
        eigenfunction_sup: f64,
        eigenfunction: F,
    ) -> Result<Self>
    where
        F: Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
    {
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("eigensystem needs at least one eigenvalue".into()));
        }
        if lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidArgument("eigenvalues must be strictly positive".into()));
        }
        if lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("eigenvalues must be nonincreasing".into()));
        }
        if !(beta > 1.0) {
            return Err(Error::InvalidArgument(format!("decay rate must exceed 1, got {beta}")));
        }
        Ok(EigenSystem {
            lambdas,
            beta,
            measure,
            eigenfunction_sup,
            eigenfunctions: Eigenfunctions::Custom(Arc::new(eigenfunction)),
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `lambda_j`, 1-based.
    pub fn lambda(&self, j: usize) -> f64 {
        self.lambdas[j - 1]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn eigenfunction_sup(&self) -> f64 {
        self.eigenfunction_sup
    }

    /// `e_j(x)`, 1-based.
    pub fn eigenfunction(&self, j: usize, x: &[f64]) -> f64 {
        match &self.eigenfunctions {
            Eigenfunctions::MinKernel => min_kernel_eigenfunction(j, x[0]),
            Eigenfunctions::Custom(f) => f(j, x),
        }
    }
}

fn min_kernel_eigenvalue(j: usize) -> f64 {
    let w = (2 * j - 1) as f64 * PI / 2.0;
    1.0 / (w * w)
}

fn min_kernel_eigenfunction(j: usize, x: f64) -> f64 {
    SQRT_2 * ((2 * j - 1) as f64 * PI * x / 2.0).sin()
}

/// Mercer system of `min(x, x')` under the uniform measure on `[0, 1]`:
/// `lambda_j = ((2j - 1) pi / 2)^-2`, `e_j(x) = sqrt(2) sin((2j - 1) pi x / 2)`,
/// decay rate 2.
pub fn min_kernel_eigensystem(j_max: usize) -> Result<EigenSystem> {
    if j_max == 0 {
        return Err(Error::InvalidArgument("j_max must be >= 1".into()));
    }
    Ok(EigenSystem {
        lambdas: (1..=j_max).map(min_kernel_eigenvalue).collect(),
        beta: 2.0,
        measure: Measure::UniformInterval,
        eigenfunction_sup: SQRT_2,
        eigenfunctions: Eigenfunctions::MinKernel,
    })
}

/// Leading eigenpairs of `K / n`, sorted by descending eigenvalue.
///
/// `vectors` holds `rank()` orthonormal columns of length `n`, stored
/// contiguously. A spectrum is complete when `rank() == n`.
#[derive(Debug, Clone)]
pub struct EmpiricalSpectrum {
    n: usize,
    values: Vec<f64>,
    vectors: Vec<f64>,
}

impl EmpiricalSpectrum {
    pub fn new(n: usize, values: Vec<f64>, vectors: Vec<f64>) -> Result<Self> {
        if vectors.len() != n * values.len() || values.len() > n {
            return Err(Error::InvalidArgument(format!(
                "{} eigenvalues with {} vector entries do not fit n = {n}",
                values.len(),
                vectors.len()
            )));
        }
        Ok(EmpiricalSpectrum { n, values, vectors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn is_complete(&self) -> bool {
        self.rank() == self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `j`-th eigenvector, 0-based.
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }

    pub fn vectors(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.vectors.chunks_exact(self.n)
    }

    /// Eigenvalues below `EIGENVALUE_FLOOR * values[0]` are reported as zero.
    pub fn floored_value(&self, j: usize) -> f64 {
        let v = self.values[j];
        if v < EIGENVALUE_FLOOR * self.values[0].abs() {
            0.0
        } else {
            v
        }
    }

    /// `V^T y` over the stored eigenvectors.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        self.vectors().map(|v| crate::kernels::dot(v, y)).collect()
    }

    /// `sum_j w_j v_j`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.rank());
        let mut out = vec![0.0; self.n];
        for (v, w) in self.vectors().zip(weights) {
            out.iter_mut().zip(v).for_each(|(o, x)| *o += w * x);
        }
        out
    }

    /// Sorts eigenpairs by descending value, ties by ascending input position.
    fn from_unsorted(n: usize, values: Vec<f64>, vectors: Vec<Vec<f64>>) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let mut flat = Vec::with_capacity(n * values.len());
        for &i in &order {
            flat.extend_from_slice(&vectors[i]);
        }
        EmpiricalSpectrum {
            n,
            values: order.iter().map(|&i| values[i]).collect(),
            vectors: flat,
        }
    }
}

/// Full eigendecomposition of `G / n` by a dense symmetric solver.
pub fn empirical_eigendecomposition(gram: &GramMatrix) -> Result<EmpiricalSpectrum> {
    empirical_eigendecomposition_with(gram, Execution::default())
}

pub fn empirical_eigendecomposition_with(
    gram: &GramMatrix,
    exec: Execution,
) -> Result<EmpiricalSpectrum> {
    let n = gram.n();
    let a = gram.to_faer_scaled(1.0 / n as f64);
    let par = exec.faer_par();
    let params = Default::default();
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    let mut u = Mat::<f64>::zeros(n, n);
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        params,
    ));
    evd::self_adjoint_evd(
        a.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut buf),
        params,
    )
    .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let values: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut v: Vec<f64> = (0..n).map(|i| u[(i, j)]).collect();
            tridiagonal::canonical_sign(&mut v);
            v
        })
        .collect();
    Ok(EmpiricalSpectrum::from_unsorted(n, values, vectors))
}

/// The `k` largest eigenpairs of `G / n`: Householder tridiagonalisation
/// followed by bisection and inverse iteration on the tridiagonal factor.
pub fn leading_eigenpairs(gram: &GramMatrix, k: usize, exec: Execution) -> Result<EmpiricalSpectrum> {
    let n = gram.n();
    let k = k.min(n);
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one eigenpair".into()));
    }
    let par = exec.faer_par();
    let mut trid = gram.to_faer_scaled(1.0 / n as f64);
    if n == 1 {
        return EmpiricalSpectrum::new(1, vec![trid[(0, 0)]], vec![1.0]);
    }
    let bs = qr::no_pivoting::factor::recommended_block_size::<f64>(n, n);
    let mut hh = Mat::<f64>::zeros(bs, n - 1);
    let params = Default::default();
    let mut buf = MemBuffer::new(faer::dyn_stack::StackReq::any_of(&[
        evd::tridiag::tridiag_in_place_scratch::<f64>(n, par, params),
        householder::apply_block_householder_sequence_on_the_left_in_place_scratch::<f64>(
            n - 1,
            bs,
            k,
        ),
        temp_mat_scratch::<f64>(n, 1),
    ]));
    evd::tridiag::tridiag_in_place(trid.as_mut(), hh.as_mut(), par, MemStack::new(&mut buf), params);
    let diag: Vec<f64> = (0..n).map(|i| trid[(i, i)]).collect();
    let off: Vec<f64> = (0..n - 1).map(|i| trid[(i + 1, i)]).collect();
    let t = SymTridiagonal::new(diag, off);
    let ascending = t.eigenvalues(n - k..n);
    let small_vecs = t.eigenvectors(&ascending)?;
    let mut u = Mat::<f64>::from_fn(n, k, |i, j| small_vecs[j][i]);
    householder::apply_block_householder_sequence_on_the_left_in_place_with_conj(
        trid.as_ref().submatrix(1, 0, n - 1, n - 1),
        hh.as_ref(),
        Conj::No,
        u.as_mut().subrows_mut(1, n - 1),
        par,
        MemStack::new(&mut buf),
    );
    let vectors: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut v: Vec<f64> = (0..n).map(|i| u[(i, j)]).collect();
            tridiagonal::canonical_sign(&mut v);
            v
        })
        .collect();
    Ok(EmpiricalSpectrum::from_unsorted(n, ascending, vectors))
}

/// Spectrum of `K / n` for the min kernel through its tridiagonal inverse.
///
/// For sorted distinct points `0 < x_(1) < ... < x_(n)` the matrix
/// `min(x_(i), x_(j))` is the covariance of Brownian motion and its inverse
/// is tridiagonal with spacings `d_k = x_(k) - x_(k-1)` (`x_(0) = 0`):
/// `T_kk = 1/d_k + 1/d_(k+1)`, `T_(k,k+1) = -1/d_(k+1)`, `T_nn = 1/d_n`.
/// Returns `Ok(None)` when the points are not distinct or touch zero.
pub fn min_kernel_spectrum(xs: &[f64], leading: Option<usize>) -> Result<Option<EmpiricalSpectrum>> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no points".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut inv_gap = Vec::with_capacity(n);
    let mut prev = 0.0;
    for &i in &order {
        let gap = xs[i] - prev;
        if !(gap > 0.0) {
            return Ok(None);
        }
        inv_gap.push(1.0 / gap);
        prev = xs[i];
    }
    let diag: Vec<f64> = (0..n)
        .map(|k| inv_gap[k] + if k + 1 < n { inv_gap[k + 1] } else { 0.0 })
        .collect();
    let off: Vec<f64> = (1..n).map(|k| -inv_gap[k]).collect();
    let nf = n as f64;

    let (t_values, sorted_vectors): (Vec<f64>, Vec<Vec<f64>>) = match leading {
        Some(k) if k < n => {
            let t = SymTridiagonal::new(diag, off);
            let vals = t.eigenvalues(0..k);
            let vecs = t.eigenvectors(&vals)?;
            (vals, vecs)
        }
        _ => full_tridiagonal_evd(&diag, &off)?,
    };
    let values: Vec<f64> = t_values.iter().map(|t| 1.0 / (nf * t)).collect();
    let vectors: Vec<Vec<f64>> = sorted_vectors
        .into_iter()
        .map(|vs| {
            let mut v = vec![0.0; n];
            for (pos, &orig) in order.iter().enumerate() {
                v[orig] = vs[pos];
            }
            tridiagonal::canonical_sign(&mut v);
            v
        })
        .collect();
    Ok(Some(EmpiricalSpectrum::from_unsorted(n, values, vectors)))
}

fn full_tridiagonal_evd(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    let par = faer::Par::Seq;
    let params = Default::default();
    let d = faer::Col::<f64>::from_fn(n, |i| diag[i]);
    let e = faer::Col::<f64>::from_fn(n, |i| if i + 1 < n { off[i] } else { 0.0 });
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    let mut u = Mat::<f64>::zeros(n, n);
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        params,
    ));
    evd::tridiagonal_self_adjoint_evd(
        d.as_diagonal(),
        e.as_diagonal(),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut buf),
        params,
    )
    .map_err(|e| Error::Numerical(format!("tridiagonal eigensolver failed: {e:?}")))?;
    let values = (0..n).map(|i| s[i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok((values, vectors))
}

/// Which part of the spectrum a caller needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumRequest {
    Full,
    Leading(usize),
}

/// Spectrum of `K(X, X) / n`, taking the tridiagonal route for the min kernel
/// when the points allow it and a dense solver otherwise.
pub fn kernel_spectrum(
    kernel: &KernelSpec,
    xs: &Points,
    request: SpectrumRequest,
    exec: Execution,
) -> Result<EmpiricalSpectrum> {
    kernel.check_points(xs)?;
    if kernel.is_min() {
        let leading = match request {
            SpectrumRequest::Full => None,
            SpectrumRequest::Leading(k) => Some(k),
        };
        if let Some(spec) = min_kernel_spectrum(xs.as_slice(), leading)? {
            return Ok(spec);
        }
    }
    let gram = gram_matrix_with(kernel, xs, exec)?;
    match request {
        SpectrumRequest::Leading(k) if k < gram.n() => leading_eigenpairs(&gram, k, exec),
        _ => empirical_eigendecomposition_with(&gram, exec),
    }
}

/// `N(nu) = sum_i lambda_i / (lambda_i + 1/nu)`.
pub fn effective_dimension(lambdas: &[f64], nu: f64) -> Result<f64> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("effective dimension needs eigenvalues".into()));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
    }
    // lambda / (lambda + 1/nu) = nu lambda / (nu lambda + 1)
    Ok(lambdas.iter().map(|&l| nu * l / (nu * l + 1.0)).sum())
}

/// Decay rate estimate: minus the least-squares slope of `log lambda_j` on
/// `log j` over the 1-based inclusive index range.
pub fn edr_fit(lambdas: &[f64], j_range: std::ops::RangeInclusive<usize>) -> Result<f64> {
    let (lo, hi) = (*j_range.start(), *j_range.end());
    if lo == 0 || hi > lambdas.len() || hi < lo + 2 {
        return Err(Error::InvalidArgument(format!(
            "index range {lo}..={hi} must be 1-based, within {} values and cover >= 3 indices",
            lambdas.len()
        )));
    }
    let slice = &lambdas[lo - 1..hi];
    if slice.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidArgument("eigenvalues in range must be positive".into()));
    }
    if slice.iter().all(|l| *l == slice[0]) {
        return Err(Error::DegenerateFit("all eigenvalues in range are equal".into()));
    }
    let xs: Vec<f64> = (lo..=hi).map(|j| (j as f64).ln()).collect();
    let ys: Vec<f64> = slice.iter().map(|l| l.ln()).collect();
    let fit = stats::ols(&xs, &ys).ok_or_else(|| Error::DegenerateFit("singular design".into()))?;
    Ok(-fit.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram_matrix, KernelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    fn check_orthonormal(s: &EmpiricalSpectrum, tol: f64) {
        for i in 0..s.rank() {
            for j in 0..s.rank() {
                let d = crate::kernels::dot(s.vector(i), s.vector(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() <= tol, "<v{i}, v{j}> = {d}");
            }
        }
    }

    #[test]
    fn min_kernel_analytic_values() {
        let sys = min_kernel_eigensystem(5).unwrap();
        assert!((sys.lambda(1) - 0.405_284_734_569_351).abs() < 1e-12);
        assert!((sys.lambda(2) - 0.045_031_637_174_372).abs() < 1e-12);
        assert!((sys.eigenfunction(1, &[1.0]) - SQRT_2).abs() < 1e-15);
        assert_eq!(sys.beta(), 2.0);
        assert!(min_kernel_eigensystem(0).is_err());
    }

    #[test]
    fn identity_gram() {
        let g = GramMatrix::from_row_major(3, vec![3.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 3.0]).unwrap();
        let s = empirical_eigendecomposition(&g).unwrap();
        for v in s.values() {
            assert!((v - 1.0).abs() < 1e-14);
        }
        check_orthonormal(&s, 1e-12);
    }

    #[test]
    fn rank_one_gram() {
        let xs = Points::scalars(vec![0.5; 6]);
        let g = gram_matrix(&KernelSpec::min(), &xs).unwrap();
        let s = empirical_eigendecomposition(&g).unwrap();
        assert!((s.values()[0] - 0.5).abs() < 1e-12);
        assert!(s.values()[1..].iter().all(|v| v.abs() <= 1e-10));
        // the structured route refuses duplicate points
        assert!(min_kernel_spectrum(xs.as_slice(), None).unwrap().is_none());
        let via_dispatch =
            kernel_spectrum(&KernelSpec::min(), &xs, SpectrumRequest::Full, Execution::Sequential)
                .unwrap();
        assert!((via_dispatch.values()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dense_reconstruction_and_orthonormality() {
        let xs = Points::scalars(uniform(80, 1));
        let g = gram_matrix(&KernelSpec::min(), &xs).unwrap();
        let s = empirical_eigendecomposition(&g).unwrap();
        check_orthonormal(&s, 1e-10);
        assert!(s.values().windows(2).all(|w| w[0] >= w[1]));
        let n = 80;
        let (mut err, mut norm) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let target = g.get(i, j) / n as f64;
                let rec: f64 = (0..n)
                    .map(|k| s.values()[k] * s.vector(k)[i] * s.vector(k)[j])
                    .sum();
                err += (target - rec).powi(2);
                norm += target * target;
            }
        }
        assert!(err.sqrt() <= 1e-8 * norm.sqrt());
    }

    #[test]
    fn tridiagonal_route_matches_dense() {
        let n = 300;
        let xs = uniform(n, 9);
        let g = gram_matrix(&KernelSpec::min(), &Points::scalars(xs.clone())).unwrap();
        let dense = empirical_eigendecomposition(&g).unwrap();
        let full = min_kernel_spectrum(&xs, None).unwrap().unwrap();
        let part = min_kernel_spectrum(&xs, Some(40)).unwrap().unwrap();
        assert_eq!(part.rank(), 40);
        check_orthonormal(&part, 1e-10);
        for j in 0..40 {
            let d = dense.values()[j];
            assert!((full.values()[j] - d).abs() <= 1e-9 * d, "{j}");
            assert!((part.values()[j] - d).abs() <= 1e-9 * d, "{j}");
            let c = crate::kernels::dot(dense.vector(j), part.vector(j)).abs();
            assert!((c - 1.0).abs() < 1e-8, "vector {j}: |cos| = {c}");
        }
    }

    #[test]
    fn leading_dense_matches_full_dense() {
        let n = 120;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
                let nrm = crate::kernels::dot(&v, &v).sqrt();
                v.into_iter().map(|x| x / nrm).collect()
            })
            .collect();
        let g = gram_matrix(&KernelSpec::ntk(2).unwrap(), &Points::from_rows(&rows)).unwrap();
        let full = empirical_eigendecomposition(&g).unwrap();
        let lead = leading_eigenpairs(&g, 10, Execution::Sequential).unwrap();
        check_orthonormal(&lead, 1e-10);
        for j in 0..10 {
            assert!((full.values()[j] - lead.values()[j]).abs() < 1e-12);
            let c = crate::kernels::dot(full.vector(j), lead.vector(j)).abs();
            assert!((c - 1.0).abs() < 1e-8, "vector {j}: |cos| = {c}");
        }
    }

    #[test]
    fn nystrom_top_ten_within_five_percent() {
        let xs = uniform(1000, 21);
        let s = min_kernel_spectrum(&xs, Some(10)).unwrap().unwrap();
        let sys = min_kernel_eigensystem(10).unwrap();
        for j in 0..10 {
            let rel = (s.values()[j] - sys.lambdas()[j]).abs() / sys.lambdas()[j];
            assert!(rel < 0.05, "j = {}: rel err {rel}", j + 1);
        }
    }

    #[test]
    fn effective_dimension_examples() {
        assert!((effective_dimension(&[1.0], 1.0).unwrap() - 0.5).abs() < 1e-15);
        let lambdas = min_kernel_eigensystem(1000).unwrap().lambdas().to_vec();
        assert!(effective_dimension(&lambdas, 1e-12).unwrap() < 1e-11);
        let mut prev = 0.0;
        for k in 0..20 {
            let nu = 10f64.powf(-2.0 + 0.5 * k as f64);
            let v = effective_dimension(&lambdas, nu).unwrap();
            assert!(v > prev && v < lambdas.len() as f64);
            prev = v;
        }
        assert!(effective_dimension(&[], 1.0).is_err());
        assert!(effective_dimension(&[1.0], 0.0).is_err());
    }

    #[test]
    fn edr_fit_examples() {
        let exact: Vec<f64> = (1..=100).map(|j| (j as f64).powi(-2)).collect();
        assert!((edr_fit(&exact, 1..=100).unwrap() - 2.0).abs() < 1e-12);
        let scaled: Vec<f64> = (1..=100).map(|j| 3.0 * (j as f64).powf(-1.5)).collect();
        assert!((edr_fit(&scaled, 1..=100).unwrap() - 1.5).abs() < 1e-12);
        let analytic = min_kernel_eigensystem(200).unwrap();
        // (2j - 1)^-2 is only asymptotically j^-2; the full-range value below
        // comes from an independent least-squares evaluation
        assert!((edr_fit(analytic.lambdas(), 1..=200).unwrap() - 2.074_975_116_275_673).abs() < 1e-9);
        assert!((edr_fit(analytic.lambdas(), 20..=200).unwrap() - 2.0).abs() < 0.02);
        assert!(matches!(edr_fit(&[1.0; 5], 1..=5), Err(Error::DegenerateFit(_))));
        assert!(edr_fit(&exact, 1..=2).is_err());
    }
}
