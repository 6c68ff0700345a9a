//! Kernel functions and Gram matrices.
//!
//! Three kernels are supported:
//!
//! * the min kernel `K(x, x') = min(x, x')` on `[0, 1]`,
//! * the ReLU neural tangent kernel of depth `L` on the unit sphere,
//! * a truncated Mercer series `sum_{j <= J} lambda_j e_j(x) e_j(x')` built
//!   from an [`EigenSystem`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::Mat;

use crate::eigensystems::{EigenSystem, Measure};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::points::Points;

/// Tolerance on `||x||_2 = 1` for sphere-valued kernels.
pub const SPHERE_TOL: f64 = 1e-9;
/// Inner products within this distance of `[-1, 1]` are clamped.
pub const ARCCOS_CLAMP_TOL: f64 = 1e-12;

#[derive(Clone)]
pub enum KernelKind {
    Min,
    Ntk { depth: usize },
    CustomMercer { system: Arc<EigenSystem>, order: usize },
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Min => write!(f, "Min"),
            KernelKind::Ntk { depth } => write!(f, "Ntk {{ depth: {depth} }}"),
            KernelKind::CustomMercer { system, order } => f
                .debug_struct("CustomMercer")
                .field("beta", &system.beta())
                .field("order", order)
                .finish(),
        }
    }
}

/// Immutable description of a positive-definite kernel together with the
/// bound `kappa^2 >= sup_x K(x, x)`.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    kind: KernelKind,
    kappa_bound: f64,
}

impl KernelSpec {
    pub fn min() -> Self {
        KernelSpec {
            kind: KernelKind::Min,
            kappa_bound: 1.0,
        }
    }

    pub fn ntk(depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("NTK depth must be >= 1".into()));
        }
        Ok(KernelSpec {
            kind: KernelKind::Ntk { depth },
            kappa_bound: (depth + 1) as f64,
        })
    }

    /// Mercer series truncated after `order` terms. Truncation error is the
    /// caller's responsibility.
    pub fn custom_mercer(system: Arc<EigenSystem>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "Mercer truncation order must be >= 1".into(),
            ));
        }
        let order = order.min(system.lambdas().len());
        let sup = system.eigenfunction_sup();
        let kappa_bound = system.lambdas()[..order].iter().sum::<f64>() * sup * sup;
        Ok(KernelSpec {
            kind: KernelKind::CustomMercer { system, order },
            kappa_bound,
        })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn kappa_bound(&self) -> f64 {
        self.kappa_bound
    }

    pub fn is_min(&self) -> bool {
        matches!(self.kind, KernelKind::Min)
    }

    /// Checks that `x` lies in the kernel's domain.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        match &self.kind {
            KernelKind::Min => check_unit_interval(x),
            KernelKind::Ntk { .. } => check_sphere(x),
            KernelKind::CustomMercer { system, .. } => match system.measure() {
                Measure::UniformInterval => check_unit_interval(x),
                Measure::UniformSphere { dim } => {
                    if x.len() != dim {
                        return Err(Error::Domain(format!(
                            "expected a point in R^{dim}, got dimension {}",
                            x.len()
                        )));
                    }
                    check_sphere(x)
                }
            },
        }
    }

    pub fn check_points(&self, xs: &Points) -> Result<()> {
        xs.iter().try_for_each(|x| self.check_point(x))
    }

    /// Evaluates `K(x, x')` without domain checks.
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            KernelKind::Min => x[0].min(y[0]),
            KernelKind::Ntk { depth } => ntk_from_inner(*depth, cosine(x, y)),
            KernelKind::CustomMercer { system, order } => (1..=*order)
                .map(|j| system.lambda(j) * system.eigenfunction(j, x) * system.eigenfunction(j, y))
                .sum(),
        }
    }
}

fn check_unit_interval(x: &[f64]) -> Result<()> {
    if x.len() != 1 {
        return Err(Error::Domain(format!(
            "expected a scalar point, got dimension {}",
            x.len()
        )));
    }
    if !(0.0..=1.0).contains(&x[0]) {
        return Err(Error::Domain(format!("{} is outside [0, 1]", x[0])));
    }
    Ok(())
}

fn check_sphere(x: &[f64]) -> Result<()> {
    let norm = dot(x, x).sqrt();
    if (norm - 1.0).abs() > SPHERE_TOL || !norm.is_finite() {
        return Err(Error::Domain(format!(
            "point has norm {norm}, expected a unit vector"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `<x, y>` clamped to `[-1, 1]`, exactly 1 for identical inputs. arccos has
/// infinite slope at 1, so rounding in `<x, x>` would otherwise cost ~1e-8.
#[inline]
fn cosine(x: &[f64], y: &[f64]) -> f64 {
    if x == y {
        1.0
    } else {
        clamp_inner(dot(x, y))
    }
}

#[inline]
fn clamp_inner(u: f64) -> f64 {
    u.clamp(-1.0, 1.0)
}

/// Arc-cosine kernel of order 0 or 1 evaluated at `u` in `[-1, 1]`:
///
/// `kappa_0(u) = (pi - arccos u) / pi`,
/// `kappa_1(u) = (u (pi - arccos u) + sqrt(1 - u^2)) / pi`.
pub fn ntk_kappa(order: u8, u: f64) -> Result<f64> {
    if !(u.abs() <= 1.0 + ARCCOS_CLAMP_TOL) {
        return Err(Error::Domain(format!("kappa argument {u} outside [-1, 1]")));
    }
    let u = clamp_inner(u);
    match order {
        0 => Ok(kappa0(u)),
        1 => Ok(kappa1(u)),
        _ => Err(Error::InvalidArgument(format!(
            "arc-cosine order must be 0 or 1, got {order}"
        ))),
    }
}

#[inline]
fn kappa0(u: f64) -> f64 {
    (PI - u.acos()) / PI
}

#[inline]
fn kappa1(u: f64) -> f64 {
    (u * (PI - u.acos()) + (1.0 - u * u).max(0.0).sqrt()) / PI
}

/// `sum_{r=0}^{L} kappa_1^{(r)}(u) prod_{s=r}^{L-1} kappa_0(kappa_1^{(s)}(u))`
fn ntk_from_inner(depth: usize, u: f64) -> f64 {
    // iterates[r] = kappa_1 composed r times, evaluated at u
    let mut iterates = Vec::with_capacity(depth + 1);
    iterates.push(u);
    for r in 0..depth {
        iterates.push(kappa1(iterates[r]).min(1.0));
    }
    let mut total = iterates[depth];
    // suffix product over s = r..L-1, accumulated backwards
    let mut prod = 1.0;
    for r in (0..depth).rev() {
        prod *= kappa0(iterates[r]);
        total += iterates[r] * prod;
    }
    total
}

/// `K(x, x')` with domain checks on both arguments.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    spec.check_point(x)?;
    spec.check_point(x_prime)?;
    Ok(spec.eval_unchecked(x, x_prime))
}

/// Symmetric `n x n` kernel matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for a {n} x {n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        Ok(GramMatrix { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn to_faer_scaled(&self, scale: f64) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.entries[i * self.n + j] * scale)
    }

    /// Largest `|G_ij - G_ji|` relative to `max |G_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.entries.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

/// Assembles `K(X, X)`; rows are computed in parallel under
/// [`Execution::Parallel`].
pub fn gram_matrix(spec: &KernelSpec, xs: &Points) -> Result<GramMatrix> {
    gram_matrix_with(spec, xs, Execution::default())
}

pub fn gram_matrix_with(spec: &KernelSpec, xs: &Points, exec: Execution) -> Result<GramMatrix> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("Gram matrix needs at least one point".into()));
    }
    spec.check_points(xs)?;
    let n = xs.len();
    let mut entries = vec![0.0; n * n];
    match spec.kind() {
        KernelKind::Ntk { depth } => {
            // inner products through a blocked matmul, then the scalar map
            let x = Mat::from_fn(n, xs.dim(), |i, k| xs.row(i)[k]);
            let inner = &x * x.transpose();
            let depth = *depth;
            par::for_each_chunk_mut(exec, &mut entries, n, |i, row| {
                for (j, v) in row.iter_mut().enumerate() {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    let u = if xs.row(a) == xs.row(b) { 1.0 } else { clamp_inner(inner[(b, a)]) };
                    *v = ntk_from_inner(depth, u);
                }
            });
        }
        _ => {
            par::for_each_chunk_mut(exec, &mut entries, n, |i, row| {
                for (j, v) in row.iter_mut().enumerate() {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    *v = spec.eval_unchecked(xs.row(a), xs.row(b));
                }
            });
        }
    }
    Ok(GramMatrix { n, entries })
}

/// `sum_i coef_i K(x, X_i)`, assuming all points are in the domain.
pub(crate) fn kernel_combination(spec: &KernelSpec, x: &[f64], xs: &Points, coef: &[f64]) -> f64 {
    match spec.kind() {
        KernelKind::Min => {
            let t = x[0];
            xs.as_slice().iter().zip(coef).map(|(xi, c)| c * xi.min(t)).sum()
        }
        _ => xs
            .iter()
            .zip(coef)
            .map(|(xi, c)| c * spec.eval_unchecked(x, xi))
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = dot(v, v).sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn min_kernel_values() {
        let k = KernelSpec::min();
        assert_eq!(eval_kernel(&k, &[0.3], &[0.7]).unwrap(), 0.3);
        assert!(eval_kernel(&k, &[1.2], &[0.5]).is_err());
        assert!(eval_kernel(&k, &[0.2, 0.1], &[0.5]).is_err());
    }

    #[test]
    fn kappa_closed_forms() {
        assert_eq!(ntk_kappa(0, 1.0).unwrap(), 1.0);
        assert_eq!(ntk_kappa(1, 1.0).unwrap(), 1.0);
        assert!((ntk_kappa(1, 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((ntk_kappa(0, 0.0).unwrap() - 0.5).abs() < 1e-15);
        // clamped within tolerance, rejected beyond it
        assert_eq!(ntk_kappa(1, 1.0 + 1e-13).unwrap(), 1.0);
        assert!(ntk_kappa(0, 1.0 + 1e-6).is_err());
        assert!(ntk_kappa(2, 0.5).is_err());
    }

    #[test]
    fn ntk_diagonal_is_depth_plus_one() {
        let x = unit(&[0.3, -1.0, 2.0]);
        for depth in 1..=4 {
            let k = KernelSpec::ntk(depth).unwrap();
            let v = eval_kernel(&k, &x, &x).unwrap();
            assert!((v - (depth + 1) as f64).abs() < 1e-10, "depth {depth}: {v}");
        }
    }

    #[test]
    fn ntk_orthogonal_inputs_by_hand() {
        let x = [1.0, 0.0];
        let y = [0.0, 1.0];
        // depth 1: u kappa0(u) + kappa1(u) at u = 0
        let k1 = eval_kernel(&KernelSpec::ntk(1).unwrap(), &x, &y).unwrap();
        assert!((k1 - 1.0 / PI).abs() < 1e-14);
        // depth 2: kappa1(0) kappa0(kappa1(0)) + kappa1(kappa1(0))
        let a = 1.0 / PI;
        let k0a = (PI - a.acos()) / PI;
        let k1a = (a * (PI - a.acos()) + (1.0 - a * a).sqrt()) / PI;
        let k2 = eval_kernel(&KernelSpec::ntk(2).unwrap(), &x, &y).unwrap();
        assert!((k2 - (a * k0a + k1a)).abs() < 1e-14);
    }

    #[test]
    fn ntk_rejects_off_sphere() {
        let k = KernelSpec::ntk(2).unwrap();
        assert!(matches!(eval_kernel(&k, &[1.0, 1.0], &[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(KernelSpec::ntk(0).is_err());
    }

    #[test]
    fn min_gram_examples() {
        let g = gram_matrix(&KernelSpec::min(), &Points::scalars(vec![0.25, 0.5, 0.75])).unwrap();
        assert_eq!(
            g.entries(),
            &[0.25, 0.25, 0.25, 0.25, 0.5, 0.5, 0.25, 0.5, 0.75]
        );
        let g1 = gram_matrix(&KernelSpec::min(), &Points::scalars(vec![0.5])).unwrap();
        assert_eq!(g1.entries(), &[0.5]);
        assert!(gram_matrix(&KernelSpec::min(), &Points::scalars(vec![])).is_err());
    }

    #[test]
    fn ntk_gram_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| unit(&(0..5).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>()))
            .collect();
        let g = gram_matrix(&KernelSpec::ntk(3).unwrap(), &Points::from_rows(&rows)).unwrap();
        for i in 0..12 {
            assert!((g.get(i, i) - 4.0).abs() < 1e-10);
        }
        assert_eq!(g.asymmetry(), 0.0);
        // matmul path agrees with pointwise evaluation
        let k = KernelSpec::ntk(3).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let direct = eval_kernel(&k, &rows[i], &rows[j]).unwrap();
                assert!((g.get(i, j) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sequential_and_parallel_gram_agree() {
        let xs = Points::scalars((0..50).map(|i| (i as f64 * 0.37) % 1.0).collect());
        let a = gram_matrix_with(&KernelSpec::min(), &xs, Execution::Sequential).unwrap();
        let b = gram_matrix_with(&KernelSpec::min(), &xs, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
