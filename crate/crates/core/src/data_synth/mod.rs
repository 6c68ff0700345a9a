//! Conditional models `(mu, f*)` and labelled-sample generators, including the
//! bump-function hard instances on a regular grid.

mod hard_instance;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use hard_instance::{
    bump_u, cell_index, hard_instance_model, kl_divergence, psi, regular_grid, varshamov_gilbert,
    HardInstance,
};

use crate::error::{Error, Result};
use crate::points::Points;

/// How the `n` design points of a sample are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Design {
    /// Independent draws from the marginal.
    #[default]
    Iid,
    /// One uniform draw in each of the cells `[i/n, (i+1)/n)`, randomly
    /// permuted. Only defined for the uniform marginal on `[0, 1]`.
    Stratified,
}

/// Marginal distribution `mu` of `X`.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    UniformInterval,
    /// Uniform on the unit sphere in `R^dim`.
    UniformSphere { dim: usize },
    /// Equal mass on each ball `B(c, radius)`, uniform within a ball.
    BallUnion { centers: Points, radius: f64 },
}

impl Marginal {
    pub fn dim(&self) -> usize {
        match self {
            Marginal::UniformInterval => 1,
            Marginal::UniformSphere { dim } => *dim,
            Marginal::BallUnion { centers, .. } => centers.dim(),
        }
    }

    /// Lebesgue density (for the sphere: density w.r.t. surface measure).
    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            Marginal::UniformInterval => {
                if (0.0..=1.0).contains(&x[0]) {
                    1.0
                } else {
                    0.0
                }
            }
            Marginal::UniformSphere { dim } => 1.0 / sphere_area(*dim),
            Marginal::BallUnion { centers, radius } => {
                let inside = centers.iter().any(|c| dist2(c, x) <= radius * radius);
                if inside {
                    1.0 / (centers.len() as f64 * ball_volume(centers.dim(), *radius))
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize, design: Design) -> Result<Points> {
        if design == Design::Stratified && *self != Marginal::UniformInterval {
            return Err(Error::InvalidArgument(
                "stratified design is only defined for the uniform marginal on [0, 1]".into(),
            ));
        }
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        match self {
            Marginal::UniformInterval => match design {
                Design::Iid => data.extend((0..n).map(|_| rng.random::<f64>())),
                Design::Stratified => {
                    let inv = 1.0 / n as f64;
                    data.extend((0..n).map(|i| (i as f64 + rng.random::<f64>()) * inv));
                    data.shuffle(rng);
                }
            },
            Marginal::UniformSphere { dim } => {
                for _ in 0..n {
                    loop {
                        let g: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                        let nrm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if nrm > 1e-300 {
                            data.extend(g.iter().map(|v| v / nrm));
                            break;
                        }
                    }
                }
            }
            Marginal::BallUnion { centers, radius } => {
                for _ in 0..n {
                    let c = centers.row(rng.random_range(0..centers.len()));
                    // rejection from the bounding cube
                    loop {
                        let off: Vec<f64> = (0..d).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
                        if off.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                            data.extend(c.iter().zip(&off).map(|(a, b)| a + b));
                            break;
                        }
                    }
                }
            }
        }
        Ok(Points::new(d, data))
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Volume of the `d`-ball of radius `r`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    unit_ball_volume(d) * r.powi(d as i32)
}

fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2 pi / d * V_{d-2}
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

type BayesFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A joint law of `(X, Y)` given by the marginal `mu` and the Bayes function
/// `f*(x) = 2 P(Y = 1 | X = x) - 1`.
#[derive(Clone)]
pub struct ConditionalModel {
    name: String,
    f_star: Arc<BayesFn>,
    marginal: Marginal,
}

impl fmt::Debug for ConditionalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConditionalModel")
            .field("name", &self.name)
            .field("marginal", &self.marginal)
            .finish_non_exhaustive()
    }
}

impl ConditionalModel {
    pub fn new<F>(name: impl Into<String>, marginal: Marginal, f_star: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ConditionalModel {
            name: name.into(),
            f_star: Arc::new(f_star),
            marginal,
        }
    }

    /// `f*(x) = cos(2 pi x)` under the uniform law on `[0, 1]`.
    pub fn cos2pix() -> Self {
        Self::new("cos2pix", Marginal::UniformInterval, |x| (2.0 * PI * x[0]).cos())
    }

    /// `f* = c` under the uniform law on `[0, 1]`.
    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), Marginal::UniformInterval, move |_| c)
    }

    /// `f*(x) = x_1` under the uniform law on the sphere in `R^dim`.
    pub fn sphere_linear(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("sphere dimension must be at least 2".into()));
        }
        Ok(Self::new(
            format!("sphere-linear({dim})"),
            Marginal::UniformSphere { dim },
            |x| x[0],
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn marginal(&self) -> &Marginal {
        &self.marginal
    }

    pub fn dim(&self) -> usize {
        self.marginal.dim()
    }

    pub fn f_star(&self, x: &[f64]) -> f64 {
        (self.f_star)(x)
    }

    /// `eta(x) = (1 + f*(x)) / 2`.
    pub fn eta(&self, x: &[f64]) -> f64 {
        0.5 * (1.0 + self.f_star(x))
    }
}

/// Deterministic generator for a seed.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of replicate `index` in a study seeded with `base`.
pub fn replicate_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

/// `n` i.i.d. draws with `P(Y = 1 | X = x) = (1 + f*(x)) / 2`.
pub fn sample_classification(model: &ConditionalModel, n: usize, seed: u64) -> Result<(Points, Vec<f64>)> {
    sample_classification_with(model, n, seed, Design::Iid)
}

pub fn sample_classification_with(
    model: &ConditionalModel,
    n: usize,
    seed: u64,
    design: Design,
) -> Result<(Points, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut rng = rng_for(seed);
    let xs = model.marginal.sample(&mut rng, n, design)?;
    let mut ys = Vec::with_capacity(n);
    for x in xs.iter() {
        let f = model.f_star(x);
        if !(f.abs() <= 1.0) {
            return Err(Error::Model { at: x.to_vec(), value: f });
        }
        let u: f64 = rng.random();
        ys.push(if u < 0.5 * (1.0 + f) { 1.0 } else { -1.0 });
    }
    Ok((xs, ys))
}

/// `Y = f*(X) + sigma * eps` with standard normal `eps`.
pub fn sample_regression(model: &ConditionalModel, n: usize, sigma: f64, seed: u64) -> Result<(Points, Vec<f64>)> {
    sample_regression_with(model, n, sigma, seed, Design::Iid)
}

pub fn sample_regression_with(
    model: &ConditionalModel,
    n: usize,
    sigma: f64,
    seed: u64,
    design: Design,
) -> Result<(Points, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be nonnegative, got {sigma}")));
    }
    let mut rng = rng_for(seed);
    let xs = model.marginal.sample(&mut rng, n, design)?;
    let ys = xs
        .iter()
        .map(|x| {
            let eps: f64 = rng.sample(StandardNormal);
            model.f_star(x) + sigma * eps
        })
        .collect();
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_labels() {
        let (_, ys) = sample_classification(&ConditionalModel::constant(1.0), 500, 3).unwrap();
        assert!(ys.iter().all(|&y| y == 1.0));
    }

    #[test]
    fn fair_coin_mean() {
        let n = 10_000;
        let (_, ys) = sample_classification(&ConditionalModel::constant(0.0), n, 11).unwrap();
        let m = ys.iter().sum::<f64>() / n as f64;
        assert!(m.abs() <= 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn binned_labels_follow_cosine() {
        let n = 200_000;
        let (xs, ys) = sample_classification(&ConditionalModel::cos2pix(), n, 5).unwrap();
        let bins = 20;
        let mut sum = vec![0.0; bins];
        let mut cnt = vec![0usize; bins];
        for (x, y) in xs.iter().zip(&ys) {
            let b = ((x[0] * bins as f64) as usize).min(bins - 1);
            sum[b] += y;
            cnt[b] += 1;
        }
        for b in 0..bins {
            // average of cos(2 pi x) over the bin
            let (a, c) = (b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
            let want = ((2.0 * PI * c).sin() - (2.0 * PI * a).sin()) / (2.0 * PI) * bins as f64;
            let got = sum[b] / cnt[b] as f64;
            let se = (1.0 / cnt[b] as f64).sqrt();
            assert!((got - want).abs() < 4.0 * se, "bin {b}: {got} vs {want}");
        }
    }

    #[test]
    fn model_violation_is_reported() {
        let err = sample_classification(&ConditionalModel::constant(1.5), 3, 0).unwrap_err();
        assert!(matches!(err, Error::Model { value, .. } if value == 1.5));
    }

    #[test]
    fn noiseless_regression_is_exact() {
        let m = ConditionalModel::cos2pix();
        let (xs, ys) = sample_regression(&m, 100, 0.0, 9).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(*y, m.f_star(x));
        }
    }

    #[test]
    fn unit_noise_variance() {
        let n = 100_000;
        let (_, ys) = sample_regression(&ConditionalModel::constant(0.0), n, 1.0, 4).unwrap();
        let v = crate::stats::sample_std(&ys).powi(2);
        assert!((0.97..=1.03).contains(&v), "{v}");
    }

    #[test]
    fn stratified_design_has_one_point_per_cell() {
        let n = 257;
        let (xs, _) = sample_regression_with(&ConditionalModel::cos2pix(), n, 0.0, 1, Design::Stratified).unwrap();
        let mut cells: Vec<usize> = xs.as_slice().iter().map(|x| (x * n as f64) as usize).collect();
        cells.sort_unstable();
        assert_eq!(cells, (0..n).collect::<Vec<_>>());
        let sphere = ConditionalModel::sphere_linear(3).unwrap();
        assert!(sample_classification_with(&sphere, 4, 0, Design::Stratified).is_err());
    }

    #[test]
    fn sphere_samples_are_unit() {
        let m = ConditionalModel::sphere_linear(5).unwrap();
        let (xs, _) = sample_classification(&m, 200, 2).unwrap();
        for x in xs.iter() {
            assert!((x.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(2, 1.0) - PI).abs() < 1e-15);
        assert!((ball_volume(3, 2.0) - 4.0 / 3.0 * PI * 8.0).abs() < 1e-12);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
    }
}
