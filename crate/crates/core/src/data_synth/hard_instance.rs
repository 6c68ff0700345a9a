//! Bump-function hard instances: a smooth bump `u`, the regular grid `G_q`,
//! `psi = C_psi q^(-sr) sum_k u(|q (x - z_k)|)` and sign codebooks.

use std::sync::{Arc, OnceLock};

use rand::Rng;

use super::{ball_volume, rng_for, ConditionalModel, Marginal};
use crate::error::{Error, Result};
use crate::points::Points;

// u_1 peaks at exp(-64) at x = 3/8; integrating u_1 * exp(64) keeps the
// quadrature tolerance meaningful
const BUMP_SHIFT: f64 = 64.0;
const QUAD_TOL: f64 = 1e-12;
const QUAD_MAX_DEPTH: u32 = 60;
// u_1 is flat to many digits near its endpoints; early acceptance there
// misses the bulk of the mass
const QUAD_MIN_DEPTH: u32 = 6;

fn u1_scaled(x: f64) -> f64 {
    if x <= 0.25 || x >= 0.5 {
        0.0
    } else {
        (BUMP_SHIFT - 1.0 / ((0.5 - x) * (x - 0.25))).exp()
    }
}

fn simpson_step(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson_step(f, a, fa, m, fm);
    let (rm, frm, right) = simpson_step(f, m, fm, b, fb);
    let delta = left + right - whole;
    let settled = QUAD_MAX_DEPTH - depth >= QUAD_MIN_DEPTH && delta.abs() <= 15.0 * tol;
    if depth == 0 || settled {
        return left + right + delta / 15.0;
    }
    adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub(crate) fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson_step(&f, a, fa, b, fb);
    adaptive_simpson_rec(&f, a, fa, b, fb, m, fm, whole, tol, QUAD_MAX_DEPTH)
}

fn bump_normalizer() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| adaptive_simpson(u1_scaled, 0.25, 0.5, QUAD_TOL))
}

/// Smooth nonincreasing bump: 1 on `[0, 1/4]`, 0 on `[1/2, inf)`.
pub fn bump_u(x: f64) -> f64 {
    if x <= 0.25 {
        1.0
    } else if x >= 0.5 {
        0.0
    } else {
        let z = bump_normalizer();
        let v = if x < 0.375 {
            1.0 - adaptive_simpson(u1_scaled, 0.25, x, QUAD_TOL) / z
        } else {
            adaptive_simpson(u1_scaled, x, 0.5, QUAD_TOL) / z
        };
        v.clamp(0.0, 1.0)
    }
}

/// Centres `((2k_1 + 1) / 2q, ..., (2k_d + 1) / 2q)`; the first coordinate
/// varies fastest.
pub fn regular_grid(q: usize, d: usize) -> Points {
    let m = q.pow(d as u32);
    let mut data = Vec::with_capacity(m * d);
    for idx in 0..m {
        let mut rest = idx;
        for _ in 0..d {
            let k = rest % q;
            rest /= q;
            data.push((2 * k + 1) as f64 / (2 * q) as f64);
        }
    }
    Points::new(d, data)
}

/// Index in [`regular_grid`] of the centre nearest to `x`; ties go to the
/// centre closer to the origin.
pub fn cell_index(x: &[f64], q: usize) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for &xi in x {
        let k = ((xi * q as f64).ceil() - 1.0).clamp(0.0, (q - 1) as f64) as usize;
        idx += k * stride;
        stride *= q;
    }
    idx
}

/// One member of the hard family: sign `omega_k` on cell `k`.
#[derive(Debug, Clone)]
pub struct HardInstance {
    q: usize,
    d: usize,
    sr: f64,
    c_psi: f64,
    omega: Vec<i8>,
    grid: Points,
}

impl HardInstance {
    pub fn new(q: usize, d: usize, sr: f64, c_psi: f64, omega: Vec<i8>) -> Result<Self> {
        if q == 0 || d == 0 {
            return Err(Error::InvalidArgument("grid resolution and dimension must be >= 1".into()));
        }
        if !(sr > 0.0) {
            return Err(Error::InvalidArgument(format!("sr must be positive, got {sr}")));
        }
        if !(c_psi > 0.0 && c_psi <= 1.0) {
            return Err(Error::InvalidArgument(format!("C_psi must lie in (0, 1], got {c_psi}")));
        }
        let m = q.checked_pow(d as u32).ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
        if omega.len() != m || omega.iter().any(|w| *w != 1 && *w != -1) {
            return Err(Error::InvalidArgument(format!("omega must be a sign vector of length {m}")));
        }
        Ok(HardInstance {
            q,
            d,
            sr,
            c_psi,
            omega,
            grid: regular_grid(q, d),
        })
    }

    /// Resolution `q` with `n v q^(-2 sr) = theta`, `v = q^-d`, rounded to
    /// the nearest integer `>= 1`.
    pub fn resolution_for(n: usize, d: usize, sr: f64, theta: f64) -> usize {
        ((n as f64 / theta).powf(1.0 / (2.0 * sr + d as f64)).round() as usize).max(1)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sr(&self) -> f64 {
        self.sr
    }

    pub fn c_psi(&self) -> f64 {
        self.c_psi
    }

    pub fn omega(&self) -> &[i8] {
        &self.omega
    }

    pub fn grid(&self) -> &Points {
        &self.grid
    }

    pub fn cells(&self) -> usize {
        self.omega.len()
    }

    /// `C_psi q^(-sr)`, the supremum of `psi`.
    pub fn amplitude(&self) -> f64 {
        self.c_psi * (self.q as f64).powf(-self.sr)
    }

    /// Radius `(4q)^-1` of the balls carrying the marginal.
    pub fn support_radius(&self) -> f64 {
        0.25 / self.q as f64
    }

    /// Same geometry with a different codeword.
    pub fn with_omega(&self, omega: Vec<i8>) -> Result<Self> {
        HardInstance::new(self.q, self.d, self.sr, self.c_psi, omega)
    }

    /// `f(x) = omega_k psi(x)` on cell `k`.
    pub fn f(&self, x: &[f64]) -> f64 {
        self.omega[cell_index(x, self.q)] as f64 * psi(x, self)
    }
}

/// `psi(x)`. Bumps have radius `(2q)^-1`, so only the nearest centre can
/// contribute.
pub fn psi(x: &[f64], inst: &HardInstance) -> f64 {
    let z = inst.grid.row(cell_index(x, inst.q));
    let r = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    inst.amplitude() * bump_u(inst.q as f64 * r)
}

/// At least `2^(m/8)` sign vectors of length `m` with pairwise
/// `sum_k |w_k - w'_k| >= m/4`, found by randomised greedy search.
pub fn varshamov_gilbert(m: usize, seed: u64) -> Result<Vec<Vec<i8>>> {
    if m < 8 {
        return Err(Error::InvalidArgument(format!("codeword length must be >= 8, got {m}")));
    }
    let target = 2f64.powf(m as f64 / 8.0);
    let wanted = target.ceil() as usize;
    let max_draws = (1000.0 * target).ceil() as usize;
    let min_l1 = m as f64 / 4.0;
    let mut rng = rng_for(seed);
    let mut book: Vec<Vec<i8>> = Vec::with_capacity(wanted);
    for _ in 0..max_draws {
        let w: Vec<i8> = (0..m).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let far = book
            .iter()
            .all(|c| (2 * c.iter().zip(&w).filter(|(a, b)| a != b).count()) as f64 >= min_l1);
        if far {
            book.push(w);
            if book.len() >= wanted {
                return Ok(book);
            }
        }
    }
    Err(Error::SearchExhausted {
        draws: max_draws,
        found: book.len(),
        wanted,
    })
}

/// Law with `f(x) = omega_k psi(x)` on cell `k` and mass `1/q^d` spread
/// uniformly on each ball `B(z_k, (4q)^-1)`.
pub fn hard_instance_model(inst: &HardInstance) -> ConditionalModel {
    let marginal = Marginal::BallUnion {
        centers: inst.grid.clone(),
        radius: inst.support_radius(),
    };
    let shared = Arc::new(inst.clone());
    ConditionalModel::new(
        format!("hard-instance(q={}, d={}, sr={})", inst.q, inst.d, inst.sr),
        marginal,
        move |x| shared.f(x),
    )
}

fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Per-sample `KL(rho_a || rho_b)` between two members of a family, or
/// against the zero-signal law `f = 0` when `b` is `None`. The integrand is
/// integrated over every support ball by a midpoint rule with
/// `nodes_per_dim` nodes per axis.
pub fn kl_divergence(a: &HardInstance, b: Option<&HardInstance>, nodes_per_dim: usize) -> Result<f64> {
    if let Some(b) = b {
        if (b.q, b.d) != (a.q, a.d) || b.sr != a.sr || b.c_psi != a.c_psi {
            return Err(Error::InvalidArgument("instances must share their geometry".into()));
        }
    }
    if nodes_per_dim == 0 {
        return Err(Error::InvalidArgument("need at least one quadrature node".into()));
    }
    let r = a.support_radius();
    let d = a.d;
    let h = 2.0 * r / nodes_per_dim as f64;
    let density = 1.0 / (a.cells() as f64 * ball_volume(d, r));
    let cell_volume = h.powi(d as i32);
    let total_nodes = nodes_per_dim.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    for (k, z) in a.grid.iter().enumerate() {
        if let Some(b) = b {
            if a.omega[k] == b.omega[k] {
                continue;
            }
        }
        let mut cell = 0.0;
        for idx in 0..total_nodes {
            let mut rest = idx;
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi = zi - r + h * ((rest % nodes_per_dim) as f64 + 0.5);
                rest /= nodes_per_dim;
            }
            let r2: f64 = x.iter().zip(z).map(|(p, c)| (p - c) * (p - c)).sum();
            if r2 > r * r {
                continue;
            }
            let fa = a.f(&x);
            let fb = b.map_or(0.0, |b| b.f(&x));
            cell += bernoulli_kl(0.5 * (1.0 + fa), 0.5 * (1.0 + fb));
        }
        total += cell * density * cell_volume;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_values() {
        assert_eq!(bump_u(0.2), 1.0);
        assert_eq!(bump_u(0.6), 0.0);
        let mid = bump_u(0.375);
        assert!(mid > 0.0 && mid < 1.0);
        // u_1 is symmetric about 3/8
        assert!((mid - 0.5).abs() < 1e-10);
        assert!(bump_u(0.30) > bump_u(0.45));
    }

    #[test]
    fn bump_matches_high_precision_quadrature() {
        // 40-digit reference values
        for (x, want) in [(0.33, 0.999_994_892_898_149_9), (0.42, 5.107_101_850_102_691e-6)] {
            assert!((bump_u(x) - want).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn bump_is_monotone_and_continuous_at_ends() {
        let mut prev = 1.0;
        for k in 0..=400 {
            let x = 0.2 + 0.35 * k as f64 / 400.0;
            let v = bump_u(x);
            // independent quadratures, each accurate to 1e-10
            assert!(v <= prev + 1e-10, "{x}: {v} > {prev}");
            prev = v;
        }
        assert!(1.0 - bump_u(0.2501) < 1e-10);
        assert!(bump_u(0.4999) < 1e-10);
    }

    #[test]
    fn grid_centres() {
        let g = regular_grid(2, 2);
        assert_eq!(g.as_slice(), &[0.25, 0.25, 0.75, 0.25, 0.25, 0.75, 0.75, 0.75]);
        for (k, z) in g.iter().enumerate() {
            assert_eq!(cell_index(z, 2), k);
        }
    }

    #[test]
    fn ties_go_towards_origin() {
        assert_eq!(cell_index(&[0.5], 2), 0);
        assert_eq!(cell_index(&[0.5000001], 2), 1);
        assert_eq!(cell_index(&[0.0], 3), 0);
        assert_eq!(cell_index(&[1.0], 3), 2);
    }

    #[test]
    fn psi_examples() {
        let inst = HardInstance::new(2, 1, 1.0, 1.0, vec![1, 1]).unwrap();
        assert!((psi(&[0.25], &inst) - 0.5).abs() < 1e-15);
        assert_eq!(psi(&[0.5], &inst), 0.0);
        let inst = HardInstance::new(3, 2, 0.7, 0.8, vec![1; 9]).unwrap();
        for z in inst.grid().iter() {
            assert!((psi(z, &inst) - 0.8 * 3f64.powf(-0.7)).abs() < 1e-15);
        }
    }

    #[test]
    fn nearest_term_equals_full_sum() {
        let inst = HardInstance::new(3, 2, 1.0, 1.0, vec![1; 9]).unwrap();
        let mut rng = rng_for(1);
        for _ in 0..200 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let full: f64 = inst
                .grid()
                .iter()
                .map(|z| {
                    let r = ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2)).sqrt();
                    bump_u(3.0 * r)
                })
                .sum::<f64>()
                * inst.amplitude();
            assert!((psi(&x, &inst) - full).abs() < 1e-15);
        }
    }

    #[test]
    fn small_codebooks() {
        let b = varshamov_gilbert(8, 0).unwrap();
        assert!(b.len() >= 2);
        let b = varshamov_gilbert(16, 0).unwrap();
        assert!(b.len() >= 4);
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                let l1: i32 = b[i].iter().zip(&b[j]).map(|(x, y)| (x - y).abs() as i32).sum();
                assert!(l1 >= 4);
            }
        }
        assert!(varshamov_gilbert(7, 0).is_err());
    }

    #[test]
    fn marginal_lives_on_small_balls() {
        let inst = HardInstance::new(4, 2, 1.0, 1.0, vec![1, -1, 1, -1, -1, 1, 1, 1, -1, -1, 1, 1, 1, -1, -1, 1]).unwrap();
        let model = hard_instance_model(&inst);
        let mut rng = rng_for(3);
        let xs = model.marginal().sample(&mut rng, 2000, super::super::Design::Iid).unwrap();
        for x in xs.iter() {
            let z = inst.grid().row(cell_index(x, 4));
            let r = ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2)).sqrt();
            assert!(r <= inst.support_radius() + 1e-15);
            assert!(model.f_star(x).abs() <= inst.amplitude());
        }
    }

    #[test]
    fn kl_matches_constant_signal() {
        // psi is constant (= a) on the support, so one differing cell costs
        // v * a * ln((1 + a) / (1 - a))
        let q = 4;
        let inst = HardInstance::new(q, 1, 1.0, 0.5, vec![1, 1, -1, 1]).unwrap();
        let other = inst.with_omega(vec![1, -1, -1, 1]).unwrap();
        let a = inst.amplitude();
        let v = 1.0 / q as f64;
        let kl = kl_divergence(&inst, Some(&other), 400).unwrap();
        let exact = v * a * ((1.0 + a) / (1.0 - a)).ln();
        assert!((kl - exact).abs() < 1e-12 * exact.max(1.0), "{kl} vs {exact}");
        assert!(kl <= 2.1 * v * 0.25 * (q as f64).powf(-2.0));
        let to_null = kl_divergence(&inst, None, 400).unwrap();
        let per_cell = 0.5 * ((1.0 + a) * (1.0 + a).ln() + (1.0 - a) * (1.0 - a).ln());
        assert!((to_null - per_cell).abs() < 1e-12);
    }

    #[test]
    fn resolution_rule() {
        // n q^(-d - 2 sr) = 1 with d = 1, sr = 1: q = n^(1/3)
        assert_eq!(HardInstance::resolution_for(1000, 1, 1.0, 1.0), 10);
        assert_eq!(HardInstance::resolution_for(1, 2, 1.0, 5.0), 1);
    }
}
