//! Selected eigenpairs of a real symmetric tridiagonal matrix by Sturm-sequence
//! bisection followed by inverse iteration.

use crate::error::{Error, Result};

// shifts are bisected to full precision, so a few steps suffice
const INVERSE_ITERATIONS: usize = 4;

#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`; length `n - 1`.
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty());
        assert_eq!(off.len() + 1, diag.len());
        SymTridiagonal { diag, off }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn pivmin(&self) -> f64 {
        let m = self.off.iter().fold(1.0f64, |m, e| m.max(e * e));
        f64::MIN_POSITIVE * m
    }

    /// Number of eigenvalues strictly less than `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.n() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based), bisected to full precision.
    fn eigenvalue(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// Eigenvalues with ascending indices `range` (0-based).
    pub fn eigenvalues(&self, range: std::ops::Range<usize>) -> Vec<f64> {
        assert!(range.end <= self.n());
        let (glo, ghi) = self.gershgorin();
        let pad = f64::EPSILON * (glo.abs().max(ghi.abs())) * 4.0 + self.pivmin();
        let (glo, ghi) = (glo - pad, ghi + pad);
        let mut out = Vec::with_capacity(range.len());
        let mut lo = glo;
        for k in range {
            // eigenvalues come out ascending, so the previous one bounds the next
            let v = self.eigenvalue(k, lo, ghi);
            out.push(v);
            lo = lo.max(v - pad.max(v.abs() * 4.0 * f64::EPSILON));
        }
        out
    }

    /// Solves `(T - shift I) x = b` in place with partial pivoting.
    fn solve_shifted(&self, shift: f64, b: &mut [f64], pert: f64) {
        let n = self.n();
        if n == 1 {
            let d = self.diag[0] - shift;
            b[0] /= if d.abs() < pert { pert } else { d };
            return;
        }
        // LU of a tridiagonal with row interchanges: U has up to two
        // superdiagonals.
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut du: Vec<f64> = self.off.clone();
        let mut dl: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut ipiv_swap = vec![false; n - 1];
        let mut mult = vec![0.0; n - 1];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < pert {
                    d[i] = pert;
                }
                let m = dl[i] / d[i];
                mult[i] = m;
                d[i + 1] -= m * du[i];
            } else {
                ipiv_swap[i] = true;
                let m = d[i] / dl[i];
                mult[i] = m;
                d[i] = dl[i];
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - m * d[i + 1];
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -m;
                }
            }
            dl[i] = 0.0;
        }
        if d[n - 1].abs() < pert {
            d[n - 1] = pert;
        }
        // forward substitution
        for i in 0..n - 1 {
            if ipiv_swap[i] {
                b.swap(i, i + 1);
                b[i + 1] -= mult[i] * b[i];
            } else {
                b[i + 1] -= mult[i] * b[i];
            }
        }
        // back substitution
        b[n - 1] /= d[n - 1];
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
    }

    /// Eigenvectors for the given (ascending) eigenvalues by inverse iteration,
    /// re-orthogonalising within clusters. Columns are unit vectors.
    pub fn eigenvectors(&self, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.n();
        let norm = self
            .diag
            .iter()
            .enumerate()
            .map(|(i, d)| {
                d.abs()
                    + if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { self.off[i].abs() } else { 0.0 }
            })
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let pert = f64::EPSILON * norm;
        let cluster_tol = 1e-3 * norm;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut cluster_start = 0;
        for (k, &lambda) in values.iter().enumerate() {
            if k > 0 && (lambda - values[k - 1]).abs() > cluster_tol {
                cluster_start = k;
            }
            let mut x = start_vector(n, k);
            for _ in 0..INVERSE_ITERATIONS {
                self.solve_shifted(lambda, &mut x, pert);
                for prev in &vectors[cluster_start..k] {
                    let p = crate::kernels::dot(prev, &x);
                    x.iter_mut().zip(prev).for_each(|(a, b)| *a -= p * b);
                }
                let nrm = crate::kernels::dot(&x, &x).sqrt();
                if !nrm.is_finite() || nrm == 0.0 {
                    return Err(Error::Numerical(format!(
                        "inverse iteration broke down for eigenvalue {lambda}"
                    )));
                }
                x.iter_mut().for_each(|v| *v /= nrm);
            }
            // final cleanup against the whole cluster
            for prev in &vectors[cluster_start..k] {
                let p = crate::kernels::dot(prev, &x);
                x.iter_mut().zip(prev).for_each(|(a, b)| *a -= p * b);
            }
            let nrm = crate::kernels::dot(&x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
            canonical_sign(&mut x);
            vectors.push(x);
        }
        Ok(vectors)
    }
}

fn start_vector(n: usize, seed: usize) -> Vec<f64> {
    // deterministic, dense, no special structure
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (seed as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// 1D Laplacian: eigenvalues 2 - 2 cos(k pi / (n + 1)).
    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn laplacian_eigenvalues_match_closed_form() {
        let n = 40;
        let t = laplacian(n);
        let vals = t.eigenvalues(0..n);
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13, "{k}: {v} vs {exact}");
        }
    }

    #[test]
    fn laplacian_eigenvectors_are_sines() {
        let n = 30;
        let t = laplacian(n);
        let vals = t.eigenvalues(0..5);
        let vecs = t.eigenvectors(&vals).unwrap();
        for (k, v) in vecs.iter().enumerate() {
            let mut exact: Vec<f64> = (0..n)
                .map(|i| ((i + 1) as f64 * (k + 1) as f64 * PI / (n + 1) as f64).sin())
                .collect();
            let nrm = crate::kernels::dot(&exact, &exact).sqrt();
            exact.iter_mut().for_each(|x| *x /= nrm);
            canonical_sign(&mut exact);
            for (a, b) in v.iter().zip(&exact) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_diagonal_gives_orthonormal_vectors() {
        // decoupled blocks with repeated eigenvalues
        let t = SymTridiagonal::new(vec![1.0, 1.0, 1.0, 3.0], vec![0.0, 0.0, 0.0]);
        let vals = t.eigenvalues(0..4);
        assert!((vals[0] - 1.0).abs() < 1e-15 && (vals[3] - 3.0).abs() < 1e-15);
        let vecs = t.eigenvectors(&vals).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d = crate::kernels::dot(&vecs[i], &vecs[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn count_below_brackets_spectrum() {
        let t = laplacian(10);
        assert_eq!(t.count_below(0.0), 0);
        assert_eq!(t.count_below(4.0), 10);
        assert_eq!(t.count_below(2.0 + 1e-12), 5);
    }
}
