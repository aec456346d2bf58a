//! Symmetric tridiagonal eigensolver: Sturm-sequence bisection for
//! eigenvalues, inverse iteration for eigenvectors.
//!
//! The matrices here come from second-order finite differences of
//! −∂ₓ² + V, so spectra are simple in exact arithmetic; clustered
//! eigenvalues are treated as grid artifacts and their vectors are
//! orthogonalized against each other during inverse iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Symmetric tridiagonal matrix: `diag` of length n, `off` of length n−1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::Domain(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(SymTridiag { diag, off })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// y = T·x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.off[i - 1].abs();
            }
            if i + 1 < n {
                radius += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    /// Sturm count: the number of eigenvalues in (−∞, x], computed from the
    /// signs of the LDLᵀ pivots of T − xI. Pivots at or below `pivmin` are
    /// counted as negative and clamped, so exact-zero pivots (x equal to an
    /// eigenvalue of a leading minor) cannot derail the count.
    pub fn count_below(&self, x: f64) -> usize {
        const PIVMIN: f64 = 1e-300;
        let mut count = 0usize;
        let mut d = self.diag[0] - x;
        if d <= PIVMIN {
            count += 1;
            d = d.min(-PIVMIN);
        }
        for i in 1..self.n() {
            d = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / d;
            if d <= PIVMIN {
                count += 1;
                d = d.min(-PIVMIN);
            }
        }
        count
    }

    /// The k-th eigenvalue (ascending, 0-indexed) by bisection, resolved to
    /// absolute tolerance `tol` (floored at a few ulps of the spectral range).
    pub fn eigenvalue(&self, k: usize, tol: f64) -> Result<f64> {
        if k >= self.n() {
            return Err(Error::Domain(format!(
                "eigenvalue index {k} out of range for size {}",
                self.n()
            )));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let tol = tol.max(4.0 * f64::EPSILON * scale);
        // Open the bracket so eigenvalues sitting exactly on a Gershgorin
        // endpoint keep the bisection invariant count(lo) ≤ k < count(hi).
        lo -= tol;
        hi += tol;
        // Invariant: count_below(lo) ≤ k < count_below(hi).
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break; // interval at rounding resolution
            }
            if self.count_below(mid) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// All eigenvalues ≤ `bound`, ascending.
    pub fn eigenvalues_below(&self, bound: f64, tol: f64) -> Result<Vec<f64>> {
        // count_below counts strict inequality; nudge to include == bound.
        let m = self.count_below(bound + bound.abs().max(1.0) * 1e-14);
        (0..m).map(|k| self.eigenvalue(k, tol)).collect()
    }

    /// Solve (T − shift·I)·x = b by Gaussian elimination with partial
    /// pivoting (row swaps fill in one extra superdiagonal).
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(b.len(), n);
        // Row i of the reduced matrix: d[i] at col i, u[i] at col i+1,
        // w[i] at col i+2. w[i] only becomes nonzero via a swap at step i.
        let mut d: Vec<f64> = self.diag.iter().map(|&v| v - shift).collect();
        let mut u = self.off.clone();
        u.push(0.0);
        let mut w = vec![0.0; n];
        let mut rhs = b.to_vec();
        for i in 0..n - 1 {
            let sub = self.off[i]; // entry (i+1, i), untouched by earlier steps
            if sub.abs() > d[i].abs() {
                let m = d[i] / sub;
                let (old_u, old_w) = (u[i], w[i]);
                d[i] = sub;
                u[i] = d[i + 1];
                w[i] = u[i + 1];
                d[i + 1] = old_u - m * u[i];
                u[i + 1] = old_w - m * w[i];
                rhs.swap(i, i + 1);
                rhs[i + 1] -= m * rhs[i];
            } else {
                let pivot = if d[i] == 0.0 { 1e-300 } else { d[i] };
                let m = sub / pivot;
                d[i + 1] -= m * u[i];
                // w[i] is zero here (no swap happened at step i), so the
                // second superdiagonal of row i+1 stays untouched.
                rhs[i + 1] -= m * rhs[i];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = rhs[i];
            if i + 1 < n {
                v -= u[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= w[i] * x[i + 2];
            }
            let pivot = if d[i] == 0.0 { 1e-300 } else { d[i] };
            x[i] = v / pivot;
        }
        x
    }

    /// Eigenvector for the (already bisected) eigenvalue `lambda` by inverse
    /// iteration, orthogonalized against `cluster` (vectors of nearby
    /// eigenvalues). Returns a unit vector in the plain ℓ² norm. The
    /// residual ‖Tx − λx‖₂ bottoms out at the bisection accuracy of λ;
    /// iteration stops on stagnation and fails only above `resid_tol`.
    pub fn eigenvector(
        &self,
        lambda: f64,
        cluster: &[Vec<f64>],
        seed: u64,
        resid_tol: f64,
    ) -> Result<Vec<f64>> {
        let n = self.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        normalize(&mut x);
        let mut best = f64::INFINITY;
        let mut best_x = x.clone();
        for _ in 0..50 {
            let mut y = self.solve_shifted(lambda, &x);
            for c in cluster {
                let proj = dot(&y, c);
                for i in 0..n {
                    y[i] -= proj * c[i];
                }
            }
            let norm = normalize(&mut y);
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Numerical("inverse iteration collapsed to zero".into()));
            }
            x = y;
            let residual = residual_norm(self, lambda, &x);
            let stagnated = residual >= 0.5 * best;
            if residual < best {
                best = residual;
                best_x = x.clone();
            }
            if stagnated {
                break;
            }
        }
        if best <= resid_tol {
            Ok(best_x)
        } else {
            Err(Error::Numerical(format!(
                "inverse iteration residual {best} above {resid_tol} for eigenvalue {lambda}"
            )))
        }
    }

    /// Full eigenpairs with eigenvalue ≤ `bound`: values ascending, vectors
    /// ℓ²-orthonormal. `tol` is the bisection tolerance; vector residuals
    /// must reach `resid_tol`.
    pub fn eigenpairs_below(
        &self,
        bound: f64,
        tol: f64,
        resid_tol: f64,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let values = self.eigenvalues_below(bound, tol)?;
        let scale = {
            let (lo, hi) = self.gershgorin();
            (hi - lo).abs().max(1.0)
        };
        let cluster_tol = scale * 1e-12;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        for (k, &lambda) in values.iter().enumerate() {
            // Orthogonalize only against members of the same numerical cluster.
            let mut cluster: Vec<Vec<f64>> = Vec::new();
            for j in (0..k).rev() {
                if (values[j] - lambda).abs() <= cluster_tol {
                    cluster.push(vectors[j].clone());
                } else {
                    break;
                }
            }
            let v = self.eigenvector(lambda, &cluster, 0x5eed_0000 + k as u64, resid_tol)?;
            vectors.push(v);
        }
        Ok((values, vectors))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

fn residual_norm(t: &SymTridiag, lambda: f64, x: &[f64]) -> f64 {
    let y = t.apply(x);
    y.iter()
        .zip(x)
        .map(|(yi, xi)| (yi - lambda * xi).powi(2))
        .sum::<f64>()
        .sqrt()
}
