//! Uniform 1D grids and the discrete L² structure used throughout the crate.
//!
//! The discrete inner product is the trapezoid rule: h-weighted sums with
//! half-weights at the two ends. Quadrature restricted to a subinterval
//! splits cells exactly: a cell [xᵢ, xᵢ₊₁] contributes its overlap length
//! times the average of the integrand's two node values, so a window that
//! covers the whole grid reproduces the plain trapezoid sum.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform grid of `n` points spanning [x_min, x_max] inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        let g = Grid1D { x_min, x_max, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite()) {
            return Err(Error::config("grid", "endpoints must be finite"));
        }
        if self.x_min >= self.x_max {
            return Err(Error::config("grid.x_max", "must exceed x_min"));
        }
        if self.n < 3 {
            return Err(Error::config("grid.n", "need at least 3 points"));
        }
        Ok(())
    }

    /// Grid spacing h = (x_max − x_min)/(n − 1).
    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    /// i-th grid point.
    pub fn point(&self, i: usize) -> f64 {
        self.x_min + self.h() * i as f64
    }

    /// All grid points.
    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Trapezoid inner product ⟨f, g⟩ = h·(½f₀g₀ + Σ fᵢgᵢ + ½f_{n−1}g_{n−1}).
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n);
        debug_assert_eq!(g.len(), self.n);
        let mut sum = 0.5 * (f[0] * g[0] + f[self.n - 1] * g[self.n - 1]);
        for i in 1..self.n - 1 {
            sum += f[i] * g[i];
        }
        sum * self.h()
    }

    /// Trapezoid L² norm.
    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Inner product restricted to the window [a, b] with exact splitting of
    /// partial cells: each cell contributes overlap·(fᵢgᵢ + fᵢ₊₁gᵢ₊₁)/2.
    pub fn window_inner(&self, f: &[f64], g: &[f64], a: f64, b: f64) -> f64 {
        debug_assert_eq!(f.len(), self.n);
        debug_assert_eq!(g.len(), self.n);
        let h = self.h();
        let mut sum = 0.0;
        for i in 0..self.n - 1 {
            let lo = self.point(i).max(a);
            let hi = self.point(i + 1).min(b);
            if hi > lo {
                sum += (hi - lo) * 0.5 * (f[i] * g[i] + f[i + 1] * g[i + 1]);
            }
        }
        debug_assert!(h > 0.0);
        sum
    }

    /// L² norm over the window [a, b].
    pub fn window_norm(&self, f: &[f64], a: f64, b: f64) -> f64 {
        self.window_inner(f, f, a, b).sqrt()
    }
}

/// Discrete derivative: central differences inside, one-sided at the ends.
/// Second-order accurate in the interior, first-order at the two endpoints.
pub fn gradient(g: &Grid1D, f: &[f64]) -> Vec<f64> {
    debug_assert_eq!(f.len(), g.n);
    let h = g.h();
    let n = f.len();
    let mut d = vec![0.0; n];
    d[0] = (f[1] - f[0]) / h;
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (f[n - 1] - f[n - 2]) / h;
    d
}

/// `n` uniformly spaced points on [a, b], endpoints included.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Domain(format!("uniform_grid: bad interval [{a}, {b}]")));
    }
    if n < 2 {
        return Err(Error::Domain("uniform_grid: need at least 2 points".into()));
    }
    let h = (b - a) / (n - 1) as f64;
    Ok((0..n).map(|i| a + h * i as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let xs = g.points();
        let ones = vec![1.0; g.n];
        // ∫₀¹ x dx = 1/2, exact for the trapezoid rule on a linear integrand.
        assert_relative_eq!(g.inner(&xs, &ones), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn full_window_matches_trapezoid() {
        let g = Grid1D::new(-2.0, 3.0, 57).unwrap();
        let f: Vec<f64> = g.points().iter().map(|x| (x * 1.3).sin()).collect();
        let full = g.inner(&f, &f);
        let windowed = g.window_inner(&f, &f, g.x_min, g.x_max);
        assert_relative_eq!(windowed, full, max_relative = 1e-13);
    }

    #[test]
    fn window_splits_partial_cells_exactly() {
        let g = Grid1D::new(0.0, 1.0, 3).unwrap(); // cells [0, 1/2], [1/2, 1]
        let ones = vec![1.0; 3];
        // Window [0.25, 0.75] covers half of each cell.
        assert_relative_eq!(g.window_inner(&ones, &ones, 0.25, 0.75), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn empty_window_is_zero() {
        let g = Grid1D::new(0.0, 1.0, 5).unwrap();
        let ones = vec![1.0; 5];
        assert_eq!(g.window_inner(&ones, &ones, 2.0, 3.0), 0.0);
    }

    #[test]
    fn grid_validation_rejects_degenerate() {
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
        assert!(Grid1D::new(f64::NAN, 1.0, 10).is_err());
    }

    #[test]
    fn gradient_is_exact_on_quadratics_inside() {
        let g = Grid1D::new(-1.0, 2.0, 31).unwrap();
        let f: Vec<f64> = g.points().iter().map(|x| x * x).collect();
        let d = gradient(&g, &f);
        for i in 1..g.n - 1 {
            // Central difference of x² is exactly 2x (h² terms cancel).
            assert_relative_eq!(d[i], 2.0 * g.point(i), max_relative = 1e-12);
        }
    }
}
