//! Periodic box discretization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on the torus `[0, L)^n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension (2 or 3).
    #[serde(rename = "n")]
    pub dim: usize,
    /// Points per axis; a power of two, at least 8.
    #[serde(rename = "N")]
    pub points: usize,
    /// Box side length.
    #[serde(rename = "L")]
    pub length: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, length: f64) -> Result<Self> {
        let grid = GridSpec {
            dim,
            points,
            length,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 2 or 3, got {}",
                self.dim
            )));
        }
        if self.points < 8 || !self.points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {}",
                self.points
            )));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {}",
                self.length
            )));
        }
        Ok(())
    }

    /// Total number of grid points, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Measure of one cell, `(L/N)^n`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Row-major multi-index of a flat index; unused trailing axes are 0.
    #[inline]
    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let n = self.points;
        let mut c = [0usize; 3];
        for axis in (0..self.dim).rev() {
            c[axis] = idx % n;
            idx /= n;
        }
        c
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        let mut idx = 0;
        for &ci in c.iter().take(self.dim) {
            idx = idx * self.points + ci;
        }
        idx
    }

    /// Physical position of a grid point.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = c[axis] as f64 * h;
        }
        x
    }

    /// Centre of the box, which is itself a grid point.
    pub fn center(&self) -> [f64; 3] {
        let mut x = [0.0; 3];
        for xi in x.iter_mut().take(self.dim) {
            *xi = 0.5 * self.length;
        }
        x
    }

    /// Integer wavenumber for an FFT index, in `[-N/2, N/2)`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Integer wavevector of a flat spectral index.
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let c = self.coords(idx);
        let mut k = [0i64; 3];
        for axis in 0..self.dim {
            k[axis] = self.wavenumber(c[axis]);
        }
        k
    }

    /// Flat index of the wavevector `-k` (modulo N on each axis).
    pub fn negated_index(&self, idx: usize) -> usize {
        let c = self.coords(idx);
        let mut m = [0usize; 3];
        for axis in 0..self.dim {
            m[axis] = (self.points - c[axis]) % self.points;
        }
        self.index(m)
    }

    /// Signed torus displacement `x - y`, each axis wrapped to `[-L/2, L/2)`.
    #[inline]
    pub fn displacement(&self, x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
        let l = self.length;
        let mut d = [0.0; 3];
        for axis in 0..self.dim {
            let mut v = x[axis] - y[axis];
            v -= l * (v / l + 0.5).floor();
            d[axis] = v;
        }
        d
    }

    /// Smallest nonzero eigenvalue of `-Δ` on the box, `(2π/L)^2`.
    pub fn spectral_gap(&self) -> f64 {
        let k = 2.0 * std::f64::consts::PI / self.length;
        k * k
    }

    /// True when the grid lies outside the `n >= 3` range of the existence results.
    pub fn outside_hypotheses(&self) -> bool {
        self.dim < 3
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(4, 16, 1.0).is_err());
        assert!(GridSpec::new(3, 12, 1.0).is_err());
        assert!(GridSpec::new(3, 4, 1.0).is_err());
        assert!(GridSpec::new(3, 16, 0.0).is_err());
        assert!(GridSpec::new(2, 8, 1.0).is_ok());
    }

    #[test]
    fn index_roundtrip_and_wavenumbers() {
        let g = GridSpec::new(3, 8, 1.0).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.index(g.coords(idx)), idx);
        }
        assert_eq!(g.wavenumber(3), 3);
        assert_eq!(g.wavenumber(4), -4);
        assert_eq!(g.wavenumber(7), -1);
        let idx = g.index([1, 2, 7]);
        let neg = g.negated_index(idx);
        assert_eq!(g.coords(neg), [7, 6, 1]);
        assert!(g.cell_measure() > 0.0);
    }

    #[test]
    fn displacement_wraps() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let d = g.displacement([0.9, 0.1, 0.0], [0.1, 0.9, 0.0]);
        assert!((d[0] + 0.2).abs() < 1e-12);
        assert!((d[1] - 0.2).abs() < 1e-12);
    }
}
