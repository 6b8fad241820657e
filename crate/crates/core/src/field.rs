//! Real-space field containers.

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// A real scalar sampled on every grid point, row-major over axes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    /// Samples `f` at every grid position.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        ScalarField { grid, values }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn scaled(&self, a: f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `Σ v² · cell measure`
    pub fn l2_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_measure()
    }
}

/// `n` scalar components on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub components: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        VectorField {
            grid,
            components: (0..grid.dim).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_components(components: Vec<ScalarField>) -> Result<Self> {
        let grid = components
            .first()
            .ok_or_else(|| Error::GridMismatch("vector field needs components".into()))?
            .grid;
        if components.len() != grid.dim {
            return Err(Error::GridMismatch(format!(
                "expected {} components, got {}",
                grid.dim,
                components.len()
            )));
        }
        for c in &components {
            grid.ensure_same(&c.grid)?;
        }
        Ok(VectorField { grid, components })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = VectorField::zeros(grid);
        for i in 0..grid.len() {
            let v = f(grid.position(i));
            for (axis, comp) in out.components.iter_mut().enumerate() {
                comp.values[i] = v[axis];
            }
        }
        out
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        for c in &self.components {
            for (m, v) in out.values.iter_mut().zip(&c.values) {
                *m += v * v;
            }
        }
        for m in &mut out.values {
            *m = m.sqrt();
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        VectorField {
            grid: self.grid,
            components: self.components.iter().map(|c| c.scaled(a)).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for (x, y) in self.components.iter_mut().zip(&other.components) {
            x.axpy(a, y);
        }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn check_finite(&self) -> Result<()> {
        self.components.iter().try_for_each(|c| c.check_finite())
    }

    pub fn l2_squared(&self) -> f64 {
        self.components.iter().map(|c| c.l2_squared()).sum()
    }
}

/// Second-order tensor stored as `n × n` scalar fields, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub grid: GridSpec,
    pub components: Vec<Vec<ScalarField>>,
}

impl TensorField {
    pub fn zeros(grid: GridSpec) -> Self {
        TensorField {
            grid,
            components: (0..grid.dim)
                .map(|_| (0..grid.dim).map(|_| ScalarField::zeros(grid)).collect())
                .collect(),
        }
    }

    /// `a ⊗ b`, entry `(i, j) = a_i b_j`.
    pub fn outer(a: &VectorField, b: &VectorField) -> Result<Self> {
        a.grid.ensure_same(&b.grid)?;
        let grid = a.grid;
        let mut out = TensorField::zeros(grid);
        for i in 0..grid.dim {
            for j in 0..grid.dim {
                let vals = &mut out.components[i][j].values;
                for (k, v) in vals.iter_mut().enumerate() {
                    *v = a.components[i].values[k] * b.components[j].values[k];
                }
            }
        }
        Ok(out)
    }

    /// Pointwise Frobenius magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        for row in &self.components {
            for c in row {
                for (m, v) in out.values.iter_mut().zip(&c.values) {
                    *m += v * v;
                }
            }
        }
        for m in &mut out.values {
            *m = m.sqrt();
        }
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        TensorField {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|row| row.iter().map(|c| c.scaled(a)).collect())
                .collect(),
        }
    }
}

/// Velocity and temperature: the unknown pair of the Boussinesq system.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: VectorField,
    pub theta: ScalarField,
}

impl State {
    pub fn zeros(grid: GridSpec) -> Self {
        State {
            u: VectorField::zeros(grid),
            theta: ScalarField::zeros(grid),
        }
    }

    pub fn new(u: VectorField, theta: ScalarField) -> Result<Self> {
        u.grid.ensure_same(&theta.grid)?;
        Ok(State { u, theta })
    }

    pub fn from_velocity(u: VectorField) -> Self {
        let theta = ScalarField::zeros(u.grid);
        State { u, theta }
    }

    pub fn grid(&self) -> GridSpec {
        self.theta.grid
    }

    /// Discrete max norm over all components.
    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.theta.max_abs())
    }

    pub fn sub(&self, other: &State) -> State {
        State {
            u: self.u.sub(&other.u),
            theta: self.theta.sub(&other.theta),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &State) {
        self.u.axpy(a, &other.u);
        self.theta.axpy(a, &other.theta);
    }

    pub fn scaled(&self, a: f64) -> State {
        State {
            u: self.u.scaled(a),
            theta: self.theta.scaled(a),
        }
    }

    /// `½ ∫ (|u|² + θ²)`
    pub fn energy(&self) -> f64 {
        0.5 * (self.u.l2_squared() + self.theta.l2_squared())
    }

    pub fn check_finite(&self) -> Result<()> {
        self.u.check_finite()?;
        self.theta.check_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magnitude_and_outer() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let a = VectorField::from_fn(g, |_| [3.0, 4.0, 0.0]);
        assert!(a.magnitude().values.iter().all(|&m| (m - 5.0).abs() < 1e-15));
        let t = TensorField::outer(&a, &a).unwrap();
        assert_eq!(t.components[0][1].values[5], 12.0);
        assert!((t.magnitude().values[0] - 25.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let mut f = ScalarField::zeros(g);
        f.values[3] = f64::NAN;
        assert!(matches!(f.check_finite(), Err(Error::NonFinite { index: 3, .. })));
    }
}
