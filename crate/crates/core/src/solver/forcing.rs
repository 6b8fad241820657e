//! Time-periodic data as finite Fourier series in time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::calculus::Components;
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::GridSpec;
use crate::spectral::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cos,
    Sin,
}

/// `amplitude · cos|sin(2π·harmonic·t/T) · shape(x)`
#[derive(Clone, Debug, PartialEq)]
pub struct Term<S> {
    pub harmonic: u32,
    pub phase: Phase,
    pub amplitude: f64,
    pub shape: S,
}

impl<S> Term<S> {
    pub fn new(harmonic: u32, phase: Phase, amplitude: f64, shape: S) -> Self {
        Term {
            harmonic,
            phase,
            amplitude,
            shape,
        }
    }

    pub fn constant(amplitude: f64, shape: S) -> Self {
        Term::new(0, Phase::Cos, amplitude, shape)
    }

    pub fn omega(&self, period: f64) -> f64 {
        2.0 * PI * self.harmonic as f64 / period
    }

    /// Time factor at `t`.
    pub fn factor(&self, t: f64, period: f64) -> f64 {
        let w = self.omega(period) * t;
        self.amplitude
            * match self.phase {
                Phase::Cos => w.cos(),
                Phase::Sin => w.sin(),
            }
    }
}

/// A finite sum of terms; the empty series is identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries<S> {
    pub terms: Vec<Term<S>>,
}

impl<S> Default for TimeSeries<S> {
    fn default() -> Self {
        TimeSeries { terms: Vec::new() }
    }
}

impl<S: Components + Clone> TimeSeries<S> {
    pub fn new(terms: Vec<Term<S>>) -> Self {
        TimeSeries { terms }
    }

    pub fn single(term: Term<S>) -> Self {
        TimeSeries { terms: vec![term] }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        TimeSeries {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    amplitude: a * t.amplitude,
                    ..t.clone()
                })
                .collect(),
        }
    }

    /// Evaluates the series at time `t` on `grid`.
    pub fn eval(&self, grid: GridSpec, t: f64, period: f64) -> Result<S> {
        let mut acc: Vec<ScalarField> = (0..S::width(grid)).map(|_| ScalarField::zeros(grid)).collect();
        for term in &self.terms {
            let c = term.factor(t, period);
            for (a, p) in acc.iter_mut().zip(term.shape.parts()) {
                a.axpy(c, p);
            }
        }
        S::from_parts(grid, acc)
    }
}

/// Right-hand-side data: `κθg + div F` for the velocity, `div f` for the
/// temperature, all `T`-periodic by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSpec {
    pub tensor: TimeSeries<TensorField>,
    pub vector: TimeSeries<VectorField>,
    pub gravity: TimeSeries<VectorField>,
    pub kappa: f64,
    pub period: f64,
}

impl ForcingSpec {
    pub fn zero(period: f64) -> Self {
        ForcingSpec {
            tensor: TimeSeries::default(),
            vector: TimeSeries::default(),
            gravity: TimeSeries::default(),
            kappa: 0.0,
            period,
        }
    }

    pub fn validate(&self, grid: GridSpec) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidParameter(format!("period must be positive, got {}", self.period)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("κ must be non-negative, got {}", self.kappa)));
        }
        let check = |parts: Vec<&ScalarField>, amp: f64| -> Result<()> {
            if !amp.is_finite() {
                return Err(Error::InvalidParameter("forcing amplitude must be finite".into()));
            }
            for p in parts {
                grid.ensure_same(&p.grid)?;
                p.check_finite()?;
            }
            Ok(())
        };
        for t in &self.tensor.terms {
            check(t.shape.parts(), t.amplitude)?;
        }
        for t in self.vector.terms.iter().chain(&self.gravity.terms) {
            check(t.shape.parts(), t.amplitude)?;
        }
        Ok(())
    }

    /// True when only the gravity coupling could act (no direct forcing).
    pub fn has_direct_forcing(&self) -> bool {
        !(self.tensor.is_zero() && self.vector.is_zero())
    }

    pub fn gravity_active(&self) -> bool {
        self.kappa != 0.0 && !self.gravity.is_zero()
    }

    pub fn is_trivial(&self) -> bool {
        !self.has_direct_forcing() && !self.gravity_active()
    }

    /// Every amplitude multiplied by `a` (κ untouched).
    pub fn scaled(&self, a: f64) -> Self {
        ForcingSpec {
            tensor: self.tensor.scaled(a),
            vector: self.vector.scaled(a),
            gravity: self.gravity.scaled(a),
            kappa: self.kappa,
            period: self.period,
        }
    }

    pub fn gravity_at(&self, grid: GridSpec, t: f64) -> Result<VectorField> {
        self.gravity.eval(grid, t, self.period)
    }
}

/// `∫₀ʰ e^{−zτ} dτ = (1 − e^{−zh})/z` for complex `z`, stable near zero.
pub(crate) fn exp_integral(z: C64, h: f64) -> C64 {
    let zh = z * h;
    if zh.norm() < 1e-2 {
        // h Σ (−zh)^k/(k+1)!
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..12 {
            term *= -zh / (k as f64 + 1.0);
            sum += term;
        }
        sum * h
    } else {
        (C64::new(1.0, 0.0) - (-zh).exp()) / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_integral_branches_agree() {
        for &(re, im) in &[(0.0, 0.0), (1e-6, 0.0), (3.0, 2.0), (0.0, 6.3), (0.99, 0.05)] {
            let z = C64::new(re, im);
            let h = 0.01;
            let direct = if z.norm() == 0.0 { C64::new(h, 0.0) } else { (C64::new(1.0, 0.0) - (-z * h).exp()) / z };
            let mut quad = C64::new(0.0, 0.0);
            let n = 20000;
            for i in 0..n {
                let t = (i as f64 + 0.5) * h / n as f64;
                quad += (-z * t).exp() * (h / n as f64);
            }
            assert!((exp_integral(z, h) - quad).norm() < 1e-10 * h);
            if (z * h).norm() > 1e-3 {
                assert!((exp_integral(z, h) - direct).norm() < 1e-10 * h);
            }
        }
    }

    #[test]
    fn series_eval_is_periodic() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let shape = VectorField::from_fn(g, |x| [x[0].sin(), 1.0, 0.0]);
        let s = TimeSeries::new(vec![Term::constant(0.5, shape.clone()), Term::new(2, Phase::Sin, 1.5, shape)]);
        let a = s.eval(g, 0.3, 1.7).unwrap();
        let b = s.eval(g, 0.3 + 1.7, 1.7).unwrap();
        for (x, y) in a.components.iter().zip(&b.components) {
            for (p, q) in x.values.iter().zip(&y.values) {
                assert!((p - q).abs() < 1e-12);
            }
        }
        let z: TimeSeries<TensorField> = TimeSeries::default();
        let zt = z.eval(g, 0.1, 1.0).unwrap();
        assert_eq!(zt.components.len(), 2);
    }
}
