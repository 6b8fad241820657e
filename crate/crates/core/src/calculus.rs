//! Differential and projection operators as spectral multipliers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::GridSpec;
use crate::norms::{morrey_on_balls, BallSampler, NormParams};
use crate::spectral::{SpectralOps, C64};

/// Fields made of scalar components that multipliers act on one by one.
pub trait Components: Sized {
    /// Number of scalar parts on `grid`.
    fn width(grid: GridSpec) -> usize;
    fn grid(&self) -> GridSpec;
    fn parts(&self) -> Vec<&ScalarField>;
    fn from_parts(grid: GridSpec, parts: Vec<ScalarField>) -> Result<Self>;
}

impl Components for ScalarField {
    fn width(_: GridSpec) -> usize {
        1
    }
    fn grid(&self) -> GridSpec {
        self.grid
    }
    fn parts(&self) -> Vec<&ScalarField> {
        vec![self]
    }
    fn from_parts(_: GridSpec, mut parts: Vec<ScalarField>) -> Result<Self> {
        parts
            .pop()
            .ok_or_else(|| Error::GridMismatch("no scalar component".into()))
    }
}

impl Components for VectorField {
    fn width(grid: GridSpec) -> usize {
        grid.dim
    }
    fn grid(&self) -> GridSpec {
        self.grid
    }
    fn parts(&self) -> Vec<&ScalarField> {
        self.components.iter().collect()
    }
    fn from_parts(_: GridSpec, parts: Vec<ScalarField>) -> Result<Self> {
        VectorField::from_components(parts)
    }
}

impl Components for TensorField {
    fn width(grid: GridSpec) -> usize {
        grid.dim * grid.dim
    }
    fn grid(&self) -> GridSpec {
        self.grid
    }
    fn parts(&self) -> Vec<&ScalarField> {
        self.components.iter().flatten().collect()
    }
    fn from_parts(grid: GridSpec, parts: Vec<ScalarField>) -> Result<Self> {
        if parts.len() != grid.dim * grid.dim {
            return Err(Error::GridMismatch(format!("tensor needs {} parts", grid.dim * grid.dim)));
        }
        let mut it = parts.into_iter();
        let components = (0..grid.dim)
            .map(|_| (&mut it).take(grid.dim).collect())
            .collect();
        Ok(TensorField { grid, components })
    }
}

fn map_spectral<F: Components>(f: &F, mut op: impl FnMut(&SpectralOps, &mut Vec<C64>)) -> Result<F> {
    let grid = f.grid();
    let ops = SpectralOps::for_grid(grid);
    let mut out = Vec::new();
    for part in f.parts() {
        part.check_finite()?;
        let mut c = ops.forward(&part.values);
        op(&ops, &mut c);
        out.push(ScalarField {
            grid,
            values: ops.inverse_real(&c),
        });
    }
    F::from_parts(grid, out)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if !t.is_finite() {
        return Err(Error::InvalidParameter("time must be finite".into()));
    }
    Ok(())
}

/// `e^{tΔ}` applied componentwise, multiplier `exp(−t|2πk/L|²)`.
pub fn heat_semigroup<F: Components>(f: &F, t: f64) -> Result<F> {
    check_time(t)?;
    if t == 0.0 {
        return F::from_parts(f.grid(), f.parts().into_iter().cloned().collect());
    }
    map_spectral(f, |ops, c| ops.heat(c, t))
}

/// Componentwise 2/3-rule truncation.
pub fn dealias<F: Components>(f: &F) -> Result<F> {
    map_spectral(f, |ops, c| ops.dealias(c))
}

/// Componentwise Laplacian, multiplier `−|2πk/L|²`.
pub fn laplacian<F: Components>(f: &F) -> Result<F> {
    map_spectral(f, |ops, c| {
        for (x, &m) in c.iter_mut().zip(&ops.mu) {
            *x *= -m;
        }
    })
}

fn spectral_parts(ops: &SpectralOps, v: &VectorField) -> Result<Vec<Vec<C64>>> {
    v.check_finite()?;
    Ok(v.components.iter().map(|c| ops.forward(&c.values)).collect())
}

fn real_vector(ops: &SpectralOps, grid: GridSpec, parts: &[Vec<C64>]) -> VectorField {
    VectorField {
        grid,
        components: parts
            .iter()
            .map(|c| ScalarField {
                grid,
                values: ops.inverse_real(c),
            })
            .collect(),
    }
}

/// Leray projection onto divergence-free fields; identity on the mean.
pub fn leray_project(v: &VectorField) -> Result<VectorField> {
    let ops = SpectralOps::for_grid(v.grid);
    let mut parts = spectral_parts(&ops, v)?;
    ops.leray(&mut parts);
    Ok(real_vector(&ops, v.grid, &parts))
}

pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    f.check_finite()?;
    let ops = SpectralOps::for_grid(f.grid);
    let parts = ops.gradient(&ops.forward(&f.values));
    Ok(real_vector(&ops, f.grid, &parts))
}

pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    let ops = SpectralOps::for_grid(v.grid);
    let parts = spectral_parts(&ops, v)?;
    Ok(ScalarField {
        grid: v.grid,
        values: ops.inverse_real(&ops.divergence(&parts)),
    })
}

/// `(∇·F)_i = Σ_j ∂_j F_ij`.
pub fn div_tensor(t: &TensorField) -> Result<VectorField> {
    let ops = SpectralOps::for_grid(t.grid);
    let rows: Vec<Vec<Vec<C64>>> = t
        .components
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| {
                    c.check_finite()?;
                    Ok(ops.forward(&c.values))
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    Ok(real_vector(&ops, t.grid, &ops.div_tensor(&rows)))
}

/// Spectral divergence residual `max |k·v̂(k)| / |v̂(k)|` over `k ≠ 0`.
pub fn divergence_residual(v: &VectorField) -> f64 {
    let ops = SpectralOps::for_grid(v.grid);
    let parts: Vec<Vec<C64>> = v.components.iter().map(|c| ops.forward(&c.values)).collect();
    ops.divergence_residual(&parts)
}

/// Pointwise `a·b`; dealiasing happens at the next spectral use.
pub fn product_scalar(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    a.grid.ensure_same(&b.grid)?;
    Ok(ScalarField {
        grid: a.grid,
        values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
    })
}

/// Pointwise `s·v`.
pub fn product_scalar_vector(s: &ScalarField, v: &VectorField) -> Result<VectorField> {
    s.grid.ensure_same(&v.grid)?;
    let components = v
        .components
        .iter()
        .map(|c| product_scalar(s, c))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(components)
}

/// Pointwise `u ⊗ v`.
pub fn product_outer(u: &VectorField, v: &VectorField) -> Result<TensorField> {
    TensorField::outer(u, v)
}

/// Derivative order in a semigroup query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Derivative {
    None,
    Gradient,
}

impl TryFrom<u32> for Derivative {
    type Error = Error;
    fn try_from(m: u32) -> Result<Self> {
        match m {
            0 => Ok(Derivative::None),
            1 => Ok(Derivative::Gradient),
            _ => Err(Error::InvalidParameter(format!("derivative order must be 0 or 1, got {m}"))),
        }
    }
}

impl Derivative {
    pub fn order(self) -> f64 {
        match self {
            Derivative::None => 0.0,
            Derivative::Gradient => 1.0,
        }
    }
}

/// One row of a dispersive ratio table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersiveRow {
    pub t: f64,
    pub lhs_norm: f64,
    pub weight: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersiveTable {
    pub rows: Vec<DispersiveRow>,
    pub input_norm: f64,
    pub max_ratio: f64,
    /// Set when a bound was configured and `max_ratio` exceeds it.
    pub exceeds_bound: Option<bool>,
}

/// Checks the parameter relations of the heat estimate between Morrey–Lorentz
/// spaces: `τ_to ≤ τ_from`, and `λ_from = λ_to` when `p_from ≤ p_to`.
pub fn check_dispersive_params(from: NormParams, to: NormParams, dim: usize) -> Result<()> {
    from.validate(dim)?;
    to.validate(dim)?;
    let (tf, tt) = (from.tau(dim), to.tau(dim));
    if tt > tf + 1e-12 {
        return Err(Error::Hypothesis(format!(
            "heat estimate needs τ_to <= τ_from, got τ_to = {tt} > τ_from = {tf}"
        )));
    }
    if from.p <= to.p && (from.lambda - to.lambda).abs() > 1e-12 {
        return Err(Error::Hypothesis(format!(
            "heat estimate needs equal Morrey exponents when p <= r, got λ = {} and μ = {}",
            from.lambda, to.lambda
        )));
    }
    Ok(())
}

/// Ratios `‖∇^m e^{tΔ}φ‖_to · t^{m/2 + (τ_from − τ_to)/2} / ‖φ‖_from`.
///
/// All norms use one ball set drawn for `φ`. On the torus the ratio tends to
/// zero for large `t`.
pub fn verify_dispersive<F: Components>(
    phi: &F,
    from: NormParams,
    to: NormParams,
    m: Derivative,
    t_grid: &[f64],
    sampler: &BallSampler,
    bound: Option<f64>,
) -> Result<DispersiveTable> {
    let grid = phi.grid();
    check_dispersive_params(from, to, grid.dim)?;
    for &t in t_grid {
        check_time(t)?;
    }
    let ops = SpectralOps::for_grid(grid);
    let spectra: Vec<Vec<C64>> = phi
        .parts()
        .iter()
        .map(|p| {
            p.check_finite()?;
            Ok(ops.forward(&p.values))
        })
        .collect::<Result<_>>()?;
    let magnitude_of = |pieces: Vec<Vec<C64>>| {
        let mut mag = ScalarField::zeros(grid);
        for c in pieces {
            for (m, v) in mag.values.iter_mut().zip(ops.inverse_real(&c)) {
                *m += v * v;
            }
        }
        for m in &mut mag.values {
            *m = m.sqrt();
        }
        mag
    };
    let phi_mag = magnitude_of(spectra.clone());
    let balls = sampler.realize(grid, Some(&phi_mag))?;
    let input_norm = morrey_on_balls(&phi_mag, from, &balls, *sampler)?.value;
    let exponent = 0.5 * m.order() + 0.5 * (from.tau(grid.dim) - to.tau(grid.dim));

    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut pieces = Vec::new();
        for s in &spectra {
            let mut c = s.clone();
            ops.heat(&mut c, t);
            match m {
                Derivative::None => pieces.push(c),
                Derivative::Gradient => pieces.extend(ops.gradient(&c)),
            }
        }
        let lhs_norm = morrey_on_balls(&magnitude_of(pieces), to, &balls, *sampler)?.value;
        let weight = if exponent == 0.0 { 1.0 } else { t.powf(exponent) };
        let ratio = if lhs_norm == 0.0 { 0.0 } else { lhs_norm * weight / input_norm };
        rows.push(DispersiveRow {
            t,
            lhs_norm,
            weight,
            ratio,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(DispersiveTable {
        rows,
        input_norm,
        max_ratio,
        exceeds_bound: bound.map(|b| max_ratio > b),
    })
}

/// Least-squares slope and intercept of `ln y` against `ln x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} usable points", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `n` log-spaced times in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
