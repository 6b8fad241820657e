//! Empirical constants of the linear and bilinear estimates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ScalarField, State, TensorField, VectorField};
use crate::grid::GridSpec;
use crate::norms::{morrey_lorentz_norm, state_norm, BallSampler, NormParams};
use crate::spectral::{SpectralOps, C64};

use super::kernel::phi_pair;
use super::{bilinear_series, Trajectory};

/// `sup_t (‖u(t)‖ + ‖θ(t)‖)` in `(p, ∞, n − p)` over the stored times,
/// visiting every `every`-th state.
pub fn h_norm(traj: &Trajectory, p: f64, sampler: &BallSampler, every: usize) -> Result<f64> {
    let params = NormParams::critical(p, traj.grid().dim)?;
    traj.norm_sup(params, sampler, every)
}

/// Output of [`verify_l_operator`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LOperatorReport {
    /// `‖𝓛[f₁; f₂]‖` in the target space.
    pub output_norm: f64,
    /// `sup_s ‖[f₁; f₂](s)‖` in the source space over the sampled times.
    pub input_sup: f64,
    /// Empirical constant; zero for zero input.
    pub ratio: f64,
    /// Truncation point of the time integral.
    pub horizon: f64,
    pub intervals: usize,
}

/// Integration horizon where the spectral-gap tail `e^{−s·gap}` is `1e−10`.
pub fn l_operator_horizon(grid: GridSpec) -> f64 {
    (1e10f64).ln() / grid.spectral_gap()
}

fn check_l_params(from: NormParams, to: NormParams, dim: usize) -> Result<()> {
    from.validate(dim)?;
    to.validate(dim)?;
    if !(1.0 < from.p && from.p < to.p && to.p.is_finite()) {
        return Err(Error::Hypothesis(format!(
            "need 1 < r < l < ∞, got r = {}, l = {}",
            from.p, to.p
        )));
    }
    if (from.lambda - to.lambda).abs() > 1e-12 {
        return Err(Error::Hypothesis("source and target must share the Morrey exponent".into()));
    }
    let gap = from.tau(dim) - to.tau(dim);
    if (gap - 1.0).abs() > 1e-9 {
        return Err(Error::Hypothesis(format!("need τ_r − τ_l = 1, got {gap}")));
    }
    Ok(())
}

/// `‖𝓛[f₁; f₂]‖_{l,∞,χ} / sup_s ‖[f₁; f₂](s)‖_{r,∞,χ}` with
/// `𝓛[f₁; f₂] = ∫₀^∞ ∇·e^{−sL}[f₁; f₂](s) ds` truncated at
/// [`l_operator_horizon`].
///
/// The integral uses the product trapezoid on `intervals` pieces; the input
/// sup is taken at `norm_samples` evenly spaced nodes.
pub fn verify_l_operator(
    grid: GridSpec,
    f: &dyn Fn(f64) -> Result<(TensorField, VectorField)>,
    from: NormParams,
    to: NormParams,
    intervals: usize,
    norm_samples: usize,
    sampler: &BallSampler,
) -> Result<LOperatorReport> {
    check_l_params(from, to, grid.dim)?;
    if intervals == 0 || norm_samples == 0 {
        return Err(Error::InvalidParameter("need positive interval and sample counts".into()));
    }
    let ops = SpectralOps::for_grid(grid);
    let horizon = l_operator_horizon(grid);
    let h = horizon / intervals as f64;
    let dim = grid.dim;

    // start/end weights over one piece: h(A−B) and hB.
    let (w0, w1): (Vec<f64>, Vec<f64>) = ops
        .mu
        .iter()
        .map(|&m| {
            let (a, b) = phi_pair(m * h);
            (h * (a - b), h * b)
        })
        .unzip();
    let div_at = |s: f64| -> Result<Vec<Vec<C64>>> {
        let (f1, f2) = f(s)?;
        grid.ensure_same(&f1.grid)?;
        grid.ensure_same(&f2.grid)?;
        let mut rows: Vec<Vec<C64>> = f1
            .components
            .iter()
            .map(|row| {
                let spec: Vec<Vec<C64>> = row.iter().map(|c| ops.forward(&c.values)).collect();
                ops.divergence(&spec)
            })
            .collect();
        let g: Vec<Vec<C64>> = f2.components.iter().map(|c| ops.forward(&c.values)).collect();
        rows.push(ops.divergence(&g));
        Ok(rows)
    };

    let mut acc = vec![vec![C64::new(0.0, 0.0); grid.len()]; dim + 1];
    let mut g0 = div_at(0.0)?;
    for k in 0..intervals {
        let s0 = k as f64 * h;
        let g1 = div_at(s0 + h)?;
        for (r, row) in acc.iter_mut().enumerate() {
            for (i, a) in row.iter_mut().enumerate() {
                let e = (-ops.mu[i] * s0).exp();
                if e == 0.0 {
                    continue;
                }
                *a += (g0[r][i] * w0[i] + g1[r][i] * w1[i]) * e;
            }
        }
        g0 = g1;
    }
    let th = ScalarField {
        grid,
        values: ops.inverse_real(&acc[dim]),
    };
    let u = VectorField {
        grid,
        components: acc[..dim]
            .iter()
            .map(|c| ScalarField {
                grid,
                values: ops.inverse_real(c),
            })
            .collect(),
    };
    let output_norm = state_norm(&State { u, theta: th }, to, sampler)?;

    let mut input_sup = 0.0f64;
    for j in 0..norm_samples {
        let s = horizon * j as f64 / norm_samples as f64;
        let (f1, f2) = f(s)?;
        let v = morrey_lorentz_norm(&f1, from, sampler)?.value + morrey_lorentz_norm(&f2, from, sampler)?.value;
        input_sup = input_sup.max(v);
    }
    let ratio = if output_norm == 0.0 { 0.0 } else { output_norm / input_sup };
    Ok(LOperatorReport {
        output_norm,
        input_sup,
        ratio,
        horizon,
        intervals,
    })
}

/// Output of [`verify_bilinear_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BilinearReport {
    /// Largest ratio over the pairs that entered the sup.
    pub k_emp: f64,
    /// `None` for pairs excluded because one factor has zero norm.
    pub ratios: Vec<Option<f64>>,
    pub used: usize,
    pub p: f64,
    pub stored_times: usize,
}

/// `sup ‖B(a, b)‖_{H} / (‖a‖_{H} ‖b‖_{H})` over an ensemble of trajectory pairs.
pub fn verify_bilinear_estimate(
    pairs: &[(Trajectory, Trajectory)],
    p: f64,
    sampler: &BallSampler,
    every: usize,
) -> Result<BilinearReport> {
    let mut ratios = Vec::with_capacity(pairs.len());
    let mut stored_times = 0;
    for (a, b) in pairs {
        let dim = a.grid().dim;
        if !(2.0 < p && p <= dim as f64) {
            return Err(Error::Hypothesis(format!("need 2 < p <= n = {dim}, got p = {p}")));
        }
        stored_times = stored_times.max(a.times.len());
        let (na, nb) = (h_norm(a, p, sampler, every)?, h_norm(b, p, sampler, every)?);
        if na == 0.0 || nb == 0.0 {
            ratios.push(None);
            continue;
        }
        let series = bilinear_series(a, b)?;
        ratios.push(Some(h_norm(&series, p, sampler, every)? / (na * nb)));
    }
    let used: Vec<f64> = ratios.iter().flatten().copied().collect();
    Ok(BilinearReport {
        k_emp: used.iter().copied().fold(0.0, f64::max),
        used: used.len(),
        ratios,
        p,
        stored_times,
    })
}
