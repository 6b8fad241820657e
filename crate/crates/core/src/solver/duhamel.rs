//! The integral operators of the mild formulation, evaluated on their own.

use crate::error::{Error, Result};
use crate::field::State;
use crate::grid::GridSpec;
use crate::spectral::SpectralOps;

use super::forcing::ForcingSpec;
use super::kernel::{pair_terms, source_terms, ForcingIntegrator, RealInputs, SourceFlags, SpecState, StepWeights};
use super::{Mode, SolveConfig, Sources, StateSource, Trajectory};

/// Product-trapezoid accumulation of `∫₀ᵗ e^{−(t−s)L} N(s) ds` on a uniform
/// grid of `intervals` sub-intervals.
fn accumulate(
    ops: &SpectralOps,
    t: f64,
    intervals: usize,
    mut integrand: impl FnMut(f64) -> Result<SpecState>,
) -> Result<SpecState> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    let mut x = SpecState::zeros(ops.grid);
    if t == 0.0 {
        return Ok(x);
    }
    if intervals == 0 {
        return Err(Error::InvalidParameter("need at least one quadrature interval".into()));
    }
    let h = t / intervals as f64;
    let w = StepWeights::new(ops, h);
    let mut n0 = integrand(0.0)?;
    for k in 0..intervals {
        let n1 = integrand((k + 1) as f64 * h)?;
        x.scale_modes(&w.decay);
        x.add_weighted(&w.start, &n0);
        x.add_weighted(&w.end, &n1);
        n0 = n1;
    }
    Ok(x)
}

fn fetch(src: &dyn StateSource, grid: GridSpec, s: f64) -> Result<State> {
    let x = src.state_at(s)?;
    grid.ensure_same(&x.grid())?;
    Ok(x)
}

/// `B(a, b)(t) = −∫₀ᵗ ∇·e^{−(t−s)L}[P(u⊗v); uξ] ds` with `a = (u, ·)`, `b = (v, ξ)`.
pub fn bilinear_b(a: &dyn StateSource, b: &dyn StateSource, t: f64, intervals: usize) -> Result<State> {
    let grid = a.grid();
    grid.ensure_same(&b.grid())?;
    let ops = SpectralOps::for_grid(grid);
    let x = accumulate(&ops, t, intervals, |s| {
        Ok(pair_terms(&ops, &fetch(a, grid, s)?, &fetch(b, grid, s)?))
    })?;
    Ok(x.to_state(&ops))
}

/// `B(a, b)` at every stored time of two trajectories sharing a time grid.
pub fn bilinear_series(a: &Trajectory, b: &Trajectory) -> Result<Trajectory> {
    let grid = a.grid();
    grid.ensure_same(&b.grid())?;
    let tol = 1e-9 * a.dt;
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > tol) {
        return Err(Error::InvalidParameter("trajectories must share their time grid".into()));
    }
    let ops = SpectralOps::for_grid(grid);
    let mut x = SpecState::zeros(grid);
    let mut states = vec![x.to_state(&ops)];
    let mut n0 = pair_terms(&ops, &a.states[0], &b.states[0]);
    let mut cached: Option<(f64, StepWeights)> = None;
    for k in 1..a.times.len() {
        let h = a.times[k] - a.times[k - 1];
        let fresh = !matches!(&cached, Some((hc, _)) if (hc - h).abs() <= tol);
        if fresh {
            cached = Some((h, StepWeights::new(&ops, h)));
        }
        let w = &cached.as_ref().expect("weights just cached").1;
        let n1 = pair_terms(&ops, &a.states[k], &b.states[k]);
        x.scale_modes(&w.decay);
        x.add_weighted(&w.start, &n0);
        x.add_weighted(&w.end, &n1);
        states.push(x.to_state(&ops));
        n0 = n1;
    }
    Ok(Trajectory {
        times: a.times.clone(),
        picard_iterations: vec![0; states.len()],
        states,
        dt: a.dt,
    })
}

/// `T_g(θ)(t) = ∫₀ᵗ e^{−(t−s)L}[κP(θg); 0] ds`, reading θ from `theta`.
pub fn coupling_t_g(theta: &dyn StateSource, forcing: &ForcingSpec, t: f64, intervals: usize) -> Result<State> {
    let grid = theta.grid();
    forcing.validate(grid)?;
    let ops = SpectralOps::for_grid(grid);
    let flags = SourceFlags {
        velocity_transport: false,
        temperature_transport: false,
        gravity: true,
    };
    let x = accumulate(&ops, t, intervals, |s| {
        if !forcing.gravity_active() {
            return Ok(SpecState::zeros(grid));
        }
        let th = fetch(theta, grid, s)?.theta;
        let g = forcing.gravity_at(grid, s)?;
        let gv: Vec<Vec<f64>> = g.components.into_iter().map(|c| c.values).collect();
        let inp = RealInputs {
            u: &[],
            theta: &th.values,
            g: Some(&gv),
        };
        Ok(source_terms(&ops, &inp, forcing.kappa, flags))
    })?;
    Ok(x.to_state(&ops))
}

/// `𝒞(t) = ∫₀ᵗ ∇·e^{−(t−s)L}[P(F); f] ds`, integrated exactly in time.
pub fn forcing_c(grid: GridSpec, forcing: &ForcingSpec, t: f64) -> Result<State> {
    forcing.validate(grid)?;
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    let ops = SpectralOps::for_grid(grid);
    let mut x = SpecState::zeros(grid);
    if t > 0.0 {
        ForcingIntegrator::new(&ops, forcing, t).add_increment(&mut x, t);
    }
    Ok(x.to_state(&ops))
}

/// Re-evaluates the right side of the mild formulation at every stored
/// time from the stored states, and returns the max-norm mismatch relative
/// to the largest stored value.
///
/// Needs every step stored and two quadrature nodes per step.
pub fn duhamel_residual(traj: &Trajectory, forcing: &ForcingSpec, cfg: &SolveConfig, mode: &Mode) -> Result<f64> {
    if cfg.substeps_per_duhamel != 2 || cfg.store_every != 1 {
        return Err(Error::InvalidParameter(
            "the residual check needs store_every = 1 and two nodes per step".into(),
        ));
    }
    let dt = traj.dt;
    for (k, &t) in traj.times.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-9 * dt {
            return Err(Error::InvalidParameter("trajectory is not stored at every step".into()));
        }
    }
    let grid = traj.grid();
    let ops = SpectralOps::for_grid(grid);
    let w = StepWeights::new(&ops, dt);
    let direct = ForcingIntegrator::new(&ops, forcing, dt);
    let sources = Sources::new(&ops, forcing, mode, cfg.mean_free);

    let spec: Vec<SpecState> = traj
        .states
        .iter()
        .map(|s| SpecState::from_state(&ops, s))
        .collect::<Result<_>>()?;
    let mut y = spec[0].clone();
    let scale = traj.states.iter().fold(0.0f64, |m, s| m.max(s.max_abs()));
    let mut worst = 0.0f64;
    let mut n0 = sources.at(&spec[0], 0.0)?;
    for k in 1..spec.len() {
        let t = traj.times[k];
        let n1 = sources.at(&spec[k], t)?;
        y.scale_modes(&w.decay);
        direct.add_increment(&mut y, t);
        y.add_weighted(&w.start, &n0);
        y.add_weighted(&w.end, &n1);
        ops.leray(&mut y.u);
        worst = worst.max(y.to_state(&ops).sub(&traj.states[k]).max_abs());
        n0 = n1;
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}
