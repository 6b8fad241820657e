//! Mild-solution time stepping.
//!
//! Each step propagates by the heat multiplier, adds the exact Duhamel
//! increment of the direct forcing, and integrates the state-dependent
//! terms with the exponential product trapezoid. The implicit end-point
//! dependence is closed by Picard iteration.

mod duhamel;
mod estimates;
mod forcing;
mod kernel;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::State;
use crate::grid::GridSpec;
use crate::norms::{state_norm, BallSampler, NormParams};
use crate::spectral::SpectralOps;

pub use duhamel::{bilinear_b, bilinear_series, coupling_t_g, duhamel_residual, forcing_c};
pub use estimates::{
    h_norm, l_operator_horizon, verify_bilinear_estimate, verify_l_operator, BilinearReport,
    LOperatorReport,
};
pub use forcing::{ForcingSpec, Phase, Term, TimeSeries};
pub use kernel::SpecState;

use kernel::{source_terms, ForcingIntegrator, RealInputs, SourceFlags, StepWeights};

/// Time-stepping controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub dt: f64,
    /// Quadrature nodes per step, end points included.
    #[serde(default = "default_nodes")]
    pub substeps_per_duhamel: usize,
    #[serde(default = "default_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max: usize,
    /// Keep every `store_every`-th step (the last step is always kept).
    #[serde(default = "default_store")]
    pub store_every: usize,
    /// Drop the mean mode of every source term.
    #[serde(default)]
    pub mean_free: bool,
}

fn default_nodes() -> usize {
    2
}
fn default_tol() -> f64 {
    1e-12
}
fn default_picard_max() -> usize {
    50
}
fn default_store() -> usize {
    1
}

impl SolveConfig {
    pub fn new(dt: f64) -> Self {
        SolveConfig {
            dt,
            substeps_per_duhamel: default_nodes(),
            picard_tol: default_tol(),
            picard_max: default_picard_max(),
            store_every: default_store(),
            mean_free: false,
        }
    }

    pub fn validate(&self, period: Option<f64>) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.substeps_per_duhamel < 2 {
            return Err(Error::InvalidParameter("need at least 2 quadrature nodes per step".into()));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return Err(Error::InvalidParameter("Picard tolerance and cap must be positive".into()));
        }
        if self.store_every == 0 {
            return Err(Error::InvalidParameter("store_every must be at least 1".into()));
        }
        if let Some(t) = period {
            if self.dt > t / 16.0 * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "dt = {} exceeds T/16 = {}",
                    self.dt,
                    t / 16.0
                )));
            }
        }
        Ok(())
    }
}

/// Anything that yields a state at a given time.
pub trait StateSource: Send + Sync {
    fn grid(&self) -> GridSpec;
    fn state_at(&self, t: f64) -> Result<State>;
    /// Period of the source, when it repeats.
    fn period(&self) -> Option<f64> {
        None
    }
}

/// A frozen path: its temperature drives the gravity coupling and, with
/// `transport`, its velocity carries both rows.
#[derive(Clone)]
pub struct Frozen {
    pub path: Arc<dyn StateSource>,
    pub transport: bool,
}

/// Which equation is integrated.
#[derive(Clone, Default)]
pub enum Mode {
    #[default]
    Full,
    NavierStokes,
    /// Linear system with sources taken from a frozen path.
    Linearized(Frozen),
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::NavierStokes => "navier-stokes",
            Mode::Linearized(_) => "linearized",
        }
    }

    fn state_dependent(&self) -> bool {
        !matches!(self, Mode::Linearized(_))
    }
}

impl std::fmt::Debug for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Stored states of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Effective step after fitting `t_end` exactly.
    pub dt: f64,
    /// Picard iterations used by the stored steps' last substep.
    pub picard_iterations: Vec<usize>,
}

const TIME_MATCH: f64 = 1e-9;

impl Trajectory {
    pub fn grid(&self) -> GridSpec {
        self.states[0].grid()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Index of a stored time within `1e-9·dt`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = TIME_MATCH * self.dt.max(f64::MIN_POSITIVE);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy()).collect()
    }

    pub fn divergence_residuals(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| crate::calculus::divergence_residual(&s.u))
            .collect()
    }

    /// `sup_t ‖x(t)‖` in the product weak-Morrey norm over stored times,
    /// using every `every`-th state.
    pub fn norm_sup(&self, params: NormParams, sampler: &BallSampler, every: usize) -> Result<f64> {
        let mut best = 0.0f64;
        for (i, s) in self.states.iter().enumerate() {
            if i % every.max(1) == 0 || i + 1 == self.states.len() {
                best = best.max(state_norm(s, params, sampler)?);
            }
        }
        Ok(best)
    }
}

impl StateSource for Trajectory {
    fn grid(&self) -> GridSpec {
        Trajectory::grid(self)
    }

    /// Stored state, or linear interpolation between neighbours.
    fn state_at(&self, t: f64) -> Result<State> {
        if let Some(i) = self.index_of(t) {
            return Ok(self.states[i].clone());
        }
        let tol = TIME_MATCH * self.dt;
        if t < self.times[0] - tol || t > self.t_end() + tol {
            return Err(Error::CoverageGap(t));
        }
        let i = self.times.partition_point(|&s| s < t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        let mut s = self.states[i - 1].scaled(1.0 - w);
        s.axpy(w, &self.states[i]);
        Ok(s)
    }
}

/// A trajectory over one period, extended periodically.
pub struct PeriodicPath {
    pub trajectory: Trajectory,
    pub period: f64,
}

impl StateSource for PeriodicPath {
    fn grid(&self) -> GridSpec {
        self.trajectory.grid()
    }

    fn state_at(&self, t: f64) -> Result<State> {
        self.trajectory.state_at(t.rem_euclid(self.period))
    }

    fn period(&self) -> Option<f64> {
        Some(self.period)
    }
}

/// Closure-backed source, handy for analytic paths.
pub struct FnSource<F: Fn(f64) -> Result<State> + Send + Sync> {
    pub grid: GridSpec,
    pub f: F,
}

impl<F: Fn(f64) -> Result<State> + Send + Sync> StateSource for FnSource<F> {
    fn grid(&self) -> GridSpec {
        self.grid
    }
    fn state_at(&self, t: f64) -> Result<State> {
        (self.f)(t)
    }
}

/// Source terms for one mode of the equation, from spectral or real inputs.
pub(crate) struct Sources<'a> {
    ops: &'a SpectralOps,
    forcing: &'a ForcingSpec,
    mode: &'a Mode,
    mean_free: bool,
}

impl<'a> Sources<'a> {
    pub fn new(ops: &'a SpectralOps, forcing: &'a ForcingSpec, mode: &'a Mode, mean_free: bool) -> Self {
        Sources {
            ops,
            forcing,
            mode,
            mean_free,
        }
    }

    fn flags(&self) -> SourceFlags {
        let gravity = self.forcing.gravity_active();
        match self.mode {
            Mode::Full => SourceFlags {
                velocity_transport: true,
                temperature_transport: true,
                gravity,
            },
            Mode::NavierStokes => SourceFlags {
                velocity_transport: true,
                temperature_transport: false,
                gravity: false,
            },
            Mode::Linearized(fz) => SourceFlags {
                velocity_transport: fz.transport,
                temperature_transport: fz.transport,
                gravity,
            },
        }
    }

    fn is_silent(&self) -> bool {
        let f = self.flags();
        !(f.velocity_transport || f.temperature_transport || f.gravity)
    }

    fn spectral_of(&self, x: &State, t: f64) -> Result<SpecState> {
        let grid = self.ops.grid;
        let flags = self.flags();
        let g = if flags.gravity {
            Some(self.forcing.gravity_at(grid, t)?)
        } else {
            None
        };
        let u: Vec<Vec<f64>> = x.u.components.iter().map(|c| c.values.clone()).collect();
        let gv: Option<Vec<Vec<f64>>> = g.map(|g| g.components.into_iter().map(|c| c.values).collect());
        let inp = RealInputs {
            u: &u,
            theta: &x.theta.values,
            g: gv.as_deref(),
        };
        let mut s = source_terms(self.ops, &inp, self.forcing.kappa, flags);
        if self.mean_free {
            s.zero_mean();
        }
        Ok(s)
    }

    /// Sources at time `t` given the current spectral state.
    pub fn at(&self, x: &SpecState, t: f64) -> Result<SpecState> {
        if self.is_silent() {
            return Ok(SpecState::zeros(self.ops.grid));
        }
        match self.mode {
            Mode::Linearized(fz) => {
                let frozen = fz.path.state_at(t)?;
                self.ops.grid.ensure_same(&frozen.grid())?;
                self.spectral_of(&frozen, t)
            }
            _ => {
                let mut real = x.to_state(self.ops);
                if matches!(self.mode, Mode::NavierStokes) {
                    real.theta = crate::field::ScalarField::zeros(self.ops.grid);
                }
                self.spectral_of(&real, t)
            }
        }
    }
}

/// Number of steps fitting `t_end` with steps no longer than `dt`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> usize {
    ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Integrates the mild formulation from `t = 0` to `t_end`.
pub fn evolve(
    initial: &State,
    forcing: &ForcingSpec,
    t_end: f64,
    cfg: &SolveConfig,
    mode: &Mode,
) -> Result<Trajectory> {
    evolve_from(initial, 0.0, forcing, t_end, cfg, mode)
}

/// Integrates over `[t0, t0 + duration]`; forcing and frozen paths are read
/// at absolute times.
pub fn evolve_from(
    initial: &State,
    t0: f64,
    forcing: &ForcingSpec,
    duration: f64,
    cfg: &SolveConfig,
    mode: &Mode,
) -> Result<Trajectory> {
    let grid = initial.grid();
    forcing.validate(grid)?;
    if !(t0.is_finite() && duration >= 0.0 && duration.is_finite()) {
        return Err(Error::NegativeTime(duration));
    }
    let t_end = duration;
    let periodic = !forcing.is_trivial() || matches!(mode, Mode::Linearized(_));
    cfg.validate(periodic.then_some(forcing.period))?;
    initial.check_finite()?;
    let ops = SpectralOps::for_grid(grid);

    let mut x = SpecState::from_state(&ops, initial)?;
    if matches!(mode, Mode::NavierStokes) {
        x.th.iter_mut().for_each(|c| *c = crate::spectral::C64::new(0.0, 0.0));
    }
    ops.leray(&mut x.u);

    let steps = if t_end == 0.0 { 0 } else { step_count(t_end, cfg.dt) };
    let dt = if steps == 0 { cfg.dt } else { t_end / steps as f64 };
    let subs = cfg.substeps_per_duhamel - 1;
    let h = dt / subs as f64;
    let total = steps * subs;

    let weights = StepWeights::new(&ops, h);
    let direct = ForcingIntegrator::new(&ops, forcing, h);
    let sources = Sources::new(&ops, forcing, mode, cfg.mean_free);
    let implicit = mode.state_dependent() && !sources.is_silent();

    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x.to_state(&ops)],
        dt,
        picard_iterations: vec![0],
    };
    let mut n_prev = sources.at(&x, t0)?;

    for k in 0..total {
        let t_end_k = t0 + (k + 1) as f64 * h;
        let mut base = x.clone();
        base.scale_modes(&weights.decay);
        direct.add_increment(&mut base, t_end_k);
        base.add_weighted(&weights.start, &n_prev);

        let mut iterations = 0;
        let next = if implicit {
            let mut guess = base.clone();
            guess.add_weighted(&weights.end, &n_prev);
            let mut converged = false;
            let mut residual = f64::INFINITY;
            while iterations < cfg.picard_max {
                iterations += 1;
                let n_guess = sources.at(&guess, t_end_k)?;
                let mut cand = base.clone();
                cand.add_weighted(&weights.end, &n_guess);
                ops.leray(&mut cand.u);
                if !cand.is_finite() {
                    break;
                }
                let scale = cand.max_abs();
                residual = if scale == 0.0 { 0.0 } else { cand.max_diff(&guess) / scale };
                guess = cand;
                if residual <= cfg.picard_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::PicardDiverged {
                    time: t_end_k,
                    residual,
                    iterations,
                });
            }
            n_prev = sources.at(&guess, t_end_k)?;
            guess
        } else {
            let n_next = sources.at(&base, t_end_k)?;
            let mut cand = base;
            cand.add_weighted(&weights.end, &n_next);
            ops.leray(&mut cand.u);
            n_prev = n_next;
            cand
        };
        x = next;

        let step = (k + 1) / subs;
        let at_step_end = (k + 1) % subs == 0;
        if at_step_end && (step.is_multiple_of(cfg.store_every) || step == steps) {
            traj.times.push(t0 + step as f64 * dt);
            let state = x.to_state(&ops);
            state.check_finite()?;
            traj.states.push(state);
            traj.picard_iterations.push(iterations);
        }
    }
    Ok(traj)
}
