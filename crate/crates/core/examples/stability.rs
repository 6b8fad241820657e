//! Perturb the periodic solution, tabulate the weighted separation and fit
//! the late-time decay of both components.

use mildflow::field::{State, VectorField};
use mildflow::norms::BallSampler;
use mildflow::periodic::{nonlinear_periodic, OuterOptions, PeriodicProblem};
use mildflow::presets::{random_scalar, random_vector, RandomSpec};
use mildflow::solver::{ForcingSpec, Mode, SolveConfig, Term, TimeSeries};
use mildflow::stability::{default_t_grid, fit_decay_exponent, perturb_and_compare, StabilityParams};
use mildflow::{GridSpec, Result};

fn main() -> Result<()> {
    let g = GridSpec::new(3, 16, std::f64::consts::TAU)?;
    let mut forcing = ForcingSpec::zero(1.0);
    forcing.kappa = 1.0;
    forcing.vector = TimeSeries::single(Term::constant(1e-3, random_vector(g, &RandomSpec { seed: 3, ..Default::default() })));
    forcing.gravity = TimeSeries::single(Term::constant(1.0, VectorField::from_fn(g, |_| [0.0, 0.0, 1.0])));
    let prob = PeriodicProblem::new(g, forcing, SolveConfig::new(1.0 / 16.0), Mode::Full)?;
    let base = nonlinear_periodic(&prob, &OuterOptions::default(), None)?;

    let spec = RandomSpec { seed: 42, ..Default::default() };
    let du = random_vector(g, &spec);
    let dth = random_scalar(g, &RandomSpec { seed: 43, ..spec });
    let mut x1 = base.initial.clone();
    x1.axpy(1.0, &State::new(du.scaled(1e-4 / du.max_abs()), dth.scaled(1e-4 / dth.max_abs()))?);

    let params = StabilityParams::new(3.0, 6.0, 6.0, 3.0, 3)?;
    let t = default_t_grid(base.trajectory.dt, 1.0, 24);
    let table = perturb_and_compare(&base, &prob, &x1, &prob.forcing, &params, &t, &BallSampler::default())?;
    for r in table.rows.iter().step_by(3) {
        println!("t = {:>8.4}  |u-v| {:.3e}  |θ-ξ| {:.3e}  D {:.3e}", r.t, r.velocity_raw, r.temperature_raw, r.d);
    }
    println!("sup D = {:.3e} at t = {}", table.sup_d, table.argmax_t);

    let ts: Vec<f64> = table.rows.iter().map(|r| r.t).collect();
    let vel: Vec<f64> = table.rows.iter().map(|r| r.velocity_raw).collect();
    let tem: Vec<f64> = table.rows.iter().map(|r| r.temperature_raw).collect();
    let fu = fit_decay_exponent(&ts, &vel, (1.0, 10.0))?;
    let ft = fit_decay_exponent(&ts, &tem, (1.0, 10.0))?;
    println!("velocity slope {:.2} ± {:.2} (bound {:.3})", fu.slope, fu.half_width, -params.alpha() / 2.0);
    println!("temperature slope {:.2} ± {:.2} (bound {:.3})", ft.slope, ft.half_width, -params.gamma() / 2.0);
    Ok(())
}
