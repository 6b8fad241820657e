//! Free decay and forced evolution of a Taylor-Green vortex with a warm bump.

use mildflow::field::{State, VectorField};
use mildflow::presets::{gaussian, make_preset, params};
use mildflow::solver::{evolve, ForcingSpec, Mode, SolveConfig, Term, TimeSeries};
use mildflow::{GridSpec, Result};

fn main() -> Result<()> {
    let g = GridSpec::new(3, 16, std::f64::consts::TAU)?;
    let u = make_preset("taylor-green", g, &params(&[("amplitude", 1.0)]))?.into_vector()?;
    let x0 = State::new(u, gaussian(g, 0.5, 0.8))?;
    let cfg = SolveConfig::new(1.0 / 32.0);

    let free = evolve(&x0, &ForcingSpec::zero(1.0), 1.0, &cfg, &Mode::Full)?;
    let e = free.energies();
    println!("unforced: energy {:.6} -> {:.6} over {} steps", e[0], e[e.len() - 1], e.len() - 1);

    // Buoyancy along e3 couples the temperature back into the velocity.
    let mut forcing = ForcingSpec::zero(1.0);
    forcing.kappa = 1.0;
    forcing.gravity = TimeSeries::single(Term::constant(1.0, VectorField::from_fn(g, |_| [0.0, 0.0, 1.0])));
    let forced = evolve(&x0, &forcing, 1.0, &cfg, &Mode::Full)?;
    for (t, x) in forced.times.iter().zip(&forced.states).step_by(8) {
        println!("t = {t:.3}  energy {:.6}  max |x| {:.4}", x.energy(), x.max_abs());
    }
    let div = forced.divergence_residuals().into_iter().fold(0.0, f64::max);
    println!("max divergence residual {div:.2e}");
    Ok(())
}
