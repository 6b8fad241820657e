//! Periodic datum of the linearized problem: Cesàro means of the Poincaré
//! iterates against the direct resolvent solve.

use mildflow::field::TensorField;
use mildflow::norms::{BallSampler, NormParams};
use mildflow::periodic::{cesaro_periodic_datum, check_periodicity, linear_mode, resolvent_periodic_datum, PeriodicProblem};
use mildflow::presets::{random_vector, RandomSpec};
use mildflow::solver::{evolve, ForcingSpec, Phase, SolveConfig, Term, TimeSeries};
use mildflow::{GridSpec, Result};

fn main() -> Result<()> {
    let g = GridSpec::new(3, 16, std::f64::consts::TAU)?;
    let period = 12.0;
    let f = random_vector(g, &RandomSpec { seed: 5, ..Default::default() });
    let h = random_vector(g, &RandomSpec { seed: 6, ..Default::default() });
    let mut forcing = ForcingSpec::zero(period);
    forcing.vector = TimeSeries::single(Term::new(1, Phase::Cos, 1.0, f.clone()));
    forcing.tensor = TimeSeries::single(Term::new(2, Phase::Sin, 1.0, TensorField::outer(&f, &h)?));

    let prob = PeriodicProblem::new(g, forcing, SolveConfig::new(period / 16.0), linear_mode(g))?;
    let exact = resolvent_periodic_datum(&prob)?;
    let sol = cesaro_periodic_datum(&prob, 400, 1e-9, Some(&exact))?;
    for row in sol.history.iter().step_by(4) {
        println!("n = {:>4}  increment {:.3e}  error {:.3e}", row.iteration, row.increment, row.error.unwrap_or(f64::NAN));
    }
    println!("Cesàro vs resolvent: {:.3e}", sol.initial.sub(&exact).max_abs());

    let orbit = evolve(&exact, &prob.forcing, period, &prob.cfg, &prob.mode)?;
    let res = check_periodicity(&orbit, NormParams::critical(3.0, 3)?, &BallSampler::default())?;
    println!("periodicity residual: max {:.3e}, critical norm {:.3e}", res.max_norm, res.morrey);
    Ok(())
}
