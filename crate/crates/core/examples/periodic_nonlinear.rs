//! Small periodic forcing with buoyancy: the nonlinear periodic solution and
//! its linear response to halving the forcing.

use mildflow::field::{TensorField, VectorField};
use mildflow::periodic::{nonlinear_periodic, OuterOptions, PeriodicProblem};
use mildflow::presets::{random_vector, RandomSpec};
use mildflow::solver::{h_norm, ForcingSpec, Mode, Phase, SolveConfig, Term, TimeSeries};
use mildflow::{GridSpec, Result};

fn forcing(g: GridSpec, a: f64) -> Result<ForcingSpec> {
    let f = random_vector(g, &RandomSpec { seed: 11, ..Default::default() });
    let h = random_vector(g, &RandomSpec { seed: 111, ..Default::default() });
    let mut out = ForcingSpec::zero(1.0);
    out.kappa = 1.0;
    out.vector = TimeSeries::single(Term::new(1, Phase::Cos, a, f.clone()));
    out.tensor = TimeSeries::single(Term::new(2, Phase::Sin, a, TensorField::outer(&f, &h)?));
    out.gravity = TimeSeries::single(Term::constant(1.0, VectorField::from_fn(g, |_| [0.0, 0.0, 1.0])));
    Ok(out)
}

fn main() -> Result<()> {
    let g = GridSpec::new(3, 16, std::f64::consts::TAU)?;
    let opts = OuterOptions::default();
    let mut norms = Vec::new();
    for a in [1e-3, 5e-4] {
        let prob = PeriodicProblem::new(g, forcing(g, a)?, SolveConfig::new(1.0 / 16.0), Mode::Full)?;
        let sol = nonlinear_periodic(&prob, &opts, None)?;
        for row in &sol.history {
            println!("a = {a:.0e}  iter {}  increment {:.3e}", row.iteration, row.increment);
        }
        let h = h_norm(&sol.trajectory, opts.p, &opts.sampler, opts.norm_every)?;
        println!(
            "a = {a:.0e}: contraction {}, periodicity residual {:.2e}, H-norm {h:.4e}",
            sol.contraction_ratio.map_or("n/a".into(), |r| format!("{r:.2e}")),
            sol.residual.max_norm
        );
        norms.push(h);
    }
    println!("halved/full = {:.4}", norms[1] / norms[0]);
    Ok(())
}
