//! Time-periodic mild solutions: Poincaré map, Cesàro averaging, the
//! spectral resolvent, and the frozen-nonlinearity outer iteration.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::State;
use crate::grid::GridSpec;
use crate::norms::{state_norm, BallSampler, NormParams};
use crate::solver::{evolve, h_norm, ForcingSpec, Frozen, Mode, PeriodicPath, SolveConfig, Trajectory};
use crate::spectral::{SpectralOps, C64};

/// A `T`-periodic problem; `T` is the forcing period.
#[derive(Clone, Debug)]
pub struct PeriodicProblem {
    pub grid: GridSpec,
    pub forcing: ForcingSpec,
    pub cfg: SolveConfig,
    pub mode: Mode,
    /// Space of the Morrey part of the periodicity residual.
    pub residual_norm: NormParams,
    pub sampler: BallSampler,
}

impl PeriodicProblem {
    /// Source terms are taken mean-free; a frozen periodic path must share
    /// the forcing period.
    pub fn new(grid: GridSpec, forcing: ForcingSpec, cfg: SolveConfig, mode: Mode) -> Result<Self> {
        grid.validate()?;
        forcing.validate(grid)?;
        cfg.validate(Some(forcing.period))?;
        if let Mode::Linearized(fz) = &mode {
            grid.ensure_same(&fz.path.grid())?;
            if let Some(p) = fz.path.period() {
                if (p - forcing.period).abs() > 1e-12 * forcing.period {
                    return Err(Error::InvalidParameter(format!(
                        "frozen path period {p} differs from forcing period {}",
                        forcing.period
                    )));
                }
            }
        }
        let dim = grid.dim as f64;
        Ok(PeriodicProblem {
            grid,
            forcing,
            cfg: SolveConfig {
                mean_free: true,
                ..cfg
            },
            mode,
            residual_norm: NormParams::weak(dim, 0.0)?,
            sampler: BallSampler::default(),
        })
    }

    pub fn period(&self) -> f64 {
        self.forcing.period
    }

    fn with_mode(&self, mode: Mode) -> Self {
        PeriodicProblem {
            mode,
            ..self.clone()
        }
    }
}

/// `‖x(T) − x(0)‖` in the discrete max norm and in the weak-Morrey product norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeriodicityResidual {
    pub max_norm: f64,
    pub morrey: f64,
}

/// One row of a Cesàro or outer-iteration history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub increment: f64,
    /// Increment over the previous increment.
    pub ratio: Option<f64>,
    /// Distance to a supplied reference datum.
    pub error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct PeriodicSolution {
    pub initial: State,
    /// One period started from `initial`, every step stored.
    pub trajectory: Trajectory,
    pub residual: PeriodicityResidual,
    pub history: Vec<HistoryRow>,
    /// Largest ratio of successive outer increments (nonlinear runs).
    pub contraction_ratio: Option<f64>,
}

/// `𝒫(x)`: the state at time `T` of the run started from `x`.
pub fn poincare_map(x: &State, prob: &PeriodicProblem) -> Result<State> {
    let cfg = SolveConfig {
        store_every: usize::MAX,
        ..prob.cfg
    };
    Ok(evolve(x, &prob.forcing, prob.period(), &cfg, &prob.mode)?.last().clone())
}

/// One period from `x` with every step stored.
fn orbit(x: &State, prob: &PeriodicProblem) -> Result<Trajectory> {
    let cfg = SolveConfig {
        store_every: 1,
        ..prob.cfg
    };
    evolve(x, &prob.forcing, prob.period(), &cfg, &prob.mode)
}

pub fn check_periodicity(traj: &Trajectory, params: NormParams, sampler: &BallSampler) -> Result<PeriodicityResidual> {
    let gap = traj.last().sub(&traj.states[0]);
    Ok(PeriodicityResidual {
        max_norm: gap.max_abs(),
        morrey: state_norm(&gap, params, sampler)?,
    })
}

fn certify(initial: State, prob: &PeriodicProblem, history: Vec<HistoryRow>, ratio: Option<f64>) -> Result<PeriodicSolution> {
    let trajectory = orbit(&initial, prob)?;
    let residual = check_periodicity(&trajectory, prob.residual_norm, &prob.sampler)?;
    Ok(PeriodicSolution {
        initial,
        trajectory,
        residual,
        history,
        contraction_ratio: ratio,
    })
}

fn require_linear(prob: &PeriodicProblem) -> Result<()> {
    match prob.mode {
        Mode::Linearized(_) => Ok(()),
        _ => Err(Error::InvalidParameter(format!(
            "the periodic datum construction needs the linearized mode, got {}",
            prob.mode.name()
        ))),
    }
}

/// Averages `P_n = (1/n) Σ_{k=1..n} 𝒫^k(0)` until successive averages differ
/// by less than `tol` in the max norm, then certifies the limit.
///
/// With `reference`, each history row also records `‖P_n − reference‖`.
pub fn cesaro_periodic_datum(
    prob: &PeriodicProblem,
    n_max: usize,
    tol: f64,
    reference: Option<&State>,
) -> Result<PeriodicSolution> {
    require_linear(prob)?;
    let mut y = State::zeros(prob.grid);
    let mut sum = State::zeros(prob.grid);
    let mut prev = State::zeros(prob.grid);
    let mut history: Vec<HistoryRow> = Vec::new();
    for n in 1..=n_max {
        y = poincare_map(&y, prob)?;
        sum.axpy(1.0, &y);
        let avg = sum.scaled(1.0 / n as f64);
        let increment = avg.sub(&prev).max_abs();
        let ratio = history.last().and_then(|r| (r.increment > 0.0).then(|| increment / r.increment));
        history.push(HistoryRow {
            iteration: n,
            increment,
            ratio,
            error: reference.map(|r| avg.sub(r).max_abs()),
        });
        prev = avg;
        if increment < tol {
            return certify(prev, prob, history, None);
        }
    }
    Err(Error::CesaroStalled {
        iterations: n_max,
        last_increment: history.last().map_or(f64::NAN, |r| r.increment),
        history: history.iter().map(|r| (r.iteration, r.increment)).collect(),
    })
}

/// `x̂ = (I − e^{−TL})^{−1} 𝒫(0)` mode by mode; the mean mode must vanish.
pub fn resolvent_periodic_datum(prob: &PeriodicProblem) -> Result<State> {
    require_linear(prob)?;
    let c = poincare_map(&State::zeros(prob.grid), prob)?;
    let ops = SpectralOps::for_grid(prob.grid);
    let t = prob.period();
    let solve = |values: &[f64]| -> Result<Vec<f64>> {
        let mut s = ops.forward(values);
        let scale = s.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if s[0].norm() > 1e-13 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::MeanMode(format!(
                "𝒫(0) has mean {:.3e}; I − e^{{−TL}} is singular on constants, keep the data mean-free",
                s[0].norm()
            )));
        }
        s[0] = C64::new(0.0, 0.0);
        for (z, &m) in s.iter_mut().zip(&ops.mu).skip(1) {
            *z /= -(-t * m).exp_m1();
        }
        Ok(ops.inverse_real(&s))
    };
    let mut x = c.clone();
    for comp in &mut x.u.components {
        comp.values = solve(&comp.values)?;
    }
    x.theta.values = solve(&c.theta.values)?;
    Ok(x)
}

/// Controls of the outer fixed-point loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OuterOptions {
    /// Stop once successive iterates differ by less than this in `H_{p,∞}`.
    pub outer_tol: f64,
    pub outer_max: usize,
    /// Exponent of the `H_{p,∞}` increment norm.
    pub p: f64,
    pub sampler: BallSampler,
    /// Use every `norm_every`-th stored time in the increment norm.
    pub norm_every: usize,
}

impl Default for OuterOptions {
    fn default() -> Self {
        OuterOptions {
            outer_tol: 1e-9,
            outer_max: 30,
            p: 3.0,
            sampler: BallSampler::default(),
            norm_every: 8,
        }
    }
}

/// Largest `|a|·max|shape|` over the forcing terms, gravity scaled by κ.
pub fn forcing_amplitude(f: &ForcingSpec) -> f64 {
    let t = f.tensor.terms.iter().map(|t| t.amplitude.abs() * t.shape.magnitude().max_abs());
    let v = f.vector.terms.iter().map(|t| t.amplitude.abs() * t.shape.max_abs());
    let g = f.gravity.terms.iter().map(|t| f.kappa * t.amplitude.abs() * t.shape.max_abs());
    t.chain(v).chain(g).fold(0.0, f64::max)
}

fn difference(a: &Trajectory, b: &Trajectory) -> Trajectory {
    Trajectory {
        states: a.states.iter().zip(&b.states).map(|(x, y)| x.sub(y)).collect(),
        ..a.clone()
    }
}

/// Periodic solution of the nonlinear problem by the frozen-nonlinearity
/// iteration: each pass freezes the transport and gravity terms on the
/// current periodic path, solves the linear periodic problem through the
/// resolvent, and takes its orbit as the next path.
///
/// `start` seeds the first frozen path; the default is zero.
pub fn nonlinear_periodic(prob: &PeriodicProblem, opts: &OuterOptions, start: Option<&Trajectory>) -> Result<PeriodicSolution> {
    let mut prob = prob.clone();
    match prob.mode {
        Mode::Full => {}
        Mode::NavierStokes => {
            // θ ≡ 0: the temperature data play no part
            prob.forcing.vector = Default::default();
            prob.forcing.gravity = Default::default();
            prob.forcing.kappa = 0.0;
        }
        Mode::Linearized(_) => {
            return Err(Error::InvalidParameter("nonlinear_periodic needs the full or navier-stokes mode".into()))
        }
    }
    let t = prob.period();
    let mut current = match start {
        Some(s) => s.clone(),
        None => orbit(&State::zeros(prob.grid), &prob.with_mode(linear_mode(prob.grid)))?,
    };
    let mut history: Vec<HistoryRow> = Vec::new();
    let mut worst_ratio: Option<f64> = None;
    for it in 1..=opts.outer_max {
        let frozen = Mode::Linearized(Frozen {
            path: Arc::new(PeriodicPath {
                trajectory: current.clone(),
                period: t,
            }),
            transport: true,
        });
        let lin = prob.with_mode(frozen);
        let datum = resolvent_periodic_datum(&lin)?;
        let next = orbit(&datum, &lin)?;
        if next.times.len() != current.times.len() {
            return Err(Error::InvalidParameter("starting path must be stored at every step".into()));
        }
        let increment = h_norm(&difference(&next, &current), opts.p, &opts.sampler, opts.norm_every)?;
        let ratio = history.last().and_then(|r| (r.increment > 0.0).then(|| increment / r.increment));
        history.push(HistoryRow {
            iteration: it,
            increment,
            ratio,
            error: None,
        });
        current = next;
        if increment < opts.outer_tol {
            return certify(datum, &prob, history, worst_ratio);
        }
        if let Some(r) = ratio {
            worst_ratio = Some(worst_ratio.map_or(r, |w: f64| w.max(r)));
            if r >= 1.0 {
                return Err(Error::SmallnessViolated {
                    ratio: r,
                    amplitude: forcing_amplitude(&prob.forcing),
                });
            }
        }
    }
    Err(Error::OuterStalled {
        iterations: opts.outer_max,
        last_increment: history.last().map_or(f64::NAN, |r| r.increment),
    })
}

/// Linearization about the zero path: Stokes flow plus heat equation.
pub fn linear_mode(grid: GridSpec) -> Mode {
    Mode::Linearized(Frozen {
        path: Arc::new(crate::solver::FnSource {
            grid,
            f: move |_| Ok(State::zeros(grid)),
        }),
        transport: false,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::calculus::heat_semigroup;
    use crate::field::{ScalarField, VectorField};
    use crate::presets::{random_vector, RandomSpec};
    use crate::solver::{Phase, Term, TimeSeries};

    fn grid() -> GridSpec {
        GridSpec::new(3, 8, 2.0 * PI).unwrap()
    }

    fn linear(forcing: ForcingSpec) -> PeriodicProblem {
        let g = grid();
        let dt = forcing.period / 16.0;
        PeriodicProblem::new(g, forcing, SolveConfig::new(dt), linear_mode(g)).unwrap()
    }

    fn seeded_forcing(g: GridSpec, period: f64, seed: u64, a: f64) -> ForcingSpec {
        let spec = RandomSpec {
            amplitude: 1.0,
            slope: 2.0,
            seed,
            kmax: 2,
        };
        let f = random_vector(g, &spec);
        let h = random_vector(g, &RandomSpec { seed: seed + 100, ..spec });
        let mut out = ForcingSpec::zero(period);
        out.vector = TimeSeries::new(vec![Term::new(1, Phase::Cos, a, f.clone()), Term::constant(0.5 * a, h.clone())]);
        out.tensor = TimeSeries::single(Term::new(2, Phase::Sin, a, crate::field::TensorField::outer(&f, &h).unwrap()));
        out
    }

    #[test]
    fn poincare_map_is_affine() {
        let g = grid();
        let prob = linear(seeded_forcing(g, 2.0, 1, 0.3));
        let x1 = State::new(random_vector(g, &RandomSpec::default()), ScalarField::from_fn(g, |x| x[0].sin())).unwrap();
        let x2 = State::from_velocity(VectorField::from_fn(g, |x| [x[2].cos(), 0.0, 0.0]));
        let d = poincare_map(&x1, &prob).unwrap().sub(&poincare_map(&x2, &prob).unwrap());
        let dx = x1.sub(&x2);
        let expect = State {
            u: heat_semigroup(&dx.u, 2.0).unwrap(),
            theta: heat_semigroup(&dx.theta, 2.0).unwrap(),
        };
        assert!(d.sub(&expect).max_abs() < 1e-10);

        let free = linear(ForcingSpec::zero(2.0));
        let p = poincare_map(&x1, &free).unwrap();
        let e = heat_semigroup(&x1.theta, 2.0).unwrap();
        assert!(p.theta.sub(&e).max_abs() < 1e-12);
    }

    #[test]
    fn constant_mode_has_closed_form_map_and_datum() {
        let g = grid();
        let t = 1.5;
        let mut f = ForcingSpec::zero(t);
        // div f = −sin x
        f.vector = TimeSeries::single(Term::constant(1.0, VectorField::from_fn(g, |x| [x[0].cos(), 0.0, 0.0])));
        let prob = linear(f);
        let c = poincare_map(&State::zeros(g), &prob).unwrap();
        let w = 1.0 - (-t).exp();
        let exact = ScalarField::from_fn(g, |x| -w * x[0].sin());
        assert!(c.theta.sub(&exact).max_abs() < 1e-12);
        let datum = resolvent_periodic_datum(&prob).unwrap();
        let exact = ScalarField::from_fn(g, |x| -x[0].sin());
        assert!(datum.theta.sub(&exact).max_abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_gives_zero_datum() {
        let prob = linear(ForcingSpec::zero(1.0));
        let sol = cesaro_periodic_datum(&prob, 10, 1e-12, None).unwrap();
        assert_eq!(sol.initial.max_abs(), 0.0);
        assert_eq!(sol.residual.max_norm, 0.0);
        assert_eq!(resolvent_periodic_datum(&prob).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn cesaro_agrees_with_resolvent() {
        let g = grid();
        // with T·gap = 10 the Cesàro constant is small enough for 1e−6 agreement
        let prob = linear(seeded_forcing(g, 10.0, 7, 1.0));
        let exact = resolvent_periodic_datum(&prob).unwrap();
        let sol = cesaro_periodic_datum(&prob, 400, 1e-8, Some(&exact)).unwrap();
        assert!(sol.initial.sub(&exact).max_abs() < 1e-6);
        assert!(sol.residual.max_norm < 1e-6);
        let n: Vec<f64> = sol.history.iter().map(|r| r.iteration as f64).collect();
        let e: Vec<f64> = sol.history.iter().map(|r| r.error.unwrap()).collect();
        let (slope, _) = crate::calculus::loglog_fit(&n, &e).unwrap();
        assert!((slope + 1.0).abs() < 0.2, "slope {slope}");
        let stalled = cesaro_periodic_datum(&prob, 3, 1e-14, None);
        assert!(matches!(stalled, Err(Error::CesaroStalled { iterations: 3, .. })));
    }

    #[test]
    fn mean_forcing_is_rejected_by_the_resolvent() {
        let g = grid();
        let mut f = ForcingSpec::zero(1.0);
        f.kappa = 1.0;
        f.gravity = TimeSeries::single(Term::constant(1.0, VectorField::from_fn(g, |_| [0.0, 0.0, 1.0])));
        let theta = State::new(VectorField::zeros(g), ScalarField::constant(g, 1.0)).unwrap();
        let path = Mode::Linearized(Frozen {
            path: Arc::new(crate::solver::FnSource {
                grid: g,
                f: move |_| Ok(theta.clone()),
            }),
            transport: false,
        });
        let mut prob = PeriodicProblem::new(g, f, SolveConfig::new(1.0 / 16.0), path).unwrap();
        assert!(resolvent_periodic_datum(&prob).unwrap().max_abs() == 0.0);
        prob.cfg.mean_free = false;
        assert!(matches!(resolvent_periodic_datum(&prob), Err(Error::MeanMode(_))));
    }

    #[test]
    fn heat_flow_periodicity_residual_matches_modes() {
        let g = grid();
        let x0 = State::new(VectorField::zeros(g), ScalarField::from_fn(g, |x| (2.0 * x[1]).cos())).unwrap();
        let traj = evolve(&x0, &ForcingSpec::zero(1.0), 0.5, &SolveConfig::new(0.05), &Mode::Full).unwrap();
        let r = check_periodicity(&traj, NormParams::weak(3.0, 0.0).unwrap(), &BallSampler::default()).unwrap();
        assert!((r.max_norm - (1.0 - (-2.0f64).exp())).abs() < 1e-10);
        let still = Trajectory {
            states: vec![x0.clone(), x0.clone()],
            times: vec![0.0, 1.0],
            dt: 1.0,
            picard_iterations: vec![0, 0],
        };
        let r = check_periodicity(&still, NormParams::weak(3.0, 0.0).unwrap(), &BallSampler::default()).unwrap();
        assert_eq!((r.max_norm, r.morrey), (0.0, 0.0));
    }

    #[test]
    fn nonlinear_iteration_converges_for_small_forcing() {
        let g = grid();
        let f = seeded_forcing(g, 1.0, 3, 0.05);
        let prob = PeriodicProblem::new(g, f.clone(), SolveConfig::new(1.0 / 16.0), Mode::Full).unwrap();
        let opts = OuterOptions {
            sampler: BallSampler {
                centers: 8,
                radii: 4,
                seed: 0,
            },
            norm_every: 4,
            ..Default::default()
        };
        let sol = nonlinear_periodic(&prob, &opts, None).unwrap();
        assert!(sol.contraction_ratio.unwrap() < 1.0);
        assert!(sol.residual.max_norm < 1e-8, "{:?}", sol.residual);

        // one more period hardly moves it
        let again = poincare_map(sol.trajectory.last(), &prob).unwrap();
        assert!(again.sub(sol.trajectory.last()).max_abs() < 2.0 * sol.residual.max_norm.max(1e-12));

        // a different starting path reaches the same datum
        let other = evolve(
            &State::from_velocity(random_vector(g, &RandomSpec { amplitude: 0.01, ..Default::default() })),
            &f,
            1.0,
            &SolveConfig::new(1.0 / 16.0),
            &Mode::Full,
        )
        .unwrap();
        let sol2 = nonlinear_periodic(&prob, &opts, Some(&other)).unwrap();
        assert!(sol2.initial.sub(&sol.initial).max_abs() < 10.0 * opts.outer_tol);

        let zero = PeriodicProblem::new(g, ForcingSpec::zero(1.0), SolveConfig::new(1.0 / 16.0), Mode::Full).unwrap();
        let z = nonlinear_periodic(&zero, &opts, None).unwrap();
        assert_eq!(z.history.len(), 1);
        assert_eq!(z.initial.max_abs(), 0.0);
    }

    #[test]
    fn large_forcing_violates_smallness() {
        let g = grid();
        let f = seeded_forcing(g, 1.0, 3, 400.0);
        let prob = PeriodicProblem::new(g, f, SolveConfig::new(1.0 / 16.0), Mode::Full).unwrap();
        let opts = OuterOptions {
            sampler: BallSampler {
                centers: 8,
                radii: 4,
                seed: 0,
            },
            norm_every: 4,
            ..Default::default()
        };
        match nonlinear_periodic(&prob, &opts, None) {
            Err(Error::SmallnessViolated { ratio, .. }) => assert!(ratio >= 1.0),
            other => panic!("expected a smallness failure, got {:?}", other.map(|s| s.history)),
        }
    }
}
