//! Polynomial-stability experiments and the constants of the weighted
//! bilinear estimate.

use serde::{Deserialize, Serialize};

use crate::calculus::log_spaced;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::norms::{morrey_lorentz_norm, triple_norm_g, BallSampler, NormParams, TripleNormParams};
use crate::periodic::{PeriodicProblem, PeriodicSolution};
use crate::solver::{bilinear_series, evolve_from, h_norm, ForcingSpec, PeriodicPath, SolveConfig, StateSource, Trajectory};
use crate::field::State;

/// Exponents `(p, q, r, b)` of the stability estimate on an `n`-dimensional box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub b: f64,
    pub dim: usize,
}

impl StabilityParams {
    pub fn new(p: f64, q: f64, r: f64, b: f64, dim: usize) -> Result<Self> {
        let s = StabilityParams { p, q, r, b, dim };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let StabilityParams { p, q, r, b, dim } = *self;
        if !(2.0 < p && p < q && q <= r && r.is_finite()) {
            return Err(Error::Hypothesis(format!("need 2 < p < q <= r < ∞, got ({p}, {q}, {r})")));
        }
        if p > dim as f64 {
            return Err(Error::Hypothesis(format!("need p <= n = {dim}, got p = {p}")));
        }
        if r <= q / (q - 1.0) {
            return Err(Error::Hypothesis(format!("need r > q/(q−1) = {}, got r = {r}", q / (q - 1.0))));
        }
        let s = 1.0 / b + 1.0 / r;
        let hi = (2.0 / p + 1.0 / q).min(1.0);
        if !(b > 0.0 && 1.0 / p < s && s < hi) {
            return Err(Error::Hypothesis(format!(
                "need 1/p < 1/b + 1/r < min(2/p + 1/q, 1), got 1/b + 1/r = {s}"
            )));
        }
        Ok(())
    }

    /// `α = 1 − p/q`.
    pub fn alpha(&self) -> f64 {
        1.0 - self.p / self.q
    }

    /// `γ = 1 − p/r`.
    pub fn gamma(&self) -> f64 {
        1.0 - self.p / self.r
    }

    /// `β = 1 − p/(2b)`.
    pub fn beta(&self) -> f64 {
        1.0 - self.p / (2.0 * self.b)
    }

    /// `λ = n − p`.
    pub fn lambda(&self) -> f64 {
        self.dim as f64 - self.p
    }

    pub fn velocity_norm(&self) -> Result<NormParams> {
        NormParams::weak(self.q, self.lambda())
    }

    pub fn temperature_norm(&self) -> Result<NormParams> {
        NormParams::weak(self.r, self.lambda())
    }

    fn gaps(&self, x: &State, sampler: &BallSampler) -> Result<(f64, f64)> {
        let u = morrey_lorentz_norm(&x.u, self.velocity_norm()?, sampler)?.value;
        let th = morrey_lorentz_norm(&x.theta, self.temperature_norm()?, sampler)?.value;
        Ok((u, th))
    }

    fn weights(&self, t: f64) -> (f64, f64) {
        (t.powf(self.alpha() / 2.0), t.powf(self.gamma() / 2.0))
    }

    fn weighted(&self, t: f64, x: &State, sampler: &BallSampler) -> Result<(f64, f64)> {
        if t == 0.0 {
            return Ok((0.0, 0.0));
        }
        let (u, th) = self.gaps(x, sampler)?;
        let (wu, wt) = self.weights(t);
        Ok((wu * u, wt * th))
    }
}

/// One row of a separation table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DRow {
    pub t: f64,
    /// `‖u − v‖_{q,∞,λ}`
    pub velocity_raw: f64,
    /// `‖θ − ξ‖_{r,∞,λ}`
    pub temperature_raw: f64,
    /// `t^{α/2}‖u − v‖_{q,∞,λ}`
    pub velocity_gap: f64,
    /// `t^{γ/2}‖θ − ξ‖_{r,∞,λ}`
    pub temperature_gap: f64,
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DTable {
    pub rows: Vec<DRow>,
    pub sup_d: f64,
    pub argmax_t: f64,
    /// Max-norm size of the initial perturbation.
    pub initial_gap: f64,
    /// `|||g − g'|||_{β,b}` over the table times.
    pub forcing_gap: f64,
}

/// `D(t)` between two sources at the given times; symmetric in its arguments.
pub fn separation_table(
    a: &dyn StateSource,
    b: &dyn StateSource,
    params: &StabilityParams,
    t_grid: &[f64],
    sampler: &BallSampler,
) -> Result<Vec<DRow>> {
    params.validate()?;
    t_grid
        .iter()
        .map(|&t| {
            let gap = a.state_at(t)?.sub(&b.state_at(t)?);
            let (velocity_raw, temperature_raw) = params.gaps(&gap, sampler)?;
            let (wu, wt) = params.weights(t);
            let (velocity_gap, temperature_gap) = (wu * velocity_raw, wt * temperature_raw);
            Ok(DRow {
                t,
                velocity_raw,
                temperature_raw,
                velocity_gap,
                temperature_gap,
                d: velocity_gap + temperature_gap,
            })
        })
        .collect()
}

/// `n` log-spaced times over `[dt, 10T]`.
pub fn default_t_grid(dt: f64, period: f64, n: usize) -> Vec<f64> {
    log_spaced(dt, 10.0 * period, n)
}

/// Stored states at chosen times, produced by marching between them.
struct Samples {
    grid: crate::grid::GridSpec,
    times: Vec<f64>,
    states: Vec<State>,
}

impl StateSource for Samples {
    fn grid(&self) -> crate::grid::GridSpec {
        self.grid
    }
    fn state_at(&self, t: f64) -> Result<State> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|i| self.states[i].clone())
            .ok_or(Error::CoverageGap(t))
    }
}

/// Evolves the perturbed problem from `perturbed_initial` under
/// `perturbed_forcing` and tabulates `D(t)` against the periodic solution.
///
/// Times are snapped to the step of the periodic trajectory, so the base
/// states are stored ones and both runs share every step.
#[allow(clippy::too_many_arguments)]
pub fn perturb_and_compare(
    base: &PeriodicSolution,
    prob: &PeriodicProblem,
    perturbed_initial: &State,
    perturbed_forcing: &ForcingSpec,
    params: &StabilityParams,
    t_grid: &[f64],
    sampler: &BallSampler,
) -> Result<DTable> {
    params.validate()?;
    let period = prob.period();
    let h = base.trajectory.dt;
    let mut snapped: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("table times must be positive, got {t}")));
            }
            Ok((t / h).round().max(1.0) * h)
        })
        .collect::<Result<_>>()?;
    snapped.dedup_by(|a, b| (*a - *b).abs() < 0.5 * h);

    let cfg = SolveConfig {
        dt: h,
        store_every: usize::MAX,
        ..prob.cfg
    };
    let mut x = perturbed_initial.clone();
    let mut t = 0.0;
    let mut states = Vec::with_capacity(snapped.len());
    for &s in &snapped {
        if s > t {
            x = evolve_from(&x, t, perturbed_forcing, s - t, &cfg, &prob.mode)?.last().clone();
            t = s;
        }
        states.push(x.clone());
    }
    let perturbed = Samples {
        grid: prob.grid,
        times: snapped.clone(),
        states,
    };
    let base_path = PeriodicPath {
        trajectory: base.trajectory.clone(),
        period,
    };
    let rows = separation_table(&base_path, &perturbed, params, &snapped, sampler)?;
    let (sup_d, argmax_t) = rows
        .iter()
        .fold((0.0, snapped[0]), |m, r| if r.d > m.0 { (r.d, r.t) } else { m });

    let gap_g = |s: f64| -> Result<VectorField> {
        let a = prob.forcing.gravity_at(prob.grid, s)?;
        let b = perturbed_forcing.gravity_at(prob.grid, s)?;
        Ok(a.sub(&b))
    };
    let forcing_gap = triple_norm_g(
        &gap_g,
        TripleNormParams::new(params.p, params.b)?,
        params.lambda(),
        &snapped,
        sampler,
    )?
    .value;
    Ok(DTable {
        rows,
        sup_d,
        argmax_t,
        initial_gap: base.initial.sub(perturbed_initial).max_abs(),
        forcing_gap,
    })
}

/// Least-squares decay exponent with a 95% half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub half_width: f64,
    pub points: usize,
    pub window: (f64, f64),
}

/// Slope of `ln gap` against `ln t` over the points with `t` in `window`.
pub fn fit_decay_exponent(t: &[f64], gap: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(gap)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, g)| (*t, *g))
        .collect();
    if pts.len() < 8 {
        return Err(Error::DegenerateFit(format!("{} points in window, need 8", pts.len())));
    }
    if let Some((t, g)) = pts.iter().find(|(t, g)| !(*g > 0.0 && g.is_finite()) || *t <= 0.0) {
        return Err(Error::DegenerateFit(format!("non-positive gap {g} at t = {t}")));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("window holds a single time".into()));
    }
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(DecayFit {
        slope,
        half_width: 1.96 * stderr,
        points: pts.len(),
        window,
    })
}

/// `(C₁, C₂)` of the weighted bilinear estimate.
pub fn constants_c1_c2(p: f64, q: f64, r: f64) -> Result<(f64, f64)> {
    let s = p / (2.0 * q);
    if s >= 0.5 {
        return Err(Error::Hypothesis(format!("p/(2q) = {s} must stay below 1/2")));
    }
    if !(1.0 < p && p < q && q <= r && r.is_finite()) {
        return Err(Error::Hypothesis(format!("need 1 < p < q <= r < ∞, got ({p}, {q}, {r})")));
    }
    let sr = p / (2.0 * r);
    let two = |e: f64| 2f64.powf(e);
    let c1 = q * two(0.5 - s) / p + two(0.5 - s) / (0.5 - s);
    let c2 = two(0.5 - s) / (s + sr) + two(0.5 - sr) / (0.5 - s);
    Ok((c1, c2))
}

/// `‖x‖_{H_{q,r,∞}} = ‖x‖_{H_{p,∞}} + sup_t (t^{α/2}‖u‖_{q,∞,λ} + t^{γ/2}‖θ‖_{r,∞,λ})`.
pub fn weighted_h_norm(traj: &Trajectory, params: &StabilityParams, sampler: &BallSampler, every: usize) -> Result<f64> {
    let mut sup = 0.0f64;
    for (i, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        if i % every.max(1) == 0 || i + 1 == traj.states.len() {
            let (a, b) = params.weighted(*t, x, sampler)?;
            sup = sup.max(a + b);
        }
    }
    Ok(h_norm(traj, params.p, sampler, every)? + sup)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedBilinearReport {
    pub k_w: f64,
    pub ratios: Vec<Option<f64>>,
    pub used: usize,
    /// `C₁ + C₂`, printed for context only.
    pub c_sum: f64,
}

/// `sup ‖B(a, b)‖_{H_{q,r,∞}} / (‖a‖ ‖b‖)` over trajectory pairs sharing a time grid.
pub fn verify_weighted_bilinear(
    pairs: &[(Trajectory, Trajectory)],
    params: &StabilityParams,
    sampler: &BallSampler,
    every: usize,
) -> Result<WeightedBilinearReport> {
    params.validate()?;
    let (c1, c2) = constants_c1_c2(params.p, params.q, params.r)?;
    let mut ratios = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let na = weighted_h_norm(a, params, sampler, every)?;
        let nb = weighted_h_norm(b, params, sampler, every)?;
        if na == 0.0 || nb == 0.0 {
            ratios.push(None);
            continue;
        }
        let s = bilinear_series(a, b)?;
        ratios.push(Some(weighted_h_norm(&s, params, sampler, every)? / (na * nb)));
    }
    let used: Vec<f64> = ratios.iter().flatten().copied().collect();
    Ok(WeightedBilinearReport {
        k_w: used.iter().copied().fold(0.0, f64::max),
        used: used.len(),
        ratios,
        c_sum: c1 + c2,
    })
}

/// Empirical inputs of the smallness conditions; `None` marks a missing one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SmallnessInputs {
    /// Empirical bilinear constant `K`.
    pub k: Option<f64>,
    /// Size `ρ` of the periodic iterate in `H_{p,∞}`.
    pub rho: Option<f64>,
    /// Size of the perturbation in `H_{q,r,∞}`.
    pub perturbation: Option<f64>,
    /// `|||g|||`.
    pub g_norm: Option<f64>,
    /// `|||g − g'|||`.
    pub g_gap: Option<f64>,
    pub kappa: Option<f64>,
    /// Empirical semigroup constant `C`.
    pub c_semigroup: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallnessTerm {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallnessExpression {
    pub name: &'static str,
    pub terms: Vec<SmallnessTerm>,
    pub value: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallnessReport {
    /// `M = ∫₀¹ (1−s)^{−p/(2b)} s^{−1+p/(2b)} ds = π / sin(π p/(2b))`.
    pub m_beta: f64,
    pub c1: f64,
    pub c2: f64,
    pub expressions: Vec<SmallnessExpression>,
}

/// Numeric analogues of the two contraction conditions:
///
/// * existence: `2ρK + κ M C₂ (C + 1) |||g|||`
/// * stability: `2K‖δ‖ + Kρ + κ M C₂ (C + 1)(|||g||| + |||g − g'|||)`
pub fn smallness_report(inputs: &SmallnessInputs, params: &StabilityParams) -> Result<SmallnessReport> {
    params.validate()?;
    let fields = [
        ("k", inputs.k),
        ("rho", inputs.rho),
        ("perturbation", inputs.perturbation),
        ("g_norm", inputs.g_norm),
        ("g_gap", inputs.g_gap),
        ("kappa", inputs.kappa),
        ("c_semigroup", inputs.c_semigroup),
    ];
    let missing: Vec<String> = fields.iter().filter(|f| f.1.is_none()).map(|f| f.0.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingInputs(missing));
    }
    let v = |x: Option<f64>| x.expect("checked above");
    let (k, rho, delta, g, dg, kappa, c) = (
        v(inputs.k),
        v(inputs.rho),
        v(inputs.perturbation),
        v(inputs.g_norm),
        v(inputs.g_gap),
        v(inputs.kappa),
        v(inputs.c_semigroup),
    );
    let (c1, c2) = constants_c1_c2(params.p, params.q, params.r)?;
    let s = params.p / (2.0 * params.b);
    let m_beta = std::f64::consts::PI / (std::f64::consts::PI * s).sin();
    let coupling = kappa * m_beta * c2 * (c + 1.0);
    let expr = |name: &'static str, terms: Vec<SmallnessTerm>| {
        let value = terms.iter().map(|t| t.value).sum();
        SmallnessExpression {
            name,
            terms,
            value,
            holds: value < 1.0,
        }
    };
    let expressions = vec![
        expr(
            "existence",
            vec![
                SmallnessTerm {
                    name: "2*rho*K",
                    value: 2.0 * rho * k,
                },
                SmallnessTerm {
                    name: "kappa*M*C2*(C+1)*|||g|||",
                    value: coupling * g,
                },
            ],
        ),
        expr(
            "stability",
            vec![
                SmallnessTerm {
                    name: "2*K*|delta|",
                    value: 2.0 * k * delta,
                },
                SmallnessTerm {
                    name: "K*rho",
                    value: k * rho,
                },
                SmallnessTerm {
                    name: "kappa*M*C2*(C+1)*|||g|||",
                    value: coupling * g,
                },
                SmallnessTerm {
                    name: "kappa*M*C2*(C+1)*|||g-g'|||",
                    value: coupling * dg,
                },
            ],
        ),
    ];
    Ok(SmallnessReport {
        m_beta,
        c1,
        c2,
        expressions,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::grid::GridSpec;
    use crate::periodic::cesaro_periodic_datum;
    use crate::solver::{FnSource, Frozen, Mode};

    fn params() -> StabilityParams {
        StabilityParams::new(3.0, 6.0, 6.0, 3.0, 3).unwrap()
    }

    fn small_sampler() -> BallSampler {
        BallSampler {
            centers: 8,
            radii: 4,
            seed: 0,
        }
    }

    #[test]
    fn closed_form_constants() {
        let (c1, c2) = constants_c1_c2(3.0, 6.0, 6.0).unwrap();
        assert!((c1 - 7.135242).abs() < 1e-6 && (c2 - 7.135242).abs() < 1e-6);
        assert!(constants_c1_c2(3.0, 12.0, 12.0).unwrap().0 > c1);
        assert!(matches!(constants_c1_c2(3.0, 3.0, 6.0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn hypotheses_are_enforced() {
        assert!(StabilityParams::new(2.0, 6.0, 6.0, 3.0, 3).is_err());
        assert!(StabilityParams::new(3.0, 6.0, 4.0, 3.0, 3).is_err());
        assert!(StabilityParams::new(3.0, 6.0, 6.0, 1.0, 3).is_err());
        let p = params();
        assert!((p.alpha() - 0.5).abs() < 1e-15 && (p.gamma() - 0.5).abs() < 1e-15);
        assert_eq!(p.lambda(), 0.0);
    }

    #[test]
    fn decay_fits_recover_synthetic_slopes() {
        let t = log_spaced(1.0, 10.0, 20);
        let g: Vec<f64> = t.iter().map(|t| t.powf(-0.5)).collect();
        let fit = fit_decay_exponent(&t, &g, (1.0, 10.0)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
        let e: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        assert!(fit_decay_exponent(&t, &e, (1.0, 10.0)).unwrap().slope < -0.5);
        let z = vec![0.0; t.len()];
        assert!(matches!(fit_decay_exponent(&t, &z, (1.0, 10.0)), Err(Error::DegenerateFit(_))));
        assert!(fit_decay_exponent(&t[..5], &g[..5], (1.0, 10.0)).is_err());
    }

    #[test]
    fn single_mode_gap_decays_like_the_heat_mode() {
        let g = GridSpec::new(3, 8, 2.0 * PI).unwrap();
        let zero = Mode::Linearized(Frozen {
            path: Arc::new(FnSource {
                grid: g,
                f: move |_| Ok(State::zeros(g)),
            }),
            transport: false,
        });
        let prob = PeriodicProblem::new(g, ForcingSpec::zero(1.0), SolveConfig::new(1.0 / 16.0), zero).unwrap();
        let base = cesaro_periodic_datum(&prob, 5, 1e-12, None).unwrap();
        let delta = 1e-4;
        let shape = VectorField::from_fn(g, |x| [0.0, x[0].sin(), 0.0]);
        let x0 = State::from_velocity(shape.scaled(delta));
        let sampler = small_sampler();
        let p = params();
        let t_grid = default_t_grid(1.0 / 16.0, 1.0, 12);
        let table = perturb_and_compare(&base, &prob, &x0, &prob.forcing, &p, &t_grid, &sampler).unwrap();
        let factor = morrey_lorentz_norm(&shape, p.velocity_norm().unwrap(), &sampler).unwrap().value;
        for row in &table.rows {
            let expect = row.t.powf(p.alpha() / 2.0) * delta * (-row.t).exp() * factor;
            assert!((row.d - expect).abs() <= 1e-6 * expect, "{row:?} vs {expect}");
        }
        assert_eq!(table.forcing_gap, 0.0);
        assert!((table.initial_gap - delta).abs() < 1e-15);

        let same = perturb_and_compare(&base, &prob, &base.initial, &prob.forcing, &p, &t_grid, &sampler).unwrap();
        assert!(same.rows.iter().all(|r| r.d == 0.0));
    }

    #[test]
    fn separation_is_symmetric() {
        let g = GridSpec::new(3, 8, 2.0 * PI).unwrap();
        let a = FnSource {
            grid: g,
            f: move |t: f64| Ok(State::from_velocity(VectorField::from_fn(g, |x| [0.0, (x[0] + t).sin(), 0.0]))),
        };
        let b = FnSource {
            grid: g,
            f: move |t: f64| {
                Ok(State::new(VectorField::zeros(g), crate::field::ScalarField::from_fn(g, |x| t * x[2].cos())).unwrap())
            },
        };
        let ts = [0.5, 1.0, 2.0];
        let ab = separation_table(&a, &b, &params(), &ts, &small_sampler()).unwrap();
        let ba = separation_table(&b, &a, &params(), &ts, &small_sampler()).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn smallness_report_behaves() {
        let p = params();
        assert!(matches!(
            smallness_report(&SmallnessInputs::default(), &p),
            Err(Error::MissingInputs(v)) if v.len() == 7
        ));
        let base = SmallnessInputs {
            k: Some(0.8),
            rho: Some(0.0),
            perturbation: Some(0.0),
            g_norm: Some(0.0),
            g_gap: Some(0.0),
            kappa: Some(1.0),
            c_semigroup: Some(1.5),
        };
        let r = smallness_report(&base, &p).unwrap();
        assert!((r.m_beta - PI).abs() < 1e-12);
        assert!(r.expressions.iter().all(|e| e.value == 0.0 && e.holds));
        let g1 = smallness_report(&SmallnessInputs { g_norm: Some(0.01), ..base }, &p).unwrap();
        let g2 = smallness_report(&SmallnessInputs { g_norm: Some(0.02), ..base }, &p).unwrap();
        let term = |r: &SmallnessReport| r.expressions[0].terms[1].value;
        assert!((term(&g2) - 2.0 * term(&g1)).abs() < 1e-10 * term(&g2));
        let bad = smallness_report(&SmallnessInputs { rho: Some(3.0), ..base }, &p).unwrap();
        assert!(!bad.expressions[0].holds);
    }
}
