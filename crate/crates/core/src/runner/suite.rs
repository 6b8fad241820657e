//! Batch of empirical estimate constants over a seeded ensemble.

use serde::Serialize;

use crate::calculus::{log_spaced, verify_dispersive, Derivative};
use crate::error::Result;
use crate::field::{ScalarField, State, TensorField, VectorField};
use crate::grid::GridSpec;
use crate::norms::{holder_ensemble, verify_embeddings, BallSampler, NormParams};
use crate::periodic::linear_mode;
use crate::presets::{random_scalar, random_vector, RandomSpec};
use crate::solver::{evolve, verify_bilinear_estimate, verify_l_operator, ForcingSpec, SolveConfig, Trajectory};
use crate::stability::{verify_weighted_bilinear, StabilityParams};

use super::config::EstimateConfig;

/// One empirical constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub estimate: &'static str,
    pub points: usize,
    pub constant: f64,
    pub samples: usize,
}

pub const ESTIMATES: [&str; 8] = [
    "dispersive",
    "dispersive-gradient",
    "holder",
    "embedding-morrey-weak",
    "embedding-weak-strong",
    "l-operator",
    "bilinear",
    "weighted-bilinear",
];

fn spec(est: &EstimateConfig, seed: u64) -> RandomSpec {
    RandomSpec {
        amplitude: est.amplitude,
        slope: 2.0,
        seed,
        kmax: est.kmax,
    }
}

/// Heat flows of random data over `[0, 1]`, one stored state per `1/16`.
fn heat_pairs(grid: GridSpec, est: &EstimateConfig, seed: u64) -> Result<Vec<(Trajectory, Trajectory)>> {
    let zero = ForcingSpec::zero(1.0);
    let cfg = SolveConfig::new(1.0 / 16.0);
    let mode = linear_mode(grid);
    let flow = |s: u64| -> Result<Trajectory> {
        let x = State::new(random_vector(grid, &spec(est, s)), random_scalar(grid, &spec(est, s + 1)))?;
        evolve(&x, &zero, 1.0, &cfg, &mode)
    };
    (0..est.ensemble as u64)
        .map(|i| Ok((flow(seed + 4 * i)?, flow(seed + 4 * i + 2)?)))
        .collect()
}

fn max(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

/// Runs every estimate on `grid`. Random fields are band-limited, so the
/// same seeds give the same continuum ensemble on every grid.
pub fn estimate_suite(
    grid: GridSpec,
    p: f64,
    stab: &StabilityParams,
    est: &EstimateConfig,
    seed: u64,
    sampler: &BallSampler,
) -> Result<Vec<EstimateRow>> {
    let n = grid.dim;
    let e = est.ensemble;
    let lambda = n as f64 - p;
    let critical = NormParams::critical(p, n)?;
    let scalars: Vec<ScalarField> = (0..2 * e as u64)
        .map(|i| random_scalar(grid, &spec(est, seed + 1000 + i)))
        .collect();
    let row = |estimate, constant, samples| EstimateRow {
        estimate,
        points: grid.points,
        constant,
        samples,
    };
    let mut rows = Vec::new();

    let t_grid = log_spaced(0.05, 1.0, 8);
    let half = NormParams::weak(2.0 * p, lambda)?;
    for (name, to, m) in [
        ("dispersive", half, Derivative::None),
        ("dispersive-gradient", critical, Derivative::Gradient),
    ] {
        let c = scalars[..e]
            .iter()
            .map(|f| Ok(verify_dispersive(f, critical, to, m, &t_grid, sampler, None)?.max_ratio))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row(name, max(c), e));
    }

    let pairs: Vec<(ScalarField, ScalarField)> =
        scalars[..e].iter().cloned().zip(scalars[e..].iter().cloned()).collect();
    let holder = holder_ensemble(&pairs, (half, half), critical, sampler)?;
    rows.push(row("holder", holder.max_ratio, e));

    if n >= 3 {
        let emb = verify_embeddings(&scalars[..e], p, sampler)?;
        rows.push(row("embedding-morrey-weak", max(emb.iter().map(|r| r.morrey_over_weak)), e));
        rows.push(row("embedding-weak-strong", max(emb.iter().map(|r| r.weak_over_strong)), e));
    }

    // τ_r − τ_l = 1 with λ = 0: l = 2n, r = 2n/3.
    let nf = n as f64;
    let (from, to) = (NormParams::weak(2.0 * nf / 3.0, 0.0)?, NormParams::weak(2.0 * nf, 0.0)?);
    let mut l_ratios = Vec::with_capacity(e);
    for i in 0..e as u64 {
        let a = random_vector(grid, &spec(est, seed + 2000 + i));
        let th = random_scalar(grid, &spec(est, seed + 3000 + i));
        let tensor = TensorField::outer(&a, &a)?;
        let flux = VectorField::from_components(a.components.iter().map(|c| {
            let mut c = c.clone();
            c.values.iter_mut().zip(&th.values).for_each(|(v, t)| *v *= t);
            c
        }).collect())?;
        let f = |s: f64| Ok((tensor.scaled((-s).exp()), flux.scaled((-s).exp())));
        l_ratios.push(verify_l_operator(grid, &f, from, to, 128, 16, sampler)?.ratio);
    }
    rows.push(row("l-operator", max(l_ratios), e));

    let pairs = heat_pairs(grid, est, seed + 5000)?;
    let bil = verify_bilinear_estimate(&pairs, p, sampler, 4)?;
    rows.push(row("bilinear", bil.k_emp, bil.used));
    let w = verify_weighted_bilinear(&pairs, stab, sampler, 4)?;
    rows.push(row("weighted-bilinear", w.k_w, w.used));
    Ok(rows)
}

/// `|fine − coarse| / coarse` per estimate, matched by name.
pub fn relative_changes(coarse: &[EstimateRow], fine: &[EstimateRow]) -> Vec<(&'static str, f64)> {
    coarse
        .iter()
        .filter_map(|c| {
            let f = fine.iter().find(|f| f.estimate == c.estimate)?;
            Some((c.estimate, (f.constant - c.constant).abs() / c.constant.abs()))
        })
        .collect()
}
