//! Morrey–Lorentz norms as a supremum over sampled balls.
//!
//! The field is sorted once; each centre then streams the sorted cells and
//! feeds every radius whose (open, torus-metric) ball contains the cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lorentz::LorentzAcc;
use super::{Measurable, NormParams};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::GridSpec;

/// How many balls are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSampler {
    pub centers: usize,
    pub radii: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BallSampler {
    fn default() -> Self {
        BallSampler {
            centers: 64,
            radii: 12,
            seed: 0,
        }
    }
}

/// Concrete balls: grid-cell centres and a radius ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct BallSet {
    pub grid: GridSpec,
    pub centers: Vec<[usize; 3]>,
    pub radii: Vec<f64>,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

impl BallSampler {
    /// Doubles the centres and inserts a radius between every ladder pair.
    /// The refined set contains the original one.
    pub fn refined(&self) -> BallSampler {
        BallSampler {
            centers: 2 * self.centers,
            radii: (2 * self.radii).saturating_sub(1).max(1),
            seed: self.seed,
        }
    }

    pub fn validate(&self, grid: GridSpec) -> Result<()> {
        if self.centers == 0 || self.radii == 0 {
            return Err(Error::Sampler("need at least one centre and one radius".into()));
        }
        if grid.points < 8 {
            return Err(Error::Sampler("grid too coarse for a ball ladder".into()));
        }
        Ok(())
    }

    /// Geometric ladder from two cells to half the box.
    pub fn radius_ladder(&self, grid: GridSpec) -> Vec<f64> {
        let lo = 2.0 * grid.spacing();
        let hi = 0.5 * grid.length;
        if self.radii == 1 {
            return vec![hi];
        }
        let last = (self.radii - 1) as f64;
        (0..self.radii)
            .map(|i| {
                if i + 1 == self.radii {
                    hi
                } else {
                    lo * (hi / lo).powf(i as f64 / last)
                }
            })
            .collect()
    }

    /// Box centre, then the peak of `|f|` if given, then a shifted Halton
    /// sequence snapped to the grid. Prefixes are stable as `centers` grows.
    pub fn realize(&self, grid: GridSpec, peak_of: Option<&ScalarField>) -> Result<BallSet> {
        self.validate(grid)?;
        let n = grid.points;
        let mut mid = [0usize; 3];
        for c in mid.iter_mut().take(grid.dim) {
            *c = n / 2;
        }
        let mut centers = vec![mid];
        if let Some(f) = peak_of {
            let (idx, _) = f
                .values
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
            centers.push(grid.coords(idx));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(3);
        let shift: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let bases = [2u64, 3, 5];
        let mut i = 1u64;
        while centers.len() < self.centers {
            let mut c = [0usize; 3];
            for axis in 0..grid.dim {
                let u = (radical_inverse(i, bases[axis]) + shift[axis]).fract();
                c[axis] = ((u * n as f64) as usize).min(n - 1);
            }
            centers.push(c);
            i += 1;
        }
        centers.truncate(self.centers);
        Ok(BallSet {
            grid,
            centers,
            radii: self.radius_ladder(grid),
        })
    }
}

/// Result of a sampled Morrey–Lorentz norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorreyEstimate {
    pub value: f64,
    pub center: [f64; 3],
    pub radius: f64,
    pub sampler: BallSampler,
    pub balls: usize,
}

/// One ball of a norm table; `local_norm` carries the `ρ^{-λ/p}` weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallRow {
    pub center: [f64; 3],
    pub radius: f64,
    pub local_norm: f64,
}

/// Weighted local norms `ρ^{-λ/p}‖f‖_{L^{p,q}(D(x₀,ρ))}`, one row per centre.
fn weighted_local_norms(mag: &ScalarField, params: NormParams, balls: &BallSet) -> Result<Vec<Vec<f64>>> {
    params.validate(mag.grid.dim)?;
    mag.check_finite()?;
    mag.grid.ensure_same(&balls.grid)?;
    let grid = mag.grid;
    let n = grid.points;
    let h = grid.spacing();
    let cell = grid.cell_measure();

    let mut order: Vec<usize> = (0..grid.len()).filter(|&i| mag.values[i] > 0.0).collect();
    order.sort_unstable_by(|&a, &b| mag.values[b].total_cmp(&mag.values[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| mag.values[i]).collect();
    let coords: Vec<[u32; 3]> = order
        .iter()
        .map(|&i| {
            let c = grid.coords(i);
            [c[0] as u32, c[1] as u32, c[2] as u32]
        })
        .collect();

    let r_count = balls.radii.len();
    let half = n / 2;
    let max_d2 = grid.dim * half * half;
    let rr: Vec<f64> = balls.radii.iter().map(|r| (r / h) * (r / h)).collect();
    let first_radius: Vec<usize> = (0..=max_d2)
        .map(|d2| rr.iter().position(|&b| (d2 as f64) < b).unwrap_or(r_count))
        .collect();

    let weak_tab: Option<Vec<f64>> = params.q.is_infinite().then(|| {
        let e = 1.0 / params.p - 1.0;
        (0..=sorted.len()).map(|c| (c as f64 * cell).powf(e)).collect()
    });
    let weights: Vec<f64> = balls
        .radii
        .iter()
        .map(|r| if params.p.is_infinite() { 1.0 } else { r.powf(-params.lambda / params.p) })
        .collect();
    let mask = (n - 1) as u32;
    let nn = n as u32;

    let rows = balls
        .centers
        .par_iter()
        .map(|c| {
            let mut accs = vec![LorentzAcc::new(params.p, params.q, cell); r_count];
            for (j, x) in coords.iter().enumerate() {
                let mut d2 = 0usize;
                for axis in 0..grid.dim {
                    let d = x[axis].wrapping_sub(c[axis] as u32) & mask;
                    let d = d.min(nn - d) as usize;
                    d2 += d * d;
                }
                let r0 = first_radius[d2];
                let a = sorted[j];
                for acc in &mut accs[r0..] {
                    let w = weak_tab.as_ref().map(|t| t[acc.count() + 1]);
                    acc.push_with(a, w);
                }
            }
            accs.iter().zip(&weights).map(|(acc, w)| acc.finish() * w).collect()
        })
        .collect();
    Ok(rows)
}

fn center_position(grid: GridSpec, c: [usize; 3]) -> [f64; 3] {
    grid.position(grid.index(c))
}

/// Sup of the weighted local norms over an explicit ball set.
pub fn morrey_on_balls(
    f: &impl Measurable,
    params: NormParams,
    balls: &BallSet,
    sampler: BallSampler,
) -> Result<MorreyEstimate> {
    let mag = f.pointwise_magnitude();
    let rows = weighted_local_norms(&mag, params, balls)?;
    let mut best = (0.0, 0, 0);
    for (ci, row) in rows.iter().enumerate() {
        for (ri, &v) in row.iter().enumerate() {
            if v > best.0 {
                best = (v, ci, ri);
            }
        }
    }
    Ok(MorreyEstimate {
        value: best.0,
        center: center_position(balls.grid, balls.centers[best.1]),
        radius: balls.radii[best.2],
        sampler,
        balls: balls.centers.len() * balls.radii.len(),
    })
}

/// `‖f‖_{M_{p,q,λ}}` lower-bounded by the sampled balls.
pub fn morrey_lorentz_norm(
    f: &impl Measurable,
    params: NormParams,
    sampler: &BallSampler,
) -> Result<MorreyEstimate> {
    let mag = f.pointwise_magnitude();
    let balls = sampler.realize(mag.grid, Some(&mag))?;
    morrey_on_balls(&mag, params, &balls, *sampler)
}

/// Every sampled ball with its weighted local norm.
pub fn morrey_table(
    f: &impl Measurable,
    params: NormParams,
    sampler: &BallSampler,
) -> Result<(MorreyEstimate, Vec<BallRow>)> {
    let mag = f.pointwise_magnitude();
    let balls = sampler.realize(mag.grid, Some(&mag))?;
    let rows = weighted_local_norms(&mag, params, &balls)?;
    let mut table = Vec::with_capacity(balls.centers.len() * balls.radii.len());
    for (c, row) in balls.centers.iter().zip(&rows) {
        for (&radius, &local_norm) in balls.radii.iter().zip(row) {
            table.push(BallRow {
                center: center_position(mag.grid, *c),
                radius,
                local_norm,
            });
        }
    }
    let est = morrey_on_balls(&mag, params, &balls, *sampler)?;
    Ok((est, table))
}
