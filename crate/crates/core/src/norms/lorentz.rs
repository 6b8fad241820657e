//! Lorentz norms of grid functions through their decreasing rearrangement.
//!
//! A grid function is a step function on equal cells, so its rearrangement
//! `f*` is a step function with steps at `t_c = c · cell`. The functional
//! built from `f** (t) = (1/t)∫₀ᵗ f*` is evaluated exactly on each step.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::GridSpec;

/// Where a Lorentz norm is taken.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    WholeBox,
    /// Open ball in the torus metric.
    Ball { center: [f64; 3], radius: f64 },
}

pub(crate) fn validate_exponents(p: f64, q: f64) -> Result<()> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::InvalidParameter(format!("Lorentz exponent p must exceed 1, got {p}")));
    }
    if q.is_nan() || q < 1.0 {
        return Err(Error::InvalidParameter(format!("Lorentz exponent q must be >= 1, got {q}")));
    }
    if p.is_infinite() && q.is_finite() {
        return Err(Error::InvalidParameter("q must be infinite when p is infinite".into()));
    }
    Ok(())
}

// 10-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Streaming accumulator fed with `|f|` values in non-increasing order.
#[derive(Clone, Debug)]
pub(crate) struct LorentzAcc {
    inv_p: f64,
    q: f64,
    cell: f64,
    count: usize,
    /// `∫₀^{t} f*` up to the current step endpoint.
    sum: f64,
    best: f64,
    integral: f64,
}

impl LorentzAcc {
    pub fn new(p: f64, q: f64, cell: f64) -> Self {
        LorentzAcc {
            inv_p: 1.0 / p,
            q,
            cell,
            count: 0,
            sum: 0.0,
            best: 0.0,
            integral: 0.0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds the next rearranged value; `weak_pow` is `t^{1/p-1}` at the new
    /// step endpoint when the caller has it tabulated.
    #[inline]
    pub fn push_with(&mut self, a: f64, weak_pow: Option<f64>) {
        let t0 = self.count as f64 * self.cell;
        self.count += 1;
        let t1 = self.count as f64 * self.cell;
        if self.q.is_infinite() {
            let w = weak_pow.unwrap_or_else(|| t1.powf(self.inv_p - 1.0));
            let cand = (self.sum + a * self.cell) * w;
            if cand > self.best {
                self.best = cand;
            }
        } else {
            self.integral += self.segment(a, t0, t1);
        }
        self.sum += a * self.cell;
    }

    #[inline]
    pub fn push(&mut self, a: f64) {
        self.push_with(a, None);
    }

    /// `∫_{t0}^{t1} (t^{1/p-1}(C + a t))^q dt/t` with `C = S - a t0`.
    fn segment(&self, a: f64, t0: f64, t1: f64) -> f64 {
        let q = self.q;
        let c = (self.sum - a * t0).max(0.0);
        if c <= 1e-12 * self.sum || t0 == 0.0 {
            // f** is constant on the step
            let e = q * self.inv_p;
            return a.powf(q) * (t1.powf(e) - t0.powf(e)) / e;
        }
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t1 + t0);
        let f = |t: f64| (t.powf(self.inv_p - 1.0) * (c + a * t)).powf(q) / t;
        let mut acc = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            acc += w * (f(mid - half * x) + f(mid + half * x));
        }
        acc * half
    }

    pub fn finish(&self) -> f64 {
        if self.count == 0 || self.sum == 0.0 {
            return 0.0;
        }
        if self.q.is_infinite() {
            return self.best;
        }
        let q = self.q;
        let t = self.count as f64 * self.cell;
        // beyond the support f** (t) = S / t
        let tail = self.sum.powf(q) * t.powf(q * self.inv_p - q) / (q * (1.0 - self.inv_p));
        (self.integral + tail).powf(1.0 / q)
    }
}

/// `|f|` values of the cells of `region`, sorted non-increasing.
fn rearranged(f: &ScalarField, region: Region) -> Result<Vec<f64>> {
    let g = f.grid;
    let mut vals: Vec<f64> = match region {
        Region::WholeBox => f.values.iter().map(|v| v.abs()).collect(),
        Region::Ball { center, radius } => (0..g.len())
            .filter(|&i| {
                let d = g.displacement(g.position(i), center);
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() < radius
            })
            .map(|i| f.values[i].abs())
            .collect(),
    };
    if vals.is_empty() {
        return Err(Error::EmptyRegion);
    }
    vals.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// `‖f‖_{L^{p,q}(region)}` built from `f**`.
pub fn lorentz_norm(f: &ScalarField, region: Region, p: f64, q: f64) -> Result<f64> {
    validate_exponents(p, q)?;
    f.check_finite()?;
    let vals = rearranged(f, region)?;
    Ok(lorentz_from_sorted(&vals, f.grid, p, q))
}

pub(crate) fn lorentz_from_sorted(sorted: &[f64], grid: GridSpec, p: f64, q: f64) -> f64 {
    let mut acc = LorentzAcc::new(p, q, grid.cell_measure());
    for &a in sorted.iter().take_while(|&&a| a > 0.0) {
        acc.push(a);
    }
    acc.finish()
}

/// The `f*`-based quasi-norm `(∫ (t^{1/p} f*(t))^q dt/t)^{1/q}`; equals the
/// Lebesgue `p`-norm when `q = p`.
pub fn lorentz_quasi_norm(f: &ScalarField, region: Region, p: f64, q: f64) -> Result<f64> {
    validate_exponents(p, q)?;
    f.check_finite()?;
    let vals = rearranged(f, region)?;
    let cell = f.grid.cell_measure();
    let inv_p = 1.0 / p;
    let mut best = 0.0f64;
    let mut integral = 0.0;
    for (c, &a) in vals.iter().enumerate().take_while(|(_, &a)| a > 0.0) {
        let t0 = c as f64 * cell;
        let t1 = (c + 1) as f64 * cell;
        if q.is_infinite() {
            best = best.max(a * t1.powf(inv_p));
        } else {
            let e = q * inv_p;
            integral += a.powf(q) * (t1.powf(e) - t0.powf(e)) / e;
        }
    }
    Ok(if q.is_infinite() {
        best
    } else {
        integral.powf(1.0 / q)
    })
}

/// Plain Lebesgue norm `(Σ |f|^p · cell)^{1/p}` over the box.
pub fn lebesgue_norm(f: &ScalarField, p: f64) -> f64 {
    if p.is_infinite() {
        return f.max_abs();
    }
    let s: f64 = f.values.iter().map(|v| v.abs().powf(p)).sum();
    (s * f.grid.cell_measure()).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{indicator_ball, random_scalar, RandomSpec};
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(3, 16, 1.0).unwrap()
    }

    fn set_indicator(g: GridSpec, count: usize) -> (ScalarField, f64) {
        let mut f = ScalarField::zeros(g);
        for i in 0..count {
            f.values[(i * 37) % g.len()] = 1.0;
        }
        let m = f.values.iter().filter(|&&v| v > 0.0).count() as f64 * g.cell_measure();
        (f, m)
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let f = ScalarField::zeros(grid());
        assert_eq!(lorentz_norm(&f, Region::WholeBox, 3.0, f64::INFINITY).unwrap(), 0.0);
        assert_eq!(lorentz_norm(&f, Region::WholeBox, 3.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn indicator_closed_forms() {
        let g = grid();
        let (f, m) = set_indicator(g, 300);
        for p in [1.5, 3.0, 6.0] {
            let weak = lorentz_norm(&f, Region::WholeBox, p, f64::INFINITY).unwrap();
            assert!((weak / m.powf(1.0 / p) - 1.0).abs() < 1e-12);
            for q in [1.0, 2.0, 3.0, 7.5] {
                let v = lorentz_norm(&f, Region::WholeBox, p, q).unwrap();
                let expect = m.powf(1.0 / p) * (p / q).powf(1.0 / q) * (p / (p - 1.0)).powf(1.0 / q);
                assert!((v / expect - 1.0).abs() < 1e-12, "p={p} q={q} {v} {expect}");
            }
        }
    }

    #[test]
    fn p_infinity_is_sup() {
        let g = grid();
        let f = random_scalar(g, &RandomSpec { amplitude: 1.0, slope: 1.0, seed: 1, kmax: 3 });
        let v = lorentz_norm(&f, Region::WholeBox, f64::INFINITY, f64::INFINITY).unwrap();
        assert!((v - f.max_abs()).abs() < 1e-14);
    }

    #[test]
    fn quasi_norm_matches_lebesgue_at_p_equals_q() {
        let g = grid();
        let f = random_scalar(g, &RandomSpec { amplitude: 1.0, slope: 1.0, seed: 2, kmax: 4 });
        for p in [1.5, 2.0, 3.0, 4.5] {
            let a = lorentz_quasi_norm(&f, Region::WholeBox, p, p).unwrap();
            let b = lebesgue_norm(&f, p);
            assert!((a / b - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_norm_obeys_hardy_bounds() {
        let g = grid();
        let f = random_scalar(g, &RandomSpec { amplitude: 1.0, slope: 1.0, seed: 5, kmax: 4 });
        for p in [1.5, 2.0, 3.0] {
            let strong = lebesgue_norm(&f, p);
            let v = lorentz_norm(&f, Region::WholeBox, p, p).unwrap();
            assert!(v >= strong * (1.0 - 1e-12));
            assert!(v <= strong * p / (p - 1.0) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ball_region_matches_masked_field() {
        let g = grid();
        let f = random_scalar(g, &RandomSpec { amplitude: 1.0, slope: 1.0, seed: 9, kmax: 4 });
        let mask = indicator_ball(g, 0.3, 1.0);
        let mut masked = f.clone();
        for (v, m) in masked.values.iter_mut().zip(&mask.values) {
            *v *= m;
        }
        let region = Region::Ball { center: g.center(), radius: 0.3 };
        for q in [2.0, f64::INFINITY] {
            let a = lorentz_norm(&f, region, 3.0, q).unwrap();
            let b = lorentz_norm(&masked, Region::WholeBox, 3.0, q).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn bad_exponents_and_empty_region() {
        let f = ScalarField::zeros(grid());
        assert!(lorentz_norm(&f, Region::WholeBox, 1.0, 2.0).is_err());
        assert!(lorentz_norm(&f, Region::WholeBox, f64::INFINITY, 2.0).is_err());
        let r = Region::Ball { center: [0.03, 0.03, 0.03], radius: 1e-3 };
        assert!(matches!(lorentz_norm(&f, r, 2.0, 2.0), Err(Error::EmptyRegion)));
    }

    fn small_grid() -> GridSpec {
        GridSpec::new(2, 8, 1.0).unwrap()
    }

    proptest! {
        #[test]
        fn homogeneous_and_triangle(a in proptest::collection::vec(-5.0f64..5.0, 64),
                                    b in proptest::collection::vec(-5.0f64..5.0, 64),
                                    s in -4.0f64..4.0,
                                    p in 1.2f64..6.0,
                                    q in prop_oneof![Just(f64::INFINITY), 1.0f64..8.0]) {
            let g = small_grid();
            let fa = ScalarField::from_values(g, a).unwrap();
            let fb = ScalarField::from_values(g, b).unwrap();
            let na = lorentz_norm(&fa, Region::WholeBox, p, q).unwrap();
            let nb = lorentz_norm(&fb, Region::WholeBox, p, q).unwrap();
            let ns = lorentz_norm(&fa.scaled(s), Region::WholeBox, p, q).unwrap();
            prop_assert!((ns - s.abs() * na).abs() <= 1e-12 * na.max(1e-300) * s.abs().max(1.0));
            let mut sum = fa.clone();
            sum.axpy(1.0, &fb);
            let nsum = lorentz_norm(&sum, Region::WholeBox, p, q).unwrap();
            prop_assert!(nsum <= (na + nb) * (1.0 + 1e-9));
        }
    }
}
