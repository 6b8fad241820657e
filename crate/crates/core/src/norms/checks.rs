//! Empirical scaling, Hölder, time-weighted and embedding checks.

use serde::{Deserialize, Serialize};

use super::lorentz::{lebesgue_norm, lorentz_norm, Region};
use super::morrey::{morrey_lorentz_norm, BallSampler};
use super::{Measurable, NormParams};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::GridSpec;
use crate::presets::{gaussian, indicator_ball};

/// Presets whose dilation `f(c·)` about the box centre is again a preset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalablePreset {
    Gaussian { amplitude: f64, sigma: f64 },
    Indicator { radius: f64, value: f64 },
}

impl ScalablePreset {
    /// Samples `x ↦ f(c·(x − x_c) + x_c)`.
    pub fn sample(&self, grid: GridSpec, c: f64) -> Result<ScalarField> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale factor must be positive, got {c}")));
        }
        let half = 0.5 * grid.length;
        match *self {
            ScalablePreset::Gaussian { amplitude, sigma } => {
                if 3.0 * sigma / c > half {
                    return Err(Error::SupportLeavesBox(format!(
                        "gaussian width 3σ/c = {} exceeds L/2",
                        3.0 * sigma / c
                    )));
                }
                Ok(gaussian(grid, amplitude, sigma / c))
            }
            ScalablePreset::Indicator { radius, value } => {
                if radius / c >= half {
                    return Err(Error::SupportLeavesBox(format!(
                        "indicator radius r/c = {} reaches L/2",
                        radius / c
                    )));
                }
                Ok(indicator_ball(grid, radius / c, value))
            }
        }
    }
}

/// `‖f(c·)‖ · c^τ / ‖f‖`; the scaling identity predicts 1.
pub fn scaling_check(
    preset: ScalablePreset,
    grid: GridSpec,
    c: f64,
    params: NormParams,
    sampler: &BallSampler,
) -> Result<f64> {
    let base = preset.sample(grid, 1.0)?;
    let scaled = preset.sample(grid, c)?;
    let n0 = morrey_lorentz_norm(&base, params, sampler)?.value;
    let nc = morrey_lorentz_norm(&scaled, params, sampler)?.value;
    if n0 == 0.0 {
        return Ok(if nc == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(nc * c.powf(params.tau(grid.dim)) / n0)
}

fn check_holder_exponents(f: NormParams, g: NormParams, target: NormParams) -> Result<()> {
    let lhs = 1.0 / target.p;
    let rhs = 1.0 / f.p + 1.0 / g.p;
    if (lhs - rhs).abs() > 1e-12 {
        return Err(Error::Hypothesis(format!(
            "Hölder exponents need 1/r = 1/p0 + 1/p1, got {lhs} vs {rhs}"
        )));
    }
    let weight = |x: NormParams| if x.p.is_infinite() { 0.0 } else { x.lambda / x.p };
    let (lt, lr) = (weight(target), weight(f) + weight(g));
    if (lt - lr).abs() > 1e-12 {
        return Err(Error::Hypothesis(format!(
            "Hölder Morrey exponents need β/r = λ0/p0 + λ1/p1, got {lt} vs {lr}"
        )));
    }
    if 1.0 / f.q + 1.0 / g.q < 1.0 / target.q - 1e-12 {
        return Err(Error::Hypothesis(format!(
            "Hölder secondary exponents need 1/q0 + 1/q1 >= 1/s, got {} < {}",
            1.0 / f.q + 1.0 / g.q,
            1.0 / target.q
        )));
    }
    Ok(())
}

/// `‖fg‖_target / (‖f‖ ‖g‖)`, zero when the product vanishes.
pub fn holder_check(
    f: &impl Measurable,
    g: &impl Measurable,
    split: (NormParams, NormParams),
    target: NormParams,
    sampler: &BallSampler,
) -> Result<f64> {
    check_holder_exponents(split.0, split.1, target)?;
    let mf = f.pointwise_magnitude();
    let mg = g.pointwise_magnitude();
    mf.grid.ensure_same(&mg.grid)?;
    let mut prod = mf.clone();
    for (a, b) in prod.values.iter_mut().zip(&mg.values) {
        *a *= b;
    }
    let top = morrey_lorentz_norm(&prod, target, sampler)?.value;
    if top == 0.0 {
        return Ok(0.0);
    }
    let nf = morrey_lorentz_norm(&mf, split.0, sampler)?.value;
    let ng = morrey_lorentz_norm(&mg, split.1, sampler)?.value;
    Ok(top / (nf * ng))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

pub fn holder_ensemble(
    pairs: &[(ScalarField, ScalarField)],
    split: (NormParams, NormParams),
    target: NormParams,
    sampler: &BallSampler,
) -> Result<HolderReport> {
    let ratios = pairs
        .iter()
        .map(|(f, g)| holder_check(f, g, split, target, sampler))
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(HolderReport { ratios, max_ratio })
}

/// Exponents of the time-weighted norm `sup_t t^β ‖g(t)‖_{b,∞,λ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleNormParams {
    pub beta: f64,
    pub b: f64,
}

impl TripleNormParams {
    /// `β = 1 − p/(2b)`.
    pub fn new(p: f64, b: f64) -> Result<Self> {
        let beta = 1.0 - p / (2.0 * b);
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Hypothesis(format!(
                "time weight β = 1 − p/(2b) must lie in (0,1), got {beta} (p = {p}, b = {b})"
            )));
        }
        Ok(TripleNormParams { beta, b })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TripleNorm {
    pub value: f64,
    pub argmax_t: f64,
    pub t_grid: Vec<f64>,
}

/// `sup` over `t_grid` of `t^β ‖g(t)‖_{b,∞,λ}`.
pub fn triple_norm_g(
    g: &dyn Fn(f64) -> Result<VectorField>,
    params: TripleNormParams,
    lambda: f64,
    t_grid: &[f64],
    sampler: &BallSampler,
) -> Result<TripleNorm> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidParameter(format!("time grid entries must be positive, got {t}")));
    }
    let norm = NormParams::weak(params.b, lambda)?;
    let mut best = (0.0, t_grid[0]);
    for &t in t_grid {
        let v = t.powf(params.beta) * morrey_lorentz_norm(&g(t)?, norm, sampler)?.value;
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok(TripleNorm {
        value: best.0,
        argmax_t: best.1,
        t_grid: t_grid.to_vec(),
    })
}

/// Norms along the inclusion chain `L^n ⊂ L^{n,∞} ⊂ M_{p,∞,n−p}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingRow {
    pub morrey: f64,
    pub weak_lebesgue: f64,
    pub lebesgue: f64,
    /// `‖f‖_{M_{p,∞,n−p}} / ‖f‖_{L^{n,∞}}`
    pub morrey_over_weak: f64,
    /// `‖f‖_{L^{n,∞}} / ‖f‖_{L^n}`
    pub weak_over_strong: f64,
}

pub fn verify_embeddings(fields: &[ScalarField], p: f64, sampler: &BallSampler) -> Result<Vec<EmbeddingRow>> {
    let mut rows = Vec::with_capacity(fields.len());
    for f in fields {
        let n = f.grid.dim;
        if n < 3 {
            return Err(Error::Hypothesis(format!("embedding chain needs n >= 3, got n = {n}")));
        }
        let nf = n as f64;
        let morrey = morrey_lorentz_norm(f, NormParams::critical(p, n)?, sampler)?.value;
        let weak_lebesgue = lorentz_norm(f, Region::WholeBox, nf, f64::INFINITY)?;
        let lebesgue = lebesgue_norm(f, nf);
        let ratio = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / b };
        rows.push(EmbeddingRow {
            morrey,
            weak_lebesgue,
            lebesgue,
            morrey_over_weak: ratio(morrey, weak_lebesgue),
            weak_over_strong: ratio(weak_lebesgue, lebesgue),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(3, 32, 1.0).unwrap()
    }

    #[test]
    fn unit_scale_is_exact_and_support_guard() {
        let g = grid();
        let pre = ScalablePreset::Gaussian { amplitude: 1.0, sigma: 0.06 };
        let r = scaling_check(pre, g, 1.0, NormParams::critical(3.0, 3).unwrap(), &BallSampler::default()).unwrap();
        assert_eq!(r, 1.0);
        let big = ScalablePreset::Indicator { radius: 0.3, value: 1.0 };
        assert!(matches!(big.sample(g, 0.5), Err(Error::SupportLeavesBox(_))));
    }

    #[test]
    fn holder_zero_and_bad_exponents() {
        let g = grid();
        let f = ScalarField::zeros(g);
        let h = indicator_ball(g, 0.2, 1.0);
        let a = NormParams::weak(6.0, 0.0).unwrap();
        let t = NormParams::weak(3.0, 0.0).unwrap();
        let s = BallSampler { centers: 4, radii: 6, seed: 0 };
        assert_eq!(holder_check(&f, &h, (a, a), t, &s).unwrap(), 0.0);
        let bad = NormParams::weak(4.0, 0.0).unwrap();
        assert!(matches!(holder_check(&h, &h, (a, bad), t, &s), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn holder_indicator_closed_form() {
        // f = g = 1_B, split (2r, 2r) -> r with q = ∞, λ = 0: every weak norm
        // is a power of the same measure, so the ratio is exactly 1.
        let g = grid();
        let h = indicator_ball(g, 0.2, 1.0);
        let a = NormParams::weak(4.0, 0.0).unwrap();
        let t = NormParams::weak(2.0, 0.0).unwrap();
        let r = holder_check(&h, &h, (a, a), t, &BallSampler::default()).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn triple_norm_examples() {
        let g = GridSpec::new(3, 16, 1.0).unwrap();
        let s = BallSampler { centers: 4, radii: 5, seed: 0 };
        let params = TripleNormParams::new(3.0, 3.0).unwrap();
        assert!((params.beta - 0.5).abs() < 1e-15);
        let phi = VectorField::from_fn(g, |x| [x[0].sin(), 1.0, 0.5]);
        let norm = morrey_lorentz_norm(&phi, NormParams::weak(3.0, 0.0).unwrap(), &s).unwrap().value;
        let ts = [0.1, 0.3, 1.0, 2.0];
        let zero = triple_norm_g(&|_| Ok(VectorField::zeros(g)), params, 0.0, &ts, &s).unwrap();
        assert_eq!(zero.value, 0.0);
        let constant = triple_norm_g(&|_| Ok(phi.clone()), params, 0.0, &ts, &s).unwrap();
        assert!((constant.value - 2f64.sqrt() * norm).abs() < 1e-12 * norm);
        let cancel = triple_norm_g(&|t| Ok(phi.scaled(t.powf(-0.5))), params, 0.0, &ts, &s).unwrap();
        assert!((cancel.value / norm - 1.0).abs() < 1e-12);
        assert!(triple_norm_g(&|_| Ok(phi.clone()), params, 0.0, &[], &s).is_err());
        assert!(TripleNormParams::new(3.0, 1.5).is_err());
    }

    #[test]
    fn embedding_ratios_for_indicator() {
        let g = GridSpec::new(3, 32, 1.0).unwrap();
        let s = BallSampler { centers: 1, radii: 13, seed: 0 };
        let r = s.radius_ladder(g)[9];
        let f = indicator_ball(g, r, 1.0);
        let p = 2.5;
        let rows = verify_embeddings(&[ScalarField::zeros(g), f], p, &s).unwrap();
        assert_eq!(rows[0].morrey_over_weak, 0.0);
        assert_eq!(rows[0].weak_over_strong, 0.0);
        let omega = 4.0 * PI / 3.0;
        // continuum: ω^{1/p}·r over (ω r³)^{1/3}
        let expect = omega.powf(1.0 / p - 1.0 / 3.0);
        assert!((rows[1].morrey_over_weak / expect - 1.0).abs() < 0.05, "{rows:?}");
        assert!((rows[1].weak_over_strong - 1.0).abs() < 1e-12);
        let g2 = GridSpec::new(2, 16, 1.0).unwrap();
        assert!(verify_embeddings(&[ScalarField::zeros(g2)], p, &s).is_err());
    }
}
