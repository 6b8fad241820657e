//! Named initial-data and forcing shapes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::GridSpec;
use crate::spectral::{SpectralOps, C64};

pub type PresetParams = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetId {
    TaylorGreen,
    GaussianBump,
    RandomDivFree,
    RandomScalar,
    Gravity,
    SingleMode,
    ShearMode,
    IndicatorBall,
    InverseDistance,
}

impl PresetId {
    pub const ALL: [PresetId; 9] = [
        PresetId::TaylorGreen,
        PresetId::GaussianBump,
        PresetId::RandomDivFree,
        PresetId::RandomScalar,
        PresetId::Gravity,
        PresetId::SingleMode,
        PresetId::ShearMode,
        PresetId::IndicatorBall,
        PresetId::InverseDistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetId::TaylorGreen => "taylor-green",
            PresetId::GaussianBump => "gaussian-bump",
            PresetId::RandomDivFree => "random-div-free",
            PresetId::RandomScalar => "random-scalar",
            PresetId::Gravity => "gravity",
            PresetId::SingleMode => "single-mode",
            PresetId::ShearMode => "shear-mode",
            PresetId::IndicatorBall => "indicator-ball",
            PresetId::InverseDistance => "inverse-distance",
        }
    }

    /// Parameters that must be present for this preset.
    pub fn required_params(self, dim: usize) -> Vec<&'static str> {
        match self {
            PresetId::TaylorGreen => vec!["amplitude"],
            PresetId::GaussianBump => vec!["amplitude", "sigma"],
            PresetId::RandomDivFree | PresetId::RandomScalar => {
                vec!["amplitude", "slope", "seed", "kmax"]
            }
            PresetId::Gravity => vec!["G", "core"],
            PresetId::SingleMode if dim == 3 => vec!["amplitude", "k1", "k2", "k3"],
            PresetId::SingleMode => vec!["amplitude", "k1", "k2"],
            PresetId::ShearMode => vec!["amplitude", "k"],
            PresetId::IndicatorBall => vec!["radius", "value"],
            PresetId::InverseDistance => vec!["amplitude", "core"],
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(
            self,
            PresetId::TaylorGreen | PresetId::RandomDivFree | PresetId::Gravity | PresetId::ShearMode
        )
    }
}

impl FromStr for PresetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PresetField {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl PresetField {
    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            PresetField::Scalar(f) => Ok(f),
            PresetField::Vector(_) => Err(Error::InvalidParameter(
                "preset yields a vector field where a scalar was expected".into(),
            )),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            PresetField::Vector(v) => Ok(v),
            PresetField::Scalar(_) => Err(Error::InvalidParameter(
                "preset yields a scalar field where a vector was expected".into(),
            )),
        }
    }
}

fn param(id: PresetId, params: &PresetParams, key: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| Error::MissingParameter {
        preset: id.name().to_string(),
        param: key.to_string(),
    })
}

/// Builds a named preset on `grid`.
///
/// Shapes centred in the box use the torus displacement to the box centre.
pub fn make_preset(name: &str, grid: GridSpec, params: &PresetParams) -> Result<PresetField> {
    let id: PresetId = name.parse()?;
    for key in id.required_params(grid.dim) {
        param(id, params, key)?;
    }
    let p = |key: &str| param(id, params, key);
    let kx = 2.0 * PI / grid.length;
    let center = grid.center();
    Ok(match id {
        PresetId::TaylorGreen => {
            let a = p("amplitude")?;
            PresetField::Vector(VectorField::from_fn(grid, |x| {
                if grid.dim == 2 {
                    [
                        a * (kx * x[0]).sin() * (kx * x[1]).cos(),
                        -a * (kx * x[0]).cos() * (kx * x[1]).sin(),
                        0.0,
                    ]
                } else {
                    let cz = (kx * x[2]).cos();
                    [
                        a * (kx * x[0]).sin() * (kx * x[1]).cos() * cz,
                        -a * (kx * x[0]).cos() * (kx * x[1]).sin() * cz,
                        0.0,
                    ]
                }
            }))
        }
        PresetId::GaussianBump => {
            let a = p("amplitude")?;
            let s = p("sigma")?;
            if s <= 0.0 {
                return Err(Error::InvalidParameter("sigma must be positive".into()));
            }
            PresetField::Scalar(gaussian(grid, a, s))
        }
        PresetId::RandomDivFree => {
            let spec = RandomSpec::from_params(id, params, grid)?;
            PresetField::Vector(random_vector(grid, &spec))
        }
        PresetId::RandomScalar => {
            let spec = RandomSpec::from_params(id, params, grid)?;
            PresetField::Scalar(random_scalar(grid, &spec))
        }
        PresetId::Gravity => {
            let g = p("G")?;
            let eps = p("core")? * grid.spacing();
            PresetField::Vector(VectorField::from_fn(grid, |x| {
                let d = grid.displacement(x, center);
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + eps * eps;
                let w = g / (r2 * r2.sqrt());
                [w * d[0], w * d[1], w * d[2]]
            }))
        }
        PresetId::SingleMode => {
            let a = p("amplitude")?;
            let k = [
                p("k1")?,
                p("k2")?,
                if grid.dim == 3 { p("k3")? } else { 0.0 },
            ];
            PresetField::Scalar(ScalarField::from_fn(grid, |x| {
                a * (kx * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2])).cos()
            }))
        }
        PresetId::ShearMode => {
            let a = p("amplitude")?;
            let k = p("k")?;
            PresetField::Vector(VectorField::from_fn(grid, |x| {
                [a * (kx * k * x[1]).sin(), 0.0, 0.0]
            }))
        }
        PresetId::IndicatorBall => {
            let r = p("radius")?;
            let v = p("value")?;
            PresetField::Scalar(indicator_ball(grid, r, v))
        }
        PresetId::InverseDistance => {
            let a = p("amplitude")?;
            let eps = p("core")? * grid.spacing();
            PresetField::Scalar(ScalarField::from_fn(grid, |x| {
                let d = grid.displacement(x, center);
                a / (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + eps * eps).sqrt()
            }))
        }
    })
}

pub fn gaussian(grid: GridSpec, amplitude: f64, sigma: f64) -> ScalarField {
    let c = grid.center();
    ScalarField::from_fn(grid, |x| {
        let d = grid.displacement(x, c);
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        amplitude * (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Open ball of radius `r` around the box centre.
pub fn indicator_ball(grid: GridSpec, radius: f64, value: f64) -> ScalarField {
    let c = grid.center();
    ScalarField::from_fn(grid, |x| {
        let d = grid.displacement(x, c);
        if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() < radius {
            value
        } else {
            0.0
        }
    })
}

/// Band-limited random field description.
///
/// Coefficients are drawn in a fixed order over `|k_j| <= kmax`, independent
/// of the grid resolution, so the same seed yields the same continuum field
/// on every grid that resolves the band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomSpec {
    pub amplitude: f64,
    pub slope: f64,
    pub seed: u64,
    pub kmax: i64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            amplitude: 1.0,
            slope: 2.0,
            seed: 0,
            kmax: 2,
        }
    }
}

impl RandomSpec {
    fn from_params(id: PresetId, params: &PresetParams, grid: GridSpec) -> Result<Self> {
        let seed = param(id, params, "seed")?;
        let kmax = param(id, params, "kmax")?;
        if seed < 0.0 || seed.fract() != 0.0 {
            return Err(Error::InvalidParameter("seed must be a non-negative integer".into()));
        }
        if kmax < 1.0 || kmax.fract() != 0.0 || 2 * (kmax as usize) >= grid.points {
            return Err(Error::InvalidParameter(format!(
                "kmax must be an integer in [1, N/2), got {kmax}"
            )));
        }
        Ok(RandomSpec {
            amplitude: param(id, params, "amplitude")?,
            slope: param(id, params, "slope")?,
            seed: seed as u64,
            kmax: kmax as i64,
        })
    }

    pub fn params(&self) -> PresetParams {
        [
            ("amplitude", self.amplitude),
            ("slope", self.slope),
            ("seed", self.seed as f64),
            ("kmax", self.kmax as f64),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Enumerates the half-space of the band `|k_j| <= kmax` (first nonzero
/// component positive) in a resolution-independent order.
fn half_band(dim: usize, kmax: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    let r = -kmax..=kmax;
    let zr = if dim == 3 { -kmax..=kmax } else { 0..=0 };
    for a in r.clone() {
        for b in r.clone() {
            for c in zr.clone() {
                let k = [a, b, c];
                let first = k.iter().copied().find(|&v| v != 0);
                if matches!(first, Some(v) if v > 0) {
                    out.push(k);
                }
            }
        }
    }
    out
}

fn spectral_index(grid: GridSpec, k: [i64; 3]) -> usize {
    let n = grid.points as i64;
    let mut c = [0usize; 3];
    for axis in 0..grid.dim {
        c[axis] = k[axis].rem_euclid(n) as usize;
    }
    grid.index(c)
}

fn draw(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Divergence-free, mean-free random velocity with spectrum `|k|^{-slope}`
/// and RMS magnitude `amplitude`.
pub fn random_vector(grid: GridSpec, spec: &RandomSpec) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let dim = grid.dim;
    let mut coeffs = vec![vec![C64::new(0.0, 0.0); grid.len()]; dim];
    let mut energy = 0.0;
    for k in half_band(dim, spec.kmax) {
        let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        let amp = kn.powf(-spec.slope);
        let mut v: Vec<C64> = (0..dim).map(|_| draw(&mut rng) * amp).collect();
        let kv: C64 = (0..dim).map(|a| v[a] * k[a] as f64).sum();
        for a in 0..dim {
            v[a] -= kv * (k[a] as f64 / (kn * kn));
        }
        let idx = spectral_index(grid, k);
        let neg = spectral_index(grid, [-k[0], -k[1], -k[2]]);
        for a in 0..dim {
            coeffs[a][idx] = v[a];
            coeffs[a][neg] = v[a].conj();
            energy += 2.0 * v[a].norm_sqr();
        }
    }
    let scale = if energy > 0.0 {
        spec.amplitude / energy.sqrt()
    } else {
        0.0
    };
    let ops = SpectralOps::for_grid(grid);
    let comps = coeffs
        .into_iter()
        .map(|c| {
            let c: Vec<C64> = c.into_iter().map(|z| z * scale).collect();
            ScalarField {
                grid,
                values: ops.inverse_real(&c),
            }
        })
        .collect();
    VectorField {
        grid,
        components: comps,
    }
}

/// Mean-free random scalar with spectrum `|k|^{-slope}` and RMS `amplitude`.
pub fn random_scalar(grid: GridSpec, spec: &RandomSpec) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2);
    let mut coeffs = vec![C64::new(0.0, 0.0); grid.len()];
    let mut energy = 0.0;
    for k in half_band(grid.dim, spec.kmax) {
        let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        let v = draw(&mut rng) * kn.powf(-spec.slope);
        coeffs[spectral_index(grid, k)] = v;
        coeffs[spectral_index(grid, [-k[0], -k[1], -k[2]])] = v.conj();
        energy += 2.0 * v.norm_sqr();
    }
    let scale = if energy > 0.0 {
        spec.amplitude / energy.sqrt()
    } else {
        0.0
    };
    for c in &mut coeffs {
        *c *= scale;
    }
    ScalarField {
        grid,
        values: SpectralOps::for_grid(grid).inverse_real(&coeffs),
    }
}

/// Convenience constructor for a parameter map.
pub fn params(pairs: &[(&str, f64)]) -> PresetParams {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::forward_transform;

    fn div_residual(v: &VectorField) -> f64 {
        let ops = SpectralOps::for_grid(v.grid);
        let spec: Vec<Vec<C64>> = v.components.iter().map(|c| ops.forward(&c.values)).collect();
        ops.divergence_residual(&spec)
    }

    #[test]
    fn taylor_green_is_divergence_free() {
        for dim in [2, 3] {
            let g = GridSpec::new(dim, 16, 1.0).unwrap();
            let v = make_preset("taylor-green", g, &params(&[("amplitude", 1.0)]))
                .unwrap()
                .into_vector()
                .unwrap();
            assert!(div_residual(&v) <= 1e-10);
        }
    }

    #[test]
    fn random_div_free_is_deterministic_and_solenoidal() {
        let g = GridSpec::new(3, 16, 1.0).unwrap();
        let p = params(&[("amplitude", 1.0), ("slope", 1.5), ("seed", 7.0), ("kmax", 4.0)]);
        let a = make_preset("random-div-free", g, &p).unwrap().into_vector().unwrap();
        let b = make_preset("random-div-free", g, &p).unwrap().into_vector().unwrap();
        for (x, y) in a.components.iter().zip(&b.components) {
            assert!(x.values.iter().zip(&y.values).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        assert!(div_residual(&a) <= 1e-10);
        let rms = (a.l2_squared() / g.volume()).sqrt();
        assert!((rms - 1.0).abs() < 1e-12);
        let other = make_preset(
            "random-div-free",
            g,
            &params(&[("amplitude", 1.0), ("slope", 1.5), ("seed", 8.0), ("kmax", 4.0)]),
        )
        .unwrap()
        .into_vector()
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn random_fields_are_resolution_independent() {
        let spec = RandomSpec {
            amplitude: 1.0,
            slope: 1.0,
            seed: 3,
            kmax: 3,
        };
        let coarse = GridSpec::new(3, 8, 1.0).unwrap();
        let fine = GridSpec::new(3, 16, 1.0).unwrap();
        let a = random_scalar(coarse, &spec);
        let b = random_scalar(fine, &spec);
        // every coarse point is also a fine point
        for idx in 0..coarse.len() {
            let c = coarse.coords(idx);
            let fidx = fine.index([2 * c[0], 2 * c[1], 2 * c[2]]);
            assert!((a.values[idx] - b.values[fidx]).abs() < 1e-12);
        }
    }

    #[test]
    fn gravity_is_finite_and_odd() {
        let g = GridSpec::new(3, 16, 1.0).unwrap();
        let field = make_preset("gravity", g, &params(&[("G", 1.0), ("core", 2.0)]))
            .unwrap()
            .into_vector()
            .unwrap();
        field.check_finite().unwrap();
        let n = g.points;
        // oracle: direct formula evaluation
        let eps = 2.0 * g.spacing();
        for idx in 0..g.len() {
            let c = g.coords(idx);
            let x = g.position(idx);
            let d = [x[0] - 0.5, x[1] - 0.5, x[2] - 0.5];
            let r2 = d.iter().map(|v| v * v).sum::<f64>() + eps * eps;
            if c.iter().all(|&ci| ci != 0) {
                for a in 0..3 {
                    let expect = d[a] / r2.powf(1.5);
                    assert!((field.components[a].values[idx] - expect).abs() < 1e-9 * expect.abs().max(1.0));
                }
                let refl = g.index([n - c[0], n - c[1], n - c[2]]);
                for a in 0..3 {
                    let s = field.components[a].values[idx] + field.components[a].values[refl];
                    assert!(s.abs() <= 1e-9 * field.components[a].values[idx].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn unknown_preset_and_missing_parameter() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        assert!(matches!(
            make_preset("vortex-ring", g, &PresetParams::new()),
            Err(Error::UnknownPreset(_))
        ));
        assert!(matches!(
            make_preset("gaussian-bump", g, &params(&[("amplitude", 1.0)])),
            Err(Error::MissingParameter { .. })
        ));
    }

    #[test]
    fn single_mode_has_one_pair() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let f = make_preset("single-mode", g, &params(&[("amplitude", 2.0), ("k1", 1.0), ("k2", 0.0)]))
            .unwrap()
            .into_scalar()
            .unwrap();
        let s = forward_transform(&f).unwrap();
        assert!((s.coeff([1, 0, 0]).re - 1.0).abs() < 1e-14);
        assert!((s.coeff([-1, 0, 0]).re - 1.0).abs() < 1e-14);
    }
}
