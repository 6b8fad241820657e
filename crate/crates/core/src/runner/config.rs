//! JSON run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{ScalarField, State, TensorField, VectorField};
use crate::grid::GridSpec;
use crate::norms::{BallSampler, NormParams};
use crate::periodic::OuterOptions;
use crate::presets::{make_preset, PresetId, PresetParams};
use crate::solver::{ForcingSpec, Mode, Phase, SolveConfig, Term};
use crate::stability::StabilityParams;

/// JSON schema of [`RunConfig`].
pub const SCHEMA: &str = include_str!("../../config.schema.json");

/// A named preset with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeConfig {
    pub preset: String,
    #[serde(default)]
    pub params: PresetParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Velocity forcing `div F`.
    Tensor,
    /// Temperature forcing `div f`.
    Vector,
    /// Gravity field `g` of the buoyancy term.
    Gravity,
}

fn cos() -> Phase {
    Phase::Cos
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub target: Target,
    #[serde(default)]
    pub harmonic: u32,
    #[serde(default = "cos")]
    pub phase: Phase,
    pub amplitude: f64,
    pub shape: ShapeConfig,
    /// Second factor of a tensor term `shape ⊗ partner`; defaults to `shape`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<ShapeConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub period: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<ShapeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<ShapeConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    #[default]
    Full,
    NavierStokes,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CesaroConfig {
    pub n_max: usize,
    pub tol: f64,
}

impl Default for CesaroConfig {
    fn default() -> Self {
        CesaroConfig { n_max: 400, tol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuterConfig {
    pub outer_tol: f64,
    pub outer_max: usize,
    pub norm_every: usize,
}

impl Default for OuterConfig {
    fn default() -> Self {
        let o = OuterOptions::default();
        OuterConfig {
            outer_tol: o.outer_tol,
            outer_max: o.outer_max,
            norm_every: o.norm_every,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub q: f64,
    pub r: f64,
    pub b: f64,
    /// Max-norm size of the initial perturbation.
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    /// Relative change of the gravity field, `g' = (1 + forcing_gap) g`.
    #[serde(default)]
    pub forcing_gap: f64,
    #[serde(default = "default_t_points")]
    pub t_points: usize,
    /// Fit window; defaults to `[T, 10T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
}

fn default_perturbation() -> f64 {
    1e-4
}
fn default_t_points() -> usize {
    24
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    /// Fields (or trajectory pairs) per estimate.
    pub ensemble: usize,
    pub amplitude: f64,
    /// Highest wavenumber of the random fields.
    pub kmax: i64,
    /// Repeat on the `2N` grid and report the relative change.
    pub refine: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            ensemble: 4,
            amplitude: 1.0,
            kmax: 2,
            refine: false,
        }
    }
}

fn default_p() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub solve: SolveConfig,
    /// Length of an `evolve` run; defaults to one period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub mode: ModeName,
    /// Exponent of the critical space `(p, ∞, n − p)`.
    #[serde(default = "default_p")]
    pub p: f64,
    /// Extra spaces for the `norms` command.
    #[serde(default)]
    pub norms: Vec<NormParams>,
    #[serde(default)]
    pub sampler: BallSampler,
    #[serde(default)]
    pub cesaro: CesaroConfig,
    #[serde(default)]
    pub outer: OuterConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityConfig>,
    #[serde(default)]
    pub estimates: EstimateConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    pub fn period(&self) -> f64 {
        self.forcing.period
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(self.forcing.period)
    }

    /// Cross-field checks; hypothesis failures name the violated relation.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let dim = self.grid.dim;
        if !(2.0 < self.p && self.p <= dim as f64) {
            return Err(Error::Hypothesis(format!(
                "need 2<p≤n for the critical space (n = {dim}), got p = {}",
                self.p
            )));
        }
        let period = self.period();
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Config(format!("forcing.period must be positive, got {period}")));
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("t_end must be non-negative, got {t}")));
            }
        }
        self.solve.validate(Some(period))?;
        for n in &self.norms {
            n.validate(dim)?;
        }
        self.sampler.validate(self.grid)?;
        if self.cesaro.n_max == 0 || self.outer.outer_max == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        if self.estimates.ensemble == 0 {
            return Err(Error::Config("estimates.ensemble must be positive".into()));
        }
        if let Some(s) = &self.stability {
            self.stability_params()?;
            if s.t_points < 8 {
                return Err(Error::Config("stability.t_points must be at least 8".into()));
            }
        }
        Ok(())
    }

    /// Stability exponents; `(p, 2p, 2p, p)` when the section is absent.
    pub fn stability_params(&self) -> Result<StabilityParams> {
        match &self.stability {
            Some(s) => StabilityParams::new(self.p, s.q, s.r, s.b, self.grid.dim),
            None => StabilityParams::new(self.p, 2.0 * self.p, 2.0 * self.p, self.p, self.grid.dim),
        }
    }

    pub fn critical_norm(&self) -> Result<NormParams> {
        NormParams::critical(self.p, self.grid.dim)
    }

    pub fn sampler(&self) -> BallSampler {
        BallSampler {
            seed: self.seed,
            ..self.sampler
        }
    }

    pub fn mode(&self) -> Mode {
        match self.mode {
            ModeName::Full => Mode::Full,
            ModeName::NavierStokes => Mode::NavierStokes,
        }
    }

    /// Builds a preset; random presets without a `seed` draw from the run
    /// seed offset by `slot`.
    pub fn shape(&self, s: &ShapeConfig, slot: u64) -> Result<crate::presets::PresetField> {
        let id: PresetId = s.preset.parse()?;
        let mut params = s.params.clone();
        if matches!(id, PresetId::RandomDivFree | PresetId::RandomScalar) && !params.contains_key("seed") {
            params.insert("seed".into(), self.seed.wrapping_add(slot) as f64);
        }
        make_preset(&s.preset, self.grid, &params)
    }

    pub fn forcing_spec(&self) -> Result<ForcingSpec> {
        let mut out = ForcingSpec::zero(self.period());
        out.kappa = self.forcing.kappa;
        for (i, t) in self.forcing.terms.iter().enumerate() {
            let slot = 100 + 2 * i as u64;
            let vector = |s: &ShapeConfig, slot| self.shape(s, slot)?.into_vector();
            match t.target {
                Target::Tensor => {
                    let a = vector(&t.shape, slot)?;
                    let b = match &t.partner {
                        Some(p) => vector(p, slot + 1)?,
                        None => a.clone(),
                    };
                    out.tensor
                        .terms
                        .push(Term::new(t.harmonic, t.phase, t.amplitude, TensorField::outer(&a, &b)?));
                }
                Target::Vector => out
                    .vector
                    .terms
                    .push(Term::new(t.harmonic, t.phase, t.amplitude, vector(&t.shape, slot)?)),
                Target::Gravity => out
                    .gravity
                    .terms
                    .push(Term::new(t.harmonic, t.phase, t.amplitude, vector(&t.shape, slot)?)),
            }
        }
        out.validate(self.grid)?;
        Ok(out)
    }

    pub fn initial_state(&self) -> Result<State> {
        let u = match &self.initial.velocity {
            Some(s) => self.shape(s, 0)?.into_vector()?,
            None => VectorField::zeros(self.grid),
        };
        let theta = match &self.initial.temperature {
            Some(s) => self.shape(s, 1)?.into_scalar()?,
            None => ScalarField::zeros(self.grid),
        };
        State::new(u, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"{
        "grid": {"n": 3, "N": 8, "L": 6.283185307179586},
        "forcing": {"period": 1.0, "terms": [
            {"target": "tensor", "harmonic": 1, "amplitude": 0.001,
             "shape": {"preset": "taylor-green", "params": {"amplitude": 1.0}}}
        ]},
        "solve": {"dt": 0.0625}
    }"#;

    #[test]
    fn sample_parses_and_round_trips() {
        let cfg = RunConfig::from_json(SAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.p, 3.0);
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.forcing_spec().unwrap().tensor.terms.len(), 1);
    }

    #[test]
    fn unknown_fields_and_bad_exponents_are_rejected() {
        let bad = SAMPLE.replacen("\"solve\"", "\"sovle\"", 1);
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
        let mut cfg = RunConfig::from_json(SAMPLE).unwrap();
        cfg.p = 2.0;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("2<p≤n"));
    }

    #[test]
    fn schema_is_json() {
        let v: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
        assert_eq!(v["type"], "object");
    }

    #[test]
    fn random_presets_follow_the_run_seed() {
        let mut cfg = RunConfig::from_json(SAMPLE).unwrap();
        cfg.initial.velocity = Some(ShapeConfig {
            preset: "random-div-free".into(),
            params: crate::presets::params(&[("amplitude", 1.0), ("slope", 2.0), ("kmax", 2.0)]),
        });
        let a = cfg.initial_state().unwrap();
        cfg.seed = 7;
        let b = cfg.initial_state().unwrap();
        assert_ne!(a, b);
        assert_eq!(b, cfg.initial_state().unwrap());
    }
}
