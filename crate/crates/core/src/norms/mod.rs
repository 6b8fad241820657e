//! Lorentz and Morrey–Lorentz norms of grid functions, plus the empirical
//! scaling, Hölder and embedding checks built on them.

mod checks;
mod lorentz;
mod morrey;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, State, TensorField, VectorField};

pub use checks::{
    holder_check, holder_ensemble, scaling_check, triple_norm_g, verify_embeddings,
    EmbeddingRow, HolderReport, ScalablePreset, TripleNorm, TripleNormParams,
};
pub use lorentz::{lebesgue_norm, lorentz_norm, lorentz_quasi_norm, Region};
pub use morrey::{
    morrey_lorentz_norm, morrey_on_balls, morrey_table, BallRow, BallSampler, BallSet,
    MorreyEstimate,
};

/// Exponent triple `(p, q, λ)` of a Morrey–Lorentz space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    #[serde(with = "ext_real")]
    pub p: f64,
    #[serde(with = "ext_real")]
    pub q: f64,
    #[serde(default)]
    pub lambda: f64,
}

impl NormParams {
    pub fn new(p: f64, q: f64, lambda: f64) -> Result<Self> {
        let np = NormParams { p, q, lambda };
        lorentz::validate_exponents(p, q)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("Morrey exponent must be >= 0, got {lambda}")));
        }
        Ok(np)
    }

    /// Weak space `(p, ∞, λ)`.
    pub fn weak(p: f64, lambda: f64) -> Result<Self> {
        Self::new(p, f64::INFINITY, lambda)
    }

    /// The critical weak-Morrey space `(p, ∞, n − p)`.
    pub fn critical(p: f64, dim: usize) -> Result<Self> {
        Self::weak(p, dim as f64 - p)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        Self::new(self.p, self.q, self.lambda)?;
        if self.lambda >= dim as f64 {
            return Err(Error::InvalidParameter(format!(
                "Morrey exponent must be below n = {dim}, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// `τ = (n − λ)/p`, zero when `p = ∞`.
    pub fn tau(&self, dim: usize) -> f64 {
        if self.p.is_infinite() {
            0.0
        } else {
            (dim as f64 - self.lambda) / self.p
        }
    }
}

/// Serializes infinite exponents as the string `"inf"`.
pub mod ext_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "∞") => Ok(f64::INFINITY),
            Raw::Text(t) => Err(de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// Anything whose norm is the norm of a pointwise magnitude.
pub trait Measurable {
    fn pointwise_magnitude(&self) -> ScalarField;
}

impl Measurable for ScalarField {
    fn pointwise_magnitude(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }
}

impl Measurable for VectorField {
    fn pointwise_magnitude(&self) -> ScalarField {
        self.magnitude()
    }
}

impl Measurable for TensorField {
    fn pointwise_magnitude(&self) -> ScalarField {
        self.magnitude()
    }
}

/// Weak-Morrey norm of a state: velocity norm plus temperature norm.
pub fn state_norm(x: &State, params: NormParams, sampler: &BallSampler) -> Result<f64> {
    Ok(morrey_lorentz_norm(&x.u, params, sampler)?.value
        + morrey_lorentz_norm(&x.theta, params, sampler)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_roundtrip_through_json() {
        let p = NormParams::critical(3.0, 3).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"inf\""));
        let back: NormParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        assert!((p.tau(3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_params() {
        assert!(NormParams::new(1.0, 2.0, 0.0).is_err());
        assert!(NormParams::new(2.0, 0.5, 0.0).is_err());
        assert!(NormParams::new(2.0, 2.0, -1.0).is_err());
        assert!(NormParams::new(2.0, 2.0, 3.0).unwrap().validate(3).is_err());
    }
}
