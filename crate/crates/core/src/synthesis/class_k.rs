//! Extended class-𝒦∞ functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smooth, globally Lipschitz extended class-𝒦∞ function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassK {
    /// `α(r) = c·r`.
    Linear { slope: f64 },
    /// `α(r) = c·(r + atan r)`.
    ArctanLinear { slope: f64 },
}

impl Default for ClassK {
    fn default() -> Self {
        ClassK::Linear { slope: 1.0 }
    }
}

impl ClassK {
    pub fn linear(slope: f64) -> Result<Self> {
        ClassK::Linear { slope }.validated()
    }

    pub fn arctan_linear(slope: f64) -> Result<Self> {
        ClassK::ArctanLinear { slope }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let c = self.slope();
        if c.is_finite() && c > 0.0 {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(format!(
                "class-K slope must be positive, got {c}"
            )))
        }
    }

    pub fn slope(&self) -> f64 {
        match *self {
            ClassK::Linear { slope } | ClassK::ArctanLinear { slope } => slope,
        }
    }

    /// Global Lipschitz constant `ℓ_α`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            ClassK::Linear { slope } => slope,
            ClassK::ArctanLinear { slope } => 2.0 * slope,
        }
    }

    pub fn eval<S: Scalar>(&self, r: S) -> S {
        match *self {
            ClassK::Linear { slope } => S::from_f64(slope) * r,
            ClassK::ArctanLinear { slope } => S::from_f64(slope) * (r + r.atan()),
        }
    }
}
