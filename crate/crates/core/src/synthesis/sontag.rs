//! Smooth universal base controller for the output single integrator.

use crate::autodiff::{constants, values, SmoothFn};
use crate::error::{ensure_len, Error, Result};
use crate::scalar::{dot, Scalar};
use crate::Jet64;

use super::class_k::ClassK;
use super::constraint::{OutputConstraint, GRAD_TOL};

/// `φ(a, b)` at any scalar type.
///
/// For `a > 0` the rationalized form `σb / (2(a + √(a² + σb²)))` is used,
/// which is smooth through `b = 0` and free of cancellation.
pub fn phi<S: Scalar>(a: S, b: S, sigma: f64) -> Result<S> {
    let sb = S::from_f64(sigma) * b;
    let two = S::from_f64(2.0);
    if a > S::zero() {
        let root = (a * a + sb * b).sqrt();
        Ok(sb / (two * (a + root)))
    } else if b > S::zero() {
        let root = (a * a + sb * b).sqrt();
        Ok((root - a) / (two * b))
    } else {
        Err(Error::InvalidRegion {
            a: a.to_f64(),
            b: b.to_f64(),
        })
    }
}

/// `φ(a, b)` for reals.
pub fn sontag_phi(a: f64, b: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if b < 0.0 {
        return Err(Error::InvalidParameter(format!("b must be non-negative, got {b}")));
    }
    phi(a, b, sigma)
}

/// `k₁(y) = φ(α(ψ(y)), ‖∇ψ(y)‖²) ∇ψ(y)ᵀ`.
#[derive(Clone, Debug)]
pub struct SontagController {
    constraint: OutputConstraint,
    alpha: ClassK,
    sigma: f64,
}

impl SontagController {
    /// Builds the controller without checking the gradient condition.
    pub fn new_unchecked(constraint: OutputConstraint, alpha: ClassK, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(SontagController {
            constraint,
            alpha: alpha.validated()?,
            sigma,
        })
    }

    pub fn constraint(&self) -> &OutputConstraint {
        &self.constraint
    }

    pub fn alpha(&self) -> ClassK {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `(k₁(y), ∇ψ(y), ψ(y))` at jet level.
    pub fn parts_jet(&self, y: &[Jet64]) -> Result<(Vec<Jet64>, Vec<Jet64>, Jet64)> {
        let psi = self.constraint.psi_at(y)?;
        let grad = self.constraint.gradient_jet(y)?;
        let b = dot(&grad, &grad);
        let scale = phi(self.alpha.eval(psi), b, self.sigma)?;
        Ok((grad.iter().map(|&g| scale * g).collect(), grad, psi))
    }

    pub fn eval_jet(&self, y: &[Jet64]) -> Result<Vec<Jet64>> {
        Ok(self.parts_jet(y)?.0)
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        ensure_len("base controller input", self.constraint.dim(), y.len())?;
        Ok(values(&self.eval_jet(&constants(y))?))
    }

    /// `∂ψ/∂y · k₁(y) + α(ψ(y))`, positive wherever the controller is valid.
    pub fn margin(&self, y: &[f64]) -> Result<f64> {
        let (k, grad, psi) = self.parts_jet(&constants(y))?;
        Ok(dot(&values(&grad), &values(&k)) + self.alpha.eval(psi.value()))
    }
}

impl SmoothFn for SontagController {
    fn input_dim(&self) -> usize {
        self.constraint.dim()
    }
    fn output_dim(&self) -> usize {
        self.constraint.dim()
    }
    fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        SontagController::eval(self, y)
    }
    fn eval_jet(&self, y: &[Jet64]) -> Result<Vec<Jet64>> {
        ensure_len("base controller input", self.constraint.dim(), y.len())?;
        SontagController::eval_jet(self, y)
    }
}

/// Base controller after checking the gradient condition on the default
/// sampling of `𝒟₁`.
pub fn sontag_controller(constraint: OutputConstraint, alpha: ClassK, sigma: f64) -> Result<SontagController> {
    constraint.check_gradient_condition(&constraint.gradient_plan(0), GRAD_TOL)?;
    SontagController::new_unchecked(constraint, alpha, sigma)
}
