//! Output constraints `ψ(y) ≥ 0` and their gradient condition.

use std::sync::Arc;

use serde::Serialize;

use crate::autodiff::{gradient_jet, Evaluable, ScalarMap, SharedFn};
use crate::error::{ensure_len, Error, Result};
use crate::sampling::{explore, BoxDomain, SamplingPlan};
use crate::scalar::{dot, Scalar};
use crate::Jet64;

/// Span used for the open side of a half-bounded constraint box.
pub const OPEN_SIDE_SPAN: f64 = 10.0;
/// Fraction of box width added per side for the gradient-condition domain.
pub const D1_INFLATION: f64 = 0.1;
/// Fraction of box width added per side for the relative-degree domain.
pub const E1_INFLATION: f64 = 0.05;
pub const GRAD_TOL: f64 = 1e-8;

/// Scalar constraint on the output space with a bounding box of its
/// superlevel set `𝒞₁ = {ψ ≥ 0}` (sides may be infinite).
#[derive(Clone)]
pub struct OutputConstraint {
    name: String,
    psi: SharedFn,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl std::fmt::Debug for OutputConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OutputConstraint")
            .field("name", &self.name)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

impl OutputConstraint {
    pub fn new(name: impl Into<String>, psi: SharedFn, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        ensure_len("constraint output", 1, psi.output_dim())?;
        ensure_len("constraint lower bounds", psi.input_dim(), lower.len())?;
        ensure_len("constraint upper bounds", psi.input_dim(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::InvalidParameter("constraint bounds are inverted".into()));
        }
        Ok(OutputConstraint {
            name: name.into(),
            psi,
            lower,
            upper,
        })
    }

    /// `ψ(y) = y_max − y`.
    pub fn upper_limit(max: f64) -> Result<Self> {
        Self::new(
            "upper-limit",
            Arc::new(Affine { offset: max, sign: -1.0 }),
            vec![f64::NEG_INFINITY],
            vec![max],
        )
    }

    /// `ψ(y) = y − y_min`.
    pub fn lower_limit(min: f64) -> Result<Self> {
        Self::new(
            "lower-limit",
            Arc::new(Affine { offset: -min, sign: 1.0 }),
            vec![min],
            vec![f64::INFINITY],
        )
    }

    /// `ψ(y) = w² − (c − y)²`.
    pub fn band(center: f64, half_width: f64) -> Result<Self> {
        positive("band half-width", half_width)?;
        Self::new(
            "band",
            Arc::new(Band { center, half_width }),
            vec![center - half_width],
            vec![center + half_width],
        )
    }

    /// `ψ(z, θ) = 1 − (z − z_c)²/(z_c − z_min)² − θ²/θ_max²`.
    pub fn ellipse(z_center: f64, z_min: f64, theta_max: f64) -> Result<Self> {
        positive("ellipse half-height", z_center - z_min)?;
        positive("ellipse angle limit", theta_max)?;
        let a = z_center - z_min;
        Self::new(
            "ellipse",
            Arc::new(Ellipse {
                z_center,
                z_radius: a,
                theta_max,
            }),
            vec![z_min, -theta_max],
            vec![z_center + a, theta_max],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.psi.input_dim()
    }

    pub fn function(&self) -> &SharedFn {
        &self.psi
    }

    pub fn psi_at<S: Evaluable>(&self, y: &[S]) -> Result<S> {
        Ok(S::call(&*self.psi, y)?[0])
    }

    pub fn psi(&self, y: &[f64]) -> Result<f64> {
        self.psi_at(y)
    }

    pub fn gradient_jet(&self, y: &[Jet64]) -> Result<Vec<Jet64>> {
        gradient_jet(&*self.psi, y)
    }

    pub fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        crate::autodiff::gradient(&*self.psi, y)
    }

    /// Bounding box of `𝒞₁`; an open side gets [`OPEN_SIDE_SPAN`].
    pub fn bounding_box(&self) -> BoxDomain {
        let half = 0.5 * OPEN_SIDE_SPAN;
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        for (&l, &u) in self.lower.iter().zip(&self.upper) {
            let (l, u) = match (l.is_finite(), u.is_finite()) {
                (true, true) => (l, u),
                (true, false) => (l, l + OPEN_SIDE_SPAN),
                (false, true) => (u - OPEN_SIDE_SPAN, u),
                (false, false) => (-half, half),
            };
            lower.push(l);
            upper.push(u);
        }
        BoxDomain { lower, upper }
    }

    /// Box on which the gradient condition and the base controller are checked.
    pub fn d1_domain(&self) -> BoxDomain {
        self.bounding_box().inflate(D1_INFLATION)
    }

    /// Output-space box standing in for the open set on which the relative
    /// degree must hold.
    pub fn e1_domain(&self) -> BoxDomain {
        self.bounding_box().inflate(E1_INFLATION)
    }

    /// Samples `d1_domain ∖ Int(𝒞₁)` and checks `‖∂ψ/∂y‖ > grad_tol`.
    pub fn check_gradient_condition(&self, plan: &SamplingPlan, grad_tol: f64) -> Result<GradientReport> {
        ensure_len("gradient plan", self.dim(), plan.domain.dim())?;
        let samples = explore(plan, |y| {
            let psi = self.psi(y).ok()?;
            if psi > 0.0 {
                return None;
            }
            let g = self.gradient(y).ok()?;
            let norm = dot(&g, &g).sqrt();
            Some((norm, psi))
        });
        let mut report = GradientReport {
            sampled_points: samples.len(),
            min_gradient_norm: f64::INFINITY,
            grad_tol,
        };
        let mut worst: Option<(Vec<f64>, f64, f64)> = None;
        for s in samples {
            if s.score < report.min_gradient_norm {
                report.min_gradient_norm = s.score;
            }
            if !(s.score > grad_tol) && worst.as_ref().is_none_or(|w| s.score < w.1) {
                worst = Some((s.point, s.score, s.payload));
            }
        }
        match worst {
            Some((witness, grad_norm, psi)) => Err(Error::GradientConditionViolated {
                witness,
                grad_norm,
                psi,
            }),
            None => Ok(report),
        }
    }

    /// Default plan for the gradient check over [`Self::d1_domain`].
    pub fn gradient_plan(&self, seed: u64) -> SamplingPlan {
        let per_dim = grid_size(self.dim());
        SamplingPlan::new(self.d1_domain(), seed)
            .with_grid(per_dim)
            .with_lhs(2000)
    }
}

/// Grid points per axis keeping a full grid near 10⁴ points.
pub fn grid_size(dim: usize) -> usize {
    if dim == 0 {
        return 0;
    }
    let per = (1e4f64).powf(1.0 / dim as f64).floor() as usize;
    per.clamp(2, 41)
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientReport {
    /// Samples with `ψ ≤ 0`.
    pub sampled_points: usize,
    pub min_gradient_norm: f64,
    pub grad_tol: f64,
}

struct Affine {
    offset: f64,
    sign: f64,
}

impl ScalarMap for Affine {
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn apply<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        vec![S::from_f64(self.offset) + S::from_f64(self.sign) * y[0]]
    }
    fn label(&self) -> &str {
        "limit constraint"
    }
}

struct Band {
    center: f64,
    half_width: f64,
}

impl ScalarMap for Band {
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn apply<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        let e = S::from_f64(self.center) - y[0];
        vec![S::from_f64(self.half_width * self.half_width) - e * e]
    }
    fn label(&self) -> &str {
        "band constraint"
    }
}

struct Ellipse {
    z_center: f64,
    z_radius: f64,
    theta_max: f64,
}

impl ScalarMap for Ellipse {
    fn input_dim(&self) -> usize {
        2
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn apply<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        let dz = (y[0] - S::from_f64(self.z_center)) / S::from_f64(self.z_radius);
        let th = y[1] / S::from_f64(self.theta_max);
        vec![S::one() - dz * dz - th * th]
    }
    fn label(&self) -> &str {
        "ellipse constraint"
    }
}
