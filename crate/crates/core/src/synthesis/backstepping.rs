//! Backstepped barrier functions built from output coordinates.
//!
//! With `eᵢ = ηᵢ₊₁ − kᵢ(ζᵢ)` the candidate is
//! `h = ψ(η₁) − Σ ‖eᵢ‖²/(2μᵢ)` and the virtual controllers are
//!
//! ```text
//! k₂     = k̇₁ + μ₁ ∇ψ(η₁)ᵀ            − (λ₁/2) e₁
//! kᵢ₊₁   = k̇ᵢ − (μᵢ/μᵢ₋₁) eᵢ₋₁         − (λᵢ/2) eᵢ      (i ≥ 2)
//! ```
//!
//! where `k̇ᵢ` is the derivative of `kᵢ` along `η̇ⱼ = ηⱼ₊₁`. The same
//! recursion one step further gives the target `k_γ` for `η̇_γ`, which the
//! explicit feedback law inverts through the decoupling matrix.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::autodiff::{constants, values};
use crate::error::{ensure_len, Error, Result};
use crate::jet::MAX_DEPTH;
use crate::lie::{
    lie_chain, lie_g_lie_f_at, verify_relative_degree_on, OutputDomain, OutputMap, RankReport,
    RankTolerances,
};
use crate::sampling::{BoxDomain, SamplingPlan};
use crate::scalar::dot;
use crate::systems::{to_control_affine, ControlAffineSystem, LagrangianSystem};
use crate::Jet64;

use super::class_k::ClassK;
use super::constraint::{grid_size, GradientReport, OutputConstraint, GRAD_TOL};
use super::sontag::SontagController;

/// Virtual controllers `k₁, …, k_γ` over stacked output coordinates.
#[derive(Clone, Debug)]
pub struct VirtualControllerChain {
    base: SontagController,
    mu: Vec<f64>,
    lambda: Vec<f64>,
    p: usize,
    gamma: usize,
}

impl VirtualControllerChain {
    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn base(&self) -> &SontagController {
        &self.base
    }

    /// `[k₁(ζ₁), …, k_j(ζ_j)]` where `zeta` holds at least `ζ_j`.
    pub fn controllers_jet(&self, zeta: &[Jet64], j: usize) -> Result<Vec<Vec<Jet64>>> {
        let p = self.p;
        if j == 0 || j > self.gamma {
            return Err(Error::InvalidParameter(format!(
                "virtual controller index {j} outside 1..={}",
                self.gamma
            )));
        }
        if zeta.len() < j * p {
            return Err(Error::DimensionMismatch {
                context: "stacked output coordinates".into(),
                expected: j * p,
                found: zeta.len(),
            });
        }
        let eta = |i: usize| &zeta[(i - 1) * p..i * p];
        if j == 1 {
            return Ok(vec![self.base.eval_jet(eta(1))?]);
        }
        let i = j - 1;
        let (lifted, d) = Jet64::seed(&zeta[..i * p], &zeta[p..j * p]);
        let inner = self.controllers_jet(&lifted, i)?;
        let mut ks: Vec<Vec<Jet64>> = inner
            .iter()
            .map(|k| k.iter().map(|v| v.primal(d)).collect())
            .collect();
        let k_dot: Vec<Jet64> = inner[i - 1].iter().map(|v| v.tangent(d)).collect();

        let cross: Vec<Jet64> = if i == 1 {
            let grad = self.base.constraint().gradient_jet(eta(1))?;
            let mu = Jet64::constant(self.mu[0]);
            grad.iter().map(|&g| mu * g).collect()
        } else {
            let ratio = Jet64::constant(self.mu[i - 1] / self.mu[i - 2]);
            eta(i)
                .iter()
                .zip(&ks[i - 2])
                .map(|(&e, &k)| -(ratio * (e - k)))
                .collect()
        };
        let half_lambda = Jet64::constant(0.5 * self.lambda[i - 1]);
        let next: Vec<Jet64> = (0..p)
            .map(|r| k_dot[r] + cross[r] - half_lambda * (eta(j)[r] - ks[i - 1][r]))
            .collect();
        ks.push(next);
        Ok(ks)
    }

    /// `kᵢ(ζᵢ)`; `zeta` may be longer than `ζᵢ`.
    pub fn eval(&self, i: usize, zeta: &[f64]) -> Result<Vec<f64>> {
        let ks = self.controllers_jet(&constants(zeta), i)?;
        Ok(values(&ks[i - 1]))
    }

    /// `k̇ᵢ(ζᵢ₊₁)`: derivative of `kᵢ` along `(η₂, …, ηᵢ₊₁)`.
    pub fn derivative(&self, i: usize, zeta: &[f64]) -> Result<Vec<f64>> {
        let p = self.p;
        ensure_len("stacked output coordinates", (i + 1) * p, zeta.len().min((i + 1) * p))?;
        let (lifted, d) = Jet64::seed_real(&zeta[..i * p], &zeta[p..(i + 1) * p]);
        let ks = self.controllers_jet(&lifted, i)?;
        Ok(ks[i - 1].iter().map(|v| v.tangent(d).value()).collect())
    }
}

fn check_gains(
    gamma: usize,
    alpha: &ClassK,
    mu: &[f64],
    lambda: &[f64],
    enforce_lambda: bool,
) -> Result<()> {
    ensure_len("mu gains", gamma - 1, mu.len())?;
    ensure_len("lambda gains", gamma - 1, lambda.len())?;
    if let Some(bad) = mu.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(Error::InvalidParameter(format!("mu gains must be positive, got {bad}")));
    }
    if let Some(bad) = lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidParameter(format!("lambda gains must be non-negative, got {bad}")));
    }
    if enforce_lambda {
        let lipschitz = alpha.lipschitz();
        for (idx, &l) in lambda.iter().enumerate() {
            if l < lipschitz {
                return Err(Error::GainTooSmall {
                    index: idx + 1,
                    lambda: l,
                    lipschitz,
                });
            }
        }
    }
    Ok(())
}

/// Chain of virtual controllers with validated gains (`λᵢ ≥ ℓ_α` for every
/// `i ≤ γ − 1`).
pub fn virtual_controller_chain(
    constraint: &OutputConstraint,
    gamma: usize,
    alpha: ClassK,
    sigma: f64,
    mu: &[f64],
    lambda: &[f64],
) -> Result<VirtualControllerChain> {
    if gamma == 0 || gamma > MAX_DEPTH {
        return Err(Error::InvalidParameter(format!(
            "relative degree {gamma} outside 1..={MAX_DEPTH}"
        )));
    }
    check_gains(gamma, &alpha, mu, lambda, true)?;
    Ok(VirtualControllerChain {
        base: SontagController::new_unchecked(constraint.clone(), alpha, sigma)?,
        mu: mu.to_vec(),
        lambda: lambda.to_vec(),
        p: constraint.dim(),
        gamma,
    })
}

#[derive(Clone, Debug)]
enum Form {
    General,
    RelativeDegreeTwo { config_dim: usize },
}

/// Serializable description of a synthesized candidate.
#[derive(Clone, Debug, Serialize)]
pub struct CandidateMetadata {
    pub model: String,
    pub output: String,
    pub constraint: String,
    pub form: &'static str,
    pub gamma: usize,
    pub output_dim: usize,
    pub input_dim: usize,
    pub alpha: ClassK,
    pub lipschitz: f64,
    pub sigma: f64,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub checked: bool,
    pub gradient_report: Option<GradientReport>,
    pub rank_report: Option<RankReport>,
}

/// `h`, `L_f h` and `L_g h` at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct BarrierValues {
    pub h: f64,
    pub lf_h: f64,
    pub lg_h: Vec<f64>,
}

/// Pieces of the explicit feedback law at one state.
#[derive(Clone, Debug)]
pub struct FeedbackTerms {
    /// `k_γ(η)`, the commanded `η̇_γ`.
    pub target: Vec<f64>,
    /// `L_f^γ y`.
    pub drift_term: Vec<f64>,
    /// `L_g L_f^{γ−1} y`, `p × m`.
    pub decoupling: DMatrix<f64>,
}

/// A synthesized barrier function.
#[derive(Clone, Debug)]
pub struct CbfCandidate {
    sys: ControlAffineSystem,
    output: OutputMap,
    chain: VirtualControllerChain,
    form: Form,
    metadata: CandidateMetadata,
}

impl CbfCandidate {
    pub fn system(&self) -> &ControlAffineSystem {
        &self.sys
    }

    pub fn output(&self) -> &OutputMap {
        &self.output
    }

    pub fn constraint(&self) -> &OutputConstraint {
        self.chain.base.constraint()
    }

    pub fn chain(&self) -> &VirtualControllerChain {
        &self.chain
    }

    pub fn alpha(&self) -> ClassK {
        self.chain.base.alpha()
    }

    pub fn gamma(&self) -> usize {
        self.output.gamma()
    }

    pub fn metadata(&self) -> &CandidateMetadata {
        &self.metadata
    }

    /// `h` at jet level.
    pub fn h_jet(&self, x: &[Jet64]) -> Result<Jet64> {
        ensure_len("state", self.sys.state_dim(), x.len())?;
        match self.form {
            Form::General => {
                let gamma = self.gamma();
                let chain = lie_chain(&self.sys, &self.output, x, gamma - 1)?;
                let psi = self.constraint().psi_at(&chain[0])?;
                if gamma == 1 {
                    return Ok(psi);
                }
                let zeta: Vec<Jet64> = chain[..gamma - 1].concat();
                let ks = self.chain.controllers_jet(&zeta, gamma - 1)?;
                let mut h = psi;
                for i in 1..gamma {
                    let e: Vec<Jet64> = chain[i].iter().zip(&ks[i - 1]).map(|(a, b)| *a - *b).collect();
                    h -= dot(&e, &e) / Jet64::constant(2.0 * self.chain.mu[i - 1]);
                }
                Ok(h)
            }
            Form::RelativeDegreeTwo { config_dim } => {
                let (q, qd) = x.split_at(config_dim);
                let y = self.output.function().eval_jet(q)?;
                let (lifted, d) = Jet64::seed(q, qd);
                let y_dot: Vec<Jet64> = self
                    .output
                    .function()
                    .eval_jet(&lifted)?
                    .iter()
                    .map(|v| v.tangent(d))
                    .collect();
                let k = self.chain.base.eval_jet(&y)?;
                let e: Vec<Jet64> = y_dot.iter().zip(&k).map(|(a, b)| *a - *b).collect();
                Ok(self.constraint().psi_at(&y)?
                    - dot(&e, &e) / Jet64::constant(2.0 * self.chain.mu[0]))
            }
        }
    }

    pub fn h(&self, x: &[f64]) -> Result<f64> {
        Ok(self.h_jet(&constants(x))?.value())
    }

    /// `ψ(y(x))`.
    pub fn psi(&self, x: &[f64]) -> Result<f64> {
        let y = self.output.at_state(&constants(x))?;
        Ok(self.constraint().psi_at(&y)?.value())
    }

    /// Derivative of `h` along `v`.
    pub fn directional(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        ensure_len("direction", self.sys.state_dim(), v.len())?;
        let (lifted, d) = Jet64::seed_real(x, v);
        Ok(self.h_jet(&lifted)?.tangent(d).value())
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.sys.state_dim();
        let mut e = vec![0.0; n];
        (0..n)
            .map(|i| {
                e[i] = 1.0;
                let v = self.directional(x, &e);
                e[i] = 0.0;
                v
            })
            .collect()
    }

    pub fn lf_h(&self, x: &[f64]) -> Result<f64> {
        self.directional(x, &self.sys.drift(x)?)
    }

    pub fn lg_h(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.sys.actuation(x)?;
        (0..self.sys.input_dim())
            .map(|j| {
                let col: Vec<f64> = g.column(j).iter().copied().collect();
                self.directional(x, &col)
            })
            .collect()
    }

    pub fn values(&self, x: &[f64]) -> Result<BarrierValues> {
        Ok(BarrierValues {
            h: self.h(x)?,
            lf_h: self.lf_h(x)?,
            lg_h: self.lg_h(x)?,
        })
    }

    /// `ḣ(x, u) = L_f h + L_g h · u`.
    pub fn h_dot(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        let v = self.values(x)?;
        ensure_len("input", v.lg_h.len(), u.len())?;
        Ok(v.lf_h + dot(&v.lg_h, u))
    }

    /// Terms of the explicit feedback law at `x`.
    pub fn feedback_terms(&self, x: &[f64]) -> Result<FeedbackTerms> {
        ensure_len("state", self.sys.state_dim(), x.len())?;
        let gamma = self.gamma();
        let xj = constants(x);
        let chain = lie_chain(&self.sys, &self.output, &xj, gamma)?;
        let zeta: Vec<Jet64> = chain[..gamma].concat();
        let ks = self.chain.controllers_jet(&zeta, gamma)?;
        let a = values(&lie_g_lie_f_at(&self.sys, &self.output, &xj, gamma - 1)?);
        Ok(FeedbackTerms {
            target: values(&ks[gamma - 1]),
            drift_term: values(&chain[gamma]),
            decoupling: DMatrix::from_row_slice(self.output.dim(), self.sys.input_dim(), &a),
        })
    }
}

/// Rank check of `L_g L_f^{γ−1} y` over the relative-degree domain: the
/// system domain restricted to states whose output lies in the constraint's
/// inflated box. Configuration outputs are sampled over `q` only.
pub fn check_rank_on_constraint(
    sys: &ControlAffineSystem,
    output: &OutputMap,
    constraint: &OutputConstraint,
    seed: u64,
    tol: RankTolerances,
) -> Result<RankReport> {
    let full = sys.domain();
    let domain = match output.kind() {
        OutputDomain::FullState => full.clone(),
        OutputDomain::Configuration => {
            let nq = output.function().input_dim();
            BoxDomain {
                lower: full.lower[..nq].to_vec(),
                upper: full.upper[..nq].to_vec(),
            }
        }
    };
    let e1 = constraint.e1_domain();
    let plan = SamplingPlan::new(domain.clone(), seed)
        .with_grid(grid_size(domain.dim()))
        .with_lhs(2000);
    let y = output.function().clone();
    verify_relative_degree_on(sys, output, &plan, tol, move |point| {
        y.eval(point).map(|v| e1.contains(&v)).unwrap_or(false)
    })
}

/// Assembles a [`CbfCandidate`], running the hypothesis checks unless
/// [`CbfBuilder::unchecked`] is used.
#[derive(Clone, Debug)]
pub struct CbfBuilder {
    sys: ControlAffineSystem,
    output: OutputMap,
    constraint: OutputConstraint,
    alpha: ClassK,
    sigma: f64,
    mu: Option<Vec<f64>>,
    lambda: Option<Vec<f64>>,
    seed: u64,
    checked: bool,
    tolerances: RankTolerances,
    config_dim: Option<usize>,
}

impl CbfBuilder {
    pub fn new(sys: &ControlAffineSystem, output: &OutputMap, constraint: &OutputConstraint) -> Self {
        CbfBuilder {
            sys: sys.clone(),
            output: output.clone(),
            constraint: constraint.clone(),
            alpha: ClassK::default(),
            sigma: 1.0,
            mu: None,
            lambda: None,
            seed: 0,
            checked: true,
            tolerances: RankTolerances::default(),
            config_dim: None,
        }
    }

    pub fn alpha(mut self, alpha: ClassK) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// `μ₁, …, μ_{γ−1}` (default all 1).
    pub fn mu(mut self, mu: Vec<f64>) -> Self {
        self.mu = Some(mu);
        self
    }

    /// `λ₁, …, λ_{γ−1}` (default all `ℓ_α`).
    pub fn lambda(mut self, lambda: Vec<f64>) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tolerances(mut self, tol: RankTolerances) -> Self {
        self.tolerances = tol;
        self
    }

    /// Skips the gain, gradient and rank checks. Meant for negative controls.
    pub fn unchecked(mut self) -> Self {
        self.checked = false;
        self
    }

    /// Uses the relative-degree-two closed form for `h`. Needs a system
    /// converted from Lagrangian form and a configuration output with `γ = 2`.
    pub fn relative_degree_two(mut self) -> Result<Self> {
        let config_dim = self.sys.config_dim().ok_or_else(|| {
            Error::InvalidParameter("relative-degree-two form needs a Lagrangian system".into())
        })?;
        if self.output.kind() != OutputDomain::Configuration {
            return Err(Error::InvalidParameter(
                "relative-degree-two form needs a configuration output".into(),
            ));
        }
        self.output = self.output.with_gamma(2)?;
        self.config_dim = Some(config_dim);
        Ok(self)
    }

    pub fn build(self) -> Result<CbfCandidate> {
        let gamma = self.output.gamma();
        if gamma > MAX_DEPTH {
            return Err(Error::InvalidParameter(format!(
                "relative degree {gamma} exceeds the supported maximum {MAX_DEPTH}"
            )));
        }
        ensure_len("constraint input", self.output.dim(), self.constraint.dim())?;
        let expected = match self.output.kind() {
            OutputDomain::FullState => self.output.function().input_dim(),
            OutputDomain::Configuration => 2 * self.output.function().input_dim(),
        };
        ensure_len("output source", expected, self.sys.state_dim())?;
        let alpha = self.alpha.validated()?;
        let mu = self.mu.clone().unwrap_or_else(|| vec![1.0; gamma - 1]);
        let lambda = self
            .lambda
            .clone()
            .unwrap_or_else(|| vec![alpha.lipschitz(); gamma - 1]);
        check_gains(gamma, &alpha, &mu, &lambda, self.checked)?;
        let base = SontagController::new_unchecked(self.constraint.clone(), alpha, self.sigma)?;

        let (mut gradient_report, mut rank_report) = (None, None);
        if self.checked {
            let plan = self.constraint.gradient_plan(self.seed);
            gradient_report = Some(self.constraint.check_gradient_condition(&plan, GRAD_TOL)?);
            let report = check_rank_on_constraint(
                &self.sys,
                &self.output,
                &self.constraint,
                self.seed,
                self.tolerances,
            )?;
            if !report.rank_ok {
                let (witness, sigma_min) = report
                    .witnesses
                    .first()
                    .map(|w| (w.state.clone(), w.sigma_min))
                    .unwrap_or_else(|| (report.argmin.clone(), report.min_singular_value));
                return Err(Error::RankDeficientOnC { witness, sigma_min });
            }
            rank_report = Some(report);
        }

        let form = match self.config_dim {
            Some(config_dim) => Form::RelativeDegreeTwo { config_dim },
            None => Form::General,
        };
        let metadata = CandidateMetadata {
            model: self.sys.name().to_string(),
            output: self.output.name().to_string(),
            constraint: self.constraint.name().to_string(),
            form: match form {
                Form::General => "backstepping",
                Form::RelativeDegreeTwo { .. } => "relative-degree-2",
            },
            gamma,
            output_dim: self.output.dim(),
            input_dim: self.sys.input_dim(),
            alpha,
            lipschitz: alpha.lipschitz(),
            sigma: self.sigma,
            mu: mu.clone(),
            lambda: lambda.clone(),
            checked: self.checked,
            gradient_report,
            rank_report,
        };
        Ok(CbfCandidate {
            sys: self.sys,
            output: self.output.clone(),
            chain: VirtualControllerChain {
                base,
                mu,
                lambda,
                p: self.output.dim(),
                gamma,
            },
            form,
            metadata,
        })
    }
}

/// Backstepped candidate with all hypotheses checked.
pub fn build_cbf(
    sys: &ControlAffineSystem,
    output: &OutputMap,
    constraint: &OutputConstraint,
    alpha: ClassK,
    mu: &[f64],
    lambda: &[f64],
) -> Result<CbfCandidate> {
    CbfBuilder::new(sys, output, constraint)
        .alpha(alpha)
        .mu(mu.to_vec())
        .lambda(lambda.to_vec())
        .build()
}

/// Relative-degree-two candidate
/// `h = ψ(y(q)) − ‖(∂y/∂q)q̇ − k₁(y(q))‖²/(2μ)` for a Lagrangian system.
pub fn cbf_relative_degree2(
    sys: &LagrangianSystem,
    output: &OutputMap,
    constraint: &OutputConstraint,
    alpha: ClassK,
    mu: f64,
    sigma: f64,
) -> Result<CbfCandidate> {
    let affine = to_control_affine(sys)?;
    CbfBuilder::new(&affine, output, constraint)
        .alpha(alpha)
        .sigma(sigma)
        .mu(vec![mu])
        .relative_degree_two()?
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::sontag::sontag_phi;
    use crate::systems::zoo::integrator_chain;

    fn double() -> CbfCandidate {
        let sys = integrator_chain("double-integrator", 2).unwrap();
        let y = OutputMap::select("x1", &[0], 2, 2, OutputDomain::FullState).unwrap();
        let c = OutputConstraint::band(0.0, 1.0).unwrap();
        build_cbf(&sys, &y, &c, ClassK::default(), &[1.0], &[1.0]).unwrap()
    }

    fn k1(y: f64) -> f64 {
        let psi = 1.0 - y * y;
        let g = -2.0 * y;
        sontag_phi(psi, g * g, 1.0).unwrap() * g
    }

    #[test]
    fn double_integrator_matches_hand_expansion() {
        let cbf = double();
        for &x in &[[0.3, -0.4], [-0.9, 1.2], [0.0, 0.0], [0.5, k1(0.5)]] {
            let expect = 1.0 - x[0] * x[0] - 0.5 * (x[1] - k1(x[0])).powi(2);
            assert!((cbf.h(&x).unwrap() - expect).abs() < 1e-14);
        }
        let x = [0.5, k1(0.5)];
        assert!((cbf.h(&x).unwrap() - cbf.psi(&x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn gains_are_validated() {
        let sys = integrator_chain("triple", 3).unwrap();
        let y = OutputMap::select("x1", &[0], 3, 3, OutputDomain::FullState).unwrap();
        let c = OutputConstraint::band(0.0, 1.0).unwrap();
        let err = build_cbf(&sys, &y, &c, ClassK::default(), &[1.0, 1.0], &[0.0, 1.0]);
        assert!(matches!(err, Err(Error::GainTooSmall { index: 1, .. })));
        let ok = CbfBuilder::new(&sys, &y, &c).lambda(vec![0.0, 1.0]).unchecked().build();
        assert!(ok.is_ok());
        let err = build_cbf(&sys, &y, &c, ClassK::default(), &[1.0], &[1.0, 1.0]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn chain_derivative_is_flow_derivative() {
        let cbf = double();
        let (y, v) = (0.37, -0.8);
        let kd = cbf.chain().derivative(1, &[y, v]).unwrap()[0];
        let eps = 1e-6;
        let fd = (k1(y + eps * v) - k1(y - eps * v)) / (2.0 * eps);
        assert!((kd - fd).abs() < 1e-6);
    }
}
