//! Lie derivatives, output coordinates and relative-degree checks.
//!
//! `L_f^k y` is computed by seeding the state along `f(x)` once per order,
//! so a single nested evaluation yields the whole chain `y, L_f y, …`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::autodiff::{constants, values, JetFn, ScalarMap, SharedFn};
use crate::error::{ensure_len, Error, Result};
use crate::linalg::sigma_min;
use crate::sampling::{explore, spread, SamplingPlan};
use crate::scalar::Scalar;
use crate::systems::{ControlAffineSystem, LagrangianSystem};
use crate::Jet64;

/// What an output is a function of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OutputDomain {
    FullState,
    /// `y(q)` for a state `x = (q, q̇)`.
    Configuration,
}

/// Smooth output `y` with a claimed uniform relative degree.
#[derive(Clone)]
pub struct OutputMap {
    name: String,
    y: SharedFn,
    gamma: usize,
    kind: OutputDomain,
}

impl std::fmt::Debug for OutputMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OutputMap")
            .field("name", &self.name)
            .field("p", &self.dim())
            .field("gamma", &self.gamma)
            .field("kind", &self.kind)
            .finish()
    }
}

impl OutputMap {
    pub fn new(name: impl Into<String>, y: SharedFn, gamma: usize, kind: OutputDomain) -> Result<Self> {
        if gamma == 0 {
            return Err(Error::InvalidParameter("relative degree must be at least 1".into()));
        }
        Ok(OutputMap {
            name: name.into(),
            y,
            gamma,
            kind,
        })
    }

    /// Output selecting coordinates `indices` of a `source_dim`-vector.
    pub fn select(
        name: impl Into<String>,
        indices: &[usize],
        source_dim: usize,
        gamma: usize,
        kind: OutputDomain,
    ) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= source_dim) {
            return Err(Error::InvalidParameter(format!(
                "output coordinate {bad} out of range for dimension {source_dim}"
            )));
        }
        let map = Selection {
            indices: indices.to_vec(),
            source_dim,
        };
        Self::new(name, Arc::new(map), gamma, kind)
    }

    /// Linear output `y = M v` with `M` row-major `rows × source_dim`.
    pub fn linear(
        name: impl Into<String>,
        matrix: Vec<f64>,
        rows: usize,
        source_dim: usize,
        gamma: usize,
        kind: OutputDomain,
    ) -> Result<Self> {
        ensure_len("linear output matrix", rows * source_dim, matrix.len())?;
        let map = Linear {
            matrix,
            rows,
            source_dim,
        };
        Self::new(name, Arc::new(map), gamma, kind)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.y.output_dim()
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn kind(&self) -> OutputDomain {
        self.kind
    }

    pub fn function(&self) -> &SharedFn {
        &self.y
    }

    /// Same output with a different claimed relative degree.
    pub fn with_gamma(&self, gamma: usize) -> Result<Self> {
        Self::new(self.name.clone(), self.y.clone(), gamma, self.kind)
    }

    /// `y` evaluated at a full state.
    pub fn at_state(&self, x: &[Jet64]) -> Result<Vec<Jet64>> {
        match self.kind {
            OutputDomain::FullState => self.y.eval_jet(x),
            OutputDomain::Configuration => {
                let nq = self.y.input_dim();
                if x.len() != 2 * nq {
                    return Err(Error::DimensionMismatch {
                        context: "state for configuration output".into(),
                        expected: 2 * nq,
                        found: x.len(),
                    });
                }
                self.y.eval_jet(&x[..nq])
            }
        }
    }

    fn check_system(&self, sys: &ControlAffineSystem) -> Result<()> {
        let expected = match self.kind {
            OutputDomain::FullState => self.y.input_dim(),
            OutputDomain::Configuration => 2 * self.y.input_dim(),
        };
        ensure_len("output source", expected, sys.state_dim())
    }
}

struct Selection {
    indices: Vec<usize>,
    source_dim: usize,
}

impl ScalarMap for Selection {
    fn input_dim(&self) -> usize {
        self.source_dim
    }
    fn output_dim(&self) -> usize {
        self.indices.len()
    }
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.indices.iter().map(|&i| x[i]).collect()
    }
    fn label(&self) -> &str {
        "coordinate output"
    }
}

struct Linear {
    matrix: Vec<f64>,
    rows: usize,
    source_dim: usize,
}

impl ScalarMap for Linear {
    fn input_dim(&self) -> usize {
        self.source_dim
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        (0..self.rows)
            .map(|r| {
                (0..self.source_dim).fold(S::zero(), |acc, c| {
                    acc + S::from_f64(self.matrix[r * self.source_dim + c]) * x[c]
                })
            })
            .collect()
    }
    fn label(&self) -> &str {
        "linear output"
    }
}

/// `[y, L_f y, …, L_f^k y]` at `x`.
pub fn lie_chain(
    sys: &ControlAffineSystem,
    y: &OutputMap,
    x: &[Jet64],
    k: usize,
) -> Result<Vec<Vec<Jet64>>> {
    if k == 0 {
        return Ok(vec![y.at_state(x)?]);
    }
    let fx = sys.drift_at(x)?;
    let (lifted, d) = Jet64::seed(x, &fx);
    let inner = lie_chain(sys, y, &lifted, k - 1)?;
    let mut out: Vec<Vec<Jet64>> = inner
        .iter()
        .map(|level| level.iter().map(|v| v.primal(d)).collect())
        .collect();
    let top = inner.last().expect("chain is non-empty");
    out.push(top.iter().map(|v| v.tangent(d)).collect());
    Ok(out)
}

/// `L_g L_f^k y` at `x`, row-major `p × m`.
pub fn lie_g_lie_f_at(
    sys: &ControlAffineSystem,
    y: &OutputMap,
    x: &[Jet64],
    k: usize,
) -> Result<Vec<Jet64>> {
    let (p, m) = (y.dim(), sys.input_dim());
    let g = sys.actuation_at(x)?;
    let n = sys.state_dim();
    let mut out = vec![Jet64::constant(0.0); p * m];
    for j in 0..m {
        let col: Vec<Jet64> = (0..n).map(|i| g[i * m + j]).collect();
        let (lifted, d) = Jet64::seed(x, &col);
        let chain = lie_chain(sys, y, &lifted, k)?;
        for (r, v) in chain[k].iter().enumerate() {
            out[r * m + j] = v.tangent(d);
        }
    }
    Ok(out)
}

/// `L_f^order y` as a smooth function of the state.
pub fn lie_f(sys: &ControlAffineSystem, y: &OutputMap, order: usize) -> Result<SharedFn> {
    y.check_system(sys)?;
    let (sys, y) = (sys.clone(), y.clone());
    let (n, p) = (sys.state_dim(), y.dim());
    Ok(Arc::new(JetFn::new(n, p, move |x: &[Jet64]| {
        Ok(lie_chain(&sys, &y, x, order)?.pop().expect("non-empty"))
    })))
}

/// `L_g L_f^order y` as a smooth function returning a row-major `p × m` matrix.
pub fn lie_g_lie_f(sys: &ControlAffineSystem, y: &OutputMap, order: usize) -> Result<SharedFn> {
    y.check_system(sys)?;
    let (sys, y) = (sys.clone(), y.clone());
    let (n, pm) = (sys.state_dim(), y.dim() * sys.input_dim());
    Ok(Arc::new(JetFn::new(n, pm, move |x: &[Jet64]| {
        lie_g_lie_f_at(&sys, &y, x, order)
    })))
}

/// `A(q) = (∂y/∂q) D(q)⁻¹ B(q)` for a configuration output, row-major `p × m`.
pub fn decoupling_matrix(sys: &LagrangianSystem, y: &OutputMap) -> Result<SharedFn> {
    if y.kind() != OutputDomain::Configuration {
        return Err(Error::InvalidParameter(
            "decoupling matrix needs a configuration output".into(),
        ));
    }
    let (n, m, p) = (sys.config_dim(), sys.input_dim(), y.dim());
    ensure_len("output source", n, y.function().input_dim())?;
    let (sys, y) = (sys.clone(), y.clone());
    Ok(Arc::new(JetFn::new(n, p * m, move |q: &[Jet64]| {
        let dinv_b = sys.inverse_inertia_actuation(q)?;
        let mut out = vec![Jet64::constant(0.0); p * m];
        for j in 0..m {
            let col: Vec<Jet64> = (0..n).map(|i| dinv_b[i * m + j]).collect();
            let (lifted, d) = Jet64::seed(q, &col);
            for (r, v) in y.function().eval_jet(&lifted)?.iter().enumerate() {
                out[r * m + j] = v.tangent(d);
            }
        }
        Ok(out)
    })))
}

/// Stacked `η = (η₁, …, η_γ)` with `ηᵢ = L_f^{i−1} y(x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputCoordinates {
    pub eta: Vec<f64>,
    pub p: usize,
    pub gamma: usize,
}

impl OutputCoordinates {
    /// `ηᵢ`, one-based.
    pub fn eta_i(&self, i: usize) -> &[f64] {
        &self.eta[(i - 1) * self.p..i * self.p]
    }

    /// `ζⱼ = (η₁, …, ηⱼ)`.
    pub fn zeta(&self, j: usize) -> &[f64] {
        &self.eta[..j * self.p]
    }
}

pub fn output_coordinates(
    sys: &ControlAffineSystem,
    y: &OutputMap,
    x: &[f64],
) -> Result<OutputCoordinates> {
    y.check_system(sys)?;
    ensure_len("state", sys.state_dim(), x.len())?;
    let chain = lie_chain(sys, y, &constants(x), y.gamma() - 1)?;
    Ok(OutputCoordinates {
        eta: chain.iter().flat_map(|v| values(v)).collect(),
        p: y.dim(),
        gamma: y.gamma(),
    })
}

/// Tolerances for [`verify_relative_degree`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankTolerances {
    pub rank_tol: f64,
    pub zero_tol: f64,
}

impl Default for RankTolerances {
    fn default() -> Self {
        RankTolerances {
            rank_tol: 1e-6,
            zero_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankWitness {
    pub state: Vec<f64>,
    pub sigma_min: f64,
    /// Largest `‖L_g L_f^i y‖` over `i ≤ γ − 2`.
    pub lower_order_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub sampled_points: usize,
    pub min_singular_value: f64,
    pub argmin: Vec<f64>,
    pub max_lower_order_norm: f64,
    pub rank_ok: bool,
    pub rank_tol: f64,
    pub zero_tol: f64,
    /// Failing states, worst first and spread over the domain (at most
    /// [`MAX_WITNESSES`]).
    pub witnesses: Vec<RankWitness>,
    pub failures: usize,
}

pub const MAX_WITNESSES: usize = 20;

struct PointCheck {
    state: Vec<f64>,
    sigma: f64,
    lower: f64,
}

fn check_point(sys: &ControlAffineSystem, y: &OutputMap, x: &[f64]) -> Result<PointCheck> {
    let (p, m, gamma) = (y.dim(), sys.input_dim(), y.gamma());
    let xj = constants(x);
    let mut lower: f64 = 0.0;
    for i in 0..gamma.saturating_sub(1) {
        let lg = lie_g_lie_f_at(sys, y, &xj, i)?;
        let norm = values(&lg).iter().map(|v| v * v).sum::<f64>().sqrt();
        lower = lower.max(norm);
    }
    let a = values(&lie_g_lie_f_at(sys, y, &xj, gamma - 1)?);
    let sigma = if p > m {
        0.0
    } else {
        sigma_min(&DMatrix::from_row_slice(p, m, &a))
    };
    Ok(PointCheck {
        state: x.to_vec(),
        sigma,
        lower,
    })
}

/// Samples the plan's domain and checks Definition-style relative-degree
/// conditions at every point.
///
/// For configuration outputs the plan's domain is over `q` and velocities
/// are set to zero. Points where `accept` is false are skipped; points where
/// evaluation fails count as failures with `σ = 0`.
pub fn verify_relative_degree_on<A>(
    sys: &ControlAffineSystem,
    y: &OutputMap,
    plan: &SamplingPlan,
    tol: RankTolerances,
    accept: A,
) -> Result<RankReport>
where
    A: Fn(&[f64]) -> bool + Sync,
{
    y.check_system(sys)?;
    let lift = |point: &[f64]| -> Vec<f64> {
        match y.kind() {
            OutputDomain::FullState => point.to_vec(),
            OutputDomain::Configuration => {
                let mut x = point.to_vec();
                x.resize(2 * point.len(), 0.0);
                x
            }
        }
    };
    let expected = match y.kind() {
        OutputDomain::FullState => sys.state_dim(),
        OutputDomain::Configuration => sys.state_dim() / 2,
    };
    ensure_len("sampling domain", expected, plan.domain.dim())?;

    let samples = explore(plan, |point| {
        if !accept(point) {
            return None;
        }
        let x = lift(point);
        let check = check_point(sys, y, &x).unwrap_or(PointCheck {
            state: x,
            sigma: 0.0,
            lower: f64::INFINITY,
        });
        Some((check.sigma, check))
    });

    let mut report = RankReport {
        sampled_points: samples.len(),
        min_singular_value: f64::INFINITY,
        argmin: Vec::new(),
        max_lower_order_norm: 0.0,
        rank_ok: true,
        rank_tol: tol.rank_tol,
        zero_tol: tol.zero_tol,
        witnesses: Vec::new(),
        failures: 0,
    };
    let mut failing = Vec::new();
    for s in samples {
        let c = s.payload;
        if c.sigma < report.min_singular_value || report.argmin.is_empty() {
            report.min_singular_value = c.sigma;
            report.argmin = c.state.clone();
        }
        report.max_lower_order_norm = report.max_lower_order_norm.max(c.lower);
        if !(c.sigma > tol.rank_tol) || !(c.lower <= tol.zero_tol) {
            failing.push(RankWitness {
                state: c.state,
                sigma_min: c.sigma,
                lower_order_norm: c.lower,
            });
        }
    }
    report.failures = failing.len();
    report.rank_ok = failing.is_empty() && report.sampled_points > 0;
    failing.sort_by(|a, b| a.sigma_min.total_cmp(&b.sigma_min));
    report.witnesses = spread(&plan.domain, failing, |w| &w.state, 0.05, MAX_WITNESSES);
    Ok(report)
}

pub fn verify_relative_degree(
    sys: &ControlAffineSystem,
    y: &OutputMap,
    plan: &SamplingPlan,
    tol: RankTolerances,
) -> Result<RankReport> {
    verify_relative_degree_on(sys, y, plan, tol, |_| true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::zoo::integrator_chain;

    fn double() -> (ControlAffineSystem, OutputMap) {
        let sys = integrator_chain("double", 2).unwrap();
        let y = OutputMap::select("x1", &[0], 2, 2, OutputDomain::FullState).unwrap();
        (sys, y)
    }

    #[test]
    fn double_integrator_lie_derivatives() {
        let (sys, y) = double();
        let x = [0.7, -1.3];
        assert_eq!(lie_f(&sys, &y, 0).unwrap().eval(&x).unwrap(), vec![0.7]);
        assert_eq!(lie_f(&sys, &y, 1).unwrap().eval(&x).unwrap(), vec![-1.3]);
        assert_eq!(lie_g_lie_f(&sys, &y, 0).unwrap().eval(&x).unwrap(), vec![0.0]);
        assert_eq!(lie_g_lie_f(&sys, &y, 1).unwrap().eval(&x).unwrap(), vec![1.0]);
    }

    #[test]
    fn coordinates_stack_lie_chain() {
        let (sys, y) = double();
        let c = output_coordinates(&sys, &y, &[1.0, 2.0]).unwrap();
        assert_eq!(c.eta, vec![1.0, 2.0]);
        assert_eq!(c.eta_i(2), &[2.0]);
        assert_eq!(c.zeta(1), &[1.0]);
        let y1 = y.with_gamma(1).unwrap();
        assert_eq!(output_coordinates(&sys, &y1, &[1.0, 2.0]).unwrap().eta, vec![1.0]);
    }

    #[test]
    fn double_integrator_rank_report() {
        let (sys, y) = double();
        let plan = SamplingPlan::new(sys.domain().clone(), 1).with_grid(5).with_lhs(50);
        let r = verify_relative_degree(&sys, &y, &plan, RankTolerances::default()).unwrap();
        assert!(r.rank_ok);
        assert_eq!(r.min_singular_value, 1.0);
        let bad = y.with_gamma(1).unwrap();
        let r = verify_relative_degree(&sys, &bad, &plan, RankTolerances::default()).unwrap();
        assert!(!r.rank_ok);
        assert_eq!(r.min_singular_value, 0.0);
    }
}
