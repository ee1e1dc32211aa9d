//! Safety filtering with a synthesized barrier: the single-constraint QP in
//! closed form, and the explicit feedback law that certifies the barrier.

use serde::Serialize;

use crate::error::{ensure_len, Error, Result};
use crate::linalg::{right_pseudo_solve, sigma_min};
use crate::sampling::{explore, spread, BoxDomain, SamplingPlan};
use crate::scalar::dot;
use crate::synthesis::constraint::grid_size;
use crate::synthesis::{CbfCandidate, ClassK};

/// Below this `‖L_g h‖` the input has no effect on `ḣ`.
pub const LG_ZERO_TOL: f64 = 1e-12;
/// Singular-value cutoff for the explicit feedback law.
pub const PSEUDO_INVERSE_TOL: f64 = 1e-8;
/// `𝒮` is inflated to `h ≥ −δ` when verifying the barrier condition.
pub const DEFAULT_INFLATION: f64 = 0.1;
pub const DEFAULT_CONDITION_SAMPLES: usize = 10_000;

/// Result of one filter evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterDecision {
    pub u_desired: Vec<f64>,
    pub u_safe: Vec<f64>,
    /// `L_f h + L_g h · u_safe + α(h)`.
    pub constraint_value: f64,
    pub active: bool,
    pub h: f64,
}

/// Minimizes `½‖u − u_d‖²` subject to `lf_plus_alpha + lg · u ≥ 0`.
///
/// Returns `(u, active, constraint value)`.
pub fn project_halfspace(lf_plus_alpha: f64, lg: &[f64], u_desired: &[f64]) -> Result<(Vec<f64>, bool, f64)> {
    ensure_len("desired input", lg.len(), u_desired.len())?;
    let norm2 = dot(lg, lg);
    if norm2.sqrt() <= LG_ZERO_TOL {
        if lf_plus_alpha < 0.0 {
            return Err(Error::InfeasibleAtState { lf_plus_alpha });
        }
        return Ok((u_desired.to_vec(), false, lf_plus_alpha + dot(lg, u_desired)));
    }
    let slack = lf_plus_alpha + dot(lg, u_desired);
    if slack >= 0.0 {
        return Ok((u_desired.to_vec(), false, slack));
    }
    let scale = -slack / norm2;
    let u: Vec<f64> = u_desired.iter().zip(lg).map(|(ud, g)| ud + scale * g).collect();
    let value = lf_plus_alpha + dot(lg, &u);
    Ok((u, true, value))
}

/// `argmin ½‖u − u_d‖²` s.t. `L_f h + L_g h · u ≥ −α(h)`.
pub fn qp_filter(cbf: &CbfCandidate, x: &[f64], u_desired: &[f64], alpha: ClassK) -> Result<FilterDecision> {
    let v = cbf.values(x)?;
    let lf_plus_alpha = v.lf_h + alpha.eval(v.h);
    let (u_safe, active, constraint_value) = project_halfspace(lf_plus_alpha, &v.lg_h, u_desired)?;
    Ok(FilterDecision {
        u_desired: u_desired.to_vec(),
        u_safe,
        constraint_value,
        active,
        h: v.h,
    })
}

/// The explicit smooth controller `A(x)† (k_γ − L_f^γ y)`.
pub fn universal_controller(cbf: &CbfCandidate, x: &[f64]) -> Result<Vec<f64>> {
    let t = cbf.feedback_terms(x)?;
    let rhs: Vec<f64> = t.target.iter().zip(&t.drift_term).map(|(k, d)| k - d).collect();
    right_pseudo_solve(&t.decoupling, &rhs, PSEUDO_INVERSE_TOL)
}

/// A state where `ḣ + α(h)` under the explicit controller is not positive.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionWitness {
    pub state: Vec<f64>,
    pub h: f64,
    /// `None` when the controller is undefined at the state.
    pub margin: Option<f64>,
    pub sigma_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CbfConditionReport {
    pub sampled_points: usize,
    pub required_points: usize,
    pub inflation: f64,
    pub min_margin: f64,
    pub argmin: Vec<f64>,
    pub min_sigma: f64,
    pub violations: usize,
    pub witnesses: Vec<ConditionWitness>,
    pub passed: bool,
}

/// Rejection plan over the system domain aiming for `samples` accepted
/// points; pair it with [`verify_cbf_condition`].
pub fn condition_plan(cbf: &CbfCandidate, samples: usize, seed: u64) -> SamplingPlan {
    let domain: BoxDomain = cbf.system().domain().clone();
    let grid = grid_size(domain.dim());
    SamplingPlan::new(domain, seed)
        .with_grid(grid)
        .with_lhs(1000)
        .with_min_accepted(samples)
        .with_max_batches(2000)
}

struct PointCondition {
    state: Vec<f64>,
    h: f64,
    margin: Option<f64>,
    sigma: f64,
}

fn condition_at(cbf: &CbfCandidate, x: &[f64]) -> Result<PointCondition> {
    let v = cbf.values(x)?;
    let t = cbf.feedback_terms(x)?;
    let sigma = sigma_min(&t.decoupling);
    let margin = universal_controller(cbf, x)
        .ok()
        .map(|u| v.lf_h + dot(&v.lg_h, &u) + cbf.alpha().eval(v.h))
        .filter(|m| m.is_finite());
    Ok(PointCondition {
        state: x.to_vec(),
        h: v.h,
        margin,
        sigma,
    })
}

/// Samples `h ≥ −inflation` and evaluates `ḣ(x, k(x)) + α(h(x))` under
/// [`universal_controller`]. States where the controller is undefined count
/// as violations.
pub fn verify_cbf_condition(cbf: &CbfCandidate, plan: &SamplingPlan, inflation: f64) -> CbfConditionReport {
    let samples = explore(plan, |x| {
        let h = cbf.h(x).ok()?;
        if !(h >= -inflation) {
            return None;
        }
        let c = condition_at(cbf, x).unwrap_or(PointCondition {
            state: x.to_vec(),
            h,
            margin: None,
            sigma: 0.0,
        });
        let score = c.margin.unwrap_or(f64::NEG_INFINITY).min(c.sigma);
        Some((score, c))
    });

    let mut report = CbfConditionReport {
        sampled_points: samples.len(),
        required_points: plan.min_accepted,
        inflation,
        min_margin: f64::INFINITY,
        argmin: Vec::new(),
        min_sigma: f64::INFINITY,
        violations: 0,
        witnesses: Vec::new(),
        passed: false,
    };
    let mut failing = Vec::new();
    for s in samples {
        let c = s.payload;
        let margin = c.margin.unwrap_or(f64::NEG_INFINITY);
        if margin < report.min_margin || report.argmin.is_empty() {
            report.min_margin = margin;
            report.argmin = c.state.clone();
        }
        report.min_sigma = report.min_sigma.min(c.sigma);
        if !(margin > 0.0) {
            failing.push(ConditionWitness {
                state: c.state,
                h: c.h,
                margin: c.margin,
                sigma_min: c.sigma,
            });
        }
    }
    report.violations = failing.len();
    failing.sort_by(|a, b| {
        let key = |w: &ConditionWitness| w.margin.unwrap_or(f64::NEG_INFINITY);
        key(a).total_cmp(&key(b))
    });
    report.witnesses = spread(&plan.domain, failing, |w| &w.state, 0.05, 20);
    report.passed = report.violations == 0 && report.sampled_points >= report.required_points;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfspace_cases() {
        let (u, active, value) = project_halfspace(2.0, &[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_eq!(u, vec![0.5, 0.5]);
        assert!(!active && value == 2.5);
        let (u, active, value) = project_halfspace(-1.0, &[1.0], &[0.0]).unwrap();
        assert_eq!(u, vec![1.0]);
        assert!(active && value.abs() < 1e-15);
        assert!(project_halfspace(0.0, &[0.0], &[3.0]).is_ok());
        assert!(matches!(
            project_halfspace(-0.5, &[1e-13], &[3.0]),
            Err(Error::InfeasibleAtState { .. })
        ));
    }
}
