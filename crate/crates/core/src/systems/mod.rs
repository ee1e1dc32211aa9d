//! Control-affine and Lagrangian system descriptions.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::autodiff::{Evaluable, JetFn, ScalarMap, SharedFn, SmoothFn};
use crate::error::{ensure_len, Result};
use crate::linalg::solve_checked;
use crate::sampling::BoxDomain;
use crate::scalar::Scalar;
use crate::Jet64;

pub mod zoo;

pub use zoo::{model_names, zoo_entry, ModelZooEntry, Parameter, ZooSystem};

/// `ẋ = f(x) + g(x)u` with `g` stored row-major as an `n × m` matrix.
#[derive(Clone)]
pub struct ControlAffineSystem {
    name: String,
    n: usize,
    m: usize,
    f: SharedFn,
    g: SharedFn,
    domain: BoxDomain,
    config_dim: Option<usize>,
}

impl std::fmt::Debug for ControlAffineSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl ControlAffineSystem {
    pub fn new(
        name: impl Into<String>,
        f: SharedFn,
        g: SharedFn,
        m: usize,
        domain: BoxDomain,
    ) -> Result<Self> {
        let n = f.input_dim();
        ensure_len("drift output", n, f.output_dim())?;
        ensure_len("actuation input", n, g.input_dim())?;
        ensure_len("actuation output", n * m, g.output_dim())?;
        ensure_len("state domain", n, domain.dim())?;
        Ok(ControlAffineSystem {
            name: name.into(),
            n,
            m,
            f,
            g,
            domain,
            config_dim: None,
        })
    }

    /// Builds a system from generic model code.
    pub fn from_maps<F, G>(
        name: impl Into<String>,
        f: F,
        g: G,
        m: usize,
        domain: BoxDomain,
    ) -> Result<Self>
    where
        F: ScalarMap + 'static,
        G: ScalarMap + 'static,
    {
        Self::new(name, Arc::new(f), Arc::new(g), m, domain)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Configuration dimension when the state is `(q, q̇)`.
    pub fn config_dim(&self) -> Option<usize> {
        self.config_dim
    }

    pub fn drift_fn(&self) -> &SharedFn {
        &self.f
    }

    pub fn actuation_fn(&self) -> &SharedFn {
        &self.g
    }

    pub fn drift_at<S: Evaluable>(&self, x: &[S]) -> Result<Vec<S>> {
        S::call(&*self.f, x)
    }

    /// Row-major `n × m` actuation matrix.
    pub fn actuation_at<S: Evaluable>(&self, x: &[S]) -> Result<Vec<S>> {
        S::call(&*self.g, x)
    }

    /// Column `j` of the actuation matrix.
    pub fn actuation_column<S: Evaluable>(&self, x: &[S], j: usize) -> Result<Vec<S>> {
        let g = self.actuation_at(x)?;
        Ok((0..self.n).map(|i| g[i * self.m + j]).collect())
    }

    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.f.eval(x)
    }

    pub fn actuation(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(self.n, self.m, &self.g.eval(x)?))
    }

    /// `f(x) + g(x)u`.
    pub fn field(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        ensure_len("input", self.m, u.len())?;
        let mut dx = self.f.eval(x)?;
        let g = self.g.eval(x)?;
        for (i, d) in dx.iter_mut().enumerate() {
            for (j, uj) in u.iter().enumerate() {
                *d += g[i * self.m + j] * uj;
            }
        }
        Ok(dx)
    }
}

/// The closed-loop vector field `x ↦ f(x) + g(x)k(x)`.
pub fn closed_loop_field(sys: &ControlAffineSystem, k: SharedFn) -> Result<SharedFn> {
    ensure_len("feedback input", sys.state_dim(), k.input_dim())?;
    ensure_len("feedback output", sys.input_dim(), k.output_dim())?;
    let sys = sys.clone();
    let (n, m) = (sys.state_dim(), sys.input_dim());
    Ok(Arc::new(JetFn::new(n, n, move |x: &[Jet64]| {
        let mut dx = sys.drift_at(x)?;
        let g = sys.actuation_at(x)?;
        let u = k.eval_jet(x)?;
        for (i, d) in dx.iter_mut().enumerate() {
            for (j, uj) in u.iter().enumerate() {
                *d += g[i * m + j] * *uj;
            }
        }
        Ok(dx)
    })))
}

/// Generic description of `D(q)q̈ + C(q, q̇)q̇ + G(q) = B(q)u`.
///
/// Matrices are returned row-major.
pub trait LagrangianModel: Send + Sync {
    fn config_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn inertia<S: Scalar>(&self, q: &[S]) -> Vec<S>;
    fn coriolis<S: Scalar>(&self, q: &[S], qd: &[S]) -> Vec<S>;
    fn potential<S: Scalar>(&self, q: &[S]) -> Vec<S>;
    fn actuation<S: Scalar>(&self, q: &[S]) -> Vec<S>;
}

macro_rules! model_part {
    ($name:ident, $label:literal, $in:expr, $out:expr, |$m:ident, $x:ident| $body:expr) => {
        struct $name<M>(Arc<M>);
        impl<M: LagrangianModel> ScalarMap for $name<M> {
            fn input_dim(&self) -> usize {
                let $m = &*self.0;
                $in
            }
            fn output_dim(&self) -> usize {
                let $m = &*self.0;
                $out
            }
            fn apply<S: Scalar>(&self, $x: &[S]) -> Vec<S> {
                let $m = &*self.0;
                $body
            }
            fn label(&self) -> &str {
                $label
            }
        }
    };
}

model_part!(InertiaPart, "inertia", m.config_dim(), m.config_dim().pow(2), |m, q| m
    .inertia(q));
model_part!(
    CoriolisPart,
    "coriolis",
    2 * m.config_dim(),
    m.config_dim().pow(2),
    |m, x| m.coriolis(&x[..m.config_dim()], &x[m.config_dim()..])
);
model_part!(PotentialPart, "potential", m.config_dim(), m.config_dim(), |m, q| m
    .potential(q));
model_part!(
    ActuationPart,
    "actuation",
    m.config_dim(),
    m.config_dim() * m.input_dim(),
    |m, q| m.actuation(q)
);

/// A Lagrangian system with its matrices as smooth functions.
///
/// `coriolis` takes the stacked state `(q, q̇)`.
#[derive(Clone)]
pub struct LagrangianSystem {
    pub name: String,
    n: usize,
    m: usize,
    inertia: SharedFn,
    coriolis: SharedFn,
    potential: SharedFn,
    actuation: SharedFn,
    config_domain: BoxDomain,
    velocity_domain: BoxDomain,
}

impl LagrangianSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        inertia: SharedFn,
        coriolis: SharedFn,
        potential: SharedFn,
        actuation: SharedFn,
        m: usize,
        config_domain: BoxDomain,
        velocity_domain: BoxDomain,
    ) -> Result<Self> {
        let n = inertia.input_dim();
        ensure_len("inertia output", n * n, inertia.output_dim())?;
        ensure_len("coriolis input", 2 * n, coriolis.input_dim())?;
        ensure_len("coriolis output", n * n, coriolis.output_dim())?;
        ensure_len("potential input", n, potential.input_dim())?;
        ensure_len("potential output", n, potential.output_dim())?;
        ensure_len("actuation input", n, actuation.input_dim())?;
        ensure_len("actuation output", n * m, actuation.output_dim())?;
        ensure_len("configuration domain", n, config_domain.dim())?;
        ensure_len("velocity domain", n, velocity_domain.dim())?;
        Ok(LagrangianSystem {
            name: name.into(),
            n,
            m,
            inertia,
            coriolis,
            potential,
            actuation,
            config_domain,
            velocity_domain,
        })
    }

    pub fn from_model<M: LagrangianModel + 'static>(
        name: impl Into<String>,
        model: M,
        config_domain: BoxDomain,
        velocity_domain: BoxDomain,
    ) -> Result<Self> {
        let model = Arc::new(model);
        let m = model.input_dim();
        Self::new(
            name,
            Arc::new(InertiaPart(model.clone())),
            Arc::new(CoriolisPart(model.clone())),
            Arc::new(PotentialPart(model.clone())),
            Arc::new(ActuationPart(model)),
            m,
            config_domain,
            velocity_domain,
        )
    }

    pub fn config_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn config_domain(&self) -> &BoxDomain {
        &self.config_domain
    }

    pub fn velocity_domain(&self) -> &BoxDomain {
        &self.velocity_domain
    }

    pub fn state_domain(&self) -> BoxDomain {
        let mut lower = self.config_domain.lower.clone();
        lower.extend_from_slice(&self.velocity_domain.lower);
        let mut upper = self.config_domain.upper.clone();
        upper.extend_from_slice(&self.velocity_domain.upper);
        BoxDomain { lower, upper }
    }

    pub fn inertia_at<S: Evaluable>(&self, q: &[S]) -> Result<Vec<S>> {
        S::call(&*self.inertia, q)
    }

    pub fn coriolis_at<S: Evaluable>(&self, x: &[S]) -> Result<Vec<S>> {
        S::call(&*self.coriolis, x)
    }

    pub fn potential_at<S: Evaluable>(&self, q: &[S]) -> Result<Vec<S>> {
        S::call(&*self.potential, q)
    }

    pub fn actuation_at<S: Evaluable>(&self, q: &[S]) -> Result<Vec<S>> {
        S::call(&*self.actuation, q)
    }

    /// `D(q)⁻¹ B(q)`, row-major `n × m`.
    pub fn inverse_inertia_actuation<S: Evaluable>(&self, q: &[S]) -> Result<Vec<S>> {
        let d = self.inertia_at(q)?;
        let b = self.actuation_at(q)?;
        solve_checked(&d, self.n, &b, self.m)
    }

    /// `−D(q)⁻¹(C(q, q̇)q̇ + G(q))`.
    pub fn drift_acceleration<S: Evaluable>(&self, x: &[S]) -> Result<Vec<S>> {
        ensure_len("state", 2 * self.n, x.len())?;
        let n = self.n;
        let (q, qd) = x.split_at(n);
        let d = self.inertia_at(q)?;
        let c = self.coriolis_at(x)?;
        let g = self.potential_at(q)?;
        let rhs: Vec<S> = (0..n)
            .map(|i| {
                let cq = (0..n).fold(S::zero(), |acc, j| acc + c[i * n + j] * qd[j]);
                -(cq + g[i])
            })
            .collect();
        solve_checked(&d, n, &rhs, 1)
    }
}

struct ConvertedDrift(Arc<LagrangianSystem>);
struct ConvertedActuation(Arc<LagrangianSystem>);

impl ConvertedDrift {
    fn eval_any<S: Evaluable>(&self, x: &[S]) -> Result<Vec<S>> {
        let n = self.0.n;
        ensure_len("state", 2 * n, x.len())?;
        let mut out = x[n..].to_vec();
        out.extend(self.0.drift_acceleration(x)?);
        Ok(out)
    }
}

impl ConvertedActuation {
    fn eval_any<S: Evaluable>(&self, x: &[S]) -> Result<Vec<S>> {
        let (n, m) = (self.0.n, self.0.m);
        ensure_len("state", 2 * n, x.len())?;
        let mut out = vec![S::zero(); n * m];
        out.extend(self.0.inverse_inertia_actuation(&x[..n])?);
        Ok(out)
    }
}

macro_rules! converted_fn {
    ($t:ident, $out:expr) => {
        impl SmoothFn for $t {
            fn input_dim(&self) -> usize {
                2 * self.0.n
            }
            fn output_dim(&self) -> usize {
                let s = &self.0;
                $out(s)
            }
            fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
                self.eval_any(x)
            }
            fn eval_jet(&self, x: &[Jet64]) -> Result<Vec<Jet64>> {
                self.eval_any(x)
            }
        }
    };
}

converted_fn!(ConvertedDrift, |s: &LagrangianSystem| 2 * s.n);
converted_fn!(ConvertedActuation, |s: &LagrangianSystem| 2 * s.n * s.m);

/// State `x = (q, q̇)`, drift `(q̇, −D⁻¹(Cq̇ + G))`, actuation `(0, D⁻¹B)`.
pub fn to_control_affine(sys: &LagrangianSystem) -> Result<ControlAffineSystem> {
    let shared = Arc::new(sys.clone());
    let mut out = ControlAffineSystem::new(
        sys.name.clone(),
        Arc::new(ConvertedDrift(shared.clone())),
        Arc::new(ConvertedActuation(shared)),
        sys.m,
        sys.state_domain(),
    )?;
    out.config_dim = Some(sys.n);
    Ok(out)
}

/// Checks that `D(q)` is symmetric positive definite at `q`.
pub fn inertia_is_positive_definite(sys: &LagrangianSystem, q: &[f64]) -> Result<bool> {
    let n = sys.config_dim();
    let d = DMatrix::from_row_slice(n, n, &sys.inertia_at(q)?);
    let asym = (&d - d.transpose()).abs().max();
    if asym > 1e-12 * d.abs().max().max(1.0) {
        return Ok(false);
    }
    Ok(d.symmetric_eigenvalues().min() > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::systems::zoo::{CartPole, PlanarQuadrotor};

    fn quad() -> LagrangianSystem {
        PlanarQuadrotor::default().system().unwrap()
    }

    #[test]
    fn quadrotor_conversion_at_hover_attitude() {
        let sys = to_control_affine(&quad()).unwrap();
        let x = [0.0; 6];
        let f = sys.drift(&x).unwrap();
        assert_eq!(f, vec![0.0, 0.0, 0.0, 0.0, -9.81, 0.0]);
        let g = sys.actuation(&x).unwrap();
        let lower = g.rows(3, 3).clone_owned();
        let expect = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, -100.0]);
        assert!((lower - expect).abs().max() < 1e-12);
        assert!(g.rows(0, 3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cartpole_drift_vanishes_at_rest_downward() {
        let sys = to_control_affine(&CartPole::default().system().unwrap()).unwrap();
        let f = sys.drift(&[0.3, 0.0, 0.0, 0.0]).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn closed_loop_with_zero_input_is_drift() {
        struct Zero;
        impl ScalarMap for Zero {
            fn input_dim(&self) -> usize {
                6
            }
            fn output_dim(&self) -> usize {
                2
            }
            fn apply<S: Scalar>(&self, _: &[S]) -> Vec<S> {
                vec![S::zero(); 2]
            }
        }
        let sys = to_control_affine(&quad()).unwrap();
        let field = closed_loop_field(&sys, Arc::new(Zero)).unwrap();
        let x = [0.1, 1.0, 0.3, -0.2, 0.5, 0.1];
        assert_eq!(field.eval(&x).unwrap(), sys.drift(&x).unwrap());
    }

    #[test]
    fn closed_loop_rejects_wrong_feedback_width() {
        struct Three;
        impl ScalarMap for Three {
            fn input_dim(&self) -> usize {
                6
            }
            fn output_dim(&self) -> usize {
                3
            }
            fn apply<S: Scalar>(&self, _: &[S]) -> Vec<S> {
                vec![S::zero(); 3]
            }
        }
        let sys = to_control_affine(&quad()).unwrap();
        assert!(matches!(
            closed_loop_field(&sys, Arc::new(Three)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inertia_checks() {
        let cp = CartPole::default().system().unwrap();
        assert!(inertia_is_positive_definite(&cp, &[0.0, 0.7]).unwrap());
    }
}
