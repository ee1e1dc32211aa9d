//! Built-in models.
//!
//! Parameter names carry their units. Lagrangian entries expose the raw
//! matrices; everything else is given directly in control-affine form.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use super::{to_control_affine, ControlAffineSystem, LagrangianModel, LagrangianSystem};
use crate::autodiff::ScalarMap;
use crate::error::{Error, Result};
use crate::sampling::BoxDomain;
use crate::scalar::Scalar;

fn c<S: Scalar>(v: f64) -> S {
    S::from_f64(v)
}

fn boxed(lower: &[f64], upper: &[f64]) -> BoxDomain {
    BoxDomain {
        lower: lower.to_vec(),
        upper: upper.to_vec(),
    }
}

/// Pendulum on a cart, `q = (x, θ)` with `θ = 0` hanging down. The domain
/// covers one turn of `θ` containing both equilibria.
#[derive(Clone, Debug, PartialEq)]
pub struct CartPole {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub length: f64,
    pub gravity: f64,
}

impl Default for CartPole {
    fn default() -> Self {
        CartPole {
            cart_mass: 1.0,
            pole_mass: 0.25,
            length: 0.5,
            gravity: 9.81,
        }
    }
}

impl CartPole {
    pub fn system(&self) -> Result<LagrangianSystem> {
        LagrangianSystem::from_model(
            "cartpole",
            self.clone(),
            boxed(&[-5.0, -FRAC_PI_2], &[5.0, 3.0 * FRAC_PI_2]),
            boxed(&[-5.0, -10.0], &[5.0, 10.0]),
        )
    }

    pub fn inertia_determinant(&self, theta: f64) -> f64 {
        let (mc, mp, l) = (self.cart_mass, self.pole_mass, self.length);
        (mc + mp) * mp * l * l - (mp * l * theta.cos()).powi(2)
    }
}

impl LagrangianModel for CartPole {
    fn config_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn inertia<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        let (mc, mp, l) = (self.cart_mass, self.pole_mass, self.length);
        let off = c::<S>(mp * l) * q[1].cos();
        vec![c(mc + mp), off, off, c(mp * l * l)]
    }
    fn coriolis<S: Scalar>(&self, q: &[S], qd: &[S]) -> Vec<S> {
        let mpl = c::<S>(self.pole_mass * self.length);
        vec![S::zero(), -(mpl * qd[1] * q[1].sin()), S::zero(), S::zero()]
    }
    fn potential<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        let k = self.pole_mass * self.gravity * self.length;
        vec![S::zero(), c::<S>(k) * q[1].sin()]
    }
    fn actuation<S: Scalar>(&self, _q: &[S]) -> Vec<S> {
        vec![S::one(), S::zero()]
    }
}

/// Planar quadrotor, `q = (x, z, θ)`, inputs thrust and moment.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarQuadrotor {
    pub mass: f64,
    pub inertia: f64,
    pub gravity: f64,
}

impl Default for PlanarQuadrotor {
    fn default() -> Self {
        PlanarQuadrotor {
            mass: 1.0,
            inertia: 0.01,
            gravity: 9.81,
        }
    }
}

impl PlanarQuadrotor {
    pub fn system(&self) -> Result<LagrangianSystem> {
        LagrangianSystem::from_model(
            "planar-quadrotor",
            self.clone(),
            boxed(&[-5.0, -1.0, -PI], &[5.0, 5.0, PI]),
            boxed(&[-5.0, -5.0, -10.0], &[5.0, 5.0, 10.0]),
        )
    }
}

impl LagrangianModel for PlanarQuadrotor {
    fn config_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn inertia<S: Scalar>(&self, _q: &[S]) -> Vec<S> {
        let z = S::zero();
        vec![c(self.mass), z, z, z, c(self.mass), z, z, z, c(self.inertia)]
    }
    fn coriolis<S: Scalar>(&self, _q: &[S], _qd: &[S]) -> Vec<S> {
        vec![S::zero(); 9]
    }
    fn potential<S: Scalar>(&self, _q: &[S]) -> Vec<S> {
        vec![S::zero(), c(self.mass * self.gravity), S::zero()]
    }
    fn actuation<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        let z = S::zero();
        vec![q[2].sin(), z, q[2].cos(), z, z, -S::one()]
    }
}

/// Planar two-link arm with point masses at the link tips and the constant
/// actuation `B = [[1, 0.5], [0, 1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoLinkArm {
    pub mass1: f64,
    pub mass2: f64,
    pub length1: f64,
    pub length2: f64,
    pub gravity: f64,
}

impl Default for TwoLinkArm {
    fn default() -> Self {
        TwoLinkArm {
            mass1: 1.0,
            mass2: 1.0,
            length1: 1.0,
            length2: 1.0,
            gravity: 9.81,
        }
    }
}

impl TwoLinkArm {
    pub const ACTUATION: [f64; 4] = [1.0, 0.5, 0.0, 1.0];

    pub fn system(&self) -> Result<LagrangianSystem> {
        LagrangianSystem::from_model(
            "two-link-arm",
            self.clone(),
            boxed(&[-PI, -PI], &[PI, PI]),
            boxed(&[-5.0, -5.0], &[5.0, 5.0]),
        )
    }
}

impl LagrangianModel for TwoLinkArm {
    fn config_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn inertia<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        let (m1, m2, l1, l2) = (self.mass1, self.mass2, self.length1, self.length2);
        let c2 = q[1].cos();
        let d12 = c::<S>(m2 * l2 * l2) + c::<S>(m2 * l1 * l2) * c2;
        let d11 = c::<S>((m1 + m2) * l1 * l1 + m2 * l2 * l2) + c::<S>(2.0 * m2 * l1 * l2) * c2;
        vec![d11, d12, d12, c(m2 * l2 * l2)]
    }
    fn coriolis<S: Scalar>(&self, q: &[S], qd: &[S]) -> Vec<S> {
        let h = -(c::<S>(self.mass2 * self.length1 * self.length2) * q[1].sin());
        vec![h * qd[1], h * (qd[0] + qd[1]), -(h * qd[0]), S::zero()]
    }
    fn potential<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        let (m1, m2, l1, l2, g) = (
            self.mass1,
            self.mass2,
            self.length1,
            self.length2,
            self.gravity,
        );
        let c12 = (q[0] + q[1]).cos();
        let g2 = c::<S>(m2 * g * l2) * c12;
        vec![c::<S>((m1 + m2) * g * l1) * q[0].cos() + g2, g2]
    }
    fn actuation<S: Scalar>(&self, _q: &[S]) -> Vec<S> {
        Self::ACTUATION.iter().map(|&v| c(v)).collect()
    }
}

/// Chain of `order` integrators driven at the last state.
#[derive(Clone, Copy, Debug)]
pub struct IntegratorDrift(pub usize);

/// Actuation of [`IntegratorDrift`]: the last unit vector.
#[derive(Clone, Copy, Debug)]
pub struct IntegratorActuation(pub usize);

impl ScalarMap for IntegratorDrift {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn output_dim(&self) -> usize {
        self.0
    }
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut out: Vec<S> = x[1..].to_vec();
        out.push(S::zero());
        out
    }
    fn label(&self) -> &str {
        "integrator drift"
    }
}

impl ScalarMap for IntegratorActuation {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn output_dim(&self) -> usize {
        self.0
    }
    fn apply<S: Scalar>(&self, _x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.0];
        out[self.0 - 1] = S::one();
        out
    }
    fn label(&self) -> &str {
        "integrator actuation"
    }
}

/// `x⁽ᵒʳᵈᵉʳ⁾ = u` on the box `[-3, 3]ⁿ`.
pub fn integrator_chain(name: &str, order: usize) -> Result<ControlAffineSystem> {
    ControlAffineSystem::from_maps(
        name,
        IntegratorDrift(order),
        IntegratorActuation(order),
        1,
        boxed(&vec![-3.0; order], &vec![3.0; order]),
    )
}

/// A named physical parameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Parameter {
    pub name: &'static str,
    pub value: f64,
    pub unit: &'static str,
}

#[derive(Clone, Debug)]
pub enum ZooSystem {
    Lagrangian(LagrangianSystem),
    Affine(ControlAffineSystem),
}

impl std::fmt::Debug for LagrangianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianSystem")
            .field("name", &self.name)
            .field("n", &self.config_dim())
            .field("m", &self.input_dim())
            .finish()
    }
}

impl ZooSystem {
    pub fn control_affine(&self) -> Result<ControlAffineSystem> {
        match self {
            ZooSystem::Lagrangian(l) => to_control_affine(l),
            ZooSystem::Affine(a) => Ok(a.clone()),
        }
    }

    pub fn lagrangian(&self) -> Option<&LagrangianSystem> {
        match self {
            ZooSystem::Lagrangian(l) => Some(l),
            ZooSystem::Affine(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelZooEntry {
    pub name: String,
    pub system: ZooSystem,
    pub params: Vec<Parameter>,
}

const MODELS: [&str; 5] = [
    "cartpole",
    "planar-quadrotor",
    "two-link-arm",
    "double-integrator",
    "triple-integrator",
];

pub fn model_names() -> &'static [&'static str] {
    &MODELS
}

fn defaults(name: &str) -> Result<Vec<Parameter>> {
    let p = |name, value, unit| Parameter { name, value, unit };
    Ok(match name {
        "cartpole" => vec![
            p("cart_mass_kg", 1.0, "kg"),
            p("pole_mass_kg", 0.25, "kg"),
            p("pole_length_m", 0.5, "m"),
            p("gravity_mps2", 9.81, "m/s^2"),
        ],
        "planar-quadrotor" => vec![
            p("mass_kg", 1.0, "kg"),
            p("inertia_kgm2", 0.01, "kg m^2"),
            p("gravity_mps2", 9.81, "m/s^2"),
        ],
        "two-link-arm" => vec![
            p("link1_mass_kg", 1.0, "kg"),
            p("link2_mass_kg", 1.0, "kg"),
            p("link1_length_m", 1.0, "m"),
            p("link2_length_m", 1.0, "m"),
            p("gravity_mps2", 9.81, "m/s^2"),
        ],
        "double-integrator" | "triple-integrator" => Vec::new(),
        other => {
            return Err(Error::Unknown {
                kind: "model",
                name: other.to_string(),
            })
        }
    })
}

/// Looks up a model and applies parameter overrides.
pub fn zoo_entry(name: &str, overrides: &BTreeMap<String, f64>) -> Result<ModelZooEntry> {
    let mut params = defaults(name)?;
    for (key, &value) in overrides {
        let slot = params
            .iter_mut()
            .find(|p| p.name == key)
            .ok_or_else(|| Error::Unknown {
                kind: "parameter",
                name: format!("{name}.{key}"),
            })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{key} must be positive and finite, got {value}"
            )));
        }
        slot.value = value;
    }
    let v = |i: usize| params[i].value;
    let system = match name {
        "cartpole" => ZooSystem::Lagrangian(
            CartPole {
                cart_mass: v(0),
                pole_mass: v(1),
                length: v(2),
                gravity: v(3),
            }
            .system()?,
        ),
        "planar-quadrotor" => ZooSystem::Lagrangian(
            PlanarQuadrotor {
                mass: v(0),
                inertia: v(1),
                gravity: v(2),
            }
            .system()?,
        ),
        "two-link-arm" => ZooSystem::Lagrangian(
            TwoLinkArm {
                mass1: v(0),
                mass2: v(1),
                length1: v(2),
                length2: v(3),
                gravity: v(4),
            }
            .system()?,
        ),
        "double-integrator" => ZooSystem::Affine(integrator_chain(name, 2)?),
        _ => ZooSystem::Affine(integrator_chain(name, 3)?),
    };
    Ok(ModelZooEntry {
        name: name.to_string(),
        system,
        params,
    })
}
