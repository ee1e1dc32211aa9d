use std::f64::consts::PI;

use cbf_synth::autodiff::{gradient, hessian_vector, jacobian, JetFn};
use cbf_synth::systems::zoo::{integrator_chain, zoo_entry, CartPole, PlanarQuadrotor, TwoLinkArm};
use cbf_synth::systems::{closed_loop_field, inertia_is_positive_definite, to_control_affine};
use cbf_synth::{Error, Jet64, Scalar, SharedFn, SmoothFn};
use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::Arc;

fn uniform(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..=*b)).collect()
}

// Cart-pole from its Newton-Euler equations, pole angle zero hanging down.
fn cartpole_reference(p: &CartPole, x: &[f64], u: f64) -> [f64; 4] {
    let (mc, mp, l, g) = (p.cart_mass, p.pole_mass, p.length, p.gravity);
    let (th, xd, thd) = (x[1], x[2], x[3]);
    let m = Matrix2::new(mc + mp, mp * l * th.cos(), mp * l * th.cos(), mp * l * l);
    let rhs = Vector2::new(u + mp * l * thd * thd * th.sin(), -mp * g * l * th.sin());
    let acc = m.lu().solve(&rhs).unwrap();
    [xd, thd, acc[0], acc[1]]
}

#[test]
fn cartpole_matches_newton_euler() {
    let p = CartPole::default();
    let sys = to_control_affine(&p.system().unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let x = uniform(&mut rng, &[-2.0, -PI, -3.0, -6.0], &[2.0, 2.0 * PI, 3.0, 6.0]);
        let u = rng.random_range(-20.0..20.0);
        let got = sys.field(&x, &[u]).unwrap();
        let want = cartpole_reference(&p, &x, u);
        for i in 0..4 {
            assert!((got[i] - want[i]).abs() < 1e-11 * want[i].abs().max(1.0), "{x:?}");
        }
    }
}

#[test]
fn quadrotor_matches_rigid_body() {
    let p = PlanarQuadrotor::default();
    let sys = to_control_affine(&p.system().unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let x = uniform(&mut rng, &[-3.0, 0.0, -1.5, -2.0, -2.0, -4.0], &[3.0, 4.0, 1.5, 2.0, 2.0, 4.0]);
        let (f, mmt) = (rng.random_range(0.0..30.0), rng.random_range(-1.0..1.0));
        let got = sys.field(&x, &[f, mmt]).unwrap();
        let th = x[2];
        let want = [
            x[3],
            x[4],
            x[5],
            f * th.sin() / p.mass,
            f * th.cos() / p.mass - p.gravity,
            -mmt / p.inertia,
        ];
        for i in 0..6 {
            assert!((got[i] - want[i]).abs() < 1e-11 * want[i].abs().max(1.0));
        }
    }
}

#[test]
fn two_link_arm_conserves_energy_unactuated() {
    let arm = TwoLinkArm::default();
    let sys = to_control_affine(&arm.system().unwrap()).unwrap();
    let energy = |x: &[f64]| {
        let (q1, q2, w1, w2) = (x[0], x[1], x[2], x[3]);
        let (l1, l2) = (arm.length1, arm.length2);
        let v1 = (l1 * w1).powi(2);
        let vx = -l1 * q1.sin() * w1 - l2 * (q1 + q2).sin() * (w1 + w2);
        let vy = l1 * q1.cos() * w1 + l2 * (q1 + q2).cos() * (w1 + w2);
        let kinetic = 0.5 * arm.mass1 * v1 + 0.5 * arm.mass2 * (vx * vx + vy * vy);
        let potential = arm.gravity * ((arm.mass1 + arm.mass2) * l1 * q1.sin() + arm.mass2 * l2 * (q1 + q2).sin());
        kinetic + potential
    };
    let mut x = vec![0.3, -0.7, 1.0, -0.5];
    let e0 = energy(&x);
    let dt = 1e-3;
    for _ in 0..2000 {
        let f = |s: &[f64]| sys.field(s, &[0.0, 0.0]).unwrap();
        let k1 = f(&x);
        let k2 = f(&x.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect::<Vec<_>>());
        let k3 = f(&x.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect::<Vec<_>>());
        let k4 = f(&x.iter().zip(&k3).map(|(a, k)| a + dt * k).collect::<Vec<_>>());
        x = (0..4).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    }
    assert!((energy(&x) - e0).abs() < 1e-8 * e0.abs().max(1.0));
}

#[test]
fn inertia_is_positive_definite_over_domain() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for sys in [
        CartPole::default().system().unwrap(),
        PlanarQuadrotor::default().system().unwrap(),
        TwoLinkArm::default().system().unwrap(),
    ] {
        let d = sys.config_domain().clone();
        for _ in 0..100 {
            let q = uniform(&mut rng, &d.lower, &d.upper);
            assert!(inertia_is_positive_definite(&sys, &q).unwrap());
        }
    }
}

#[test]
fn zoo_overrides_and_errors() {
    let mut params = BTreeMap::new();
    params.insert("pole_mass_kg".to_string(), 0.5);
    let entry = zoo_entry("cartpole", &params).unwrap();
    assert_eq!(entry.params[1].value, 0.5);
    params.insert("wheel_count".to_string(), 4.0);
    assert!(matches!(zoo_entry("cartpole", &params), Err(Error::Unknown { .. })));
    assert!(matches!(zoo_entry("hovercraft", &BTreeMap::new()), Err(Error::Unknown { .. })));
    let mut bad = BTreeMap::new();
    bad.insert("mass_kg".to_string(), -1.0);
    assert!(zoo_entry("planar-quadrotor", &bad).is_err());
}

#[test]
fn closed_loop_of_integrator_chain() {
    let sys = integrator_chain("double", 2).unwrap();
    let k: SharedFn = Arc::new(JetFn::new(2, 1, |x: &[Jet64]| Ok(vec![-x[0] - x[1]])));
    let field = closed_loop_field(&sys, k).unwrap();
    assert_eq!(field.eval(&[2.0, 3.0]).unwrap(), vec![3.0, -5.0]);
}

fn rosenbrock() -> SharedFn {
    Arc::new(JetFn::new(3, 2, |x: &[Jet64]| {
        let a = (Jet64::constant(1.0) - x[0]).square();
        let b = Jet64::constant(100.0) * (x[1] - x[0] * x[0]).square();
        Ok(vec![a + b, x[0].sin() * x[2].exp() / (x[1] * x[1] + Jet64::constant(1.0)).sqrt()])
    }))
}

fn fd_jacobian(f: &dyn SmoothFn, x: &[f64]) -> Vec<Vec<f64>> {
    let eps = 1e-6;
    (0..x.len())
        .map(|j| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[j] += eps;
            m[j] -= eps;
            let (fp, fm) = (f.eval(&p).unwrap(), f.eval(&m).unwrap());
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * eps)).collect()
        })
        .collect()
}

#[test]
fn jacobian_and_hessian_match_finite_differences() {
    let f = rosenbrock();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x = uniform(&mut rng, &[-1.5, -1.0, -1.0], &[1.5, 2.0, 1.0]);
        let jac = jacobian(&*f, &x).unwrap();
        let fd = fd_jacobian(&*f, &x);
        for i in 0..2 {
            for j in 0..3 {
                assert!((jac[(i, j)] - fd[j][i]).abs() < 1e-6 * fd[j][i].abs().max(1.0));
            }
        }
        let scalar: SharedFn = Arc::new(JetFn::new(3, 1, |x: &[Jet64]| {
            let a = (Jet64::constant(1.0) - x[0]).square();
            Ok(vec![a + Jet64::constant(100.0) * (x[1] - x[0] * x[0]).square() + x[2].cos()])
        }));
        let v = uniform(&mut rng, &[-1.0; 3], &[1.0; 3]);
        let hv = hessian_vector(&*scalar, &x, &v).unwrap();
        let eps = 1e-6;
        let shift = |s: f64| -> Vec<f64> { x.iter().zip(&v).map(|(a, b)| a + s * b).collect() };
        let (gp, gm) = (gradient(&*scalar, &shift(eps)).unwrap(), gradient(&*scalar, &shift(-eps)).unwrap());
        for i in 0..3 {
            let fd = (gp[i] - gm[i]) / (2.0 * eps);
            assert!((hv[i] - fd).abs() < 1e-5 * fd.abs().max(1.0));
        }
    }
}
