use std::f64::consts::PI;

use cbf_synth::lie::{output_coordinates, OutputDomain, OutputMap};
use cbf_synth::synthesis::{
    build_cbf, cbf_relative_degree2, sontag_controller, sontag_phi, virtual_controller_chain, CbfBuilder, ClassK,
    OutputConstraint,
};
use cbf_synth::systems::to_control_affine;
use cbf_synth::systems::zoo::{integrator_chain, CartPole, PlanarQuadrotor};
use cbf_synth::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn band_k1(y: f64) -> f64 {
    let g = -2.0 * y;
    sontag_phi(1.0 - y * y, g * g, 1.0).unwrap() * g
}

fn band_k1_prime(y: f64) -> f64 {
    let eps = 1e-6;
    (band_k1(y + eps) - band_k1(y - eps)) / (2.0 * eps)
}

#[test]
fn second_virtual_controller_matches_hand_expansion() {
    let c = OutputConstraint::band(0.0, 1.0).unwrap();
    let (mu, lambda) = ([2.0, 0.5], [1.5, 3.0]);
    let chain = virtual_controller_chain(&c, 3, ClassK::default(), 1.0, &mu, &lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (y, v, a) = (
            rng.random_range(-1.1..1.1),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let k2 = band_k1_prime(y) * v + mu[0] * (-2.0 * y) - 0.5 * lambda[0] * (v - band_k1(y));
        let got = chain.eval(2, &[y, v]).unwrap()[0];
        assert!((got - k2).abs() < 1e-7 * k2.abs().max(1.0), "{got} {k2}");

        // k3 from the recursion, with k̇2 by finite differences along the flow.
        let eps = 1e-6;
        let k2_at = |s: f64| chain.eval(2, &[y + s * v, v + s * a]).unwrap()[0];
        let k2_dot = (k2_at(eps) - k2_at(-eps)) / (2.0 * eps);
        let k3 = k2_dot - (mu[1] / mu[0]) * (v - band_k1(y)) - 0.5 * lambda[1] * (a - k2);
        let got = chain.eval(3, &[y, v, a]).unwrap()[0];
        assert!((got - k3).abs() < 1e-6 * k3.abs().max(1.0), "{got} {k3}");
    }
}

#[test]
fn gain_and_degree_validation() {
    let c = OutputConstraint::band(0.0, 1.0).unwrap();
    let alpha = ClassK::linear(2.0).unwrap();
    assert!(matches!(
        virtual_controller_chain(&c, 3, alpha, 1.0, &[1.0, 1.0], &[2.0, 1.0]),
        Err(Error::GainTooSmall { index: 2, .. })
    ));
    assert!(virtual_controller_chain(&c, 3, alpha, 1.0, &[1.0, 1.0], &[2.0, 2.0]).is_ok());
    assert!(virtual_controller_chain(&c, 5, alpha, 1.0, &[1.0; 4], &[2.0; 4]).is_err());
    assert!(virtual_controller_chain(&c, 2, alpha, 1.0, &[0.0], &[2.0]).is_err());
    assert!(matches!(
        virtual_controller_chain(&c, 2, ClassK::arctan_linear(1.0).unwrap(), 1.0, &[1.0], &[1.5]),
        Err(Error::GainTooSmall { .. })
    ));
}

#[test]
fn barrier_never_exceeds_constraint() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ti = integrator_chain("triple", 3).unwrap();
    let y = OutputMap::select("x1", &[0], 3, 3, OutputDomain::FullState).unwrap();
    let cbf = build_cbf(
        &ti,
        &y,
        &OutputConstraint::band(0.0, 1.0).unwrap(),
        ClassK::default(),
        &[1.0, 1.0],
        &[1.0, 1.0],
    )
    .unwrap();
    for _ in 0..1000 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        assert!(cbf.h(&x).unwrap() <= cbf.psi(&x).unwrap());
    }
}

#[test]
fn cart_penalty_vanishes_on_the_manifold() {
    let cp = CartPole::default().system().unwrap();
    let y = OutputMap::select("x", &[0], 2, 2, OutputDomain::Configuration).unwrap();
    let c = OutputConstraint::upper_limit(1.0).unwrap();
    let cbf = cbf_relative_degree2(&cp, &y, &c, ClassK::default(), 1.0, 1.0).unwrap();
    let k = sontag_controller(c, ClassK::default(), 1.0).unwrap();
    for xc in [-2.0, 0.0, 0.7, 1.0] {
        let x = [xc, 2.5, k.eval(&[xc]).unwrap()[0], -3.0];
        assert!((cbf.h(&x).unwrap() - (1.0 - xc)).abs() < 1e-15);
    }
}

#[test]
fn quadrotor_boundary_at_rest_is_outside_safe_set() {
    let quad = PlanarQuadrotor::default().system().unwrap();
    let y = OutputMap::select("z-theta", &[1, 2], 3, 2, OutputDomain::Configuration).unwrap();
    let c = OutputConstraint::ellipse(2.0, 1.0, 1.0).unwrap();
    let mu = 2.0;
    let cbf = cbf_relative_degree2(&quad, &y, &c, ClassK::default(), mu, 1.0).unwrap();
    let k = sontag_controller(c, ClassK::default(), 1.0).unwrap().eval(&[1.0, 0.0]).unwrap();
    let x = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    let expect = -(k[0] * k[0] + k[1] * k[1]) / (2.0 * mu);
    assert!(expect < 0.0);
    assert!((cbf.h(&x).unwrap() - expect).abs() < 1e-15);
}

#[test]
fn rank_failures_inside_constraint_set() {
    let quad = PlanarQuadrotor::default().system().unwrap();
    let z = OutputMap::select("z", &[1], 3, 2, OutputDomain::Configuration).unwrap();
    let err = cbf_relative_degree2(
        &quad,
        &z,
        &OutputConstraint::lower_limit(1.0).unwrap(),
        ClassK::default(),
        1.0,
        1.0,
    )
    .unwrap_err();
    match err {
        Error::RankDeficientOnC { witness, sigma_min } => {
            assert!(witness[2].cos().abs() < 1e-6 && sigma_min < 1e-6);
        }
        other => panic!("unexpected {other}"),
    }
    let cp = CartPole::default().system().unwrap();
    let theta = OutputMap::select("theta", &[1], 2, 2, OutputDomain::Configuration).unwrap();
    let wide = OutputConstraint::band(PI, 1.8).unwrap();
    assert!(matches!(
        cbf_relative_degree2(&cp, &theta, &wide, ClassK::default(), 1.0, 1.0),
        Err(Error::RankDeficientOnC { .. })
    ));
}

#[test]
fn gradient_condition_violation_is_reported() {
    use cbf_synth::autodiff::JetFn;
    use std::sync::Arc;
    // ψ = y³ has a critical point on its zero level set.
    let cubic = OutputConstraint::new(
        "cubic",
        Arc::new(JetFn::new(1, 1, |y: &[cbf_synth::Jet64]| Ok(vec![y[0] * y[0] * y[0]]))),
        vec![0.0],
        vec![2.0],
    )
    .unwrap();
    let di = integrator_chain("double", 2).unwrap();
    let y = OutputMap::select("x1", &[0], 2, 2, OutputDomain::FullState).unwrap();
    assert!(matches!(
        CbfBuilder::new(&di, &y, &cubic).build(),
        Err(Error::GradientConditionViolated { .. })
    ));
}

#[test]
fn barrier_gradient_matches_finite_differences() {
    let quad = to_control_affine(&PlanarQuadrotor::default().system().unwrap()).unwrap();
    let y = OutputMap::select("z-theta", &[1, 2], 3, 2, OutputDomain::Configuration).unwrap();
    let cbf = CbfBuilder::new(&quad, &y, &OutputConstraint::ellipse(2.0, 1.0, 1.0).unwrap())
        .mu(vec![3.0])
        .build()
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps = 1e-6;
    for _ in 0..100 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
        let grad = cbf.gradient(&x).unwrap();
        for i in 0..6 {
            let mut p = x.clone();
            let mut m = x.clone();
            p[i] += eps;
            m[i] -= eps;
            let fd = (cbf.h(&p).unwrap() - cbf.h(&m).unwrap()) / (2.0 * eps);
            assert!((grad[i] - fd).abs() <= 1e-6 * fd.abs().max(1.0));
        }
    }
}

#[test]
fn output_coordinates_of_integrator_are_the_state() {
    let ti = integrator_chain("triple", 3).unwrap();
    let y = OutputMap::select("x1", &[0], 3, 3, OutputDomain::FullState).unwrap();
    let c = output_coordinates(&ti, &y, &[0.5, -1.0, 2.0]).unwrap();
    assert_eq!(c.zeta(3), &[0.5, -1.0, 2.0]);
}

#[test]
fn metadata_serializes() {
    let di = integrator_chain("double", 2).unwrap();
    let y = OutputMap::select("x1", &[0], 2, 2, OutputDomain::FullState).unwrap();
    let cbf = build_cbf(&di, &y, &OutputConstraint::band(0.0, 1.0).unwrap(), ClassK::default(), &[1.0], &[1.0]).unwrap();
    let json = serde_json::to_value(cbf.metadata()).unwrap();
    assert_eq!(json["gamma"], 2);
    assert_eq!(json["alpha"]["kind"], "linear");
    assert_eq!(json["rank_report"]["rank_ok"], true);
}
