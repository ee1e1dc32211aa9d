use approx::assert_relative_eq;
use cbf_synth::{Jet64, Scalar};
use proptest::prelude::*;

// x + ε₁ + ε₂ + ε₃, so the top coefficient of f(x) is f‴(x).
fn third_order(x: f64) -> Jet64 {
    let (mut v, _) = Jet64::seed_real(&[x], &[1.0]);
    for _ in 0..2 {
        v = Jet64::seed(&v, &[Jet64::constant(1.0)]).0;
    }
    v[0]
}

fn derivatives(j: Jet64) -> [f64; 4] {
    [j.value(), j.coefficient(0b001), j.coefficient(0b011), j.coefficient(0b111)]
}

proptest! {
    #[test]
    fn elementary_functions(x in -2.0f64..2.0) {
        let j = third_order(x);
        let (s, c) = (x.sin(), x.cos());
        let got = derivatives(j.sin());
        for (g, w) in got.iter().zip([s, c, -s, -c]) {
            assert_relative_eq!(*g, w, epsilon = 1e-12);
        }
        let e = x.exp();
        for g in derivatives(j.exp()) {
            assert_relative_eq!(g, e, max_relative = 1e-12);
        }
        let a = derivatives(j.atan());
        let d = 1.0 + x * x;
        assert_relative_eq!(a[1], 1.0 / d, max_relative = 1e-12);
        assert_relative_eq!(a[2], -2.0 * x / (d * d), epsilon = 1e-12);
        assert_relative_eq!(a[3], (6.0 * x * x - 2.0) / (d * d * d), epsilon = 1e-12);
    }

    #[test]
    fn log_and_roots(x in 0.1f64..5.0) {
        let j = third_order(x);
        let l = derivatives(j.ln());
        assert_relative_eq!(l[3], 2.0 / x.powi(3), max_relative = 1e-10);
        let r = derivatives(j.sqrt());
        assert_relative_eq!(r[2], -0.25 * x.powf(-1.5), max_relative = 1e-10);
        let p = derivatives(j.powf(2.5));
        assert_relative_eq!(p[3], 2.5 * 1.5 * 0.5 * x.powf(-0.5), max_relative = 1e-10);
    }

    #[test]
    fn product_and_quotient_rules(x in -2.0f64..2.0, a in -3.0f64..3.0) {
        let j = third_order(x);
        let f = j * j * j + Jet64::constant(a) * j;
        let d = derivatives(f);
        assert_relative_eq!(d[1], 3.0 * x * x + a, epsilon = 1e-12);
        assert_relative_eq!(d[2], 6.0 * x, epsilon = 1e-12);
        assert_relative_eq!(d[3], 6.0, epsilon = 1e-12);
        let q = derivatives(Jet64::constant(1.0) / (j * j + Jet64::constant(1.0)));
        let atan = derivatives(j.atan());
        assert_relative_eq!(q[2], atan[3], epsilon = 1e-12);
    }
}
