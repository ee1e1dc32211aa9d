//! Smooth functions and forward-mode differentiation operators.
//!
//! Everything differentiable in the crate is a [`SmoothFn`]: an object-safe
//! map that can be evaluated at plain `f64`s and at [`Jet64`]s. User models
//! are usually written against the generic [`ScalarMap`] trait, which gets a
//! `SmoothFn` implementation for free.
//!
//! Derivatives are seeded one direction per call: a Jacobian of an
//! `n`-input function costs `n` jet evaluations.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{ensure_len, Error, Result};
use crate::scalar::Scalar;
use crate::Jet64;

/// A smooth map `ℝⁿ → ℝᵐ`, evaluable at reals and at jets.
///
/// Matrix-valued functions return their entries flattened row-major.
pub trait SmoothFn: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn eval_jet(&self, x: &[Jet64]) -> Result<Vec<Jet64>>;
}

/// Generic model code: one body, evaluated at any [`Scalar`].
pub trait ScalarMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S>;

    /// Used in diagnostics.
    fn label(&self) -> &str {
        "function"
    }
}

pub(crate) fn check_finite<S: Scalar>(context: &str, values: &[S]) -> Result<()> {
    if values.iter().all(Scalar::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFiniteValue {
            context: context.to_string(),
        })
    }
}

fn apply_checked<M: ScalarMap + ?Sized, S: Scalar>(m: &M, x: &[S]) -> Result<Vec<S>> {
    ensure_len(m.label(), m.input_dim(), x.len())?;
    let out = m.apply(x);
    ensure_len(m.label(), m.output_dim(), out.len())?;
    check_finite(m.label(), &out)?;
    Ok(out)
}

impl<M: ScalarMap> SmoothFn for M {
    fn input_dim(&self) -> usize {
        ScalarMap::input_dim(self)
    }
    fn output_dim(&self) -> usize {
        ScalarMap::output_dim(self)
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        apply_checked(self, x)
    }
    fn eval_jet(&self, x: &[Jet64]) -> Result<Vec<Jet64>> {
        apply_checked(self, x)
    }
}

/// Scalars a [`SmoothFn`] can be called with.
pub trait Evaluable: Scalar {
    fn call(f: &dyn SmoothFn, x: &[Self]) -> Result<Vec<Self>>;
    fn into_jet(self) -> Jet64;
}

impl Evaluable for f64 {
    #[inline]
    fn call(f: &dyn SmoothFn, x: &[f64]) -> Result<Vec<f64>> {
        f.eval(x)
    }
    #[inline]
    fn into_jet(self) -> Jet64 {
        Jet64::constant(self)
    }
}

impl Evaluable for Jet64 {
    #[inline]
    fn call(f: &dyn SmoothFn, x: &[Jet64]) -> Result<Vec<Jet64>> {
        f.eval_jet(x)
    }
    #[inline]
    fn into_jet(self) -> Jet64 {
        self
    }
}

/// A [`SmoothFn`] defined directly on jets; real evaluation runs the same
/// code at depth zero.
pub struct JetFn<F> {
    input_dim: usize,
    output_dim: usize,
    body: F,
}

impl<F> JetFn<F>
where
    F: Fn(&[Jet64]) -> Result<Vec<Jet64>> + Send + Sync,
{
    pub fn new(input_dim: usize, output_dim: usize, body: F) -> Self {
        JetFn {
            input_dim,
            output_dim,
            body,
        }
    }
}

impl<F> SmoothFn for JetFn<F>
where
    F: Fn(&[Jet64]) -> Result<Vec<Jet64>> + Send + Sync,
{
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let jets = constants(x);
        Ok(self.eval_jet(&jets)?.iter().map(Jet64::value).collect())
    }
    fn eval_jet(&self, x: &[Jet64]) -> Result<Vec<Jet64>> {
        ensure_len("derived function input", self.input_dim, x.len())?;
        let out = (self.body)(x)?;
        ensure_len("derived function output", self.output_dim, out.len())?;
        check_finite("derived function", &out)?;
        Ok(out)
    }
}

/// Shared handle to a smooth function.
pub type SharedFn = Arc<dyn SmoothFn>;

pub fn constants(x: &[f64]) -> Vec<Jet64> {
    x.iter().map(|&v| Jet64::constant(v)).collect()
}

pub fn values(x: &[Jet64]) -> Vec<f64> {
    x.iter().map(Jet64::value).collect()
}

/// `(∂f/∂x)(x)·v` at jet level: seeds one fresh direction above `x` and `v`.
pub fn directional_derivative_jet<F>(f: F, x: &[Jet64], v: &[Jet64]) -> Result<Vec<Jet64>>
where
    F: FnOnce(&[Jet64]) -> Result<Vec<Jet64>>,
{
    ensure_len("direction", x.len(), v.len())?;
    let (lifted, dir) = Jet64::seed(x, v);
    Ok(f(&lifted)?.iter().map(|o| o.tangent(dir)).collect())
}

/// Gradient of a scalar [`SmoothFn`] at jet level.
pub fn gradient_jet(f: &dyn SmoothFn, x: &[Jet64]) -> Result<Vec<Jet64>> {
    ensure_len("gradient output", 1, f.output_dim())?;
    let n = x.len();
    let mut grad = Vec::with_capacity(n);
    let mut e = vec![Jet64::constant(0.0); n];
    for i in 0..n {
        e[i] = Jet64::constant(1.0);
        grad.push(directional_derivative_jet(|p| f.eval_jet(p), x, &e)?[0]);
        e[i] = Jet64::constant(0.0);
    }
    Ok(grad)
}

/// Jacobian (`output_dim × input_dim`) of `f` at `x`.
pub fn jacobian(f: &dyn SmoothFn, x: &[f64]) -> Result<DMatrix<f64>> {
    ensure_len("jacobian input", f.input_dim(), x.len())?;
    let (m, n) = (f.output_dim(), x.len());
    let mut jac = DMatrix::zeros(m, n);
    let base = constants(x);
    let mut e = vec![Jet64::constant(0.0); n];
    for j in 0..n {
        e[j] = Jet64::constant(1.0);
        let col = directional_derivative_jet(|p| f.eval_jet(p), &base, &e)?;
        for (i, c) in col.iter().enumerate() {
            jac[(i, j)] = c.value();
        }
        e[j] = Jet64::constant(0.0);
    }
    Ok(jac)
}

/// `(∂f/∂x)(x)·v` without forming the Jacobian.
pub fn directional_derivative(f: &dyn SmoothFn, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    ensure_len("directional derivative input", f.input_dim(), x.len())?;
    ensure_len("directional derivative direction", f.input_dim(), v.len())?;
    let out = directional_derivative_jet(|p| f.eval_jet(p), &constants(x), &constants(v))?;
    Ok(values(&out))
}

/// Gradient of a scalar function.
pub fn gradient(f: &dyn SmoothFn, x: &[f64]) -> Result<Vec<f64>> {
    ensure_len("gradient input", f.input_dim(), x.len())?;
    Ok(values(&gradient_jet(f, &constants(x))?))
}

/// Hessian-vector product `H(x)·v` of a scalar function via nested duals.
pub fn hessian_vector(f: &dyn SmoothFn, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    ensure_len("hessian-vector output", 1, f.output_dim())?;
    ensure_len("hessian-vector input", f.input_dim(), x.len())?;
    ensure_len("hessian-vector direction", f.input_dim(), v.len())?;
    let (along_v, dv) = Jet64::seed_real(x, v);
    let grad = gradient_jet(f, &along_v)?;
    Ok(grad.iter().map(|g| g.tangent(dv).value()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Identity(usize);
    impl ScalarMap for Identity {
        fn input_dim(&self) -> usize {
            self.0
        }
        fn output_dim(&self) -> usize {
            self.0
        }
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            x.to_vec()
        }
    }

    struct SquareAndProduct;
    impl ScalarMap for SquareAndProduct {
        fn input_dim(&self) -> usize {
            2
        }
        fn output_dim(&self) -> usize {
            2
        }
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![x[0] * x[0], x[0] * x[1]]
        }
    }

    struct Product;
    impl ScalarMap for Product {
        fn input_dim(&self) -> usize {
            2
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![x[0] * x[1]]
        }
    }

    struct HalfNormSquared(usize);
    impl ScalarMap for HalfNormSquared {
        fn input_dim(&self) -> usize {
            self.0
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![crate::scalar::norm_squared(x) * S::from_f64(0.5)]
        }
    }

    struct SquareTimes;
    impl ScalarMap for SquareTimes {
        fn input_dim(&self) -> usize {
            2
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![x[0] * x[0] * x[1]]
        }
    }

    struct Reciprocal;
    impl ScalarMap for Reciprocal {
        fn input_dim(&self) -> usize {
            1
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn apply<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            vec![S::one() / x[0]]
        }
    }

    #[test]
    fn jacobian_of_identity() {
        let j = jacobian(&Identity(2), &[3.0, -1.0]).unwrap();
        assert_eq!(j, DMatrix::identity(2, 2));
    }

    #[test]
    fn jacobian_of_square_and_product() {
        let j = jacobian(&SquareAndProduct, &[2.0, 3.0]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 3.0, 2.0]));
    }

    #[test]
    fn directional_derivatives() {
        let d = directional_derivative(&Identity(3), &[0.3, 0.1, 2.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(d, vec![1.0, 0.0, 0.0]);
        let d = directional_derivative(&Product, &[2.0, 3.0], &[1.0, 1.0]).unwrap();
        assert_eq!(d, vec![5.0]);
    }

    #[test]
    fn hessian_vector_products() {
        let v = [0.3, -1.2, 0.5];
        let hv = hessian_vector(&HalfNormSquared(3), &[1.0, 2.0, 3.0], &v).unwrap();
        assert_eq!(hv, v.to_vec());
        let hv = hessian_vector(&SquareTimes, &[1.0, 2.0], &[1.0, 0.0]).unwrap();
        assert_eq!(hv, vec![4.0, 2.0]);
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        assert!(matches!(
            directional_derivative(&Product, &[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            hessian_vector(&Product, &[1.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            jacobian(&Reciprocal, &[0.0]),
            Err(Error::NonFiniteValue { .. })
        ));
    }
}
