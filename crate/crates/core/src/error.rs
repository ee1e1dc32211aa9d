use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite value while evaluating {context}")]
    NonFiniteValue { context: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("inertia matrix is numerically singular (1-norm condition number {condition:.3e})")]
    SingularInertia { condition: f64 },

    #[error("({a}, {b}) lies outside the region where the universal formula is defined (need a > 0 or b > 0)")]
    InvalidRegion { a: f64, b: f64 },

    #[error("constraint gradient vanishes outside the interior of the constraint set at y = {witness:?} (|grad| = {grad_norm:.3e}, psi = {psi:.3e})")]
    GradientConditionViolated {
        witness: Vec<f64>,
        grad_norm: f64,
        psi: f64,
    },

    #[error("gain lambda_{index} = {lambda} is below the Lipschitz constant {lipschitz} of alpha")]
    GainTooSmall {
        index: usize,
        lambda: f64,
        lipschitz: f64,
    },

    #[error("relative-degree condition fails inside the constraint set at {witness:?} (sigma_min = {sigma_min:.3e})")]
    RankDeficientOnC { witness: Vec<f64>, sigma_min: f64 },

    #[error("decoupling matrix is rank deficient at this state (sigma_min = {sigma_min:.3e})")]
    RankDeficientAtState { sigma_min: f64 },

    #[error("CBF constraint infeasible: |L_g h| ~ 0 and L_f h + alpha(h) = {lf_plus_alpha:.3e} < 0")]
    InfeasibleAtState { lf_plus_alpha: f64 },

    #[error("initial state is outside the safe set (h(x0) = {h:.3e})")]
    InitialStateUnsafe { h: f64 },

    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_len(context: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected,
            found,
        })
    }
}
