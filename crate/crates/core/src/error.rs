use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{field} {reason}")]
    Invalid { field: String, reason: String },
    #[error("cable {index} is degenerate (length {length:e} m)")]
    DegenerateCable { index: usize, length: f64 },
    #[error("tension matrix is singular (condition estimate {condition:e})")]
    SingularTension { condition: f64 },
    #[error("negative tension: pose outside the wrench-feasible set (min tension {min:.6} N)")]
    NegativeTension { min: f64 },
    #[error("singular matrix in {what} (condition estimate {condition:e})")]
    Singular { what: &'static str, condition: f64 },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("numeric blow-up at step {step}: |qdot| = {norm:e}")]
    BlowUp { step: usize, norm: f64 },
    #[error("pendulum equilibrium did not converge (objective {objective:e})")]
    NoConvergence { objective: f64 },
    #[error("index {index} out of range 1..={max}")]
    OutOfRange { index: usize, max: usize },
}

impl Error {
    pub fn invalid(field: &str, reason: &str) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ (Error::AtStep { .. } | Error::BlowUp { .. }) => e,
            e => Error::AtStep {
                step,
                source: alloc::boxed::Box::new(e),
            },
        }
    }
}
