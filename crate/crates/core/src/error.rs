use thiserror::Error;

/// Errors raised by the simulation and synthesis layers.
///
/// Infeasibility of an optimization problem is *not* an error; it is a
/// first-class [`crate::synthesis::Status`] so callers can apply their own
/// fallback policy.
#[derive(Debug, Error)]
pub enum Error {
    /// A density left the physical range `[0, u_max]` by more than the
    /// floating-point clamp tolerance.
    #[error("{quantity} = {value} outside [0, {u_max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        u_max: f64,
    },

    /// A parameter failed a basic precondition (positivity, ordering, ...).
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Time step violates the CFL bound of the explicit scheme.
    #[error("time step {dt} exceeds CFL bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    /// Bisection was handed a bracket whose endpoint values do not straddle
    /// the target level.
    #[error("bracket [{lo}, {hi}] does not straddle target {target} (f(lo)={f_lo}, f(hi)={f_hi})")]
    Bracket {
        lo: f64,
        hi: f64,
        target: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// Scenario configuration failed validation; names the offending field.
    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Scenario configuration could not be parsed at all.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// Synthesis reported infeasible and the scenario's fallback policy is
    /// `error`.
    #[error("synthesis infeasible at control step {step} (t = {time} s) with policy `error`")]
    InfeasibleAbort { step: usize, time: f64 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
