use thiserror::Error;

use crate::rates::Violations;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a formula (negative time, NaN, ...).
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    /// A parameter struct field violates its invariant.
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    InvalidParam {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("schedule is infeasible: {0}")]
    Infeasible(Violations),

    /// A variable that the scheme eliminates carries a nonzero value.
    #[error("scheme {scheme} requires {var} = 0, got {value}")]
    SchemeRestriction {
        scheme: &'static str,
        var: &'static str,
        value: f64,
    },
}

pub(crate) fn check_nonneg(what: &'static str, value: f64) -> Result<f64> {
    if value.is_nan() || value < 0.0 {
        Err(Error::Domain { what, value })
    } else {
        Ok(value)
    }
}
