//! JSON front end for `agler-core`: instance documents, command dispatch and
//! result encoding used by the `agler` binary.

pub mod commands;
pub mod instance;
pub mod output;

use serde_json::Value;

pub use commands::{run, Command, Settings};
pub use instance::InstanceDocument;
pub use output::{CommandResult, Status};

/// A failed command: machine-readable code, message, outcome class and
/// whatever partial payload is worth reporting.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{code}: {message}")]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub status: Status,
    pub payload: Option<Value>,
}

impl CliError {
    /// Malformed or inconsistent instance document.
    pub fn schema(message: impl Into<String>) -> Self {
        CliError {
            code: "schema".into(),
            message: message.into(),
            status: Status::Error,
            payload: None,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: "io".into(),
            message: message.into(),
            status: Status::Error,
            payload: None,
        }
    }
}

impl From<agler_core::Error> for CliError {
    fn from(e: agler_core::Error) -> Self {
        use agler_core::Error as E;
        let status = match &e {
            E::PreconditionViolated(_) | E::ExtensionFailure { .. } | E::UnboundedMultiplier { .. } => {
                Status::Infeasible
            }
            _ => Status::Error,
        };
        let payload = match &e {
            E::ExtensionFailure {
                point,
                partial,
                worst_margins,
            } => Some(serde_json::json!({
                "point": point,
                "partial": output::function(partial),
                "worst_margins": output::nums(worst_margins),
            })),
            E::FitFailure { best_residual, profile } => Some(serde_json::json!({
                "best_residual": output::num(*best_residual),
                "grid_profile": profile.iter().map(|(t, r)| output::nums(&[*t, *r])).collect::<Vec<_>>(),
            })),
            E::NumericalFailure { lower, upper, .. } => Some(serde_json::json!({
                "lower": output::num(*lower),
                "upper": output::num(*upper),
            })),
            E::UnboundedMultiplier { defect, threshold } => Some(serde_json::json!({
                "defect": output::num(*defect),
                "threshold": output::num(*threshold),
            })),
            _ => None,
        };
        CliError {
            code: e.code().into(),
            message: e.to_string(),
            status,
            payload,
        }
    }
}
