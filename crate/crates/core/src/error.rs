use thiserror::Error;

use crate::pispl::Diagnostic;

/// Errors raised while building, checking or relating models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("agent index {index} out of range (model has {count} agents)")]
    AgentOutOfRange { index: usize, count: usize },

    #[error("reachable state cap of {cap} states exceeded")]
    StateCap { cap: usize },

    #[error("invalid agent `{agent}`: {reason}")]
    InvalidAgent { agent: String, reason: String },

    #[error("a system needs at least one agent")]
    NoAgents,

    #[error("instance size must be at least 1")]
    ZeroInstance,

    #[error("invalid template: {}", .0.join("; "))]
    InvalidTemplate(Vec<String>),

    #[error("`{0}` does not belong to this naming")]
    ForeignObject(String),

    #[error("ill-formed formula: {}", .0.join("; "))]
    InvalidFormula(Vec<String>),

    #[error("invalid index assignment: {0}")]
    BadAssignment(String),

    #[error("instance of {n} agents is too small for {needed} distinct indices")]
    TooFewAgents { n: usize, needed: usize },

    #[error("models are not instances of the same template")]
    TemplateMismatch,

    #[error("relation endpoints are inconsistent: {0}")]
    BadRelation(String),

    #[error("model with {states} states exceeds the brute-force bound of {bound}")]
    SizeBound { states: usize, bound: usize },

    #[error("{}", render_diagnostics(.0))]
    Source(Vec<Diagnostic>),
}

fn render_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
