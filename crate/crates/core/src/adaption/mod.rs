//! Model adaption: surrogate evaluation, deviation between simulated and
//! measured behavior, configuration selection and the keep /
//! reparameterize / reselect loop.

mod adapt;
mod scenario;
mod select;
mod surrogate;
mod telemetry;

use thiserror::Error;

use crate::kgraph::GraphError;

pub use adapt::{
    adapt, refit_surrogate, signal_name, split_signal, AdaptionDecision, AdaptionVerdict,
    SelectionPolicy, Thresholds,
};
pub use scenario::{
    decision_log, simulate, DecisionRecord, Profile, Scenario, SimulationSettings, TruthOverride,
};
pub use select::{select_configuration, system_of, Binding, Budget, ModelConfiguration};
pub use surrogate::{evaluate_surrogate, SurrogateOutput};
pub use telemetry::{compute_deviation, DeviationReport, TelemetrySeries, RMS_FLOOR};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptError {
    #[error("model `{0}` has no surrogate")]
    NoSurrogate(String),
    #[error("model `{model}` is missing input `{port}`")]
    MissingInput { model: String, port: String },
    #[error("value {value} of `{model}#{port}` is outside the port range")]
    OutOfRange {
        model: String,
        port: String,
        value: f64,
    },
    #[error("signal mismatch: {0}")]
    SignalMismatch(String),
    #[error("empty window: {0}")]
    EmptyWindow(String),
    #[error("no feasible configuration: asset `{asset}`: {reason}")]
    Infeasible { asset: String, reason: String },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl AdaptError {
    pub fn code(&self) -> &'static str {
        match self {
            AdaptError::NoSurrogate(_) => "NoSurrogate",
            AdaptError::MissingInput { .. } => "MissingInput",
            AdaptError::OutOfRange { .. } => "OutOfRange",
            AdaptError::SignalMismatch(_) => "SignalMismatch",
            AdaptError::EmptyWindow(_) => "EmptyWindow",
            AdaptError::Infeasible { .. } => "Infeasible",
            AdaptError::DegenerateFit(_) => "DegenerateFit",
            AdaptError::Scenario(_) => "ScenarioError",
            AdaptError::Validation(_) => "ValidationError",
            AdaptError::Graph(e) => e.code(),
        }
    }

    pub fn path(&self) -> Option<String> {
        match self {
            AdaptError::Infeasible { asset, .. } => Some(asset.clone()),
            AdaptError::MissingInput { model, port }
            | AdaptError::OutOfRange { model, port, .. } => Some(format!("{model}#{port}")),
            _ => None,
        }
    }
}
