//! Loss layers, the backward pass, L1-regularized gradient descent and the
//! training loop with restarts.

mod backward;
mod loss;
mod train;

pub use backward::{
    activation_backward, graph_backward, input_grad, loss_and_gradient, mix_backward, weight_grad,
    GradientTape,
};
pub use loss::{loss_and_dout, LabelSet};
pub use train::{evaluate_loss, sgd_step, train, LogRow, RestartSummary, TrainConfig, TrainingLog};

use crate::engine::EngineError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("degenerate probability {value} for object {object}")]
    DegenerateProbability { object: usize, value: f64 },
    #[error("log loss needs labels in {{0,1}}, got {0}")]
    InvalidLabel(f64),
    #[error("label refers to object {0} outside the target population")]
    LabelOutOfRange(usize),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error("all restarts diverged: {}", summarize(.0))]
    AllRestartsDiverged(Box<TrainingLog>),
}

fn summarize(log: &TrainingLog) -> String {
    log.restarts
        .iter()
        .map(|r| {
            format!(
                "restart {}: {}",
                r.restart,
                r.diverged.as_deref().unwrap_or("ok")
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}
