//! Forward evaluation: formula counting, unit outputs and layer-by-layer
//! execution of a validated graph.

mod eliminate;
mod forward;
mod interp;

pub use eliminate::{cell_touches, reset_cell_touches, FactorGraph, PredValues, ValueSource};
pub(crate) use forward::var_sizes;
pub use forward::{count_eta, graph_forward, join_fastpath, unit_forward, LayerOutputs, ValueView};
pub use interp::{BinaryRelation, Cell, Interpretation};

use crate::relcore::{PredId, Schema};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("missing input predicate #{}", .0 .0)]
    MissingInput(PredId),
    #[error("values of predicate #{} do not match its declared shape", .0 .0)]
    ShapeMismatch(PredId),
    #[error("unit heads must have one or two logvars")]
    UnsupportedHead,
    #[error("layer graph has a cycle")]
    CyclicGraph,
    #[error("while computing {node}: {message}")]
    InNode { node: String, message: String },
}

impl EngineError {
    pub(crate) fn at(self, schema: &Schema, node: PredId) -> Self {
        let message = match &self {
            EngineError::MissingInput(p) => {
                format!("missing input predicate {}", schema.pred_name(*p))
            }
            EngineError::ShapeMismatch(p) => {
                format!(
                    "values of {} do not match its declared shape",
                    schema.pred_name(*p)
                )
            }
            other => other.to_string(),
        };
        EngineError::InNode {
            node: schema.pred_name(node).to_string(),
            message,
        }
    }
}
