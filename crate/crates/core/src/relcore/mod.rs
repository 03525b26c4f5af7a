//! Domain types for populations, predicates, weighted formulas, units and
//! layer graphs, plus structural validation.
//!
//! All values here are plain data, immutable once built by the model
//! lowering step, and freely shareable across threads.

mod formula;
mod graph;
mod params;
mod schema;
mod validate;

pub use formula::{free_logvars, Formula, Literal, LogVar, Unit, VarId, WeightedFormula};
pub use graph::{sigmoid, Activation, LayerGraph, LayerKind, Loss, Node, Target};
pub use params::{InitRanges, ParameterStore, ParameterTemplate, Weight, WeightId, WeightSpec};
pub use schema::{PopId, Population, PredId, PredicateDecl, PredicateKind, Schema, ValueRange};
pub use validate::{effective_ranges, validate, ValidationReport, Violation, ViolationKind};
