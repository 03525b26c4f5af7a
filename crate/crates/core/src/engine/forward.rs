use std::collections::BTreeMap;

use super::eliminate::{FactorGraph, PredValues, ValueSource};
use super::interp::{BinaryRelation, Interpretation};
use super::EngineError;
use crate::relcore::{Formula, LayerGraph, Node, ParameterStore, PredId, Schema, Unit};

/// Values of every derived predicate after a forward pass, plus the per-formula
/// counts kept for the backward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerOutputs {
    /// Dense, row-major over the head population(s).
    pub values: BTreeMap<PredId, Vec<f64>>,
    /// Binary derived predicates, materialized as full relations for downstream joins.
    pub relations: BTreeMap<PredId, BinaryRelation>,
    /// `counts[node][k]` is the count vector of formula `k` of linear node `node`.
    pub counts: BTreeMap<usize, Vec<Vec<f64>>>,
}

impl LayerOutputs {
    pub fn get(&self, pred: PredId) -> Option<&[f64]> {
        self.values.get(&pred).map(Vec::as_slice)
    }
}

/// Resolves predicate values from derived outputs, latent tables, then observations.
pub struct ValueView<'a> {
    pub interp: &'a Interpretation,
    pub store: &'a ParameterStore,
    pub outputs: Option<&'a LayerOutputs>,
}

impl<'a> ValueView<'a> {
    pub fn new(
        interp: &'a Interpretation,
        store: &'a ParameterStore,
        outputs: Option<&'a LayerOutputs>,
    ) -> Self {
        Self {
            interp,
            store,
            outputs,
        }
    }
}

impl ValueSource for ValueView<'_> {
    fn values(&self, pred: PredId) -> Option<PredValues<'_>> {
        if let Some(out) = self.outputs {
            if let Some(rel) = out.relations.get(&pred) {
                return Some(PredValues::Binary(rel));
            }
            if let Some(v) = out.values.get(&pred) {
                return Some(PredValues::Unary(v));
            }
        }
        if let Some(v) = self.store.latents.get(&pred) {
            return Some(PredValues::Unary(v));
        }
        if let Some(v) = self.interp.unary.get(&pred) {
            return Some(PredValues::Unary(v));
        }
        self.interp.binary.get(&pred).map(PredValues::Binary)
    }
}

pub(crate) fn var_sizes(unit: &Unit, schema: &Schema) -> Vec<usize> {
    unit.vars.iter().map(|v| schema.pop(v.pop).size()).collect()
}

/// Count of `formula` for one grounding of the head logvars: the sum, over all
/// groundings of the remaining logvars, of the product of literal values.
pub fn count_eta<S: ValueSource>(
    unit: &Unit,
    formula: &Formula,
    head_binding: &[usize],
    schema: &Schema,
    source: &S,
) -> Result<f64, EngineError> {
    assert_eq!(
        head_binding.len(),
        unit.head_vars.len(),
        "binding must ground every head logvar"
    );
    let sizes = var_sizes(unit, schema);
    let mut g = FactorGraph::build(unit, &sizes, formula, source, None)?;
    for (v, &obj) in unit.head_vars.iter().zip(head_binding) {
        let mut onehot = vec![0.0; sizes[v.0]];
        onehot[obj] = 1.0;
        g.scale_factor(*v, &onehot);
    }
    Ok(g.total())
}

/// Counts of `formula` for every grounding of the unit's head at once, by
/// variable elimination over the join tree. Row-major for binary heads.
pub fn join_fastpath<S: ValueSource>(
    unit: &Unit,
    formula: &Formula,
    schema: &Schema,
    source: &S,
) -> Result<Vec<f64>, EngineError> {
    let sizes = var_sizes(unit, schema);
    let mut g = FactorGraph::build(unit, &sizes, formula, source, None)?;
    Ok(match unit.head_vars.as_slice() {
        [x] => g.vector_at(*x),
        [x, y] => g.joint(*x, *y),
        _ => return Err(EngineError::UnsupportedHead),
    })
}

/// Linear output of a unit, `sum_k w_k * count_k`, together with the counts.
pub fn unit_forward<S: ValueSource>(
    unit: &Unit,
    schema: &Schema,
    source: &S,
    store: &ParameterStore,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), EngineError> {
    let n: usize = unit
        .head_vars
        .iter()
        .map(|v| schema.pop(unit.var(*v).pop).size())
        .product();
    let mut out = vec![0.0; n];
    let mut counts = Vec::with_capacity(unit.wfs.len());
    for wf in &unit.wfs {
        let eta = join_fastpath(unit, &wf.formula, schema, source)?;
        let w = store.weight(wf.weight);
        out.iter_mut().zip(&eta).for_each(|(o, c)| *o += w * c);
        counts.push(eta);
    }
    Ok((out, counts))
}

/// Executes every node in topological order. Each derived predicate is
/// computed exactly once.
pub fn graph_forward(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    store: &ParameterStore,
) -> Result<LayerOutputs, EngineError> {
    let order = graph.topo_order().map_err(|_| EngineError::CyclicGraph)?;
    let mut outputs = LayerOutputs::default();
    for i in order {
        let node = &graph.nodes[i];
        let out = node.output();
        let (value, counts) = {
            let view = ValueView::new(interp, store, Some(&outputs));
            match node {
                Node::Linear(unit) => {
                    let (v, c) =
                        unit_forward(unit, schema, &view, store).map_err(|e| e.at(schema, out))?;
                    (v, Some(c))
                }
                Node::Activation { input, kind, .. } => {
                    let x = dense_input(&view, *input).map_err(|e| e.at(schema, out))?;
                    (x.into_iter().map(|v| kind.apply(v)).collect(), None)
                }
                Node::Mix { input, lambda, .. } => {
                    let x = dense_input(&view, *input).map_err(|e| e.at(schema, out))?;
                    let base = lambda * store.label_mean;
                    (
                        x.into_iter().map(|v| base + (1.0 - lambda) * v).collect(),
                        None,
                    )
                }
            }
        };
        if let Some(c) = counts {
            outputs.counts.insert(i, c);
        }
        if schema.pred(out).arity() == 2 {
            let [a, b] = [schema.pred(out).args[0], schema.pred(out).args[1]];
            let rel =
                BinaryRelation::from_dense(schema.pop(a).size(), schema.pop(b).size(), &value);
            outputs.relations.insert(out, rel);
        }
        outputs.values.insert(out, value);
    }
    Ok(outputs)
}

fn dense_input<S: ValueSource>(source: &S, pred: PredId) -> Result<Vec<f64>, EngineError> {
    match source.values(pred) {
        Some(PredValues::Unary(v)) => Ok(v.to_vec()),
        Some(PredValues::Binary(rel)) => Ok(rel.to_dense()),
        None => Err(EngineError::MissingInput(pred)),
    }
}
