//! Brute-force reference evaluation by exhaustive grounding, used to check
//! the engine and the backward pass. Slow on purpose: nested loops over every
//! grounding, dense tables, no join trees.

use std::collections::BTreeMap;

use crate::engine::{Interpretation, LayerOutputs};
use crate::learn::LabelSet;
use crate::relcore::{
    Formula, LayerGraph, Loss, Node, ParameterStore, PredId, PredicateKind, Schema, Unit,
};

/// Largest population the oracle will enumerate.
pub const MAX_POPULATION: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(
        "population {name} has {size} objects; the oracle enumerates at most {MAX_POPULATION}"
    )]
    PopulationTooLarge { name: String, size: usize },
    #[error("no values for predicate {0}")]
    Missing(String),
    #[error("layer graph has a cycle")]
    Cyclic,
    #[error("non-finite loss at {0}")]
    NonFinite(String),
}

/// Dense value table for every predicate, indexed row-major by argument objects.
#[derive(Debug, Clone, Default)]
pub struct Tables {
    tables: BTreeMap<PredId, Vec<f64>>,
}

impl Tables {
    /// Dense copies of the observed facts and latent tables.
    pub fn new(schema: &Schema, interp: &Interpretation, store: &ParameterStore) -> Self {
        let mut tables = BTreeMap::new();
        for (i, decl) in schema.predicates.iter().enumerate() {
            let p = PredId(i);
            let n = schema.grounding_count(p);
            let table = match decl.kind {
                PredicateKind::Latent => store.latents.get(&p).cloned(),
                PredicateKind::ObservedBool | PredicateKind::ObservedReal => match decl.arity() {
                    1 => interp.unary.get(&p).cloned(),
                    _ => interp.binary.get(&p).map(|rel| {
                        let cols = schema.pop(decl.args[1]).size();
                        let mut dense = vec![0.0; n];
                        for c in rel.cells() {
                            dense[c.row as usize * cols + c.col as usize] += c.value;
                        }
                        dense
                    }),
                },
                PredicateKind::Derived => None,
            };
            if let Some(t) = table {
                tables.insert(p, t);
            }
        }
        Self { tables }
    }

    pub fn get(&self, p: PredId) -> Option<&[f64]> {
        self.tables.get(&p).map(Vec::as_slice)
    }

    pub fn insert(&mut self, p: PredId, values: Vec<f64>) {
        self.tables.insert(p, values);
    }
}

/// Sum over every grounding of the unit's logvars (head logvars fixed to
/// `head_binding`) of the product of literal values. Any join shape is
/// accepted, including cycles and repeated predicates.
pub fn naive_eta(
    unit: &Unit,
    formula: &Formula,
    head_binding: &[usize],
    schema: &Schema,
    tables: &Tables,
) -> Result<f64, OracleError> {
    let lits = match formula {
        Formula::True => return Ok(1.0),
        Formula::Conj(lits) => lits,
    };
    let sizes: Vec<usize> = unit.vars.iter().map(|v| schema.pop(v.pop).size()).collect();
    for (v, &n) in unit.vars.iter().zip(&sizes) {
        if n > MAX_POPULATION {
            return Err(OracleError::PopulationTooLarge {
                name: schema.pop(v.pop).name().to_string(),
                size: n,
            });
        }
    }
    let mut lit_tables = Vec::new();
    for lit in lits {
        let t = tables
            .get(lit.pred)
            .ok_or_else(|| OracleError::Missing(schema.pred_name(lit.pred).to_string()))?;
        lit_tables.push(t);
    }

    let mut assignment = vec![0usize; unit.vars.len()];
    let mut fixed = vec![false; unit.vars.len()];
    for (v, &obj) in unit.head_vars.iter().zip(head_binding) {
        assignment[v.0] = obj;
        fixed[v.0] = true;
    }
    // Only logvars that occur in the formula are summed over.
    let mut used = vec![false; unit.vars.len()];
    for lit in lits {
        for a in &lit.args {
            used[a.0] = true;
        }
    }
    let free: Vec<usize> = (0..unit.vars.len())
        .filter(|&i| used[i] && !fixed[i])
        .collect();
    if free.iter().any(|&i| sizes[i] == 0) {
        return Ok(0.0);
    }

    let mut total = 0.0;
    loop {
        let mut prod = 1.0;
        for (lit, table) in lits.iter().zip(&lit_tables) {
            let decl = schema.pred(lit.pred);
            let mut idx = 0;
            for (a, pop) in lit.args.iter().zip(&decl.args) {
                idx = idx * schema.pop(*pop).size() + assignment[a.0];
            }
            let v = table[idx];
            prod *= if lit.negated { 1.0 - v } else { v };
        }
        total += prod;

        let mut k = 0;
        loop {
            if k == free.len() {
                return Ok(total);
            }
            let i = free[k];
            assignment[i] += 1;
            if assignment[i] < sizes[i] {
                break;
            }
            assignment[i] = 0;
            k += 1;
        }
    }
}

fn head_bindings(unit: &Unit, schema: &Schema) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for v in &unit.head_vars {
        let n = schema.pop(unit.var(*v).pop).size();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |o| {
                    let mut b = prefix.clone();
                    b.push(o);
                    b
                })
            })
            .collect();
    }
    out
}

/// Every derived predicate of `graph`, computed with [`naive_eta`].
pub fn naive_forward(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    store: &ParameterStore,
) -> Result<LayerOutputs, OracleError> {
    let mut tables = Tables::new(schema, interp, store);
    let order = graph.topo_order().map_err(|_| OracleError::Cyclic)?;
    let mut outputs = LayerOutputs::default();
    for i in order {
        let node = &graph.nodes[i];
        let values = match node {
            Node::Linear(unit) => {
                let mut out = Vec::new();
                for binding in head_bindings(unit, schema) {
                    let mut s = 0.0;
                    for wf in &unit.wfs {
                        s += store.weights[wf.weight.0].value
                            * naive_eta(unit, &wf.formula, &binding, schema, &tables)?;
                    }
                    out.push(s);
                }
                out
            }
            Node::Activation { input, kind, .. } => {
                let inp = tables
                    .get(*input)
                    .ok_or_else(|| OracleError::Missing(schema.pred_name(*input).to_string()))?;
                inp.iter()
                    .map(|&x| match kind {
                        crate::relcore::Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
                        crate::relcore::Activation::Tanh => x.tanh(),
                        crate::relcore::Activation::Relu => x.max(0.0),
                        crate::relcore::Activation::Identity => x,
                    })
                    .collect()
            }
            Node::Mix { input, lambda, .. } => {
                let inp = tables
                    .get(*input)
                    .ok_or_else(|| OracleError::Missing(schema.pred_name(*input).to_string()))?;
                inp.iter()
                    .map(|&x| lambda * store.label_mean + (1.0 - lambda) * x)
                    .collect()
            }
        };
        tables.insert(node.output(), values.clone());
        outputs.values.insert(node.output(), values);
    }
    Ok(outputs)
}

/// Mean loss of the oracle's prediction on `labels`.
pub fn naive_loss(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    store: &ParameterStore,
    labels: &LabelSet,
) -> Result<f64, OracleError> {
    let out = naive_forward(graph, schema, interp, store)?;
    let pred = out.values.get(&graph.target.prediction).ok_or_else(|| {
        OracleError::Missing(schema.pred_name(graph.target.prediction).to_string())
    })?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (o, y) in labels.iter() {
        let p = pred[o];
        sum += match graph.target.loss {
            Loss::LogLoss => -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()),
            Loss::Mse => (p - y) * (p - y),
        };
    }
    Ok(sum / labels.len() as f64)
}

/// Central-difference estimate of the loss gradient for every learnable
/// parameter. Frozen weights get 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NumericGradient {
    pub weights: Vec<f64>,
    pub latents: BTreeMap<PredId, Vec<f64>>,
}

pub fn numeric_grad(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    store: &ParameterStore,
    labels: &LabelSet,
    h: f64,
) -> Result<NumericGradient, OracleError> {
    let mut probe = store.clone();
    let diff =
        |probe: &mut ParameterStore, what: &str, set: &dyn Fn(&mut ParameterStore, f64), x: f64| {
            set(probe, x + h);
            let up = naive_loss(graph, schema, interp, probe, labels)?;
            set(probe, x - h);
            let down = naive_loss(graph, schema, interp, probe, labels)?;
            set(probe, x);
            if !up.is_finite() || !down.is_finite() {
                return Err(OracleError::NonFinite(what.to_string()));
            }
            Ok((up - down) / (2.0 * h))
        };
    let mut grad = NumericGradient::default();
    for i in 0..store.weights.len() {
        if store.weights[i].frozen {
            grad.weights.push(0.0);
            continue;
        }
        let x = store.weights[i].value;
        let g = diff(
            &mut probe,
            &store.weights[i].name,
            &|s, v| s.weights[i].value = v,
            x,
        )?;
        grad.weights.push(g);
    }
    for (p, table) in &store.latents {
        let mut out = Vec::with_capacity(table.len());
        for (j, &x) in table.iter().enumerate() {
            let p = *p;
            let what = format!("{}[{j}]", schema.pred_name(p));
            out.push(diff(
                &mut probe,
                &what,
                &|s, v| s.latents.get_mut(&p).expect("same shape")[j] = v,
                x,
            )?);
        }
        grad.latents.insert(*p, out);
    }
    Ok(grad)
}
