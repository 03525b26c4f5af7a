//! Reverse pass through a layer graph.
//!
//! For a weight `w_k` of a unit with head `Q`, the gradient is
//! `sum_X count(phi_k, X) * dQ[X]`. For a differentiable predicate `P`
//! occurring in `phi_k`, the contribution to `dP[Y]` is
//! `sign * w_k * sum_X dQ[X] * count(phi_k \ P, X, Y)`, where the count only
//! ranges over groundings in which `P`'s arguments are bound to `Y` and the
//! head to `X` consistently, and `sign` is -1 when `P` occurs negated. Both
//! sums are computed by elimination with `dQ` folded into the head factor.

use std::collections::BTreeMap;

use super::LearnError;
use crate::engine::{
    graph_forward, join_fastpath, var_sizes, FactorGraph, Interpretation, LayerOutputs,
    ValueSource, ValueView,
};
use crate::relcore::{
    Activation, LayerGraph, Node, ParameterStore, PredId, PredicateKind, Schema, Unit, VarId,
};

/// Gradients of the error with respect to weights, latent tables and derived
/// predicates. Observed predicates never appear.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientTape {
    pub d_weights: Vec<f64>,
    pub d_latents: BTreeMap<PredId, Vec<f64>>,
    pub d_derived: BTreeMap<PredId, Vec<f64>>,
}

impl GradientTape {
    /// A zeroed tape shaped like `store`.
    pub fn zeros(store: &ParameterStore) -> Self {
        Self {
            d_weights: vec![0.0; store.weights.len()],
            d_latents: store
                .latents
                .iter()
                .map(|(p, v)| (*p, vec![0.0; v.len()]))
                .collect(),
            d_derived: BTreeMap::new(),
        }
    }

    /// Adds `contrib` to the gradient of `pred` if it is latent or derived.
    pub fn accumulate(&mut self, schema: &Schema, pred: PredId, contrib: &[f64]) {
        let target = match schema.pred(pred).kind {
            PredicateKind::Latent => self
                .d_latents
                .entry(pred)
                .or_insert_with(|| vec![0.0; contrib.len()]),
            PredicateKind::Derived => self
                .d_derived
                .entry(pred)
                .or_insert_with(|| vec![0.0; contrib.len()]),
            PredicateKind::ObservedBool | PredicateKind::ObservedReal => return,
        };
        target.iter_mut().zip(contrib).for_each(|(t, c)| *t += c);
    }

    /// Largest absolute entry over weights and latents.
    pub fn max_abs(&self) -> f64 {
        self.d_weights
            .iter()
            .chain(self.d_latents.values().flatten())
            .fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.d_weights
            .iter()
            .chain(self.d_latents.values().flatten())
            .all(|g| g.is_finite())
    }
}

/// Gradient of every weighted formula of `unit` given the head gradient `d_out`.
/// Frozen weights get a value too; the optimizer skips them.
pub fn weight_grad<S: ValueSource>(
    unit: &Unit,
    schema: &Schema,
    source: &S,
    d_out: &[f64],
) -> Result<Vec<f64>, LearnError> {
    unit.wfs
        .iter()
        .map(|wf| {
            let eta = join_fastpath(unit, &wf.formula, schema, source)?;
            Ok(dot(&eta, d_out))
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Accumulates the unit's contribution to the gradients of its latent and
/// derived inputs.
pub fn input_grad<S: ValueSource>(
    unit: &Unit,
    schema: &Schema,
    source: &S,
    store: &ParameterStore,
    d_out: &[f64],
    tape: &mut GradientTape,
) -> Result<(), LearnError> {
    let sizes = var_sizes(unit, schema);
    for wf in &unit.wfs {
        let w = store.weight(wf.weight);
        for (i, lit) in wf.formula.literals().iter().enumerate() {
            if !schema.pred(lit.pred).kind.is_differentiable() {
                continue;
            }
            let sign = if lit.negated { -1.0 } else { 1.0 };
            let g = FactorGraph::build(unit, &sizes, &wf.formula, source, Some(i))?;
            let mut contrib = match unit.head_vars.as_slice() {
                [x] => {
                    let mut g = g;
                    g.scale_factor(*x, d_out);
                    literal_marginal(&mut g, &lit.args)
                }
                [x, y] => {
                    let ny = sizes[y.0];
                    let mut acc: Option<Vec<f64>> = None;
                    for obj in 0..sizes[x.0] {
                        let row = &d_out[obj * ny..(obj + 1) * ny];
                        if row.iter().all(|&d| d == 0.0) {
                            continue;
                        }
                        let mut gx = g.clone();
                        let mut clamp = vec![0.0; sizes[x.0]];
                        clamp[obj] = 1.0;
                        gx.scale_factor(*x, &clamp);
                        gx.scale_factor(*y, row);
                        let m = literal_marginal(&mut gx, &lit.args);
                        match &mut acc {
                            Some(a) => a.iter_mut().zip(&m).for_each(|(a, b)| *a += b),
                            None => acc = Some(m),
                        }
                    }
                    acc.unwrap_or_else(|| vec![0.0; lit.args.iter().map(|v| sizes[v.0]).product()])
                }
                _ => return Err(crate::engine::EngineError::UnsupportedHead.into()),
            };
            let scale = sign * w;
            contrib.iter_mut().for_each(|c| *c *= scale);
            tape.accumulate(schema, lit.pred, &contrib);
        }
    }
    Ok(())
}

/// Sum of the graph over everything except the removed literal's arguments.
fn literal_marginal(g: &mut FactorGraph<'_>, args: &[VarId]) -> Vec<f64> {
    match args {
        [v] => g.vector_at(*v),
        [a, b] => g.joint(*a, *b),
        _ => unreachable!("validated predicates are unary or binary"),
    }
}

/// Gradient through an elementwise activation, expressed with its output.
pub fn activation_backward(kind: Activation, out: &[f64], d_out: &[f64]) -> Vec<f64> {
    out.iter()
        .zip(d_out)
        .map(|(o, d)| d * kind.derivative_from_output(*o))
        .collect()
}

/// Gradient through `lambda * mean + (1 - lambda) * signal`.
pub fn mix_backward(lambda: f64, d_out: &[f64]) -> Vec<f64> {
    d_out.iter().map(|d| (1.0 - lambda) * d).collect()
}

/// Reverse-topological pass: the target gradient `d_target` flows back
/// through MIX, activations and units into every weight and latent table.
pub fn graph_backward(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    store: &ParameterStore,
    outputs: &LayerOutputs,
    d_target: &[f64],
) -> Result<GradientTape, LearnError> {
    let order = graph
        .topo_order()
        .map_err(|_| crate::engine::EngineError::CyclicGraph)?;
    let mut tape = GradientTape::zeros(store);
    tape.d_derived
        .insert(graph.target.prediction, d_target.to_vec());
    let view = ValueView::new(interp, store, Some(outputs));
    for &i in order.iter().rev() {
        let node = &graph.nodes[i];
        let Some(d_out) = tape.d_derived.get(&node.output()).cloned() else {
            continue;
        };
        match node {
            Node::Linear(unit) => {
                let counts = outputs.counts.get(&i).ok_or_else(|| {
                    LearnError::Inconsistent("forward counts missing for a unit".into())
                })?;
                for (wf, eta) in unit.wfs.iter().zip(counts) {
                    tape.d_weights[wf.weight.0] += dot(eta, &d_out);
                }
                input_grad(unit, schema, &view, store, &d_out, &mut tape)?;
            }
            Node::Activation {
                input,
                output,
                kind,
            } => {
                let out = outputs
                    .get(*output)
                    .ok_or_else(|| LearnError::Inconsistent("forward output missing".into()))?;
                let d_in = activation_backward(*kind, out, &d_out);
                tape.accumulate(schema, *input, &d_in);
            }
            Node::Mix { input, lambda, .. } => {
                let d_in = mix_backward(*lambda, &d_out);
                tape.accumulate(schema, *input, &d_in);
            }
        }
    }
    Ok(tape)
}

/// Forward pass, loss on `labels`, and the full gradient tape.
pub fn loss_and_gradient(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    store: &ParameterStore,
    labels: &super::LabelSet,
) -> Result<(f64, GradientTape), LearnError> {
    let outputs = graph_forward(graph, schema, interp, store)?;
    let pred = outputs
        .get(graph.target.prediction)
        .ok_or_else(|| LearnError::Inconsistent("target not computed".into()))?;
    let (loss, dout) = super::loss_and_dout(pred, labels, graph.target.loss)?;
    let tape = graph_backward(graph, schema, interp, store, &outputs, &dout)?;
    Ok((loss, tape))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_backward_at_half_is_quarter() {
        let d = activation_backward(Activation::Sigmoid, &[0.5], &[1.0]);
        assert_eq!(d, vec![0.25]);
    }

    #[test]
    fn relu_kink_has_zero_subgradient() {
        let d = activation_backward(Activation::Relu, &[0.0, 2.0], &[1.0, 1.0]);
        assert_eq!(d, vec![0.0, 1.0]);
    }

    #[test]
    fn mix_scales_by_one_minus_lambda() {
        assert_eq!(mix_backward(0.25, &[4.0, -2.0]), vec![3.0, -1.5]);
        assert_eq!(mix_backward(1.0, &[4.0]), vec![0.0]);
    }

    #[test]
    fn activation_backward_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for kind in [
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Relu,
            Activation::Identity,
        ] {
            for _ in 0..100 {
                let mut x: f64 = rng.random_range(-3.0..3.0);
                if kind == Activation::Relu && x.abs() < 1e-3 {
                    x += 0.01;
                }
                let d: f64 = rng.random_range(-2.0..2.0);
                let out = kind.apply(x);
                let analytic = activation_backward(kind, &[out], &[d])[0];
                let numeric = d * (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                let rel = (analytic - numeric).abs() / numeric.abs().max(1e-8);
                assert!(
                    rel < 1e-6 || (analytic - numeric).abs() < 1e-9,
                    "{kind:?} at {x}: {analytic} vs {numeric}"
                );
            }
        }
    }
}
