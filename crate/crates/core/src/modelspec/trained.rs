use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::ModelError;
use crate::relcore::{LayerGraph, ParameterStore, ParameterTemplate, Schema, Weight};

/// Renders weights and latent tables with 17 significant digits:
/// `weight <name> = <value>`, `latent <pred> <object> <value>`, a
/// `mean = <value>` line holding the training-label mean used by MIX and, when
/// the graph has a MIX layer, a `lambda = <value>` line with its coefficient.
pub fn serialize_trained(
    store: &ParameterStore,
    graph: &LayerGraph,
    schema: &Schema,
) -> Result<String, ModelError> {
    for unit in graph.units() {
        for wf in &unit.wfs {
            if wf.weight.0 >= store.weights.len() {
                return Err(ModelError::Mismatch(format!(
                    "unit {} refers to weight #{} but the store has {}",
                    schema.pred_name(unit.head),
                    wf.weight.0,
                    store.weights.len()
                )));
            }
        }
    }
    store.check_shapes(schema).map_err(ModelError::Mismatch)?;
    let mut s = String::new();
    for w in &store.weights {
        let _ = writeln!(s, "weight {} = {:.17e}", w.name, w.value);
    }
    for (p, table) in &store.latents {
        let decl = schema.pred(*p);
        let pop = schema.pop(decl.args[0]);
        for (i, v) in table.iter().enumerate() {
            let _ = writeln!(s, "latent {} {} {:.17e}", decl.name, pop.object_name(i), v);
        }
    }
    let _ = writeln!(s, "mean = {:.17e}", store.label_mean);
    if let Some(l) = graph.mix_lambda() {
        let _ = writeln!(s, "lambda = {:.17e}", l);
    }
    Ok(s)
}

/// Reads a parameter file written by [`serialize_trained`]. Every weight of
/// the template and every latent entry must be present exactly once; frozen
/// flags come from the template.
pub fn load_trained(
    text: &str,
    schema: &Schema,
    template: &ParameterTemplate,
) -> Result<ParameterStore, ModelError> {
    let mut weights: BTreeMap<&str, f64> = BTreeMap::new();
    let mut latents: BTreeMap<_, Vec<Option<f64>>> = template
        .latents
        .iter()
        .map(|p| (*p, vec![None; schema.grounding_count(*p)]))
        .collect();
    let mut label_mean = 0.5;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let err = |message: String| ModelError::Trained {
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let value = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(format!("malformed number '{s}'")))
        };
        match fields.as_slice() {
            [] => {}
            ["weight", name, "=", v] => {
                if weights.insert(name, value(v)?).is_some() {
                    return Err(err(format!("weight {name} given twice")));
                }
            }
            ["latent", pred, obj, v] => {
                let p = schema
                    .pred_id(pred)
                    .filter(|p| latents.contains_key(p))
                    .ok_or_else(|| err(format!("unknown latent predicate {pred}")))?;
                let pop = schema.pop(schema.pred(p).args[0]);
                let idx = pop.lookup(obj).ok_or_else(|| {
                    err(format!("unknown object {obj} of population {}", pop.name()))
                })?;
                let slot = &mut latents.get_mut(&p).expect("checked above")[idx];
                if slot.replace(value(v)?).is_some() {
                    return Err(err(format!("latent {pred} {obj} given twice")));
                }
            }
            ["mean", "=", v] => label_mean = value(v)?,
            ["lambda", "=", v] => {
                value(v)?;
            }
            _ => return Err(err(format!("unrecognized line '{line}'"))),
        }
    }
    let known: BTreeSet<&str> = template.weights.iter().map(|w| w.name.as_str()).collect();
    if let Some(extra) = weights.keys().find(|k| !known.contains(*k)) {
        return Err(ModelError::Mismatch(format!("unknown weight {extra}")));
    }
    let weights = template
        .weights
        .iter()
        .map(|spec| {
            let value = *weights
                .get(spec.name.as_str())
                .ok_or_else(|| ModelError::Mismatch(format!("missing weight {}", spec.name)))?;
            Ok(Weight {
                name: spec.name.clone(),
                value,
                frozen: spec.frozen,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let latents = latents
        .into_iter()
        .map(|(p, table)| {
            let values = table
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| {
                        let pop = schema.pop(schema.pred(p).args[0]);
                        ModelError::Mismatch(format!(
                            "missing latent {} {}",
                            schema.pred_name(p),
                            pop.object_name(i)
                        ))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((p, values))
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(ParameterStore {
        weights,
        latents,
        label_mean,
    })
}

/// The MIX coefficient recorded in a parameter file, if any.
pub fn trained_mix_lambda(text: &str) -> Result<Option<f64>, ModelError> {
    for (i, line) in text.lines().enumerate() {
        if let ["lambda", "=", v] = line.split_whitespace().collect::<Vec<_>>().as_slice() {
            return v.parse::<f64>().map(Some).map_err(|_| ModelError::Trained {
                line: i + 1,
                message: format!("malformed number '{v}'"),
            });
        }
    }
    Ok(None)
}
