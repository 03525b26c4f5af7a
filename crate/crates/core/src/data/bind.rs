use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{DataError, Dataset};
use crate::engine::{BinaryRelation, Cell, Interpretation};
use crate::learn::LabelSet;
use crate::relcore::{LayerGraph, PopId, Population, PredId, PredicateKind, Schema};

/// A dataset resolved against a schema.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bound {
    pub interp: Interpretation,
    /// Labels per label predicate, ordered by object index.
    pub labels: BTreeMap<PredId, LabelSet>,
    pub synthetic: BTreeMap<PopId, BTreeSet<usize>>,
}

impl Bound {
    /// Labels of the graph's target predicate, or an empty set.
    pub fn target_labels(&self, graph: &LayerGraph) -> LabelSet {
        self.labels
            .get(&graph.target.labels)
            .cloned()
            .unwrap_or_default()
    }
}

fn facts_file(pred: &str) -> String {
    format!("facts/{pred}.tsv")
}

/// Sizes the schema's populations from the dataset, then loads every observed
/// predicate. Populations may only grow: a manifest with fewer objects than
/// the model declares is rejected. Every observed predicate the graph reads
/// must have a fact file; label predicates are read from the label file.
pub fn bind(ds: &Dataset, schema: &mut Schema, graph: &LayerGraph) -> Result<Bound, DataError> {
    for pop in &mut schema.populations {
        let names = ds.populations.get(pop.name()).ok_or_else(|| {
            DataError::Schema(format!("population {} is not in the manifest", pop.name()))
        })?;
        if names.len() < pop.size() {
            return Err(DataError::Schema(format!(
                "population {} has {} objects in the manifest but the model declares {}",
                pop.name(),
                names.len(),
                pop.size()
            )));
        }
        *pop = Population::with_names(pop.name().to_string(), names.clone())
            .map_err(DataError::Schema)?;
    }

    let used: BTreeSet<PredId> = graph.units().flat_map(|u| u.inputs()).collect();
    let mut bound = Bound::default();
    for (i, decl) in schema.predicates.iter().enumerate() {
        let p = PredId(i);
        if !decl.kind.is_observed() || p == graph.target.labels {
            continue;
        }
        let Some(facts) = ds.facts.get(&decl.name) else {
            if used.contains(&p) {
                return Err(DataError::Schema(format!(
                    "no facts for predicate {} (expected {})",
                    decl.name,
                    facts_file(&decl.name)
                )));
            }
            continue;
        };
        let file = facts_file(&decl.name);
        let boolean = decl.kind == PredicateKind::ObservedBool;
        let pops: Vec<&Population> = decl.args.iter().map(|a| schema.pop(*a)).collect();
        let resolve = |name: &str, pop: &Population, line: usize| {
            pop.lookup(name).ok_or_else(|| DataError::UnknownObject {
                file: file.clone(),
                line,
                object: name.to_string(),
                pop: pop.name().to_string(),
            })
        };
        let check_value = |v: f64, line: usize| {
            if boolean && v != 0.0 && v != 1.0 {
                Err(DataError::Parse {
                    file: file.clone(),
                    line,
                    message: format!("boolean predicate {} has value {v}", decl.name),
                })
            } else {
                Ok(())
            }
        };
        match pops.as_slice() {
            [pop] => {
                let mut values = vec![0.0; pop.size()];
                let mut seen = vec![false; pop.size()];
                for f in facts {
                    let r = f.read(1, &file)?;
                    check_value(r.value, f.line)?;
                    let o = resolve(r.args[0], pop, f.line)?;
                    if std::mem::replace(&mut seen[o], true) {
                        return Err(duplicate(&file, f.line, &r.args));
                    }
                    values[o] = r.value;
                }
                bound.interp.insert_unary(p, values);
            }
            [rows, cols] => {
                let mut cells = Vec::with_capacity(facts.len());
                let mut seen = HashSet::with_capacity(facts.len());
                for (pos, f) in facts.iter().enumerate() {
                    let r = f.read(2, &file)?;
                    check_value(r.value, f.line)?;
                    let row = resolve(r.args[0], rows, f.line)?;
                    let col = resolve(r.args[1], cols, f.line)?;
                    if !seen.insert((row, col)) {
                        return Err(duplicate(&file, f.line, &r.args));
                    }
                    cells.push(Cell {
                        row: row as u32,
                        col: col as u32,
                        value: r.value,
                        key: r.key.unwrap_or(pos as i64),
                    });
                }
                let rel = BinaryRelation::new(rows.size(), cols.size(), cells)
                    .map_err(DataError::Schema)?;
                bound.interp.insert_binary(p, rel);
            }
            _ => {
                return Err(DataError::Schema(format!(
                    "predicate {} has unsupported arity",
                    decl.name
                )))
            }
        }
    }

    for (name, facts) in &ds.labels {
        let Some(p) = schema.pred_id(name) else {
            continue;
        };
        let decl = schema.pred(p);
        if !decl.kind.is_observed() || decl.arity() != 1 {
            return Err(DataError::Schema(format!(
                "labels given for {name}, which is not an observed unary predicate"
            )));
        }
        let pop = schema.pop(decl.args[0]);
        let mut pairs = Vec::with_capacity(facts.len());
        let mut seen = HashSet::new();
        for f in facts {
            let r = f.read(1, "labels.tsv")?;
            let o = pop
                .lookup(r.args[0])
                .ok_or_else(|| DataError::UnknownObject {
                    file: "labels.tsv".into(),
                    line: f.line,
                    object: r.args[0].to_string(),
                    pop: pop.name().to_string(),
                })?;
            if decl.kind == PredicateKind::ObservedBool && r.value != 0.0 && r.value != 1.0 {
                return Err(DataError::Parse {
                    file: "labels.tsv".into(),
                    line: f.line,
                    message: format!("boolean label {name} has value {}", r.value),
                });
            }
            if !seen.insert(o) {
                return Err(duplicate("labels.tsv", f.line, &r.args));
            }
            pairs.push((o, r.value));
        }
        pairs.sort_by_key(|(o, _)| *o);
        let (objects, values) = pairs.into_iter().unzip();
        bound.labels.insert(p, LabelSet::new(objects, values));
    }

    for (pop_name, objs) in &ds.synthetic {
        let Some(pid) = schema.pop_id(pop_name) else {
            continue;
        };
        let pop = schema.pop(pid);
        let mut set = BTreeSet::new();
        for o in objs {
            set.insert(pop.lookup(o).ok_or_else(|| DataError::UnknownObject {
                file: "synthetic.tsv".into(),
                line: 0,
                object: o.clone(),
                pop: pop_name.clone(),
            })?);
        }
        bound.synthetic.insert(pid, set);
    }
    Ok(bound)
}

fn duplicate(file: &str, line: usize, args: &[&str]) -> DataError {
    DataError::Parse {
        file: file.to_string(),
        line,
        message: format!("duplicate fact ({})", args.join(", ")),
    }
}
