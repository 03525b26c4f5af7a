use std::collections::BTreeSet;

use rand::Rng;

use super::{DataError, Dataset, Fact};
use crate::engine::{Cell, Interpretation};
use crate::relcore::PredId;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Keep each object's first `k` cells.
    First(usize),
    /// Keep the first `r` cells, `r` drawn uniformly from `0..=max` per object
    /// from substream `truncation` of `seed`.
    RandomUpTo { max: usize, seed: u64 },
}

/// Truncates the rows of binary relation `pred` for the row objects in
/// `rows`; cells are ordered by key, ties by column. Other rows and other
/// predicates are untouched.
pub fn truncate_relations(
    interp: &Interpretation,
    pred: PredId,
    rows: &BTreeSet<usize>,
    mode: Truncation,
) -> Interpretation {
    let mut out = interp.clone();
    let Some(rel) = interp.binary.get(&pred) else {
        return out;
    };
    let limits: Vec<usize> = match mode {
        Truncation::First(k) => vec![k; rel.rows()],
        Truncation::RandomUpTo { max, seed } => {
            let mut rng = substream(seed, "truncation");
            (0..rel.rows()).map(|_| rng.random_range(0..=max)).collect()
        }
    };
    let mut keep: BTreeSet<(u32, u32)> = BTreeSet::new();
    for r in 0..rel.rows() {
        let cells = rel.row(r);
        if !rows.contains(&r) {
            keep.extend(cells.iter().map(|c| (c.row, c.col)));
            continue;
        }
        let mut ordered: Vec<&Cell> = cells.iter().collect();
        ordered.sort_by_key(|c| (c.key, c.col));
        keep.extend(ordered.iter().take(limits[r]).map(|c| (c.row, c.col)));
    }
    out.insert_binary(pred, rel.filter(|c| keep.contains(&(c.row, c.col))));
    out
}

/// Adds one object per distinct value of label `label` to population
/// `row_pop`, related by `relation` to every object of `col_pop`, labeled with
/// that value and flagged synthetic. Returns the new object names.
pub fn add_saturating_objects(
    ds: &mut Dataset,
    relation: &str,
    row_pop: &str,
    col_pop: &str,
    label: &str,
) -> Result<Vec<String>, DataError> {
    let cols = ds
        .populations
        .get(col_pop)
        .ok_or_else(|| DataError::Schema(format!("unknown population {col_pop}")))?
        .clone();
    let labels = ds
        .labels
        .get(label)
        .ok_or_else(|| DataError::Schema(format!("no labels for {label}")))?;
    let mut classes: Vec<f64> = Vec::new();
    for f in labels {
        let v = f.read(1, "labels.tsv")?.value;
        if !classes.contains(&v) {
            classes.push(v);
        }
    }
    classes.sort_by(f64::total_cmp);
    let rows = ds
        .populations
        .get_mut(row_pop)
        .ok_or_else(|| DataError::Schema(format!("unknown population {row_pop}")))?;
    let mut added = Vec::new();
    for v in &classes {
        let name = format!("saturating_{label}_{v}");
        if rows.contains(&name) {
            return Err(DataError::Schema(format!(
                "object {name} already exists in population {row_pop}"
            )));
        }
        rows.push(name.clone());
        added.push(name);
    }
    let facts = ds.facts.entry(relation.to_string()).or_default();
    for name in &added {
        for (i, c) in cols.iter().enumerate() {
            facts.push(Fact::new(&[name, c], 1.0, Some(i as i64)));
        }
    }
    let labels = ds.labels.get_mut(label).expect("checked above");
    for (name, v) in added.iter().zip(&classes) {
        labels.push(Fact {
            fields: vec![name.clone(), format!("{v}")],
            line: 0,
        });
    }
    ds.synthetic
        .entry(row_pop.to_string())
        .or_default()
        .extend(added.iter().cloned());
    Ok(added)
}
