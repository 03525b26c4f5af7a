//! Relational datasets on disk, binding them to a model's schema, and the
//! manipulations used by the experiments.
//!
//! A manifest is a directory:
//!
//! ```text
//! populations.tsv        name<TAB>size
//! objects/<pop>.tsv      optional; one object name per line, in index order
//! facts/<Pred>.tsv       obj<TAB>value  or  obj1<TAB>obj2<TAB>value[<TAB>order-key]
//! labels.tsv             Pred<TAB>obj<TAB>value
//! synthetic.tsv          optional; pop<TAB>obj for objects excluded from evaluation
//! ```
//!
//! A missing value means 1. Facts not listed are 0. Lines starting with `#`
//! are ignored.

mod bind;
mod movielens;
mod ops;
mod split;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use bind::{bind, Bound};
pub use movielens::{
    age_midpoint, convert_movielens, write_movielens_like, MovieLensFiles, AGE_CODES, OCCUPATIONS,
};
pub use ops::{add_saturating_objects, truncate_relations, Truncation};
pub use split::{split, LabeledSplit};
pub use synthetic::{niche_rule, NicheRule};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: unknown object '{object}' of population {pop}")]
    UnknownObject {
        file: String,
        line: usize,
        object: String,
        pop: String,
    },
    #[error("{0}")]
    Schema(String),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("need at least 2 labeled objects, found {0}")]
    TooFewLabels(usize),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One line of a fact or label file, split on tabs. Its reading depends on
/// the predicate's arity, which is only known once bound to a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Fact {
    pub fields: Vec<String>,
    pub line: usize,
}

/// A fact read with its predicate's arity.
#[derive(Debug, Clone, PartialEq)]
pub struct Reading<'a> {
    pub args: Vec<&'a str>,
    pub value: f64,
    pub key: Option<i64>,
}

impl Fact {
    /// Canonical fact: arguments, the value, and an order key if given.
    pub fn new(args: &[&str], value: f64, key: Option<i64>) -> Self {
        let mut fields: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        fields.push(format!("{value}"));
        if let Some(k) = key {
            fields.push(k.to_string());
        }
        Self { fields, line: 0 }
    }

    /// Unary: `obj [value]`. Binary: `obj1 obj2 [value [key]]`.
    pub fn read(&self, arity: usize, file: &str) -> Result<Reading<'_>, DataError> {
        let f: Vec<&str> = self.fields.iter().map(String::as_str).collect();
        let err = |message: String| DataError::Parse {
            file: file.to_string(),
            line: self.line,
            message,
        };
        let (args, value, key) = match (arity, f.as_slice()) {
            (1, [a]) => (vec![*a], None, None),
            (1, [a, v]) => (vec![*a], Some(*v), None),
            (2, [a, b]) => (vec![*a, *b], None, None),
            (2, [a, b, v]) => (vec![*a, *b], Some(*v), None),
            (2, [a, b, v, k]) => (vec![*a, *b], Some(*v), Some(*k)),
            _ => {
                return Err(err(format!(
                    "arity mismatch: {} field(s) for a predicate of arity {arity}",
                    f.len()
                )))
            }
        };
        let value = match value {
            Some(v) => parse_value(v, file, self.line)?,
            None => 1.0,
        };
        let key = match key {
            Some(k) => Some(
                k.parse::<i64>()
                    .map_err(|_| err(format!("invalid order key '{k}'")))?,
            ),
            None => None,
        };
        Ok(Reading { args, value, key })
    }
}

/// A manifest held in memory with object names unresolved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    /// Object names per population, in index order.
    pub populations: BTreeMap<String, Vec<String>>,
    pub facts: BTreeMap<String, Vec<Fact>>,
    pub labels: BTreeMap<String, Vec<Fact>>,
    /// Objects that exist only to shape training; never evaluated.
    pub synthetic: BTreeMap<String, BTreeSet<String>>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn parse_value(s: &str, file: &str, line: usize) -> Result<f64, DataError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::Parse {
            file: file.to_string(),
            line,
            message: format!("non-numeric value '{s}'"),
        }),
    }
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

impl Dataset {
    /// Reads a manifest directory.
    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let mut ds = Dataset::default();
        let pop_path = dir.join("populations.tsv");
        let pop_file = pop_path.display().to_string();
        for (line, l) in data_lines(&read(&pop_path)?) {
            let fields: Vec<&str> = l.split('\t').collect();
            let [name, size] = fields.as_slice() else {
                return Err(DataError::Parse {
                    file: pop_file,
                    line,
                    message: "expected name<TAB>size".into(),
                });
            };
            let size: usize = size.trim().parse().map_err(|_| DataError::Parse {
                file: pop_file.clone(),
                line,
                message: format!("invalid size '{size}'"),
            })?;
            let obj_path = dir.join("objects").join(format!("{name}.tsv"));
            let names = if obj_path.exists() {
                let names: Vec<String> = data_lines(&read(&obj_path)?)
                    .map(|(_, l)| l.to_string())
                    .collect();
                if names.len() != size {
                    return Err(DataError::Parse {
                        file: obj_path.display().to_string(),
                        line: names.len(),
                        message: format!(
                            "population {name} has size {size} but {} object names",
                            names.len()
                        ),
                    });
                }
                names
            } else {
                default_names(size)
            };
            if ds.populations.insert(name.to_string(), names).is_some() {
                return Err(DataError::Parse {
                    file: pop_file,
                    line,
                    message: format!("duplicate population {name}"),
                });
            }
        }

        let facts_dir = dir.join("facts");
        if facts_dir.exists() {
            let mut entries: Vec<PathBuf> = fs::read_dir(&facts_dir)
                .map_err(io_err(&facts_dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
                .collect();
            entries.sort();
            for path in entries {
                let pred = path
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                let mut facts = Vec::new();
                for (line, l) in data_lines(&read(&path)?) {
                    facts.push(Fact {
                        fields: l.split('\t').map(str::to_string).collect(),
                        line,
                    });
                }
                ds.facts.insert(pred, facts);
            }
        }

        let label_path = dir.join("labels.tsv");
        if label_path.exists() {
            let file = label_path.display().to_string();
            for (line, l) in data_lines(&read(&label_path)?) {
                let fields: Vec<&str> = l.split('\t').collect();
                let [pred, obj, value] = fields.as_slice() else {
                    return Err(DataError::Parse {
                        file,
                        line,
                        message: "expected Pred<TAB>object<TAB>value".into(),
                    });
                };
                parse_value(value, &file, line)?;
                ds.labels.entry(pred.to_string()).or_default().push(Fact {
                    fields: vec![obj.to_string(), value.to_string()],
                    line,
                });
            }
        }

        let syn_path = dir.join("synthetic.tsv");
        if syn_path.exists() {
            let file = syn_path.display().to_string();
            for (line, l) in data_lines(&read(&syn_path)?) {
                let Some((pop, obj)) = l.split_once('\t') else {
                    return Err(DataError::Parse {
                        file,
                        line,
                        message: "expected pop<TAB>object".into(),
                    });
                };
                ds.synthetic
                    .entry(pop.to_string())
                    .or_default()
                    .insert(obj.to_string());
            }
        }
        Ok(ds)
    }

    /// Writes the manifest with facts and labels sorted, so that saving what
    /// was loaded reproduces the files byte for byte.
    pub fn save(&self, dir: &Path) -> Result<(), DataError> {
        let write = |path: PathBuf, text: String| {
            fs::write(&path, text).map_err(|source| DataError::Io { path, source })
        };
        fs::create_dir_all(dir.join("facts")).map_err(io_err(dir))?;
        let mut pops = String::new();
        for (name, names) in &self.populations {
            let _ = writeln!(pops, "{name}\t{}", names.len());
            if *names != default_names(names.len()) {
                fs::create_dir_all(dir.join("objects")).map_err(io_err(dir))?;
                let mut s = String::new();
                for n in names {
                    let _ = writeln!(s, "{n}");
                }
                write(dir.join("objects").join(format!("{name}.tsv")), s)?;
            }
        }
        write(dir.join("populations.tsv"), pops)?;
        for (pred, facts) in &self.facts {
            let mut sorted: Vec<&Fact> = facts.iter().collect();
            sorted.sort_by(|a, b| a.fields.cmp(&b.fields));
            let mut s = String::new();
            for f in sorted {
                let _ = writeln!(s, "{}", f.fields.join("\t"));
            }
            write(dir.join("facts").join(format!("{pred}.tsv")), s)?;
        }
        if !self.labels.is_empty() {
            let mut s = String::new();
            for (pred, facts) in &self.labels {
                let mut sorted: Vec<&Fact> = facts.iter().collect();
                sorted.sort_by(|a, b| a.fields.cmp(&b.fields));
                for f in sorted {
                    let _ = writeln!(s, "{pred}\t{}", f.fields.join("\t"));
                }
            }
            write(dir.join("labels.tsv"), s)?;
        }
        if !self.synthetic.is_empty() {
            let mut s = String::new();
            for (pop, objs) in &self.synthetic {
                for o in objs {
                    let _ = writeln!(s, "{pop}\t{o}");
                }
            }
            write(dir.join("synthetic.tsv"), s)?;
        }
        Ok(())
    }

    /// Number of facts of `pred`.
    pub fn fact_count(&self, pred: &str) -> usize {
        self.facts.get(pred).map_or(0, Vec::len)
    }
}
