//! Train/test protocol shared by the command-line tool and the acceptance
//! suite: binding, splitting, repeated runs, mean baselines, MIX tuning,
//! extrapolation curves and depth/latent sweeps over generated MovieLens
//! models.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::RngCore;

use crate::data::{
    bind, split, truncate_relations, Bound, DataError, Dataset, LabeledSplit, Truncation,
};
use crate::engine::{graph_forward, Interpretation};
use crate::learn::{train, LabelSet, LearnError, TrainConfig, TrainingLog};
use crate::metrics::{evaluate, mean_baseline, MetricsReport};
use crate::modelspec::{load_model, serialize_trained, Model, ModelError};
use crate::relcore::{LayerGraph, ParameterStore, Schema};
use crate::rng::{derive_seed, substream};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("{0}")]
    Setup(String),
}

/// A model bound to a dataset, with the target labels it will be judged on.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: Model,
    pub bound: Bound,
    pub labels: LabelSet,
    /// Synthetic objects of the target population.
    pub synthetic: BTreeSet<usize>,
}

impl Prepared {
    pub fn new(model_text: &str, ds: &Dataset) -> Result<Self, ExperimentError> {
        let mut model = load_model(model_text)?;
        let bound = bind(ds, &mut model.schema, &model.graph)?;
        let labels = bound.target_labels(&model.graph);
        let label_name = model
            .schema
            .pred_name(model.graph.target.labels)
            .to_string();
        if labels.is_empty() {
            return Err(ExperimentError::Setup(format!(
                "no labels for target predicate {label_name}"
            )));
        }
        let target_pop = model.schema.pred(model.graph.target.labels).args[0];
        let synthetic = bound
            .synthetic
            .get(&target_pop)
            .cloned()
            .unwrap_or_default();
        Ok(Self {
            model,
            bound,
            labels,
            synthetic,
        })
    }

    pub fn split(&self, fraction: f64, seed: u64) -> Result<LabeledSplit, DataError> {
        split(&self.labels, fraction, seed, &self.synthetic)
    }

    pub fn target_population(&self) -> usize {
        self.model
            .schema
            .grounding_count(self.model.graph.target.prediction)
    }
}

/// Target predictions for every object of the target population.
pub fn predict(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    store: &ParameterStore,
) -> Result<Vec<f64>, LearnError> {
    let outputs = graph_forward(graph, schema, interp, store)?;
    outputs
        .get(graph.target.prediction)
        .map(<[f64]>::to_vec)
        .ok_or_else(|| LearnError::Inconsistent("target not computed".into()))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    /// The graph as trained, with configuration overrides applied.
    pub graph: LayerGraph,
    pub store: ParameterStore,
    pub log: TrainingLog,
    pub split: LabeledSplit,
    pub metrics: MetricsReport,
    pub baseline: MetricsReport,
}

impl RunOutcome {
    pub fn params_text(&self, schema: &Schema) -> Result<String, ModelError> {
        serialize_trained(&self.store, &self.graph, schema)
    }
}

/// Splits with `seed`, trains on the training part with `cfg` re-seeded to
/// `seed`, and scores the test part against the model and the mean baseline.
pub fn run_once(
    p: &Prepared,
    cfg: &TrainConfig,
    fraction: f64,
    seed: u64,
) -> Result<RunOutcome, ExperimentError> {
    let split = p.split(fraction, seed)?;
    let cfg = TrainConfig {
        seed,
        ..cfg.clone()
    };
    let (store, log) = train(
        &p.model.graph,
        &p.model.schema,
        &p.bound.interp,
        &p.model.template,
        &split.train,
        &cfg,
        None,
    )?;
    let graph = cfg.apply_to(&p.model.graph);
    let pred = predict(&graph, &p.model.schema, &p.bound.interp, &store)?;
    Ok(RunOutcome {
        seed,
        metrics: evaluate(&pred, &split.test),
        baseline: mean_baseline(&split.train, &split.test, pred.len()),
        graph,
        store,
        log,
        split,
    })
}

/// Seeds of `reps` repetitions derived from `seed`; each repetition re-draws
/// both the split and the initialization.
pub fn repetition_seeds(seed: u64, reps: usize) -> Vec<u64> {
    let mut rng = substream(seed, "repetition");
    (0..reps).map(|_| rng.next_u64()).collect()
}

pub fn repeat(
    p: &Prepared,
    cfg: &TrainConfig,
    fraction: f64,
    seed: u64,
    reps: usize,
) -> Result<Vec<RunOutcome>, ExperimentError> {
    repetition_seeds(seed, reps)
        .into_iter()
        .map(|s| run_once(p, cfg, fraction, s))
        .collect()
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Metrics averaged over runs; a metric missing in any run is missing.
pub fn average(reports: &[MetricsReport]) -> MetricsReport {
    let avg = |f: fn(&MetricsReport) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = reports.iter().map(f).collect();
        v.filter(|v| !v.is_empty()).map(|v| mean_std(&v).0)
    };
    MetricsReport {
        accuracy: avg(|m| m.accuracy),
        log_loss: avg(|m| m.log_loss),
        mse: avg(|m| Some(m.mse)).unwrap_or(f64::NAN),
        n: reports.iter().map(|m| m.n).sum::<usize>() / reports.len().max(1),
        class_balance: avg(|m| m.class_balance),
    }
}

/// Validation score of each candidate configuration: log loss in bits, or
/// MSE for regression, and infinity when every restart diverged. The
/// validation set is carved out of the training part of the split drawn from
/// `seed`, so the test part is never seen. Returns the index of the best
/// candidate (the first on ties) and all scores.
pub fn tune(
    p: &Prepared,
    candidates: &[TrainConfig],
    fraction: f64,
    seed: u64,
) -> Result<(usize, Vec<f64>), ExperimentError> {
    if candidates.is_empty() {
        return Err(ExperimentError::Setup("no candidate configurations".into()));
    }
    let outer = p.split(fraction, seed)?;
    let inner_seed = derive_seed(seed, "validation");
    let inner = split(&outer.train, fraction, inner_seed, &p.synthetic)?;
    let mut scores = Vec::new();
    for cfg in candidates {
        let cfg = TrainConfig {
            seed,
            ..cfg.clone()
        };
        let score = match train(
            &p.model.graph,
            &p.model.schema,
            &p.bound.interp,
            &p.model.template,
            &inner.train,
            &cfg,
            None,
        ) {
            Ok((store, _)) => {
                let pred = predict(
                    &cfg.apply_to(&p.model.graph),
                    &p.model.schema,
                    &p.bound.interp,
                    &store,
                )?;
                let m = evaluate(&pred, &inner.test);
                m.log_loss.unwrap_or(m.mse)
            }
            Err(LearnError::AllRestartsDiverged(_)) => f64::INFINITY,
            Err(e) => return Err(e.into()),
        };
        scores.push(if score.is_nan() { f64::INFINITY } else { score });
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

/// [`tune`] over MIX coefficients.
pub fn tune_lambda(
    p: &Prepared,
    cfg: &TrainConfig,
    fraction: f64,
    seed: u64,
    candidates: &[f64],
) -> Result<(f64, Vec<(f64, f64)>), ExperimentError> {
    let configs: Vec<TrainConfig> = candidates
        .iter()
        .map(|&l| TrainConfig {
            lambda: Some(l),
            ..cfg.clone()
        })
        .collect();
    let (best, scores) = tune(p, &configs, fraction, seed)?;
    Ok((
        candidates[best],
        candidates.iter().copied().zip(scores).collect(),
    ))
}

/// A trained model to score in an extrapolation curve.
pub struct Scored<'a> {
    pub name: &'a str,
    pub prepared: &'a Prepared,
    pub graph: &'a LayerGraph,
    pub store: &'a ParameterStore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub model: String,
    pub log_loss: f64,
}

/// For each `k`, keeps only the first `k` cells of `relation` for every test
/// object and scores each model on the test labels.
pub fn extrapolation_curve(
    models: &[Scored<'_>],
    relation: &str,
    test: &LabelSet,
    ks: &[usize],
) -> Result<Vec<CurvePoint>, ExperimentError> {
    let rows: BTreeSet<usize> = test.objects.iter().copied().collect();
    let mut points = Vec::new();
    for &k in ks {
        for m in models {
            let schema = &m.prepared.model.schema;
            let pred = schema.pred_id(relation).ok_or_else(|| {
                ExperimentError::Setup(format!("model {} has no relation {relation}", m.name))
            })?;
            let interp =
                truncate_relations(&m.prepared.bound.interp, pred, &rows, Truncation::First(k));
            let out = predict(m.graph, schema, &interp, m.store)?;
            let report = evaluate(&out, test);
            let log_loss = report.log_loss.unwrap_or(report.mse);
            points.push(CurvePoint {
                k,
                model: m.name.to_string(),
                log_loss,
            });
        }
    }
    Ok(points)
}

/// `k,model,logloss` with a header line.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("k,model,logloss\n");
    for p in points {
        let _ = writeln!(s, "{},{},{:.4}", p.k, p.model, p.log_loss);
    }
    s
}

/// Keeps, for every training object, only its first `r` cells of `relation`
/// with `r` drawn from U{0..=max}; test objects are untouched.
pub fn truncate_training(
    p: &mut Prepared,
    relation: &str,
    train: &LabelSet,
    max: usize,
    seed: u64,
) -> Result<(), ExperimentError> {
    let pred = p
        .model
        .schema
        .pred_id(relation)
        .ok_or_else(|| ExperimentError::Setup(format!("unknown relation {relation}")))?;
    let rows: BTreeSet<usize> = train.objects.iter().copied().collect();
    p.bound.interp = truncate_relations(
        &p.bound.interp,
        pred,
        &rows,
        Truncation::RandomUpTo { max, seed },
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Gender,
    Age,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Task::Gender => "Gender",
            Task::Age => "AgeMid",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gender" => Ok(Task::Gender),
            "age" => Ok(Task::Age),
            _ => Err(format!("unknown task '{s}' (expected gender or age)")),
        }
    }
}

/// A MovieLens model with `hidden` hidden RLL/RAL pairs and `latents`
/// numeric latent properties of movies. The first hidden layer has one unit
/// per genre and per latent counting the matching liked movies; further
/// hidden layers are fully connected and as wide as the first. With no
/// hidden layer the counts feed the output unit directly (RLR). The output
/// unit also sees occupation and either age (gender task) or gender (age
/// task). Gender uses a sigmoid head with log loss and MIX; age an identity
/// head with MSE.
pub fn movielens_template(task: Task, hidden: usize, latents: usize) -> String {
    let mut s = String::from(
        "population user\npopulation movie\npredicate Likes(user, movie) bool\n\
         predicate Action(movie) bool\npredicate Drama(movie) bool\n",
    );
    let mut features: Vec<String> = (0..crate::data::OCCUPATIONS)
        .map(|k| format!("Occ{k}"))
        .collect();
    match task {
        Task::Gender => features.extend(crate::data::AGE_CODES.iter().map(|c| format!("Age{c}"))),
        Task::Age => features.push("Male".into()),
    }
    for f in &features {
        let _ = writeln!(s, "predicate {f}(user) bool");
    }
    for k in 1..=latents {
        let _ = writeln!(s, "latent N{k}(movie)");
    }

    let mut counts: Vec<String> = vec!["Action(m)".into(), "Drama(m)".into()];
    counts.extend((1..=latents).map(|k| format!("N{k}(m)")));

    let mut prev: Vec<String> = Vec::new();
    for layer in 1..=hidden {
        let mut outs = Vec::new();
        for j in 1..=counts.len() {
            let unit = format!("S{layer}_{j}");
            let _ = writeln!(s, "unit {unit}(u: user): {unit}_b * True");
            if layer == 1 {
                let _ = writeln!(s, "    {unit}_w * Likes(u,m) & {}", counts[j - 1]);
            } else {
                for (i, h) in prev.iter().enumerate() {
                    let _ = writeln!(s, "    {unit}_w{} * {h}(u)", i + 1);
                }
            }
            let act = format!("H{layer}_{j}");
            let _ = writeln!(s, "activation {act} = sigmoid({unit})");
            outs.push(act);
        }
        prev = outs;
    }

    let _ = writeln!(s, "unit Out(u: user): out_b * True");
    if hidden == 0 {
        for (i, c) in counts.iter().enumerate() {
            let _ = writeln!(s, "    out_c{} * Likes(u,m) & {c}", i + 1);
        }
    } else {
        for (i, h) in prev.iter().enumerate() {
            let _ = writeln!(s, "    out_h{} * {h}(u)", i + 1);
        }
    }
    for f in &features {
        let _ = writeln!(s, "    out_{} * {f}(u)", f.to_lowercase());
    }
    match task {
        Task::Gender => {
            s.push_str("mix lambda = 0.05\n");
            s.push_str("target Out sigmoid logloss labels Gender\n");
        }
        Task::Age => s.push_str("target Out identity mse labels AgeMid\n"),
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub hidden: usize,
    pub latents: usize,
    pub metrics: MetricsReport,
}

/// Trains every `(hidden, latents)` configuration on the same split and
/// initialization seed.
pub fn sweep(
    ds: &Dataset,
    task: Task,
    grid: &[(usize, usize)],
    cfg: &TrainConfig,
    fraction: f64,
    seed: u64,
) -> Result<Vec<SweepRow>, ExperimentError> {
    grid.iter()
        .map(|&(hidden, latents)| {
            let p = Prepared::new(&movielens_template(task, hidden, latents), ds)?;
            let run = run_once(&p, cfg, fraction, seed)?;
            Ok(SweepRow {
                hidden,
                latents,
                metrics: run.metrics,
            })
        })
        .collect()
}

/// `hidden,latents,acc,logloss,mse` with a header line.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"));
    let mut s = String::from("hidden,latents,acc,logloss,mse\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.4}",
            r.hidden,
            r.latents,
            fmt(r.metrics.accuracy),
            fmt(r.metrics.log_loss),
            r.metrics.mse
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relcore::{LayerKind, Node};

    #[test]
    fn deep_structure_has_three_rll_and_three_ral() {
        let model = load_model(&movielens_template(Task::Gender, 2, 2)).unwrap();
        let count = |k: &str| {
            model
                .graph
                .nodes
                .iter()
                .filter(|n| n.kind_name() == k)
                .count()
        };
        let layers = model.graph.layers();
        assert_eq!(
            layers
                .iter()
                .filter(|(k, _)| *k == LayerKind::Linear)
                .count(),
            3
        );
        assert_eq!(
            layers
                .iter()
                .filter(|(k, _)| *k == LayerKind::Activation)
                .count(),
            3
        );
        assert_eq!(count("MIX"), 1);
        assert_eq!(model.template.latents.len(), 2);
    }

    #[test]
    fn rlr_has_no_hidden_layer() {
        let model = load_model(&movielens_template(Task::Gender, 0, 0)).unwrap();
        assert_eq!(model.graph.units().count(), 1);
        assert!(model.template.latents.is_empty());
        assert!(model
            .graph
            .nodes
            .iter()
            .all(|n| !matches!(n, Node::Linear(u) if u.wfs.len() < 2)));
    }

    #[test]
    fn age_template_is_regression() {
        let model = load_model(&movielens_template(Task::Age, 1, 1)).unwrap();
        assert_eq!(model.graph.mix_lambda(), None);
        assert_eq!(model.schema.pred_name(model.graph.target.labels), "AgeMid");
    }

    #[test]
    fn repetition_seeds_are_distinct_and_stable() {
        let a = repetition_seeds(7, 10);
        assert_eq!(a, repetition_seeds(7, 10));
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 10);
    }

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
