use std::fmt::Write as _;

use super::backward::{loss_and_gradient, GradientTape};
use super::loss::{loss_and_dout, LabelSet};
use super::LearnError;
use crate::engine::{graph_forward, Interpretation};
use crate::relcore::{InitRanges, LayerGraph, Loss, ParameterStore, ParameterTemplate, Schema};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub restarts: usize,
    /// Strength of the Laplacian prior, applied as an L1 subgradient.
    pub l1_strength: f64,
    /// Overrides the MIX coefficient of the graph when set.
    pub lambda: Option<f64>,
    /// Overrides the target loss when set.
    pub loss: Option<Loss>,
    pub init: InitRanges,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 500,
            restarts: 5,
            l1_strength: 1e-4,
            lambda: None,
            loss: None,
            init: InitRanges::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), LearnError> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(LearnError::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.l1_strength >= 0.0) {
            return Err(LearnError::Config(format!(
                "l1 strength must be >= 0, got {}",
                self.l1_strength
            )));
        }
        if let Some(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(LearnError::Config(format!(
                    "lambda must lie in [0,1], got {l}"
                )));
            }
        }
        if self.restarts == 0 {
            return Err(LearnError::Config(
                "at least one restart is required".into(),
            ));
        }
        Ok(())
    }

    /// The graph as trained: MIX coefficient and loss overrides applied.
    pub fn apply_to(&self, graph: &LayerGraph) -> LayerGraph {
        let mut g = graph.clone();
        if let Some(l) = self.lambda {
            g.set_mix_lambda(l);
        }
        if let Some(loss) = self.loss {
            g.target.loss = loss;
        }
        g
    }
}

/// One gradient step: `theta -= lr * (grad + l1 * sign(theta))` for every
/// unfrozen weight and every latent entry, with `sign(0) = 0`.
pub fn sgd_step(
    store: &mut ParameterStore,
    tape: &GradientTape,
    cfg: &TrainConfig,
) -> Result<(), LearnError> {
    if !tape.is_finite() {
        return Err(LearnError::NonFinite("gradient".into()));
    }
    let lr = cfg.learning_rate;
    let l1 = cfg.l1_strength;
    let step = |theta: &mut f64, g: f64| {
        *theta -= lr * (g + l1 * sign(*theta));
    };
    for (w, g) in store.weights.iter_mut().zip(&tape.d_weights) {
        if !w.frozen {
            step(&mut w.value, *g);
        }
    }
    for (p, table) in store.latents.iter_mut() {
        if let Some(grad) = tape.d_latents.get(p) {
            for (v, g) in table.iter_mut().zip(grad) {
                step(v, *g);
            }
        }
    }
    Ok(())
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub restart: usize,
    pub epoch: usize,
    pub train_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartSummary {
    pub restart: usize,
    pub final_train_loss: f64,
    pub final_validation_loss: Option<f64>,
    pub diverged: Option<String>,
}

/// Per-epoch training losses of every restart and which restart was kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
    pub restarts: Vec<RestartSummary>,
    pub best_restart: Option<usize>,
}

impl TrainingLog {
    /// `restart,epoch,train_loss` with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("restart,epoch,train_loss\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.17e}", r.restart, r.epoch, r.train_loss);
        }
        s
    }

    pub fn losses(&self, restart: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.restart == restart)
            .map(|r| r.train_loss)
            .collect()
    }
}

/// Full-batch gradient descent from `cfg.restarts` initializations (restart
/// `r` draws from seed `cfg.seed + r`); keeps the restart with the lowest
/// final training loss. The log has `epochs + 1` rows per restart: the loss
/// before each update and the loss after the last.
pub fn train(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    template: &ParameterTemplate,
    labels: &LabelSet,
    cfg: &TrainConfig,
    validation: Option<&LabelSet>,
) -> Result<(ParameterStore, TrainingLog), LearnError> {
    cfg.check()?;
    let graph = cfg.apply_to(graph);
    let label_mean = labels.mean().unwrap_or(0.5);
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, usize, ParameterStore)> = None;

    for r in 0..cfg.restarts {
        let mut rng = substream(cfg.seed.wrapping_add(r as u64), "init");
        let mut store = template.instantiate(schema, cfg.init, &mut rng);
        store.label_mean = label_mean;
        let outcome = run_restart(&graph, schema, interp, labels, cfg, &mut store, r, &mut log);
        let summary = match outcome {
            Ok(final_loss) => {
                let final_validation_loss = match validation {
                    Some(v) => Some(evaluate_loss(&graph, schema, interp, &store, v)?),
                    None => None,
                };
                if best.as_ref().is_none_or(|(b, _, _)| final_loss < *b) {
                    best = Some((final_loss, r, store));
                }
                RestartSummary {
                    restart: r,
                    final_train_loss: final_loss,
                    final_validation_loss,
                    diverged: None,
                }
            }
            Err(e) => RestartSummary {
                restart: r,
                final_train_loss: f64::NAN,
                final_validation_loss: None,
                diverged: Some(e.to_string()),
            },
        };
        log.restarts.push(summary);
    }

    match best {
        Some((_, r, store)) => {
            log.best_restart = Some(r);
            Ok((store, log))
        }
        None => Err(LearnError::AllRestartsDiverged(Box::new(log))),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_restart(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    labels: &LabelSet,
    cfg: &TrainConfig,
    store: &mut ParameterStore,
    restart: usize,
    log: &mut TrainingLog,
) -> Result<f64, LearnError> {
    for epoch in 0..cfg.epochs {
        let (loss, tape) = loss_and_gradient(graph, schema, interp, store, labels)?;
        if !loss.is_finite() {
            return Err(LearnError::NonFinite(format!("loss at epoch {epoch}")));
        }
        log.rows.push(LogRow {
            restart,
            epoch,
            train_loss: loss,
        });
        sgd_step(store, &tape, cfg).map_err(|e| match e {
            LearnError::NonFinite(what) => {
                LearnError::NonFinite(format!("{what} at epoch {epoch}"))
            }
            other => other,
        })?;
    }
    let loss = evaluate_loss(graph, schema, interp, store, labels)?;
    if !loss.is_finite() {
        return Err(LearnError::NonFinite("final loss".into()));
    }
    log.rows.push(LogRow {
        restart,
        epoch: cfg.epochs,
        train_loss: loss,
    });
    Ok(loss)
}

/// Training objective of `store` on `labels` (no regularization term).
pub fn evaluate_loss(
    graph: &LayerGraph,
    schema: &Schema,
    interp: &Interpretation,
    store: &ParameterStore,
    labels: &LabelSet,
) -> Result<f64, LearnError> {
    let outputs = graph_forward(graph, schema, interp, store)?;
    let pred = outputs
        .get(graph.target.prediction)
        .ok_or_else(|| LearnError::Inconsistent("target not computed".into()))?;
    Ok(loss_and_dout(pred, labels, graph.target.loss)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relcore::Weight;

    fn store(values: &[f64]) -> ParameterStore {
        ParameterStore {
            weights: values
                .iter()
                .enumerate()
                .map(|(i, v)| Weight {
                    name: format!("w{i}"),
                    value: *v,
                    frozen: false,
                })
                .collect(),
            latents: Default::default(),
            label_mean: 0.5,
        }
    }

    #[test]
    fn zero_gradient_without_l1_leaves_parameters() {
        let mut s = store(&[0.3, -1.0]);
        let cfg = TrainConfig {
            l1_strength: 0.0,
            ..Default::default()
        };
        let tape = GradientTape::zeros(&s);
        sgd_step(&mut s, &tape, &cfg).unwrap();
        assert_eq!(s.weights[0].value, 0.3);
        assert_eq!(s.weights[1].value, -1.0);
    }

    #[test]
    fn pure_l1_shrinkage() {
        let mut s = store(&[0.1, 0.0]);
        let cfg = TrainConfig {
            l1_strength: 0.01,
            learning_rate: 1.0,
            ..Default::default()
        };
        let tape = GradientTape::zeros(&s);
        sgd_step(&mut s, &tape, &cfg).unwrap();
        assert!((s.weights[0].value - 0.09).abs() < 1e-15);
        assert_eq!(s.weights[1].value, 0.0);
    }

    #[test]
    fn frozen_weights_do_not_move() {
        let mut s = store(&[0.5]);
        s.weights[0].frozen = true;
        let mut tape = GradientTape::zeros(&s);
        tape.d_weights[0] = 3.0;
        sgd_step(&mut s, &tape, &TrainConfig::default()).unwrap();
        assert_eq!(s.weights[0].value, 0.5);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = store(&[0.5]);
        let mut tape = GradientTape::zeros(&s);
        tape.d_weights[0] = f64::NAN;
        assert!(matches!(
            sgd_step(&mut s, &tape, &TrainConfig::default()),
            Err(LearnError::NonFinite(_))
        ));
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        }
        .check()
        .is_err());
        assert!(TrainConfig {
            lambda: Some(1.5),
            ..Default::default()
        }
        .check()
        .is_err());
        assert!(TrainConfig {
            restarts: 0,
            ..Default::default()
        }
        .check()
        .is_err());
        TrainConfig::default().check().unwrap();
    }
}
