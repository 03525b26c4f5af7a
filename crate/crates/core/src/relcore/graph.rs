use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::formula::Unit;
use super::schema::PredId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's own output.
    pub fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Tanh => 1.0 - out * out,
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            _ => Err(format!("unknown activation {s:?}")),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    LogLoss,
    Mse,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::LogLoss => "logloss",
            Loss::Mse => "mse",
        }
    }
}

impl FromStr for Loss {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logloss" => Ok(Loss::LogLoss),
            "mse" => Ok(Loss::Mse),
            _ => Err(format!("unknown loss {s:?}")),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Relational linear layer holding a single unit.
    Linear(Unit),
    /// Relational activation layer, applied elementwise.
    Activation {
        input: PredId,
        output: PredId,
        kind: Activation,
    },
    /// `output = lambda * train_mean + (1 - lambda) * input`.
    Mix {
        input: PredId,
        output: PredId,
        lambda: f64,
    },
}

impl Node {
    pub fn output(&self) -> PredId {
        match self {
            Node::Linear(u) => u.head,
            Node::Activation { output, .. } | Node::Mix { output, .. } => *output,
        }
    }

    pub fn inputs(&self) -> BTreeSet<PredId> {
        match self {
            Node::Linear(u) => u.inputs(),
            Node::Activation { input, .. } | Node::Mix { input, .. } => [*input].into(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Node::Linear(_) => "RLL",
            Node::Activation { .. } => "RAL",
            Node::Mix { .. } => "MIX",
        }
    }
}

/// The error layer: compares `prediction` against the `labels` predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub prediction: PredId,
    pub labels: PredId,
    pub loss: Loss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGraph {
    pub nodes: Vec<Node>,
    pub target: Target,
}

/// Layer kinds in the depth-grouped view of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Linear,
    Activation,
    Mix,
}

impl LayerGraph {
    /// Index of the node producing each derived predicate.
    pub fn producers(&self) -> BTreeMap<PredId, Vec<usize>> {
        let mut map: BTreeMap<PredId, Vec<usize>> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            map.entry(n.output()).or_default().push(i);
        }
        map
    }

    /// Kahn's algorithm with ties broken by declaration order. Returns the
    /// nodes left on a cycle on failure.
    pub fn topo_order(&self) -> Result<Vec<usize>, Vec<usize>> {
        let producers = self.producers();
        let n = self.nodes.len();
        let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for p in node.inputs() {
                if let Some(src) = producers.get(&p) {
                    deps[i].extend(src.iter().copied());
                }
            }
        }
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        loop {
            let next = (0..n).find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]));
            match next {
                Some(i) => {
                    done[i] = true;
                    order.push(i);
                }
                None => break,
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err((0..n).filter(|&i| !done[i]).collect())
        }
    }

    /// Groups nodes into layers: consecutive depth levels holding nodes of
    /// one kind. A unit reading only observed data sits at depth 0.
    pub fn layers(&self) -> Vec<(LayerKind, Vec<usize>)> {
        let Ok(order) = self.topo_order() else {
            return Vec::new();
        };
        let producers = self.producers();
        let mut depth = vec![0usize; self.nodes.len()];
        for &i in &order {
            let d = self.nodes[i]
                .inputs()
                .iter()
                .filter_map(|p| producers.get(p))
                .flatten()
                .map(|&src| depth[src] + 1)
                .max()
                .unwrap_or(0);
            depth[i] = d;
        }
        let mut by_depth: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in &order {
            by_depth.entry(depth[i]).or_default().push(i);
        }
        let mut layers: Vec<(LayerKind, Vec<usize>)> = Vec::new();
        for (_, nodes) in by_depth {
            for i in nodes {
                let kind = match self.nodes[i] {
                    Node::Linear(_) => LayerKind::Linear,
                    Node::Activation { .. } => LayerKind::Activation,
                    Node::Mix { .. } => LayerKind::Mix,
                };
                match layers.last_mut() {
                    Some((k, members)) if *k == kind && !members.contains(&i) => members.push(i),
                    _ => layers.push((kind, vec![i])),
                }
            }
        }
        layers
    }

    pub fn units(&self) -> impl Iterator<Item = &Unit> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Linear(u) => Some(u),
            _ => None,
        })
    }

    pub fn mix_lambda(&self) -> Option<f64> {
        self.nodes.iter().find_map(|n| match n {
            Node::Mix { lambda, .. } => Some(*lambda),
            _ => None,
        })
    }

    /// Replaces the MIX coefficient, if the graph has a MIX node.
    pub fn set_mix_lambda(&mut self, value: f64) {
        for n in &mut self.nodes {
            if let Node::Mix { lambda, .. } = n {
                *lambda = value;
            }
        }
    }
}
