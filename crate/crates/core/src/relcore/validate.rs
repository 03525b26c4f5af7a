//! Structural checks that make a layer graph evaluable by the engine and
//! differentiable by the learner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::formula::{Formula, Unit, VarId};
use super::graph::{Activation, LayerGraph, Loss, Node};
use super::schema::{PredId, PredicateKind, Schema, ValueRange};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    UndeclaredPredicate,
    ArityTooLarge {
        pred: String,
        arity: usize,
    },
    LatentNotUnary {
        pred: String,
    },
    ArityMismatch {
        pred: String,
        expected: usize,
        found: usize,
    },
    UnknownLogvar,
    LogvarTypeMismatch {
        var: String,
        expected: String,
        found: String,
    },
    RepeatedLogvarInLiteral {
        pred: String,
    },
    SelfJoin {
        pred: String,
    },
    CyclicJoin,
    NegationOfUnbounded {
        pred: String,
    },
    EmptyHead,
    RepeatedHeadLogvar {
        var: String,
    },
    EmptyUnit,
    OutputNotDerived {
        pred: String,
    },
    MultipleProducers {
        pred: String,
    },
    MissingProducer {
        pred: String,
    },
    ShapeMismatch {
        input: String,
        output: String,
    },
    CyclicLayerGraph,
    MultipleMix,
    MixNotBeforeTarget,
    MixLambdaOutOfRange {
        lambda: String,
    },
    TargetNotUnary {
        pred: String,
    },
    LabelsNotObserved {
        pred: String,
    },
    LabelShapeMismatch {
        pred: String,
    },
    LogLossUnboundedTarget {
        pred: String,
    },
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ViolationKind::*;
        match self {
            UndeclaredPredicate => write!(f, "undeclared predicate"),
            ArityTooLarge { pred, arity } => {
                write!(f, "predicate {pred} has arity {arity}; only unary and binary predicates are supported")
            }
            LatentNotUnary { pred } => write!(f, "numeric-latent predicate {pred} must be unary"),
            ArityMismatch {
                pred,
                expected,
                found,
            } => {
                write!(f, "{pred} expects {expected} argument(s), found {found}")
            }
            UnknownLogvar => write!(f, "unknown logvar"),
            LogvarTypeMismatch {
                var,
                expected,
                found,
            } => {
                write!(
                    f,
                    "logvar {var} ranges over {found} but is used where {expected} is expected"
                )
            }
            RepeatedLogvarInLiteral { pred } => write!(f, "repeated logvar in literal {pred}"),
            SelfJoin { pred } => write!(f, "self-join: {pred}"),
            CyclicJoin => write!(f, "cyclic join graph"),
            NegationOfUnbounded { pred } => write!(f, "negation of unbounded range: {pred}"),
            EmptyHead => write!(f, "unit head has no logvars"),
            RepeatedHeadLogvar { var } => write!(f, "repeated head logvar {var}"),
            EmptyUnit => write!(f, "unit has no weighted formulas"),
            OutputNotDerived { pred } => write!(
                f,
                "{pred} is produced by a layer but is not a derived predicate"
            ),
            MultipleProducers { pred } => {
                write!(f, "derived predicate {pred} has more than one producer")
            }
            MissingProducer { pred } => {
                write!(f, "derived predicate {pred} is used but never produced")
            }
            ShapeMismatch { input, output } => {
                write!(
                    f,
                    "{output} and its input {input} range over different populations"
                )
            }
            CyclicLayerGraph => write!(f, "cyclic layer graph"),
            MultipleMix => write!(f, "at most one mix layer is allowed"),
            MixNotBeforeTarget => write!(f, "mix layer must feed the target directly"),
            MixLambdaOutOfRange { lambda } => write!(f, "mix lambda {lambda} outside [0,1]"),
            TargetNotUnary { pred } => write!(f, "target {pred} must be unary"),
            LabelsNotObserved { pred } => write!(f, "label predicate {pred} must be observed"),
            LabelShapeMismatch { pred } => {
                write!(
                    f,
                    "label predicate {pred} ranges over a different population than the target"
                )
            }
            LogLossUnboundedTarget { pred } => {
                write!(f, "logloss target {pred} is not bounded to [0,1]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), ValidationReport> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(self)
        }
    }

    fn push(&mut self, location: impl Into<String>, kind: ViolationKind) {
        self.violations.push(Violation {
            location: location.into(),
            kind,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// Value range of every predicate, with derived ranges inferred from their producers.
pub fn effective_ranges(graph: &LayerGraph, schema: &Schema) -> Vec<ValueRange> {
    let mut ranges: Vec<ValueRange> = schema.predicates.iter().map(|p| p.range).collect();
    if let Ok(order) = graph.topo_order() {
        for i in order {
            let (out, r) = match &graph.nodes[i] {
                Node::Linear(u) => (u.head, ValueRange::Real),
                Node::Activation {
                    input,
                    output,
                    kind,
                } => {
                    let r = match kind {
                        Activation::Sigmoid => ValueRange::UnitInterval,
                        Activation::Identity => range_of(&ranges, *input),
                        Activation::Tanh | Activation::Relu => ValueRange::Real,
                    };
                    (*output, r)
                }
                Node::Mix { input, output, .. } => (*output, range_of(&ranges, *input)),
            };
            if out.0 < ranges.len() {
                ranges[out.0] = r;
            }
        }
    }
    ranges
}

fn range_of(ranges: &[ValueRange], p: PredId) -> ValueRange {
    ranges.get(p.0).copied().unwrap_or(ValueRange::Real)
}

/// Checks every structural assumption the engine and learner rely on.
/// Pure: identical inputs give identical reports.
pub fn validate(graph: &LayerGraph, schema: &Schema) -> ValidationReport {
    let mut report = ValidationReport::default();
    let declared = |p: PredId| p.0 < schema.predicates.len();

    for decl in &schema.predicates {
        let loc = format!("predicate {}", decl.name);
        if decl.arity() == 0 || decl.arity() > 2 {
            report.push(
                &loc,
                ViolationKind::ArityTooLarge {
                    pred: decl.name.clone(),
                    arity: decl.arity(),
                },
            );
        }
        if decl.kind == PredicateKind::Latent && decl.arity() != 1 {
            report.push(
                &loc,
                ViolationKind::LatentNotUnary {
                    pred: decl.name.clone(),
                },
            );
        }
    }

    let order = graph.topo_order();
    let ranges = effective_ranges(graph, schema);

    for (i, node) in graph.nodes.iter().enumerate() {
        let out = node.output();
        let loc = format!("node {i} ({} {})", node.kind_name(), schema.pred_name(out));
        if !declared(out) {
            report.push(&loc, ViolationKind::UndeclaredPredicate);
            continue;
        }
        if schema.pred(out).kind != PredicateKind::Derived {
            report.push(
                &loc,
                ViolationKind::OutputNotDerived {
                    pred: schema.pred_name(out).into(),
                },
            );
        }
        match node {
            Node::Linear(unit) => check_unit(unit, schema, &ranges, &loc, &mut report),
            Node::Activation { input, .. } | Node::Mix { input, .. } => {
                if !declared(*input) {
                    report.push(&loc, ViolationKind::UndeclaredPredicate);
                } else if schema.pred(*input).args != schema.pred(out).args {
                    report.push(
                        &loc,
                        ViolationKind::ShapeMismatch {
                            input: schema.pred_name(*input).into(),
                            output: schema.pred_name(out).into(),
                        },
                    );
                }
                if let Node::Mix { lambda, .. } = node {
                    if !(0.0..=1.0).contains(lambda) {
                        report.push(
                            &loc,
                            ViolationKind::MixLambdaOutOfRange {
                                lambda: lambda.to_string(),
                            },
                        );
                    }
                    if out != graph.target.prediction {
                        report.push(&loc, ViolationKind::MixNotBeforeTarget);
                    }
                }
            }
        }
    }

    let producers = graph.producers();
    for (pred, nodes) in &producers {
        if nodes.len() > 1 {
            report.push(
                format!("nodes {nodes:?}"),
                ViolationKind::MultipleProducers {
                    pred: schema.pred_name(*pred).into(),
                },
            );
        }
    }
    let mut consumed: BTreeSet<PredId> = graph.nodes.iter().flat_map(Node::inputs).collect();
    consumed.insert(graph.target.prediction);
    for p in consumed {
        if declared(p)
            && schema.pred(p).kind == PredicateKind::Derived
            && !producers.contains_key(&p)
        {
            report.push(
                "graph",
                ViolationKind::MissingProducer {
                    pred: schema.pred_name(p).into(),
                },
            );
        }
    }
    if graph
        .nodes
        .iter()
        .filter(|n| matches!(n, Node::Mix { .. }))
        .count()
        > 1
    {
        report.push("graph", ViolationKind::MultipleMix);
    }
    if let Err(cycle) = &order {
        report.push(format!("nodes {cycle:?}"), ViolationKind::CyclicLayerGraph);
    }

    let t = &graph.target;
    if !declared(t.prediction) || !declared(t.labels) {
        report.push("target", ViolationKind::UndeclaredPredicate);
    } else {
        let pred = schema.pred(t.prediction);
        let labels = schema.pred(t.labels);
        if pred.arity() != 1 {
            report.push(
                "target",
                ViolationKind::TargetNotUnary {
                    pred: pred.name.clone(),
                },
            );
        }
        if !labels.kind.is_observed() {
            report.push(
                "target",
                ViolationKind::LabelsNotObserved {
                    pred: labels.name.clone(),
                },
            );
        }
        if labels.args != pred.args {
            report.push(
                "target",
                ViolationKind::LabelShapeMismatch {
                    pred: labels.name.clone(),
                },
            );
        }
        if t.loss == Loss::LogLoss && ranges[t.prediction.0] != ValueRange::UnitInterval {
            report.push(
                "target",
                ViolationKind::LogLossUnboundedTarget {
                    pred: pred.name.clone(),
                },
            );
        }
    }
    report
}

fn check_unit(
    unit: &Unit,
    schema: &Schema,
    ranges: &[ValueRange],
    loc: &str,
    report: &mut ValidationReport,
) {
    let head_decl = schema.pred(unit.head);
    if unit.head_vars.is_empty() {
        report.push(loc, ViolationKind::EmptyHead);
    }
    if unit.wfs.is_empty() {
        report.push(loc, ViolationKind::EmptyUnit);
    }
    if unit.head_vars.iter().any(|v| v.0 >= unit.vars.len()) {
        report.push(loc, ViolationKind::UnknownLogvar);
        return;
    }
    let mut seen = BTreeSet::new();
    for v in &unit.head_vars {
        if !seen.insert(*v) {
            report.push(
                loc,
                ViolationKind::RepeatedHeadLogvar {
                    var: unit.var(*v).name.clone(),
                },
            );
        }
    }
    if head_decl.arity() != unit.head_vars.len() {
        report.push(
            loc,
            ViolationKind::ArityMismatch {
                pred: head_decl.name.clone(),
                expected: head_decl.arity(),
                found: unit.head_vars.len(),
            },
        );
    } else {
        for (v, pop) in unit.head_vars.iter().zip(&head_decl.args) {
            check_var_type(unit, *v, *pop, schema, loc, report);
        }
    }

    for (k, wf) in unit.wfs.iter().enumerate() {
        let wloc = format!("{loc}, formula {k}");
        let Formula::Conj(lits) = &wf.formula else {
            continue;
        };
        let mut preds_seen = BTreeSet::new();
        for lit in lits {
            if lit.pred.0 >= schema.predicates.len() {
                report.push(&wloc, ViolationKind::UndeclaredPredicate);
                continue;
            }
            let decl = schema.pred(lit.pred);
            if !preds_seen.insert(lit.pred) {
                report.push(
                    &wloc,
                    ViolationKind::SelfJoin {
                        pred: decl.name.clone(),
                    },
                );
            }
            if lit.args.len() != decl.arity() {
                report.push(
                    &wloc,
                    ViolationKind::ArityMismatch {
                        pred: decl.name.clone(),
                        expected: decl.arity(),
                        found: lit.args.len(),
                    },
                );
                continue;
            }
            if lit.args.iter().any(|v| v.0 >= unit.vars.len()) {
                report.push(&wloc, ViolationKind::UnknownLogvar);
                continue;
            }
            if lit.args.len() == 2 && lit.args[0] == lit.args[1] {
                report.push(
                    &wloc,
                    ViolationKind::RepeatedLogvarInLiteral {
                        pred: decl.name.clone(),
                    },
                );
            }
            for (v, pop) in lit.args.iter().zip(&decl.args) {
                check_var_type(unit, *v, *pop, schema, &wloc, report);
            }
            if lit.negated && ranges[lit.pred.0] != ValueRange::UnitInterval {
                report.push(
                    &wloc,
                    ViolationKind::NegationOfUnbounded {
                        pred: decl.name.clone(),
                    },
                );
            }
        }
        if join_has_cycle(&wf.formula, &unit.head_vars) {
            report.push(&wloc, ViolationKind::CyclicJoin);
        }
    }
}

fn check_var_type(
    unit: &Unit,
    v: VarId,
    pop: super::schema::PopId,
    schema: &Schema,
    loc: &str,
    report: &mut ValidationReport,
) {
    let var = unit.var(v);
    if var.pop != pop {
        report.push(
            loc,
            ViolationKind::LogvarTypeMismatch {
                var: var.name.clone(),
                expected: schema
                    .populations
                    .get(pop.0)
                    .map(|p| p.name().to_string())
                    .unwrap_or_default(),
                found: schema
                    .populations
                    .get(var.pop.0)
                    .map(|p| p.name().to_string())
                    .unwrap_or_default(),
            },
        );
    }
}

/// Union-find over the formula's logvars (plus the head's); a binary literal
/// joining two already-connected logvars closes a cycle.
fn join_has_cycle(formula: &Formula, head: &[VarId]) -> bool {
    let mut parent: BTreeMap<VarId, VarId> = BTreeMap::new();
    for v in formula.logvars().into_iter().chain(head.iter().copied()) {
        parent.insert(v, v);
    }
    fn find(parent: &mut BTreeMap<VarId, VarId>, v: VarId) -> VarId {
        let p = parent[&v];
        if p == v {
            v
        } else {
            let r = find(parent, p);
            parent.insert(v, r);
            r
        }
    }
    for lit in formula.literals() {
        if lit.args.len() == 2 && lit.args[0] != lit.args[1] {
            let a = find(&mut parent, lit.args[0]);
            let b = find(&mut parent, lit.args[1]);
            if a == b {
                return true;
            }
            parent.insert(a, b);
        }
    }
    false
}
