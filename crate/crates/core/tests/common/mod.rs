//! Random small models and data shared by the oracle, gradient and
//! round-trip suites.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relnn::engine::{BinaryRelation, Cell, Interpretation};
use relnn::learn::LabelSet;
use relnn::modelspec::{
    lower, Binder, ConjAst, Decl, DeclKind, LitAst, Model, ModelDocument, Name, ValueType,
    WeightRef, WfAst,
};
use relnn::relcore::{Activation, InitRanges, Loss, ParameterStore, PredicateKind, Schema};

fn decl(kind: DeclKind) -> Decl {
    Decl {
        kind,
        span: Default::default(),
    }
}

#[derive(Clone)]
struct PredInfo {
    name: String,
    args: Vec<usize>,
    /// Values lie in [0,1], so the predicate may be negated.
    bounded: bool,
}

/// Knobs of the generator.
#[derive(Clone, Copy)]
pub struct Shape {
    pub max_pop: usize,
    pub max_hidden: usize,
    pub max_latents: usize,
    pub allow_binary_heads: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            max_pop: 8,
            max_hidden: 2,
            max_latents: 2,
            allow_binary_heads: true,
        }
    }
}

/// A random document whose lowering passes validation: tree-shaped joins,
/// no repeated predicate within a formula, negation only on bounded
/// predicates.
pub fn random_document(rng: &mut impl Rng, shape: Shape) -> ModelDocument {
    let mut decls = Vec::new();
    let npops = rng.random_range(1..=3);
    let pops: Vec<String> = (0..npops).map(|i| format!("p{i}")).collect();
    for p in &pops {
        decls.push(decl(DeclKind::Population {
            name: Name::new(p.clone()),
            size: Some(rng.random_range(1..=shape.max_pop)),
        }));
    }

    let mut preds: Vec<PredInfo> = Vec::new();
    let nobs = rng.random_range(1..=4);
    for i in 0..nobs {
        let arity = if npops > 0 && rng.random_bool(0.5) {
            2
        } else {
            1
        };
        let args: Vec<usize> = (0..arity).map(|_| rng.random_range(0..npops)).collect();
        let bool_ty = rng.random_bool(0.6);
        let name = format!("O{i}");
        decls.push(decl(DeclKind::Predicate {
            name: Name::new(name.clone()),
            args: args.iter().map(|a| Name::new(pops[*a].clone())).collect(),
            ty: if bool_ty {
                ValueType::Bool
            } else {
                ValueType::Real
            },
        }));
        preds.push(PredInfo {
            name,
            args,
            bounded: bool_ty,
        });
    }
    for i in 0..rng.random_range(0..=shape.max_latents) {
        let pop = rng.random_range(0..npops);
        let name = format!("L{i}");
        decls.push(decl(DeclKind::Latent {
            name: Name::new(name.clone()),
            pop: Name::new(pops[pop].clone()),
        }));
        preds.push(PredInfo {
            name,
            args: vec![pop],
            bounded: false,
        });
    }

    let mut weight_counter = 0;
    let nhidden = rng.random_range(0..=shape.max_hidden);
    let target_pop = rng.random_range(0..npops);
    for h in 0..nhidden {
        let binary = shape.allow_binary_heads && rng.random_bool(0.25);
        let head: Vec<usize> = if binary {
            vec![rng.random_range(0..npops), rng.random_range(0..npops)]
        } else {
            vec![rng.random_range(0..npops)]
        };
        let uname = format!("S{h}");
        decls.push(random_unit(
            rng,
            &uname,
            &head,
            &pops,
            &preds,
            &mut weight_counter,
        ));
        preds.push(PredInfo {
            name: uname.clone(),
            args: head.clone(),
            bounded: false,
        });
        let kind = *[
            Activation::Sigmoid,
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Relu,
        ]
        .choose(rng)
        .unwrap();
        let hname = format!("H{h}");
        decls.push(decl(DeclKind::Activation {
            name: Name::new(hname.clone()),
            kind,
            input: Name::new(uname),
        }));
        preds.push(PredInfo {
            name: hname,
            args: head,
            bounded: kind == Activation::Sigmoid,
        });
    }
    decls.push(random_unit(
        rng,
        "Out",
        &[target_pop],
        &pops,
        &preds,
        &mut weight_counter,
    ));

    let logloss = rng.random_bool(0.6);
    if logloss && rng.random_bool(0.5) {
        decls.push(decl(DeclKind::Mix {
            lambda: rng.random_range(0.0..0.5),
        }));
    }
    decls.push(decl(DeclKind::Target {
        name: Name::new("Out"),
        activation: if logloss {
            Activation::Sigmoid
        } else {
            Activation::Identity
        },
        loss: if logloss { Loss::LogLoss } else { Loss::Mse },
        labels: Name::new("Y"),
    }));
    if weight_counter > 0 && rng.random_bool(0.3) {
        decls.push(decl(DeclKind::Init {
            weight: Name::new("w0"),
            value: 0.25,
        }));
    }
    ModelDocument { decls }
}

fn random_unit(
    rng: &mut impl Rng,
    name: &str,
    head: &[usize],
    pops: &[String],
    preds: &[PredInfo],
    weight_counter: &mut usize,
) -> Decl {
    let head_names = ["x", "y"];
    let binders: Vec<Binder> = head
        .iter()
        .enumerate()
        .map(|(i, p)| Binder {
            var: Name::new(head_names[i]),
            pop: Name::new(pops[*p].clone()),
        })
        .collect();
    let nwf = rng.random_range(1..=3);
    let mut wfs = Vec::new();
    let mut fresh = 0;
    for k in 0..nwf {
        let weight = if rng.random_bool(0.15) {
            WeightRef::Literal(rng.random_range(-1.0..1.0))
        } else if k > 0 && *weight_counter > 0 && rng.random_bool(0.1) {
            // Tie to an earlier learnable weight.
            WeightRef::Named {
                name: Name::new(format!("w{}", rng.random_range(0..*weight_counter))),
                frozen: false,
            }
        } else {
            *weight_counter += 1;
            WeightRef::Named {
                name: Name::new(format!("w{}", *weight_counter - 1)),
                frozen: false,
            }
        };
        wfs.push(WfAst {
            weight,
            conj: random_conj(rng, head, preds, &mut fresh),
            span: Default::default(),
        });
    }
    decl(DeclKind::Unit {
        name: Name::new(name),
        binders,
        wfs,
    })
}

fn random_conj(
    rng: &mut impl Rng,
    head: &[usize],
    preds: &[PredInfo],
    fresh: &mut usize,
) -> ConjAst {
    let nlits = rng.random_range(0..=3);
    if nlits == 0 {
        return ConjAst::True;
    }
    // (name, population) of every logvar in scope.
    let mut vars: Vec<(String, usize)> = head
        .iter()
        .enumerate()
        .map(|(i, p)| (["x", "y"][i].to_string(), *p))
        .collect();
    let mut used = std::collections::BTreeSet::new();
    let mut lits = Vec::new();
    let mut new_var = |vars: &mut Vec<(String, usize)>, pop: usize| {
        let n = format!("v{fresh}");
        *fresh += 1;
        vars.push((n.clone(), pop));
        n
    };
    for _ in 0..nlits {
        let candidates: Vec<&PredInfo> = preds.iter().filter(|p| !used.contains(&p.name)).collect();
        let Some(p) = candidates.choose(rng) else {
            break;
        };
        used.insert(p.name.clone());
        let pick_existing =
            |vars: &[(String, usize)], pop: usize, rng: &mut dyn rand::RngCore| -> Option<String> {
                let c: Vec<&(String, usize)> = vars.iter().filter(|(_, q)| *q == pop).collect();
                if c.is_empty() {
                    None
                } else {
                    Some(c[rng.random_range(0..c.len())].0.clone())
                }
            };
        let args = match p.args.as_slice() {
            [a] => {
                let v = match pick_existing(&vars, *a, rng) {
                    Some(v) if rng.random_bool(0.85) => v,
                    _ => new_var(&mut vars, *a),
                };
                vec![v]
            }
            [a, b] => {
                // One end in scope, the other fresh: joins stay trees.
                let anchor_first = rng.random_bool(0.5);
                let (anchor_pop, other_pop) = if anchor_first { (*a, *b) } else { (*b, *a) };
                let anchor = match pick_existing(&vars, anchor_pop, rng) {
                    Some(v) if rng.random_bool(0.9) => v,
                    _ => new_var(&mut vars, anchor_pop),
                };
                let other = new_var(&mut vars, other_pop);
                if anchor_first {
                    vec![anchor, other]
                } else {
                    vec![other, anchor]
                }
            }
            _ => unreachable!(),
        };
        lits.push(LitAst {
            negated: p.bounded && rng.random_bool(0.3),
            pred: Name::new(p.name.clone()),
            args: args.into_iter().map(Name::new).collect(),
        });
    }
    ConjAst::Lits(lits)
}

/// Observed facts for every observed predicate of `schema`: booleans in
/// {0,1}, reals in [-1,1]; binary relations are sparse.
pub fn random_interp(
    rng: &mut impl Rng,
    schema: &Schema,
    label: relnn::relcore::PredId,
) -> Interpretation {
    let mut interp = Interpretation::new();
    for (i, d) in schema.predicates.iter().enumerate() {
        let p = relnn::relcore::PredId(i);
        if p == label || !d.kind.is_observed() {
            continue;
        }
        let boolean = d.kind == PredicateKind::ObservedBool;
        let value = |rng: &mut dyn rand::RngCore| {
            if boolean {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    0.0
                }
            } else {
                rng.random_range(-1.0..1.0)
            }
        };
        match d.args.as_slice() {
            [a] => {
                let n = schema.pop(*a).size();
                interp.insert_unary(p, (0..n).map(|_| value(rng)).collect());
            }
            [a, b] => {
                let (r, c) = (schema.pop(*a).size(), schema.pop(*b).size());
                let density = rng.random_range(0.1..0.7);
                let mut cells = Vec::new();
                for row in 0..r {
                    for col in 0..c {
                        if rng.random_bool(density) {
                            let v = value(rng);
                            if boolean && v == 0.0 {
                                continue;
                            }
                            cells.push(Cell {
                                row: row as u32,
                                col: col as u32,
                                value: v,
                                key: (row * c + col) as i64,
                            });
                        }
                    }
                }
                interp.insert_binary(p, BinaryRelation::new(r, c, cells).unwrap());
            }
            _ => unreachable!(),
        }
    }
    interp
}

pub struct Case {
    pub doc: ModelDocument,
    pub model: Model,
    pub interp: Interpretation,
    pub store: ParameterStore,
    pub labels: LabelSet,
}

/// A random model with data, parameters and labels, deterministic in `seed`.
pub fn random_case(seed: u64, shape: Shape) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let doc = random_document(&mut rng, shape);
    let model =
        lower(&doc).unwrap_or_else(|e| panic!("seed {seed}: generated model failed to lower: {e}"));
    let interp = random_interp(&mut rng, &model.schema, model.graph.target.labels);
    let ranges = InitRanges {
        weight: 0.5,
        latent: 1.0,
    };
    let mut store = model.template.instantiate(&model.schema, ranges, &mut rng);
    store.label_mean = rng.random_range(0.2..0.8);
    let n = model.schema.grounding_count(model.graph.target.prediction);
    let logloss = model.graph.target.loss == Loss::LogLoss;
    let mut objects = Vec::new();
    let mut values = Vec::new();
    for o in 0..n {
        if rng.random_bool(0.7) {
            objects.push(o);
            values.push(if logloss {
                f64::from(u8::from(rng.random_bool(0.5)))
            } else {
                rng.random_range(-2.0..2.0)
            });
        }
    }
    Case {
        doc,
        model,
        interp,
        store,
        labels: LabelSet::new(objects, values),
    }
}

/// True when some relu input lies within `eps` of the kink, where finite
/// differences disagree with the subgradient.
pub fn near_relu_kink(case: &Case, eps: f64) -> bool {
    use relnn::relcore::Node;
    let out = relnn::engine::graph_forward(
        &case.model.graph,
        &case.model.schema,
        &case.interp,
        &case.store,
    )
    .unwrap();
    case.model.graph.nodes.iter().any(|n| match n {
        Node::Activation {
            input,
            kind: Activation::Relu,
            ..
        } => out.get(*input).unwrap().iter().any(|x| x.abs() < eps),
        _ => false,
    })
}

/// Largest relative disagreement between analytic and central-difference
/// gradients over all learnable parameters, with an absolute floor.
pub fn gradient_disagreement(case: &Case, h: f64, floor: f64) -> (f64, String) {
    let (g, s, i, st, l) = (
        &case.model.graph,
        &case.model.schema,
        &case.interp,
        &case.store,
        &case.labels,
    );
    let (_, tape) = relnn::learn::loss_and_gradient(g, s, i, st, l).unwrap();
    let num = relnn::oracle::numeric_grad(g, s, i, st, l, h).unwrap();
    let mut worst = (0.0, String::new());
    let mut check = |a: f64, n: f64, what: String| {
        let diff = (a - n).abs();
        let rel = if diff <= floor {
            0.0
        } else {
            diff / a.abs().max(n.abs())
        };
        if rel > worst.0 {
            worst = (rel, format!("{what}: analytic {a} numeric {n}"));
        }
    };
    for (k, w) in st.weights.iter().enumerate() {
        if !w.frozen {
            check(tape.d_weights[k], num.weights[k], w.name.clone());
        }
    }
    for (p, table) in &num.latents {
        for (j, n) in table.iter().enumerate() {
            check(
                tape.d_latents[p][j],
                *n,
                format!("{}[{j}]", s.pred_name(*p)),
            );
        }
    }
    worst
}

/// False when a labeled log-loss prediction is within `eps` of 0 or 1: there
/// `1 - p` has too few significant digits for a central difference.
pub fn well_conditioned(case: &Case, eps: f64) -> bool {
    if case.model.graph.target.loss != Loss::LogLoss {
        return true;
    }
    let out = relnn::engine::graph_forward(
        &case.model.graph,
        &case.model.schema,
        &case.interp,
        &case.store,
    )
    .unwrap();
    let p = out.get(case.model.graph.target.prediction).unwrap();
    case.labels
        .objects
        .iter()
        .all(|&o| p[o] > eps && p[o] < 1.0 - eps)
}
