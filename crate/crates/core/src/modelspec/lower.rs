use std::collections::BTreeMap;

use super::ast::*;
use super::{ModelError, Span};
use crate::relcore::{
    validate, Formula, LayerGraph, Literal, LogVar, Loss, Node, ParameterTemplate, PopId,
    Population, PredId, PredicateDecl, PredicateKind, Schema, Target, Unit, ValueRange, VarId,
    WeightSpec, WeightedFormula,
};

/// A lowered, validated model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub schema: Schema,
    pub graph: LayerGraph,
    pub template: ParameterTemplate,
}

/// Maps a parsed document to schema, layer graph and parameter template,
/// then validates the result.
///
/// The target declaration becomes an activation node named `<out>@<act>`,
/// followed by a mix node `<out>@mix` when the document declares one. A label
/// predicate that is not declared is added as an observed predicate over the
/// target's population: boolean for logloss, real for mse.
pub fn lower(doc: &ModelDocument) -> Result<Model, ModelError> {
    let mut schema = Schema::new();
    for d in &doc.decls {
        if let DeclKind::Population { name, size } = &d.kind {
            let pop = Population::with_size(name.text.clone(), size.unwrap_or(1).max(1));
            schema
                .add_population(pop)
                .map_err(|e| ModelError::at(name.span, e))?;
        }
    }
    let pop = |schema: &Schema, n: &Name| {
        schema
            .pop_id(&n.text)
            .ok_or_else(|| ModelError::at(n.span, format!("unknown population {}", n.text)))
    };

    let mut latents = Vec::new();
    for d in &doc.decls {
        let decl = match &d.kind {
            DeclKind::Predicate { name, args, ty } => {
                let args = args
                    .iter()
                    .map(|a| pop(&schema, a))
                    .collect::<Result<Vec<_>, _>>()?;
                let (kind, range) = match ty {
                    ValueType::Bool => (PredicateKind::ObservedBool, ValueRange::UnitInterval),
                    ValueType::Real => (PredicateKind::ObservedReal, ValueRange::Real),
                };
                Some((
                    name,
                    PredicateDecl {
                        name: name.text.clone(),
                        args,
                        kind,
                        range,
                    },
                ))
            }
            DeclKind::Latent { name, pop: p } => Some((
                name,
                PredicateDecl {
                    name: name.text.clone(),
                    args: vec![pop(&schema, p)?],
                    kind: PredicateKind::Latent,
                    range: ValueRange::Real,
                },
            )),
            DeclKind::Unit { name, binders, .. } => Some((
                name,
                PredicateDecl {
                    name: name.text.clone(),
                    args: binders
                        .iter()
                        .map(|b| pop(&schema, &b.pop))
                        .collect::<Result<_, _>>()?,
                    kind: PredicateKind::Derived,
                    range: ValueRange::Real,
                },
            )),
            _ => None,
        };
        if let Some((name, decl)) = decl {
            let is_latent = decl.kind == PredicateKind::Latent;
            let id = schema
                .add_predicate(decl)
                .map_err(|e| ModelError::at(name.span, e))?;
            if is_latent {
                latents.push(id);
            }
        }
    }

    // Activations take the shape of their input, which may itself be an activation.
    let mut pending: Vec<&Decl> = doc
        .decls
        .iter()
        .filter(|d| matches!(d.kind, DeclKind::Activation { .. }))
        .collect();
    while !pending.is_empty() {
        let before = pending.len();
        pending.retain(|d| {
            let DeclKind::Activation { name, kind, input } = &d.kind else {
                unreachable!()
            };
            let Some(inp) = schema.pred_id(&input.text) else {
                return true;
            };
            let args = schema.pred(inp).args.clone();
            let range = if *kind == crate::relcore::Activation::Sigmoid {
                ValueRange::UnitInterval
            } else {
                ValueRange::Real
            };
            // Duplicates were rejected by the parser.
            let _ = schema.add_predicate(PredicateDecl {
                name: name.text.clone(),
                args,
                kind: PredicateKind::Derived,
                range,
            });
            false
        });
        if pending.len() == before {
            let DeclKind::Activation { name, .. } = &pending[0].kind else {
                unreachable!()
            };
            return Err(ModelError::at(
                name.span,
                format!("activation {} depends on itself", name.text),
            ));
        }
    }

    let inits: BTreeMap<&str, f64> = doc
        .decls
        .iter()
        .filter_map(|d| match &d.kind {
            DeclKind::Init { weight, value } => Some((weight.text.as_str(), *value)),
            _ => None,
        })
        .collect();

    let mut template = ParameterTemplate {
        weights: Vec::new(),
        latents,
    };
    let mut nodes = Vec::new();
    let mut mix = None;
    let mut target_decl = None;
    for d in &doc.decls {
        match &d.kind {
            DeclKind::Unit { name, binders, wfs } => {
                let unit = lower_unit(&schema, &mut template, &inits, name, binders, wfs)?;
                nodes.push(Node::Linear(unit));
            }
            DeclKind::Activation { name, kind, input } => nodes.push(Node::Activation {
                input: schema.pred_id(&input.text).expect("resolved above"),
                output: schema.pred_id(&name.text).expect("declared above"),
                kind: *kind,
            }),
            DeclKind::Mix { lambda } => mix = Some(*lambda),
            DeclKind::Target { .. } => target_decl = Some(d),
            _ => {}
        }
    }

    let Some(Decl {
        kind:
            DeclKind::Target {
                name,
                activation,
                loss,
                labels,
            },
        ..
    }) = target_decl
    else {
        return Err(ModelError::NoTarget);
    };
    let signal = schema
        .pred_id(&name.text)
        .ok_or_else(|| ModelError::at(name.span, format!("unknown predicate {}", name.text)))?;
    let args = schema.pred(signal).args.clone();
    let act_out = add_derived(
        &mut schema,
        format!("{}@{}", name.text, activation.name()),
        &args,
        name.span,
    )?;
    nodes.push(Node::Activation {
        input: signal,
        output: act_out,
        kind: *activation,
    });
    let mut prediction = act_out;
    if let Some(lambda) = mix {
        let mix_out = add_derived(&mut schema, format!("{}@mix", name.text), &args, name.span)?;
        nodes.push(Node::Mix {
            input: act_out,
            output: mix_out,
            lambda,
        });
        prediction = mix_out;
    }
    let label_pred = match schema.pred_id(&labels.text) {
        Some(p) => p,
        None => {
            let (kind, range) = match loss {
                Loss::LogLoss => (PredicateKind::ObservedBool, ValueRange::UnitInterval),
                Loss::Mse => (PredicateKind::ObservedReal, ValueRange::Real),
            };
            schema
                .add_predicate(PredicateDecl {
                    name: labels.text.clone(),
                    args,
                    kind,
                    range,
                })
                .map_err(|e| ModelError::at(labels.span, e))?
        }
    };
    let graph = LayerGraph {
        nodes,
        target: Target {
            prediction,
            labels: label_pred,
            loss: *loss,
        },
    };
    validate(&graph, &schema)
        .into_result()
        .map_err(ModelError::Invalid)?;
    Ok(Model {
        schema,
        graph,
        template,
    })
}

fn add_derived(
    schema: &mut Schema,
    name: String,
    args: &[PopId],
    span: Span,
) -> Result<PredId, ModelError> {
    schema
        .add_predicate(PredicateDecl {
            name,
            args: args.to_vec(),
            kind: PredicateKind::Derived,
            range: ValueRange::Real,
        })
        .map_err(|e| ModelError::at(span, e))
}

fn lower_unit(
    schema: &Schema,
    template: &mut ParameterTemplate,
    inits: &BTreeMap<&str, f64>,
    name: &Name,
    binders: &[Binder],
    wfs: &[WfAst],
) -> Result<Unit, ModelError> {
    let head = schema
        .pred_id(&name.text)
        .expect("units are declared before lowering");
    let mut vars: Vec<LogVar> = Vec::new();
    for b in binders {
        vars.push(LogVar {
            name: b.var.text.clone(),
            pop: schema.pop_id(&b.pop.text).expect("checked by the parser"),
        });
    }
    let head_vars = (0..vars.len()).map(VarId).collect();
    let mut out = Vec::new();
    for (k, wf) in wfs.iter().enumerate() {
        let weight = match &wf.weight {
            WeightRef::Literal(v) => {
                let wname = format!("{}_{k}", name.text);
                if template.weight_id(&wname).is_some() {
                    return Err(ModelError::at(
                        wf.span,
                        format!("weight name {wname} is already in use"),
                    ));
                }
                template.weights.push(WeightSpec {
                    name: wname,
                    init: Some(*v),
                    frozen: true,
                });
                crate::relcore::WeightId(template.weights.len() - 1)
            }
            WeightRef::Named {
                name: wname,
                frozen,
            } => {
                match template.weight_id(&wname.text) {
                    Some(id) => {
                        if template.weights[id.0].frozen != *frozen {
                            return Err(ModelError::at(
                            wname.span,
                            format!("weight {} is marked frozen in one place and learnable in another", wname.text),
                        ));
                        }
                        id
                    }
                    None => {
                        template.weights.push(WeightSpec {
                            name: wname.text.clone(),
                            init: inits.get(wname.text.as_str()).copied(),
                            frozen: *frozen,
                        });
                        crate::relcore::WeightId(template.weights.len() - 1)
                    }
                }
            }
        };
        let formula = match &wf.conj {
            ConjAst::True => Formula::True,
            ConjAst::Lits(lits) => {
                let mut out_lits = Vec::new();
                for l in lits {
                    let pred = schema.pred_id(&l.pred.text).ok_or_else(|| {
                        ModelError::at(l.pred.span, format!("unknown predicate {}", l.pred.text))
                    })?;
                    let decl = schema.pred(pred);
                    if l.args.len() != decl.arity() {
                        return Err(ModelError::at(
                            l.pred.span,
                            format!(
                                "{} expects {} argument(s), found {}",
                                decl.name,
                                decl.arity(),
                                l.args.len()
                            ),
                        ));
                    }
                    let mut args = Vec::new();
                    for (a, pop) in l.args.iter().zip(&decl.args) {
                        let id = match vars.iter().position(|v| v.name == a.text) {
                            Some(i) => i,
                            None => {
                                vars.push(LogVar {
                                    name: a.text.clone(),
                                    pop: *pop,
                                });
                                vars.len() - 1
                            }
                        };
                        args.push(VarId(id));
                    }
                    out_lits.push(Literal {
                        pred,
                        args,
                        negated: l.negated,
                    });
                }
                Formula::Conj(out_lits)
            }
        };
        out.push(WeightedFormula { weight, formula });
    }
    Ok(Unit {
        head,
        vars,
        head_vars,
        wfs: out,
    })
}
