use super::Span;
use crate::relcore::{Activation, Loss};

#[derive(Debug, Clone, PartialEq)]
pub struct Name {
    pub text: String,
    pub span: Span,
}

impl Name {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueType {
    Bool,
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightRef {
    /// A literal weight; frozen.
    Literal(f64),
    /// A named weight, learnable unless marked with `!`. Repeated names tie weights.
    Named { name: Name, frozen: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LitAst {
    pub negated: bool,
    pub pred: Name,
    pub args: Vec<Name>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConjAst {
    True,
    Lits(Vec<LitAst>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfAst {
    pub weight: WeightRef,
    pub conj: ConjAst,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binder {
    pub var: Name,
    pub pop: Name,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeclKind {
    Population {
        name: Name,
        size: Option<usize>,
    },
    Predicate {
        name: Name,
        args: Vec<Name>,
        ty: ValueType,
    },
    Latent {
        name: Name,
        pop: Name,
    },
    Unit {
        name: Name,
        binders: Vec<Binder>,
        wfs: Vec<WfAst>,
    },
    Activation {
        name: Name,
        kind: Activation,
        input: Name,
    },
    Mix {
        lambda: f64,
    },
    Target {
        name: Name,
        activation: Activation,
        loss: Loss,
        labels: Name,
    },
    Init {
        weight: Name,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub kind: DeclKind,
    pub span: Span,
}

/// A parsed model: declarations in source order with their locations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelDocument {
    pub decls: Vec<Decl>,
}

impl ModelDocument {
    /// Copy with every span reset, for structural comparison.
    pub fn without_spans(&self) -> Self {
        let mut doc = self.clone();
        for d in &mut doc.decls {
            d.span = Span::default();
            match &mut d.kind {
                DeclKind::Population { name, .. } => clear(name),
                DeclKind::Predicate { name, args, .. } => {
                    clear(name);
                    args.iter_mut().for_each(clear);
                }
                DeclKind::Latent { name, pop } => {
                    clear(name);
                    clear(pop);
                }
                DeclKind::Unit { name, binders, wfs } => {
                    clear(name);
                    for b in binders {
                        clear(&mut b.var);
                        clear(&mut b.pop);
                    }
                    for wf in wfs {
                        wf.span = Span::default();
                        if let WeightRef::Named { name, .. } = &mut wf.weight {
                            clear(name);
                        }
                        if let ConjAst::Lits(lits) = &mut wf.conj {
                            for l in lits {
                                clear(&mut l.pred);
                                l.args.iter_mut().for_each(clear);
                            }
                        }
                    }
                }
                DeclKind::Activation { name, input, .. } => {
                    clear(name);
                    clear(input);
                }
                DeclKind::Mix { .. } => {}
                DeclKind::Target { name, labels, .. } => {
                    clear(name);
                    clear(labels);
                }
                DeclKind::Init { weight, .. } => clear(weight),
            }
        }
        doc
    }
}

fn clear(n: &mut Name) {
    n.span = Span::default();
}
