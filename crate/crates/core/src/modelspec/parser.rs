use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, Span};
use crate::relcore::{Activation, Loss};

const KEYWORDS: &[&str] = &[
    "population",
    "predicate",
    "latent",
    "unit",
    "activation",
    "mix",
    "target",
    "init",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

/// Parses a model document and checks that every name it references is declared.
pub fn parse(text: &str) -> Result<ModelDocument, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let doc = p.document()?;
    check_names(&doc)?;
    Ok(doc)
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.bump();
        }
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        let t = self.peek();
        let message = match expected {
            [one] => format!("expected {one}, found {}", t.tok.describe()),
            _ => format!("unexpected {}", t.tok.describe()),
        };
        Err(ParseError::new(
            t.span,
            message,
            expected.iter().map(|s| s.to_string()).collect(),
        ))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            self.error(&[what])
        }
    }

    fn ident(&mut self, what: &str) -> Result<Name, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) || s == "True" => {
                let t = self.peek();
                Err(ParseError::new(
                    t.span,
                    format!("'{s}' is reserved and cannot be used as {what}"),
                    vec![what.to_string()],
                ))
            }
            Tok::Ident(s) => {
                let name = Name {
                    text: s.clone(),
                    span: self.peek().span,
                };
                self.bump();
                Ok(name)
            }
            _ => self.error(&[what]),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Span, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if s == kw => Ok(self.bump().span),
            _ => self.error(&[&format!("'{kw}'")]),
        }
    }

    fn one_of(&mut self, options: &[&str]) -> Result<(String, Span), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if options.contains(&s.as_str()) => {
                let s = s.clone();
                Ok((s, self.bump().span))
            }
            _ => {
                let quoted: Vec<String> = options.iter().map(|o| format!("'{o}'")).collect();
                let q: Vec<&str> = quoted.iter().map(String::as_str).collect();
                self.error(&q)
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<(f64, Span), ParseError> {
        match &self.peek().tok {
            Tok::Number(s) => {
                let v: f64 = s.parse().expect("lexer validated the number");
                let span = self.peek().span;
                if !v.is_finite() {
                    return Err(ParseError::new(
                        span,
                        format!("number '{s}' is out of range"),
                        vec![],
                    ));
                }
                self.bump();
                Ok((v, span))
            }
            _ => self.error(&[what]),
        }
    }

    fn end_of_decl(&mut self) -> Result<(), ParseError> {
        match self.peek().tok {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => self.error(&["end of line"]),
        }
    }

    fn document(&mut self) -> Result<ModelDocument, ParseError> {
        let mut decls = Vec::new();
        self.skip_newlines();
        if self.peek().tok == Tok::Eof {
            return self.error(&["'population'"]);
        }
        while self.peek().tok != Tok::Eof {
            decls.push(self.decl()?);
            self.skip_newlines();
        }
        Ok(ModelDocument { decls })
    }

    fn decl(&mut self) -> Result<Decl, ParseError> {
        let span = self.peek().span;
        let kw = match &self.peek().tok {
            Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => s.clone(),
            _ => {
                let expected: Vec<String> = KEYWORDS.iter().map(|k| format!("'{k}'")).collect();
                let t = self.peek();
                return Err(ParseError::new(
                    t.span,
                    format!("expected a declaration, found {}", t.tok.describe()),
                    expected,
                ));
            }
        };
        self.bump();
        let kind = match kw.as_str() {
            "population" => {
                let name = self.ident("population name")?;
                let size = match &self.peek().tok {
                    Tok::Number(s) => {
                        let s = s.clone();
                        let t = self.bump();
                        Some(s.parse::<usize>().map_err(|_| {
                            ParseError::new(
                                t.span,
                                format!(
                                    "population size must be a non-negative integer, found '{s}'"
                                ),
                                vec![],
                            )
                        })?)
                    }
                    _ => None,
                };
                self.end_of_decl()?;
                DeclKind::Population { name, size }
            }
            "predicate" => {
                let name = self.ident("predicate name")?;
                self.expect(Tok::LParen, "'('")?;
                let mut args = vec![self.ident("population name")?];
                while self.peek().tok == Tok::Comma {
                    self.bump();
                    args.push(self.ident("population name")?);
                }
                self.expect(Tok::RParen, "')'")?;
                if args.len() > 2 {
                    return Err(ParseError::new(
                        name.span,
                        format!(
                            "predicate {} has arity {}; only unary and binary predicates are supported",
                            name.text,
                            args.len()
                        ),
                        vec![],
                    ));
                }
                let (ty, _) = self.one_of(&["bool", "real"])?;
                self.end_of_decl()?;
                DeclKind::Predicate {
                    name,
                    args,
                    ty: if ty == "bool" {
                        ValueType::Bool
                    } else {
                        ValueType::Real
                    },
                }
            }
            "latent" => {
                let name = self.ident("latent name")?;
                self.expect(Tok::LParen, "'('")?;
                let pop = self.ident("population name")?;
                self.expect(Tok::RParen, "')'")?;
                self.end_of_decl()?;
                DeclKind::Latent { name, pop }
            }
            "unit" => self.unit()?,
            "activation" => {
                let name = self.ident("activation name")?;
                self.expect(Tok::Eq, "'='")?;
                let (kind, _) = self.one_of(&["sigmoid", "tanh", "relu"])?;
                self.expect(Tok::LParen, "'('")?;
                let input = self.ident("input name")?;
                self.expect(Tok::RParen, "')'")?;
                self.end_of_decl()?;
                DeclKind::Activation {
                    name,
                    kind: kind.parse().expect("checked by one_of"),
                    input,
                }
            }
            "mix" => {
                self.keyword("lambda")?;
                self.expect(Tok::Eq, "'='")?;
                let (lambda, span) = self.number("a number")?;
                if !(0.0..=1.0).contains(&lambda) {
                    return Err(ParseError::new(
                        span,
                        format!("mix lambda {lambda} outside [0,1]"),
                        vec![],
                    ));
                }
                self.end_of_decl()?;
                DeclKind::Mix { lambda }
            }
            "target" => {
                let name = self.ident("output name")?;
                let (act, _) = self.one_of(&["sigmoid", "identity"])?;
                let (loss, _) = self.one_of(&["logloss", "mse"])?;
                self.keyword("labels")?;
                let labels = self.ident("label predicate name")?;
                self.end_of_decl()?;
                DeclKind::Target {
                    name,
                    activation: act.parse::<Activation>().expect("checked by one_of"),
                    loss: loss.parse::<Loss>().expect("checked by one_of"),
                    labels,
                }
            }
            "init" => {
                let weight = self.ident("weight name")?;
                self.expect(Tok::Eq, "'='")?;
                let (value, _) = self.number("a number")?;
                self.end_of_decl()?;
                DeclKind::Init { weight, value }
            }
            _ => unreachable!("keyword list checked above"),
        };
        Ok(Decl { kind, span })
    }

    fn unit(&mut self) -> Result<DeclKind, ParseError> {
        let name = self.ident("unit name")?;
        self.expect(Tok::LParen, "'('")?;
        let mut binders = vec![self.binder()?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            binders.push(self.binder()?);
        }
        self.expect(Tok::RParen, "')'")?;
        self.expect(Tok::Colon, "':'")?;
        let mut wfs = Vec::new();
        if !matches!(self.peek().tok, Tok::Newline | Tok::Eof) {
            wfs.push(self.wf()?);
        }
        self.end_of_decl()?;
        loop {
            self.skip_newlines();
            let continues = match &self.peek().tok {
                Tok::Number(_) => true,
                Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()),
                _ => false,
            };
            if !continues {
                break;
            }
            wfs.push(self.wf()?);
            self.end_of_decl()?;
        }
        if wfs.is_empty() {
            return self.error(&["a weighted formula"]);
        }
        Ok(DeclKind::Unit { name, binders, wfs })
    }

    fn binder(&mut self) -> Result<Binder, ParseError> {
        let var = self.ident("logvar")?;
        self.expect(Tok::Colon, "':'")?;
        let pop = self.ident("population name")?;
        Ok(Binder { var, pop })
    }

    fn wf(&mut self) -> Result<WfAst, ParseError> {
        let span = self.peek().span;
        let weight = match &self.peek().tok {
            Tok::Number(_) => WeightRef::Literal(self.number("a weight")?.0),
            Tok::Ident(_) => {
                let name = self.ident("weight name")?;
                let frozen = if self.peek().tok == Tok::Bang {
                    self.bump();
                    true
                } else {
                    false
                };
                WeightRef::Named { name, frozen }
            }
            _ => return self.error(&["a weight"]),
        };
        self.expect(Tok::Star, "'*'")?;
        let conj = match &self.peek().tok {
            Tok::Ident(s) if s == "True" => {
                self.bump();
                ConjAst::True
            }
            _ => {
                let mut lits = vec![self.lit()?];
                while self.peek().tok == Tok::Amp {
                    self.bump();
                    lits.push(self.lit()?);
                }
                ConjAst::Lits(lits)
            }
        };
        Ok(WfAst { weight, conj, span })
    }

    fn lit(&mut self) -> Result<LitAst, ParseError> {
        let negated = if self.peek().tok == Tok::Tilde {
            self.bump();
            true
        } else {
            false
        };
        let pred = self.ident("predicate name")?;
        self.expect(Tok::LParen, "'('")?;
        let mut args = vec![self.ident("logvar")?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            args.push(self.ident("logvar")?);
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(LitAst {
            negated,
            pred,
            args,
        })
    }
}

/// Duplicate declarations and references to undeclared names.
fn check_names(doc: &ModelDocument) -> Result<(), ParseError> {
    let mut pops: BTreeSet<&str> = BTreeSet::new();
    let mut preds: BTreeMap<&str, Span> = BTreeMap::new();
    let mut mix_seen = false;
    let mut target_seen = false;
    let dup = |name: &Name, what: &str| {
        Err(ParseError::new(
            name.span,
            format!("duplicate declaration of {what} {}", name.text),
            vec![],
        ))
    };
    for d in &doc.decls {
        match &d.kind {
            DeclKind::Population { name, .. } => {
                if !pops.insert(&name.text) {
                    return dup(name, "population");
                }
            }
            DeclKind::Predicate { name, .. }
            | DeclKind::Latent { name, .. }
            | DeclKind::Unit { name, .. }
            | DeclKind::Activation { name, .. } => {
                if preds.insert(&name.text, name.span).is_some() {
                    return dup(name, "predicate");
                }
            }
            DeclKind::Mix { .. } => {
                if mix_seen {
                    return Err(ParseError::new(
                        d.span,
                        "duplicate declaration of mix".into(),
                        vec![],
                    ));
                }
                mix_seen = true;
            }
            DeclKind::Target { .. } => {
                if target_seen {
                    return Err(ParseError::new(
                        d.span,
                        "duplicate declaration of target".into(),
                        vec![],
                    ));
                }
                target_seen = true;
            }
            DeclKind::Init { .. } => {}
        }
    }
    let unknown = |name: &Name, what: &str| {
        Err(ParseError::new(
            name.span,
            format!("unknown {what} {}", name.text),
            vec![],
        ))
    };
    let mut named_weights: BTreeSet<&str> = BTreeSet::new();
    let mut inits: BTreeSet<&str> = BTreeSet::new();
    for d in &doc.decls {
        match &d.kind {
            DeclKind::Predicate { args, .. } => {
                for a in args {
                    if !pops.contains(a.text.as_str()) {
                        return unknown(a, "population");
                    }
                }
            }
            DeclKind::Latent { pop, .. } => {
                if !pops.contains(pop.text.as_str()) {
                    return unknown(pop, "population");
                }
            }
            DeclKind::Unit { binders, wfs, .. } => {
                let mut seen = BTreeSet::new();
                for b in binders {
                    if !pops.contains(b.pop.text.as_str()) {
                        return unknown(&b.pop, "population");
                    }
                    if !seen.insert(b.var.text.as_str()) {
                        return Err(ParseError::new(
                            b.var.span,
                            format!("repeated head logvar {}", b.var.text),
                            vec![],
                        ));
                    }
                }
                for wf in wfs {
                    if let WeightRef::Named { name, .. } = &wf.weight {
                        named_weights.insert(&name.text);
                    }
                    if let ConjAst::Lits(lits) = &wf.conj {
                        for l in lits {
                            if !preds.contains_key(l.pred.text.as_str()) {
                                return unknown(&l.pred, "predicate");
                            }
                        }
                    }
                }
            }
            DeclKind::Activation { input, .. } => {
                if !preds.contains_key(input.text.as_str()) {
                    return unknown(input, "predicate");
                }
            }
            DeclKind::Target { name, .. } => {
                if !preds.contains_key(name.text.as_str()) {
                    return unknown(name, "predicate");
                }
            }
            DeclKind::Init { weight, .. } => {
                if !inits.insert(&weight.text) {
                    return dup(weight, "init for weight");
                }
            }
            _ => {}
        }
    }
    for d in &doc.decls {
        if let DeclKind::Init { weight, .. } = &d.kind {
            if !named_weights.contains(weight.text.as_str()) {
                return unknown(weight, "weight");
            }
        }
    }
    Ok(())
}
