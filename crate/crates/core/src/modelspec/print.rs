use std::fmt::Write as _;

use super::ast::*;

/// Canonical text of a document. Parsing the result gives back the same
/// document up to source locations.
pub fn print(doc: &ModelDocument) -> String {
    let mut s = String::new();
    for d in &doc.decls {
        match &d.kind {
            DeclKind::Population { name, size } => {
                let _ = write!(s, "population {}", name.text);
                if let Some(n) = size {
                    let _ = write!(s, " {n}");
                }
                s.push('\n');
            }
            DeclKind::Predicate { name, args, ty } => {
                let args: Vec<&str> = args.iter().map(|a| a.text.as_str()).collect();
                let ty = match ty {
                    ValueType::Bool => "bool",
                    ValueType::Real => "real",
                };
                let _ = writeln!(s, "predicate {}({}) {ty}", name.text, args.join(", "));
            }
            DeclKind::Latent { name, pop } => {
                let _ = writeln!(s, "latent {}({})", name.text, pop.text);
            }
            DeclKind::Unit { name, binders, wfs } => {
                let binders: Vec<String> = binders
                    .iter()
                    .map(|b| format!("{}: {}", b.var.text, b.pop.text))
                    .collect();
                let _ = write!(s, "unit {}({}):", name.text, binders.join(", "));
                for (i, wf) in wfs.iter().enumerate() {
                    if i == 0 {
                        s.push(' ');
                    } else {
                        s.push_str("    ");
                    }
                    s.push_str(&wf_text(wf));
                    s.push('\n');
                }
            }
            DeclKind::Activation { name, kind, input } => {
                let _ = writeln!(
                    s,
                    "activation {} = {}({})",
                    name.text,
                    kind.name(),
                    input.text
                );
            }
            DeclKind::Mix { lambda } => {
                let _ = writeln!(s, "mix lambda = {lambda:?}");
            }
            DeclKind::Target {
                name,
                activation,
                loss,
                labels,
            } => {
                let _ = writeln!(
                    s,
                    "target {} {} {} labels {}",
                    name.text,
                    activation.name(),
                    loss.name(),
                    labels.text
                );
            }
            DeclKind::Init { weight, value } => {
                let _ = writeln!(s, "init {} = {value:?}", weight.text);
            }
        }
    }
    s
}

fn wf_text(wf: &WfAst) -> String {
    let weight = match &wf.weight {
        WeightRef::Literal(v) => format!("{v:?}"),
        WeightRef::Named { name, frozen } => {
            format!("{}{}", name.text, if *frozen { "!" } else { "" })
        }
    };
    let conj = match &wf.conj {
        ConjAst::True => "True".to_string(),
        ConjAst::Lits(lits) => lits
            .iter()
            .map(|l| {
                let args: Vec<&str> = l.args.iter().map(|a| a.text.as_str()).collect();
                format!(
                    "{}{}({})",
                    if l.negated { "~" } else { "" },
                    l.pred.text,
                    args.join(",")
                )
            })
            .collect::<Vec<_>>()
            .join(" & "),
    };
    format!("{weight} * {conj}")
}
