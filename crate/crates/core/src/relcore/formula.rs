use std::collections::BTreeSet;

use super::params::WeightId;
use super::schema::{PopId, PredId};

/// Index of a logical variable inside the owning [`Unit`]'s variable table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct LogVar {
    pub name: String,
    pub pop: PopId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Literal {
    pub pred: PredId,
    pub args: Vec<VarId>,
    pub negated: bool,
}

/// A conjunction of literals, or the distinguished formula `True` whose
/// count is always 1.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Conj(Vec<Literal>),
}

impl Formula {
    pub fn literals(&self) -> &[Literal] {
        match self {
            Formula::True => &[],
            Formula::Conj(lits) => lits,
        }
    }

    /// Logvars occurring in the formula, in ascending id order.
    pub fn logvars(&self) -> BTreeSet<VarId> {
        self.literals()
            .iter()
            .flat_map(|l| l.args.iter().copied())
            .collect()
    }

    /// Literals whose predicate satisfies `pred`, with their positions.
    pub fn literals_of(&self, pred: PredId) -> impl Iterator<Item = (usize, &Literal)> {
        self.literals()
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.pred == pred)
    }
}

/// Logvars of `formula` that are summed over once the head logvars are bound.
pub fn free_logvars(formula: &Formula, head: &BTreeSet<VarId>) -> BTreeSet<VarId> {
    formula.logvars().difference(head).copied().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFormula {
    pub weight: WeightId,
    pub formula: Formula,
}

/// A relational linear unit: `head(x) = sum_k w_k * count(phi_k, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub head: PredId,
    pub vars: Vec<LogVar>,
    pub head_vars: Vec<VarId>,
    pub wfs: Vec<WeightedFormula>,
}

impl Unit {
    pub fn var(&self, v: VarId) -> &LogVar {
        &self.vars[v.0]
    }

    pub fn head_set(&self) -> BTreeSet<VarId> {
        self.head_vars.iter().copied().collect()
    }

    /// Predicates read by any of the unit's formulas.
    pub fn inputs(&self) -> BTreeSet<PredId> {
        self.wfs
            .iter()
            .flat_map(|wf| wf.formula.literals().iter().map(|l| l.pred))
            .collect()
    }
}
