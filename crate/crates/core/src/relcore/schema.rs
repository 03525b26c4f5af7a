use std::collections::HashMap;
use std::fmt;

/// Index of a population inside a [`Schema`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PopId(pub usize);

/// Index of a predicate inside a [`Schema`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredId(pub usize);

/// A named, finite set of objects. Objects are addressed by dense indices
/// `0..size`; external names are kept for I/O only.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    name: String,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Population {
    /// A population whose objects are named `0`, `1`, ... `size-1`.
    pub fn with_size(name: impl Into<String>, size: usize) -> Self {
        let names = (0..size).map(|i| i.to_string()).collect();
        Self::with_names(name, names).expect("index names are unique")
    }

    pub fn with_names(name: impl Into<String>, names: Vec<String>) -> Result<Self, String> {
        let name = name.into();
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.chars().any(char::is_whitespace) {
                return Err(format!("population {name}: invalid object name {n:?}"));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(format!("population {name}: duplicate object name {n:?}"));
            }
        }
        Ok(Self { name, names, index })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn object_name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Appends a new object and returns its index.
    pub fn push(&mut self, name: impl Into<String>) -> Result<usize, String> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(format!(
                "population {}: object {name:?} already exists",
                self.name
            ));
        }
        let idx = self.names.len();
        self.index.insert(name.clone(), idx);
        self.names.push(name);
        Ok(idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredicateKind {
    ObservedBool,
    ObservedReal,
    Latent,
    Derived,
}

impl PredicateKind {
    pub fn is_observed(self) -> bool {
        matches!(
            self,
            PredicateKind::ObservedBool | PredicateKind::ObservedReal
        )
    }

    /// Latent and derived predicates receive gradients.
    pub fn is_differentiable(self) -> bool {
        matches!(self, PredicateKind::Latent | PredicateKind::Derived)
    }
}

/// Value range of a predicate; negation `1 - v` is only meaningful on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueRange {
    UnitInterval,
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateDecl {
    pub name: String,
    pub args: Vec<PopId>,
    pub kind: PredicateKind,
    pub range: ValueRange,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    pub populations: Vec<Population>,
    pub predicates: Vec<PredicateDecl>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_population(&mut self, pop: Population) -> Result<PopId, String> {
        if self.pop_id(pop.name()).is_some() {
            return Err(format!("duplicate population {}", pop.name()));
        }
        self.populations.push(pop);
        Ok(PopId(self.populations.len() - 1))
    }

    pub fn add_predicate(&mut self, decl: PredicateDecl) -> Result<PredId, String> {
        if self.pred_id(&decl.name).is_some() {
            return Err(format!("duplicate predicate {}", decl.name));
        }
        self.predicates.push(decl);
        Ok(PredId(self.predicates.len() - 1))
    }

    pub fn pop_id(&self, name: &str) -> Option<PopId> {
        self.populations
            .iter()
            .position(|p| p.name() == name)
            .map(PopId)
    }

    pub fn pred_id(&self, name: &str) -> Option<PredId> {
        self.predicates
            .iter()
            .position(|p| p.name == name)
            .map(PredId)
    }

    pub fn pop(&self, id: PopId) -> &Population {
        &self.populations[id.0]
    }

    pub fn pop_mut(&mut self, id: PopId) -> &mut Population {
        &mut self.populations[id.0]
    }

    pub fn pred(&self, id: PredId) -> &PredicateDecl {
        &self.predicates[id.0]
    }

    pub fn pred_name(&self, id: PredId) -> &str {
        self.predicates
            .get(id.0)
            .map(|p| p.name.as_str())
            .unwrap_or("<undeclared>")
    }

    /// Number of groundings of a predicate: product of its argument population sizes.
    pub fn grounding_count(&self, id: PredId) -> usize {
        self.pred(id)
            .args
            .iter()
            .map(|p| self.pop(*p).size())
            .product()
    }
}

impl fmt::Display for PredicateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredicateKind::ObservedBool => "observed-boolean",
            PredicateKind::ObservedReal => "observed-continuous",
            PredicateKind::Latent => "numeric-latent",
            PredicateKind::Derived => "derived",
        })
    }
}
