//! Variable elimination over a formula's join tree.
//!
//! Each logvar of a formula (plus the unit's head logvars) becomes a node
//! carrying a dense factor over its population: the product of the unary
//! literals on it. Each binary literal becomes an edge backed by a sparse
//! relation. Summing out a leaf is one pass over the edge's cells; a negated
//! edge uses `sum(b) - sum(R * b)` so the dense complement is never built.

use std::cell::Cell as StdCell;
use std::collections::BTreeMap;

use super::interp::BinaryRelation;
use super::EngineError;
use crate::relcore::{Formula, PredId, Unit, VarId};

thread_local! {
    static CELL_TOUCHES: StdCell<u64> = const { StdCell::new(0) };
}

/// Number of sparse cells visited by elimination on this thread since the last reset.
pub fn cell_touches() -> u64 {
    CELL_TOUCHES.with(StdCell::get)
}

pub fn reset_cell_touches() {
    CELL_TOUCHES.with(|c| c.set(0));
}

fn touch(n: usize) {
    CELL_TOUCHES.with(|c| c.set(c.get() + n as u64));
}

/// Values of one predicate as seen by a formula.
#[derive(Debug, Clone, Copy)]
pub enum PredValues<'a> {
    Unary(&'a [f64]),
    Binary(&'a BinaryRelation),
}

/// Anything that can resolve predicate values for evaluation.
pub trait ValueSource {
    fn values(&self, pred: PredId) -> Option<PredValues<'_>>;
}

#[derive(Debug, Clone)]
struct Edge<'a> {
    row: usize,
    col: usize,
    rel: &'a BinaryRelation,
    negated: bool,
}

/// Factor graph of one formula under one unit. Node slots follow ascending
/// logvar id, so elimination ties break by declaration order.
#[derive(Debug, Clone)]
pub struct FactorGraph<'a> {
    vars: Vec<VarId>,
    slot: BTreeMap<VarId, usize>,
    factors: Vec<Vec<f64>>,
    edges: Vec<Edge<'a>>,
    adj: Vec<Vec<usize>>,
    comp: Vec<usize>,
}

impl<'a> FactorGraph<'a> {
    /// Builds the graph for `formula`, omitting literal `skip` (used for
    /// derivatives). The skipped literal's logvars stay as nodes.
    pub fn build<S: ValueSource>(
        unit: &Unit,
        sizes: &[usize],
        formula: &Formula,
        source: &'a S,
        skip: Option<usize>,
    ) -> Result<Self, EngineError> {
        let mut vars: Vec<VarId> = formula.logvars().into_iter().collect();
        for v in &unit.head_vars {
            if !vars.contains(v) {
                vars.push(*v);
            }
        }
        vars.sort();
        let slot: BTreeMap<VarId, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut factors: Vec<Vec<f64>> = vars.iter().map(|v| vec![1.0; sizes[v.0]]).collect();
        let mut edges = Vec::new();
        for (i, lit) in formula.literals().iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let values = source
                .values(lit.pred)
                .ok_or(EngineError::MissingInput(lit.pred))?;
            match (values, lit.args.as_slice()) {
                (PredValues::Unary(vals), [v]) => {
                    let f = &mut factors[slot[v]];
                    if vals.len() != f.len() {
                        return Err(EngineError::ShapeMismatch(lit.pred));
                    }
                    if lit.negated {
                        f.iter_mut().zip(vals).for_each(|(a, b)| *a *= 1.0 - b);
                    } else {
                        f.iter_mut().zip(vals).for_each(|(a, b)| *a *= b);
                    }
                }
                (PredValues::Binary(rel), [a, b]) => {
                    if rel.rows() != sizes[a.0] || rel.cols() != sizes[b.0] {
                        return Err(EngineError::ShapeMismatch(lit.pred));
                    }
                    edges.push(Edge {
                        row: slot[a],
                        col: slot[b],
                        rel,
                        negated: lit.negated,
                    });
                }
                _ => return Err(EngineError::ShapeMismatch(lit.pred)),
            }
        }
        let mut adj = vec![Vec::new(); vars.len()];
        for (e, edge) in edges.iter().enumerate() {
            adj[edge.row].push(e);
            adj[edge.col].push(e);
        }
        let mut g = Self {
            vars,
            slot,
            factors,
            edges,
            adj,
            comp: Vec::new(),
        };
        g.comp = g.label_components();
        Ok(g)
    }

    fn label_components(&self) -> Vec<usize> {
        let n = self.vars.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(u) = stack.pop() {
                for &e in &self.adj[u] {
                    let w = self.other(e, u);
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    fn other(&self, e: usize, u: usize) -> usize {
        let edge = &self.edges[e];
        if edge.row == u {
            edge.col
        } else {
            edge.row
        }
    }

    pub fn slot_of(&self, v: VarId) -> usize {
        self.slot[&v]
    }

    pub fn factor(&self, v: VarId) -> &[f64] {
        &self.factors[self.slot[&v]]
    }

    /// Multiplies the node factor of `v` elementwise by `w`.
    pub fn scale_factor(&mut self, v: VarId, w: &[f64]) {
        let f = &mut self.factors[self.slot[&v]];
        debug_assert_eq!(f.len(), w.len());
        f.iter_mut().zip(w).for_each(|(a, b)| *a *= b);
    }

    pub fn replace_factor(&mut self, v: VarId, f: Vec<f64>) -> Vec<f64> {
        let s = self.slot[&v];
        std::mem::replace(&mut self.factors[s], f)
    }

    pub fn same_component(&self, a: VarId, b: VarId) -> bool {
        self.comp[self.slot[&a]] == self.comp[self.slot[&b]]
    }

    /// Belief at `root` within its connected component: the root factor times
    /// the messages of all subtrees, every other logvar of the component summed out.
    pub fn belief(&self, root: VarId) -> Vec<f64> {
        let root = self.slot[&root];
        // Depth-first discovery from the root; reversing it processes leaves first.
        let mut order = Vec::new();
        let mut parent_edge: Vec<Option<usize>> = vec![None; self.vars.len()];
        let mut visited = vec![false; self.vars.len()];
        let mut stack = vec![root];
        visited[root] = true;
        while let Some(u) = stack.pop() {
            order.push(u);
            for &e in self.adj[u].iter().rev() {
                let w = self.other(e, u);
                if !visited[w] {
                    visited[w] = true;
                    parent_edge[w] = Some(e);
                    stack.push(w);
                }
            }
        }
        let mut beliefs: Vec<Option<Vec<f64>>> = vec![None; self.vars.len()];
        for &u in order.iter().rev() {
            let b = match beliefs[u].take() {
                Some(mut acc) => {
                    acc.iter_mut()
                        .zip(&self.factors[u])
                        .for_each(|(a, f)| *a *= f);
                    acc
                }
                None => self.factors[u].clone(),
            };
            match parent_edge[u] {
                None => return b,
                Some(e) => {
                    let p = self.other(e, u);
                    let msg = self.message(e, p, &b);
                    match &mut beliefs[p] {
                        Some(acc) => acc.iter_mut().zip(&msg).for_each(|(a, m)| *a *= m),
                        slot => *slot = Some(msg),
                    }
                }
            }
        }
        unreachable!("root is always processed last")
    }

    /// Sums the child side of edge `e` into a vector over `parent`.
    fn message(&self, e: usize, parent: usize, child_belief: &[f64]) -> Vec<f64> {
        let edge = &self.edges[e];
        let parent_is_row = edge.row == parent;
        let n = if parent_is_row {
            edge.rel.rows()
        } else {
            edge.rel.cols()
        };
        let mut msg = vec![0.0; n];
        let cells = edge.rel.cells();
        touch(cells.len());
        if parent_is_row {
            for c in cells {
                msg[c.row as usize] += c.value * child_belief[c.col as usize];
            }
        } else {
            for c in cells {
                msg[c.col as usize] += c.value * child_belief[c.row as usize];
            }
        }
        if edge.negated {
            let total: f64 = child_belief.iter().sum();
            msg.iter_mut().for_each(|m| *m = total - *m);
        }
        msg
    }

    /// Product of the totals of every component not containing any of `except`.
    pub fn other_components_scalar(&self, except: &[VarId]) -> f64 {
        let skip: Vec<usize> = except.iter().map(|v| self.comp[self.slot[v]]).collect();
        let n_comp = self.comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut total = 1.0;
        for c in 0..n_comp {
            if skip.contains(&c) {
                continue;
            }
            let root = self
                .comp
                .iter()
                .position(|&x| x == c)
                .expect("component has a node");
            total *= self.belief(self.vars[root]).iter().sum::<f64>();
        }
        total
    }

    /// Sum over all logvars except `root`, as a vector over `root`.
    pub fn vector_at(&self, root: VarId) -> Vec<f64> {
        let scale = self.other_components_scalar(&[root]);
        let mut b = self.belief(root);
        if scale != 1.0 {
            b.iter_mut().for_each(|x| *x *= scale);
        }
        b
    }

    /// Joint over `(a, b)` for logvars in different components, row-major.
    pub fn outer(&self, a: VarId, b: VarId) -> Vec<f64> {
        debug_assert!(!self.same_component(a, b));
        let scale = self.other_components_scalar(&[a, b]);
        let ba = self.belief(a);
        let bb = self.belief(b);
        let mut out = Vec::with_capacity(ba.len() * bb.len());
        for x in &ba {
            let s = x * scale;
            out.extend(bb.iter().map(|y| s * y));
        }
        out
    }

    /// Joint over `(a, b)` regardless of connectivity, row-major. Connected
    /// pairs are computed row by row by clamping `a` to each object.
    pub fn joint(&mut self, a: VarId, b: VarId) -> Vec<f64> {
        if !self.same_component(a, b) {
            return self.outer(a, b);
        }
        let scale = self.other_components_scalar(&[a]);
        let original = self.factor(a).to_vec();
        let n = original.len();
        let mut out = Vec::new();
        for x in 0..n {
            let mut clamp = vec![0.0; n];
            clamp[x] = original[x];
            self.replace_factor(a, clamp);
            let row = if original[x] == 0.0 {
                vec![0.0; self.factor(b).len()]
            } else {
                self.belief(b)
            };
            out.extend(row.into_iter().map(|v| v * scale));
        }
        self.replace_factor(a, original);
        out
    }

    /// Total sum over every logvar.
    pub fn total(&self) -> f64 {
        self.other_components_scalar(&[])
    }
}
