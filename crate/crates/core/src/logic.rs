//! Indexed and ground formulas of the universal, next-free
//! temporal-epistemic fragment.
//!
//! Negation only appears on atoms and implication only with a literal
//! antecedent, so every formula in this module is in the universal fragment
//! by construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// `p_i` or `!p_i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal<I> {
    pub prop: String,
    pub index: I,
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula<I> {
    Const(bool),
    Lit(Literal<I>),
    And(Box<Formula<I>>, Box<Formula<I>>),
    Or(Box<Formula<I>>, Box<Formula<I>>),
    /// `lit -> phi`, i.e. `!lit | phi`.
    Implies(Literal<I>, Box<Formula<I>>),
    Knows(I, Box<Formula<I>>),
    /// `AG phi = A(false R phi)`
    AG(Box<Formula<I>>),
    /// `AF phi = A(true U phi)`
    AF(Box<Formula<I>>),
    AU(Box<Formula<I>>, Box<Formula<I>>),
    AR(Box<Formula<I>>, Box<Formula<I>>),
}

/// A formula whose indices are agent numbers (1-based).
pub type GroundFormula = Formula<usize>;

/// `forall {binder}: body` with variable indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexedFormula {
    pub binder: Vec<String>,
    pub body: Formula<String>,
}

impl<I> Formula<I> {
    pub fn lit(prop: &str, index: I, positive: bool) -> Self {
        Formula::Lit(Literal {
            prop: prop.to_string(),
            index,
            positive,
        })
    }

    /// Number of AST nodes, counting a literal as one node.
    pub fn node_count(&self) -> usize {
        match self {
            Formula::Const(_) | Formula::Lit(_) => 1,
            Formula::Implies(_, b) => 2 + b.node_count(),
            Formula::Knows(_, b) | Formula::AG(b) | Formula::AF(b) => 1 + b.node_count(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::AU(a, b) | Formula::AR(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }

    /// Every index occurrence, left to right.
    pub fn indices(&self) -> Vec<&I> {
        let mut out = Vec::new();
        self.collect_indices(&mut out);
        out
    }

    fn collect_indices<'a>(&'a self, out: &mut Vec<&'a I>) {
        match self {
            Formula::Const(_) => {}
            Formula::Lit(l) => out.push(&l.index),
            Formula::Implies(l, b) => {
                out.push(&l.index);
                b.collect_indices(out);
            }
            Formula::Knows(i, b) => {
                out.push(i);
                b.collect_indices(out);
            }
            Formula::AG(b) | Formula::AF(b) => b.collect_indices(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::AU(a, b) | Formula::AR(a, b) => {
                a.collect_indices(out);
                b.collect_indices(out);
            }
        }
    }

    /// Structure-preserving index substitution.
    pub fn try_map_index<J, E>(&self, f: &mut impl FnMut(&I) -> Result<J, E>) -> Result<Formula<J>, E> {
        let lit = |l: &Literal<I>, f: &mut dyn FnMut(&I) -> Result<J, E>| -> Result<Literal<J>, E> {
            Ok(Literal {
                prop: l.prop.clone(),
                index: f(&l.index)?,
                positive: l.positive,
            })
        };
        Ok(match self {
            Formula::Const(b) => Formula::Const(*b),
            Formula::Lit(l) => Formula::Lit(lit(l, f)?),
            Formula::And(a, b) => Formula::And(Box::new(a.try_map_index(f)?), Box::new(b.try_map_index(f)?)),
            Formula::Or(a, b) => Formula::Or(Box::new(a.try_map_index(f)?), Box::new(b.try_map_index(f)?)),
            Formula::Implies(l, b) => Formula::Implies(lit(l, f)?, Box::new(b.try_map_index(f)?)),
            Formula::Knows(i, b) => Formula::Knows(f(i)?, Box::new(b.try_map_index(f)?)),
            Formula::AG(b) => Formula::AG(Box::new(b.try_map_index(f)?)),
            Formula::AF(b) => Formula::AF(Box::new(b.try_map_index(f)?)),
            Formula::AU(a, b) => Formula::AU(Box::new(a.try_map_index(f)?), Box::new(b.try_map_index(f)?)),
            Formula::AR(a, b) => Formula::AR(Box::new(a.try_map_index(f)?), Box::new(b.try_map_index(f)?)),
        })
    }

    pub fn map_index<J>(&self, mut f: impl FnMut(&I) -> J) -> Formula<J> {
        self.try_map_index::<J, std::convert::Infallible>(&mut |i| Ok(f(i)))
            .unwrap_or_else(|e| match e {})
    }
}

impl GroundFormula {
    /// Largest agent number mentioned, 0 for index-free formulas.
    pub fn max_agent(&self) -> usize {
        self.indices().into_iter().copied().max().unwrap_or(0)
    }

    pub fn agents(&self) -> BTreeSet<usize> {
        self.indices().into_iter().copied().collect()
    }
}

/// Checks the sentence property and binder shape. An empty result means the
/// formula is well formed.
pub fn well_formed(f: &IndexedFormula) -> Vec<String> {
    let mut diags = Vec::new();
    if f.binder.is_empty() {
        diags.push("binder must declare at least one variable".to_string());
    }
    let mut seen = BTreeSet::new();
    for v in &f.binder {
        if !seen.insert(v) {
            diags.push(format!("variable `{v}` bound twice"));
        }
    }
    let used: BTreeSet<&String> = f.body.indices().into_iter().collect();
    for v in &used {
        if !seen.contains(v) {
            diags.push(format!("variable `{v}` occurs free"));
        }
    }
    for v in &f.binder {
        if !used.contains(v) {
            diags.push(format!("bound variable `{v}` does not occur in the body"));
        }
    }
    diags
}

fn require_well_formed(f: &IndexedFormula) -> Result<()> {
    let d = well_formed(f);
    if d.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidFormula(d))
    }
}

/// `|J|`, the number of distinct bound indices.
pub fn index_count(f: &IndexedFormula) -> usize {
    f.binder.len()
}

/// Substitutes agent numbers for variables; the assignment must be total on
/// the binder and injective.
pub fn ground(f: &IndexedFormula, assignment: &BTreeMap<String, usize>) -> Result<GroundFormula> {
    let mut images = BTreeSet::new();
    for v in &f.binder {
        let i = *assignment
            .get(v)
            .ok_or_else(|| Error::BadAssignment(format!("variable `{v}` is unassigned")))?;
        if i == 0 {
            return Err(Error::BadAssignment(format!("`{v}` mapped to agent 0")));
        }
        if !images.insert(i) {
            return Err(Error::BadAssignment(format!("agent {i} assigned to two variables")));
        }
    }
    f.body.try_map_index(&mut |v: &String| {
        assignment
            .get(v)
            .copied()
            .ok_or_else(|| Error::BadAssignment(format!("variable `{v}` is unassigned")))
    })
}

/// The canonical instantiation: the k-th binder variable becomes agent k.
pub fn reduce_symmetry(f: &IndexedFormula) -> Result<GroundFormula> {
    require_well_formed(f)?;
    let assignment = f
        .binder
        .iter()
        .enumerate()
        .map(|(k, v)| (v.clone(), k + 1))
        .collect();
    ground(f, &assignment)
}

/// One instance per injective assignment of the binder into `1..=n`, in
/// lexicographic order of the assigned tuples.
pub fn expand_full(f: &IndexedFormula, n: usize) -> Result<Vec<GroundFormula>> {
    require_well_formed(f)?;
    let k = f.binder.len();
    if n < k {
        return Err(Error::TooFewAgents { n, needed: k });
    }
    let mut out = Vec::new();
    let mut tuple = Vec::with_capacity(k);
    let mut used = vec![false; n + 1];
    injective_tuples(n, k, &mut tuple, &mut used, &mut |t| {
        let a = f.binder.iter().cloned().zip(t.iter().copied()).collect();
        out.push(ground(f, &a).expect("injective by construction"));
    });
    Ok(out)
}

fn injective_tuples(
    n: usize,
    k: usize,
    tuple: &mut Vec<usize>,
    used: &mut [bool],
    emit: &mut impl FnMut(&[usize]),
) {
    if tuple.len() == k {
        emit(tuple);
        return;
    }
    for i in 1..=n {
        if !used[i] {
            used[i] = true;
            tuple.push(i);
            injective_tuples(n, k, tuple, used, emit);
            tuple.pop();
            used[i] = false;
        }
    }
}

/// `n! / (n - k)!`
pub fn injective_count(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    ((n - k + 1)..=n).product()
}

// Printing. Precedence: `->` 1 (right-assoc), `|` 2, `&` 3, unary 4.

impl<I: fmt::Display> fmt::Display for Literal<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            write!(f, "!")?;
        }
        write!(f, "{}_{}", self.prop, self.index)
    }
}

impl<I: fmt::Display> Formula<I> {
    fn write_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        let (prec, open) = match self {
            Formula::Implies(..) => (1, ctx > 1),
            Formula::Or(..) => (2, ctx > 2),
            Formula::And(..) => (3, ctx > 3),
            _ => (4, false),
        };
        if open {
            write!(f, "(")?;
        }
        match self {
            Formula::Const(b) => write!(f, "{b}")?,
            Formula::Lit(l) => write!(f, "{l}")?,
            Formula::Implies(l, b) => {
                write!(f, "{l} -> ")?;
                b.write_prec(f, prec)?;
            }
            Formula::Or(a, b) | Formula::And(a, b) => {
                a.write_prec(f, prec)?;
                write!(f, " {} ", if prec == 2 { "|" } else { "&" })?;
                b.write_prec(f, prec + 1)?;
            }
            Formula::Knows(i, b) => {
                write!(f, "K_{i}(")?;
                b.write_prec(f, 0)?;
                write!(f, ")")?;
            }
            Formula::AG(b) | Formula::AF(b) => {
                write!(f, "{}(", if matches!(self, Formula::AG(_)) { "AG" } else { "AF" })?;
                b.write_prec(f, 0)?;
                write!(f, ")")?;
            }
            Formula::AU(a, b) | Formula::AR(a, b) => {
                write!(f, "A(")?;
                a.write_prec(f, 0)?;
                write!(f, " {} ", if matches!(self, Formula::AU(..)) { "U" } else { "R" })?;
                b.write_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if open {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl<I: fmt::Display> fmt::Display for Formula<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

impl fmt::Display for IndexedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "forall {{{}}}: {}", self.binder.join(", "), self.body)
    }
}

// Formulas serialize as their concrete syntax.

impl Serialize for GroundFormula {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroundFormula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        crate::pispl::parse_ground_formula(&text).map_err(serde::de::Error::custom)
    }
}
