//! Labelling-style checker for ground formulas over a built model, with
//! witness extraction for failing formulas.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::iis::{ConcreteModel, StateId, WitnessPath};
use crate::logic::{Formula, GroundFormula, Literal};

/// Set of states, indexed by `StateId`.
pub type SatSet = FixedBitSet;

/// One piece of evidence that a formula fails somewhere.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessStep {
    /// A path from `path.states[0]` through states where the release
    /// condition is unmet, ending at a state falsifying `formula`'s
    /// invariant.
    Path { formula: String, path: WitnessPath },
    /// `other` is indistinguishable from `at` for `agent` and falsifies
    /// the known formula. `path` reaches `other` from the initial state.
    Knowledge {
        formula: String,
        agent: usize,
        at: StateId,
        other: StateId,
        path: WitnessPath,
    },
    /// The silent self-loop at `state` never reaches the goal of `formula`.
    Stutter { formula: String, state: StateId },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub steps: Vec<WitnessStep>,
}

impl Witness {
    pub fn render(&self, m: &ConcreteModel) -> Vec<String> {
        self.steps
            .iter()
            .map(|s| match s {
                WitnessStep::Path { formula, path } => {
                    format!("{formula} fails along {}", m.render_path(path))
                }
                WitnessStep::Knowledge {
                    formula,
                    agent,
                    at,
                    other,
                    path,
                } => format!(
                    "{formula} fails: agent {agent} cannot distinguish {} from {}, reached by {}",
                    m.render_state(*at),
                    m.render_state(*other),
                    m.render_path(path)
                ),
                WitnessStep::Stutter { formula, state } => {
                    format!("{formula} fails: {} may stutter forever", m.render_state(*state))
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    pub witness: Option<Witness>,
}

/// Checker over one model; sat sets of subformulas are cached.
pub struct Checker<'m> {
    model: &'m ConcreteModel,
    cache: HashMap<GroundFormula, SatSet>,
}

impl<'m> Checker<'m> {
    pub fn new(model: &'m ConcreteModel) -> Self {
        Checker {
            model,
            cache: HashMap::new(),
        }
    }

    fn empty(&self) -> SatSet {
        FixedBitSet::with_capacity(self.model.state_count())
    }

    fn full(&self) -> SatSet {
        let mut s = self.empty();
        s.insert_range(..);
        s
    }

    fn literal(&self, l: &Literal<usize>) -> Result<SatSet> {
        self.model.check_agent(l.index)?;
        let mut s = self.empty();
        for g in self.model.state_ids() {
            if self.model.holds(g, &l.prop, l.index) == l.positive {
                s.insert(g.index());
            }
        }
        Ok(s)
    }

    fn complement(mut s: SatSet) -> SatSet {
        s.toggle_range(..);
        s
    }

    pub fn sat(&mut self, f: &GroundFormula) -> Result<SatSet> {
        if let Some(s) = self.cache.get(f) {
            return Ok(s.clone());
        }
        let s = match f {
            Formula::Const(true) => self.full(),
            Formula::Const(false) => self.empty(),
            Formula::Lit(l) => self.literal(l)?,
            Formula::And(a, b) => {
                let mut s = self.sat(a)?;
                s.intersect_with(&self.sat(b)?);
                s
            }
            Formula::Or(a, b) => {
                let mut s = self.sat(a)?;
                s.union_with(&self.sat(b)?);
                s
            }
            Formula::Implies(l, b) => {
                let mut s = Self::complement(self.literal(l)?);
                s.union_with(&self.sat(b)?);
                s
            }
            Formula::Knows(i, b) => {
                self.model.check_agent(*i)?;
                let inner = self.sat(b)?;
                let mut s = self.empty();
                let locals = self.model.agent(*i)?.states.len();
                for l in 0..locals {
                    let class = self.model.class_of_local(*i, l);
                    if class.iter().all(|g| inner.contains(g.index())) {
                        for g in class {
                            s.insert(g.index());
                        }
                    }
                }
                s
            }
            Formula::AG(b) => {
                let inner = self.sat(b)?;
                self.release(&self.empty(), &inner)
            }
            Formula::AF(b) => {
                let inner = self.sat(b)?;
                self.until(&self.full(), &inner)
            }
            Formula::AU(a, b) => {
                let (a, b) = (self.sat(a)?, self.sat(b)?);
                self.until(&a, &b)
            }
            Formula::AR(a, b) => {
                let (a, b) = (self.sat(a)?, self.sat(b)?);
                self.release(&a, &b)
            }
        };
        self.cache.insert(f.clone(), s.clone());
        Ok(s)
    }

    /// Least fixpoint of `psi | (phi & AX Z)`: a state joins once all of its
    /// outgoing edges lead into the set.
    fn until(&self, phi: &SatSet, psi: &SatSet) -> SatSet {
        let m = self.model;
        let mut z = psi.clone();
        let mut pending: Vec<usize> = m.state_ids().map(|g| m.successors(g).len()).collect();
        let mut stack: Vec<StateId> = m.state_ids().filter(|g| z.contains(g.index())).collect();
        while let Some(t) = stack.pop() {
            for &p in m.predecessors(t) {
                let k = p.index();
                if z.contains(k) || !phi.contains(k) {
                    continue;
                }
                pending[k] -= 1;
                if pending[k] == 0 {
                    z.insert(k);
                    stack.push(p);
                }
            }
        }
        z
    }

    /// `A(phi R psi)`, the complement of `E(!phi U !psi)`.
    fn release(&self, phi: &SatSet, psi: &SatSet) -> SatSet {
        let m = self.model;
        let mut bad = Self::complement(psi.clone());
        let mut stack: Vec<StateId> = m.state_ids().filter(|g| bad.contains(g.index())).collect();
        while let Some(t) = stack.pop() {
            for &p in m.predecessors(t) {
                let k = p.index();
                if !bad.contains(k) && !phi.contains(k) {
                    bad.insert(k);
                    stack.push(p);
                }
            }
        }
        Self::complement(bad)
    }

    /// Explains why `g` does not satisfy `f`.
    fn explain(&mut self, g: StateId, f: &GroundFormula, out: &mut Vec<WitnessStep>) -> Result<()> {
        match f {
            Formula::Const(_) | Formula::Lit(_) => {}
            Formula::And(a, b) => {
                if !self.sat(a)?.contains(g.index()) {
                    self.explain(g, a, out)?;
                } else {
                    self.explain(g, b, out)?;
                }
            }
            Formula::Or(a, b) => {
                let before = out.len();
                self.explain(g, a, out)?;
                if out.len() == before {
                    self.explain(g, b, out)?;
                }
            }
            Formula::Implies(_, b) => self.explain(g, b, out)?,
            Formula::Knows(i, b) => {
                let inner = self.sat(b)?;
                // another state of the class if one fails, else `g` itself
                let failing: Vec<StateId> = self
                    .model
                    .epistemic_class(*i, g)?
                    .iter()
                    .copied()
                    .filter(|h| !inner.contains(h.index()))
                    .collect();
                let other = failing
                    .iter()
                    .copied()
                    .find(|&h| h != g)
                    .or(failing.first().copied())
                    .expect("a failing knowledge formula has a counterexample in the class");
                out.push(WitnessStep::Knowledge {
                    formula: f.to_string(),
                    agent: *i,
                    at: g,
                    other,
                    path: self.model.path_from_init(other),
                });
                self.explain(other, b, out)?;
            }
            Formula::AG(b) => {
                let psi = self.sat(b)?;
                let path = self.release_path(g, &self.empty(), &psi);
                let end = path.last();
                out.push(WitnessStep::Path {
                    formula: f.to_string(),
                    path,
                });
                self.explain(end, b, out)?;
            }
            Formula::AR(a, b) => {
                let (phi, psi) = (self.sat(a)?, self.sat(b)?);
                let path = self.release_path(g, &phi, &psi);
                let end = path.last();
                out.push(WitnessStep::Path {
                    formula: f.to_string(),
                    path,
                });
                self.explain(end, b, out)?;
            }
            Formula::AF(b) | Formula::AU(_, b) => {
                out.push(WitnessStep::Stutter {
                    formula: f.to_string(),
                    state: g,
                });
                self.explain(g, b, out)?;
            }
        }
        Ok(())
    }

    /// Shortest path from `g` through `psi & !phi` states to a `!psi`
    /// state; among the shallowest targets the lowest id wins.
    fn release_path(&self, g: StateId, phi: &SatSet, psi: &SatSet) -> WitnessPath {
        let m = self.model;
        let mut parent: HashMap<StateId, (StateId, crate::iis::ActionId)> = HashMap::new();
        let mut seen = FixedBitSet::with_capacity(m.state_count());
        seen.insert(g.index());
        let mut layer = vec![g];
        let target = loop {
            if let Some(&t) = layer.iter().filter(|h| !psi.contains(h.index())).min() {
                break t;
            }
            let mut next = Vec::new();
            for &h in &layer {
                if phi.contains(h.index()) {
                    continue;
                }
                for &(a, t) in m.successors(h) {
                    if !seen.contains(t.index()) {
                        seen.insert(t.index());
                        parent.insert(t, (h, a));
                        next.push(t);
                    }
                }
            }
            assert!(!next.is_empty(), "a failing release formula has a reachable violation");
            next.sort();
            layer = next;
        };
        let mut states = vec![target];
        let mut actions = Vec::new();
        let mut cur = target;
        while let Some(&(p, a)) = parent.get(&cur) {
            states.push(p);
            actions.push(a);
            cur = p;
        }
        states.reverse();
        actions.reverse();
        WitnessPath { states, actions }
    }

    pub fn check_at(&mut self, g: StateId, f: &GroundFormula) -> Result<Verdict> {
        if self.sat(f)?.contains(g.index()) {
            return Ok(Verdict {
                holds: true,
                witness: None,
            });
        }
        let mut steps = Vec::new();
        self.explain(g, f, &mut steps)?;
        Ok(Verdict {
            holds: false,
            witness: (!steps.is_empty()).then_some(Witness { steps }),
        })
    }
}

/// States of `m` satisfying `f`.
pub fn sat_set(m: &ConcreteModel, f: &GroundFormula) -> Result<SatSet> {
    Checker::new(m).sat(f)
}

/// Checks `f` at the initial state.
pub fn check(m: &ConcreteModel, f: &GroundFormula) -> Result<Verdict> {
    Checker::new(m).check_at(m.init(), f)
}
