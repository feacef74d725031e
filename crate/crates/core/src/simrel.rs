//! Checking J-stuttering simulations between two built models, and the two
//! canonical relations between instances of one template.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iis::{ConcreteModel, StateId};
use crate::template::{ActionKind, TemplateAgent};

/// Largest model (either side) accepted by [`brute_force_match`].
pub const BRUTE_FORCE_BOUND: usize = 512;

/// A relation between the states of `left` and `right`, meaningful for the
/// agents in `j`.
#[derive(Clone, Debug)]
pub struct SimRelation<'a> {
    pub left: &'a ConcreteModel,
    pub right: &'a ConcreteModel,
    pub j: BTreeSet<usize>,
    pairs: HashSet<(StateId, StateId)>,
    by_left: Vec<Vec<StateId>>,
}

impl<'a> SimRelation<'a> {
    pub fn new(
        left: &'a ConcreteModel,
        right: &'a ConcreteModel,
        j: BTreeSet<usize>,
        pairs: impl IntoIterator<Item = (StateId, StateId)>,
    ) -> Result<Self> {
        for &i in &j {
            left.check_agent(i)?;
            right.check_agent(i)?;
        }
        let mut by_left = vec![Vec::new(); left.state_count()];
        let mut set = HashSet::new();
        for (g, h) in pairs {
            if g.index() >= left.state_count() || h.index() >= right.state_count() {
                return Err(Error::BadRelation(format!("pair ({}, {}) names a missing state", g.0, h.0)));
            }
            if set.insert((g, h)) {
                by_left[g.index()].push(h);
            }
        }
        for v in &mut by_left {
            v.sort();
        }
        Ok(SimRelation {
            left,
            right,
            j,
            pairs: set,
            by_left,
        })
    }

    pub fn contains(&self, g: StateId, h: StateId) -> bool {
        self.pairs.contains(&(g, h))
    }

    /// Right states related to `g`, ascending.
    pub fn partners(&self, g: StateId) -> &[StateId] {
        &self.by_left[g.index()]
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs in ascending order.
    pub fn pairs(&self) -> Vec<(StateId, StateId)> {
        let mut v: Vec<_> = self.pairs.iter().copied().collect();
        v.sort();
        v
    }

    /// The same relation without one pair.
    pub fn without(&self, pair: (StateId, StateId)) -> SimRelation<'a> {
        let rest: Vec<_> = self.pairs.iter().copied().filter(|p| *p != pair).collect();
        SimRelation::new(self.left, self.right, self.j.clone(), rest).expect("subset of a valid relation")
    }
}

fn shared_template(a: &ConcreteModel, b: &ConcreteModel) -> Result<Arc<TemplateAgent>> {
    match (a.template(), b.template()) {
        (Some(x), Some(y)) if Arc::ptr_eq(x, y) || x == y => Ok(x.clone()),
        _ => Err(Error::TemplateMismatch),
    }
}

/// `{(g, g') | g restricted to its first k agents equals g'}` for
/// `big = T(n)` and `small = T(k)`.
pub fn projection_relation<'a>(big: &'a ConcreteModel, small: &'a ConcreteModel) -> Result<SimRelation<'a>> {
    shared_template(big, small)?;
    let k = small.agent_count();
    if k > big.agent_count() {
        return Err(Error::BadRelation(format!(
            "projection onto {k} agents from {} agents",
            big.agent_count()
        )));
    }
    let mut pairs = Vec::new();
    for g in big.state_ids() {
        let prefix = crate::iis::GlobalState(big.state(g).locals()[..k].to_vec());
        if let Some(h) = small.lookup(&prefix) {
            pairs.push((g, h));
        }
    }
    SimRelation::new(big, small, (1..=k).collect(), pairs)
}

/// Pairs `(g, g')` for `small = T(k)`, `big = T(n)` where `g` is the
/// first-k prefix of `g'` and every extra agent of `g'` either sits in
/// agent 1's template state or reaches it by one common enabled
/// asynchronous action.
pub fn lift_relation<'a>(
    small: &'a ConcreteModel,
    big: &'a ConcreteModel,
    t: &TemplateAgent,
) -> Result<SimRelation<'a>> {
    let shared = shared_template(small, big)?;
    if *shared != *t {
        return Err(Error::TemplateMismatch);
    }
    let (k, n) = (small.agent_count(), big.agent_count());
    if k > n {
        return Err(Error::BadRelation(format!("lifting {k} agents into {n}")));
    }
    let asyncs: Vec<usize> = (0..t.actions.len())
        .filter(|&a| t.actions[a].kind == ActionKind::Async)
        .collect();
    let mut pairs = Vec::new();
    for h in big.state_ids() {
        let locals = big.state(h).locals();
        let Some(g) = small.lookup(&crate::iis::GlobalState(locals[..k].to_vec())) else {
            continue;
        };
        let target = locals[0] as usize;
        let extras = &locals[k..];
        let all_match = extras.iter().all(|&l| l as usize == target);
        let via_action = || {
            asyncs.iter().any(|&a| {
                extras
                    .iter()
                    .all(|&l| l as usize == target || t.step(l as usize, a) == Some(target))
            })
        };
        if all_match || via_action() {
            pairs.push((g, h));
        }
    }
    SimRelation::new(small, big, (1..=k).collect(), pairs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Violation {
    /// The initial states are not related.
    Initial { left: StateId, right: StateId },
    /// `other` is indistinguishable from `left` for `agent`, but no state
    /// indistinguishable from `right` is related to it.
    Epistemic {
        agent: usize,
        left: StateId,
        right: StateId,
        other: StateId,
    },
    /// Projected valuations differ.
    Labels { left: StateId, right: StateId },
    /// The left transition `left -> to` has no matching right segment.
    Path { left: StateId, right: StateId, to: StateId },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JssReport {
    pub pairs: usize,
    pub violations: Vec<Violation>,
}

impl JssReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Passes ignoring label and epistemic conditions.
    pub fn paths_passed(&self) -> bool {
        !self
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Initial { .. } | Violation::Path { .. }))
    }
}

/// Right states reachable from `start` inside `slice` (inclusive).
fn reach_within(m: &ConcreteModel, start: StateId, slice: &FixedBitSet) -> Vec<StateId> {
    let mut seen = FixedBitSet::with_capacity(m.state_count());
    seen.insert(start.index());
    let mut queue = VecDeque::from([start]);
    let mut out = Vec::new();
    while let Some(h) = queue.pop_front() {
        out.push(h);
        for &(_, t) in m.successors(h) {
            if slice.contains(t.index()) && !seen.contains(t.index()) {
                seen.insert(t.index());
                queue.push_back(t);
            }
        }
    }
    out
}

/// Checks every condition of a J-stuttering simulation of `left` by
/// `right`, with the path condition in its single-step form.
pub fn check_jss(r: &SimRelation<'_>) -> JssReport {
    let (lm, rm) = (r.left, r.right);
    let mut violations = Vec::new();
    if !r.contains(lm.init(), rm.init()) {
        violations.push(Violation::Initial {
            left: lm.init(),
            right: rm.init(),
        });
    }
    let mut epistemic_memo: HashMap<(usize, u32, u32), Option<StateId>> = HashMap::new();
    for (g, h) in r.pairs() {
        let (gs, hs) = (lm.state(g), rm.state(h));
        for &i in &r.j {
            let (li, ri) = (gs.local(i), hs.local(i));
            let missing = *epistemic_memo.entry((i, li as u32, ri as u32)).or_insert_with(|| {
                lm.class_of_local(i, li)
                    .iter()
                    .copied()
                    .find(|&g1| !r.partners(g1).iter().any(|&h1| rm.state(h1).local(i) == ri))
            });
            if let Some(other) = missing {
                violations.push(Violation::Epistemic {
                    agent: i,
                    left: g,
                    right: h,
                    other,
                });
            }
        }
        if r.j.iter().any(|&i| lm.agents()[i - 1].labels[gs.local(i)] != rm.agents()[i - 1].labels[hs.local(i)]) {
            violations.push(Violation::Labels { left: g, right: h });
        }

        let mut slice = FixedBitSet::with_capacity(rm.state_count());
        for &p in r.partners(g) {
            slice.insert(p.index());
        }
        let mut frontier = FixedBitSet::with_capacity(rm.state_count());
        for x in reach_within(rm, h, &slice) {
            for &(_, t) in rm.successors(x) {
                frontier.insert(t.index());
            }
        }
        let targets: BTreeSet<StateId> = lm.successors(g).iter().map(|&(_, t)| t).collect();
        for to in targets {
            if !r.partners(to).iter().any(|p| frontier.contains(p.index())) {
                violations.push(Violation::Path { left: g, right: h, to });
            }
        }
    }
    JssReport {
        pairs: r.len(),
        violations,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: usize,
    pub depth: usize,
    /// Whether the initial states are related.
    pub initial_related: bool,
    /// A related pair and a left path from its left state that no right
    /// path can match block-wise.
    pub failures: Vec<(StateId, StateId, Vec<StateId>)>,
}

impl MatchReport {
    pub fn passed(&self) -> bool {
        self.initial_related && self.failures.is_empty()
    }
}

/// An open left block and the first right state of its matching block.
type Config = (Vec<StateId>, StateId);

struct Matcher<'r, 'a> {
    r: &'r SimRelation<'a>,
    memo: HashMap<(StateId, usize, Vec<Config>), Option<Vec<StateId>>>,
}

impl Matcher<'_, '_> {
    fn related_to_all(&self, block: &[StateId], h: StateId) -> bool {
        block.iter().all(|&g| self.r.contains(g, h))
    }

    /// Configurations after appending left state `x`.
    fn advance(&self, configs: &[Config], x: StateId) -> Vec<Config> {
        let rm = self.r.right;
        let mut out = BTreeSet::new();
        for (block, start) in configs {
            if self.r.contains(x, *start) {
                let mut b = block.clone();
                if let Err(k) = b.binary_search(&x) {
                    b.insert(k, x);
                }
                out.insert((b, *start));
            }
            // close the block: the right block runs from `start` inside the
            // states related to the whole left block
            let mut slice = FixedBitSet::with_capacity(rm.state_count());
            for h in rm.state_ids() {
                if self.related_to_all(block, h) {
                    slice.insert(h.index());
                }
            }
            for y in reach_within(rm, *start, &slice) {
                for &(_, next) in rm.successors(y) {
                    if self.r.contains(x, next) {
                        out.insert((vec![x], next));
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// A left path continuing from `g` (within `left` more steps) that
    /// leaves no configuration, if any.
    fn search(&mut self, g: StateId, left: usize, configs: Vec<Config>) -> Option<Vec<StateId>> {
        if left == 0 {
            return None;
        }
        let key = (g, left, configs);
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        let configs = &key.2;
        let targets: BTreeSet<StateId> = self.r.left.successors(g).iter().map(|&(_, t)| t).collect();
        let mut result = None;
        for x in targets {
            let next = self.advance(configs, x);
            if next.is_empty() {
                result = Some(vec![x]);
                break;
            }
            if let Some(mut rest) = self.search(x, left - 1, next) {
                rest.insert(0, x);
                result = Some(rest);
                break;
            }
        }
        self.memo.insert(key, result.clone());
        result
    }
}

/// Exhaustive check of the block-partition path condition on all left
/// paths of at most `depth` transitions from every related pair.
pub fn brute_force_match(r: &SimRelation<'_>, depth: usize) -> Result<MatchReport> {
    for m in [r.left, r.right] {
        if m.state_count() > BRUTE_FORCE_BOUND {
            return Err(Error::SizeBound {
                states: m.state_count(),
                bound: BRUTE_FORCE_BOUND,
            });
        }
    }
    let mut matcher = Matcher {
        r,
        memo: HashMap::new(),
    };
    let mut failures = Vec::new();
    for (g, h) in r.pairs() {
        if let Some(rest) = matcher.search(g, depth, vec![(vec![g], h)]) {
            let mut path = vec![g];
            path.extend(rest);
            failures.push((g, h, path));
        }
    }
    Ok(MatchReport {
        pairs: r.len(),
        depth,
        initial_related: r.contains(r.left.init(), r.right.init()),
        failures,
    })
}
