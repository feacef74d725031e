//! Concrete interleaved interpreted systems.
//!
//! A [`ConcreteModel`] is the reachable part of the interleaved product of a
//! list of [`LocalAgent`]s. A global step fires exactly one action: every
//! agent that has the action in its repertoire must have it enabled and moves
//! by its own evolution function, all other agents stay put. Every state also
//! carries the joint silent self-loop, recorded once under [`SILENT`].

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::template::TemplateAgent;

/// Label of the joint silent transition.
pub const SILENT: &str = "eps";

/// Default bound on the number of reachable global states.
pub const DEFAULT_STATE_CAP: usize = 10_000_000;

/// Name of the private silent action of agent `id` (1-based).
pub fn silent_action(id: usize) -> String {
    format!("{SILENT}_{id}")
}

/// Returns the agent number if `name` is a per-agent silent action.
fn parse_silent(name: &str) -> Option<usize> {
    let rest = name.strip_prefix(SILENT)?.strip_prefix('_')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

fn is_reserved(name: &str) -> bool {
    name == SILENT || parse_silent(name).is_some()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub u32);

impl ActionId {
    /// The joint silent action; always id 0.
    pub const SILENT: ActionId = ActionId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A concrete agent of an interleaved interpreted system.
///
/// Local states and actions are referenced by their position in `states` and
/// `actions`. The silent action is implicit: it is enabled everywhere and
/// never changes the local state. An action that the protocol enables but for
/// which `evolution` has no entry leaves the local state unchanged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalAgent {
    /// 1-based agent number.
    pub id: usize,
    pub name: String,
    pub states: Vec<String>,
    pub init: usize,
    pub actions: Vec<String>,
    /// Enabled non-silent actions per local state.
    pub protocol: Vec<BTreeSet<usize>>,
    pub evolution: BTreeMap<(usize, usize), usize>,
    /// Propositions true at each local state.
    pub labels: Vec<BTreeSet<String>>,
}

impl LocalAgent {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidAgent {
                agent: self.name.clone(),
                reason,
            })
        };
        if self.states.is_empty() {
            return fail("no local states".into());
        }
        if self.init >= self.states.len() {
            return fail(format!("initial state index {} undeclared", self.init));
        }
        if self.protocol.len() != self.states.len() || self.labels.len() != self.states.len() {
            return fail("protocol and labels must cover every local state".into());
        }
        let mut seen = BTreeSet::new();
        for a in &self.actions {
            if is_reserved(a) {
                return fail(format!("action name `{a}` is reserved for silent actions"));
            }
            if !seen.insert(a) {
                return fail(format!("action `{a}` declared twice"));
            }
        }
        let mut names = BTreeSet::new();
        for s in &self.states {
            if !names.insert(s) {
                return fail(format!("local state `{s}` declared twice"));
            }
        }
        for (l, acts) in self.protocol.iter().enumerate() {
            if let Some(a) = acts.iter().find(|&&a| a >= self.actions.len()) {
                return fail(format!("protocol of `{}` names undeclared action {a}", self.states[l]));
            }
        }
        for (&(l, a), &to) in &self.evolution {
            if l >= self.states.len() || to >= self.states.len() || a >= self.actions.len() {
                return fail(format!("evolution entry ({l}, {a}) -> {to} is out of range"));
            }
        }
        Ok(())
    }

    /// Successor of local state `l` under local action `a`, if enabled.
    pub fn step(&self, l: usize, a: usize) -> Option<usize> {
        if self.protocol[l].contains(&a) {
            Some(self.evolution.get(&(l, a)).copied().unwrap_or(l))
        } else {
            None
        }
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }
}

/// A tuple of local-state indices, one per agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GlobalState(pub Vec<u32>);

impl GlobalState {
    pub fn locals(&self) -> &[u32] {
        &self.0
    }

    /// Local state of agent `i` (1-based).
    pub fn local(&self, i: usize) -> usize {
        self.0[i - 1] as usize
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Alternating state/action sequence `g0 a0 g1 a1 ...`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessPath {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
}

impl WitnessPath {
    pub fn single(s: StateId) -> Self {
        WitnessPath {
            states: vec![s],
            actions: Vec::new(),
        }
    }

    pub fn last(&self) -> StateId {
        *self.states.last().expect("paths are nonempty")
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// True if every consecutive triple is a transition of `m`.
    pub fn is_valid_in(&self, m: &ConcreteModel) -> bool {
        self.states.len() == self.actions.len() + 1
            && self.states.windows(2).zip(&self.actions).all(|(w, a)| {
                m.successors(w[0]).iter().any(|&(b, t)| b == *a && t == w[1])
            })
    }
}

/// Action table and per-agent step tables for a fixed agent list.
pub struct Composition<'a> {
    agents: &'a [LocalAgent],
    actions: Vec<String>,
    sharing: Vec<Vec<usize>>,
    // [agent][global action] -> local action index
    local_of: Vec<Vec<Option<usize>>>,
    // [agent][local state][local action] -> successor
    table: Vec<Vec<Vec<Option<u32>>>>,
}

impl<'a> Composition<'a> {
    pub fn new(agents: &'a [LocalAgent]) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::NoAgents);
        }
        for (pos, a) in agents.iter().enumerate() {
            a.validate()?;
            if a.id != pos + 1 {
                return Err(Error::InvalidAgent {
                    agent: a.name.clone(),
                    reason: format!("agent number {} does not match position {}", a.id, pos + 1),
                });
            }
        }
        let mut actions = vec![SILENT.to_string()];
        let mut ids: HashMap<&str, usize> = HashMap::new();
        for agent in agents {
            for a in &agent.actions {
                if !ids.contains_key(a.as_str()) {
                    ids.insert(a, actions.len());
                    actions.push(a.clone());
                }
            }
        }
        let mut sharing = vec![Vec::new(); actions.len()];
        let mut local_of = Vec::with_capacity(agents.len());
        let mut table = Vec::with_capacity(agents.len());
        for (pos, agent) in agents.iter().enumerate() {
            let mut map = vec![None; actions.len()];
            for (li, a) in agent.actions.iter().enumerate() {
                let g = ids[a.as_str()];
                map[g] = Some(li);
                sharing[g].push(pos + 1);
            }
            local_of.push(map);
            let rows = (0..agent.states.len())
                .map(|l| {
                    (0..agent.actions.len())
                        .map(|a| agent.step(l, a).map(|t| t as u32))
                        .collect()
                })
                .collect();
            table.push(rows);
        }
        sharing[0] = (1..=agents.len()).collect();
        Ok(Composition {
            agents,
            actions,
            sharing,
            local_of,
            table,
        })
    }

    pub fn initial(&self) -> GlobalState {
        GlobalState(self.agents.iter().map(|a| a.init as u32).collect())
    }

    /// All `(a, g')` with `g -a-> g'`, in action declaration order, followed
    /// by the joint silent self-loop.
    pub fn successors(&self, g: &GlobalState) -> Vec<(ActionId, GlobalState)> {
        let mut out = Vec::new();
        'actions: for a in 1..self.actions.len() {
            let mut next = g.0.clone();
            for &i in &self.sharing[a] {
                let li = self.local_of[i - 1][a].expect("sharing is consistent");
                match self.table[i - 1][g.0[i - 1] as usize][li] {
                    Some(t) => next[i - 1] = t,
                    None => continue 'actions,
                }
            }
            out.push((ActionId(a as u32), GlobalState(next)));
        }
        out.push((ActionId::SILENT, g.clone()));
        out
    }
}

/// `Agent(a)`: the agents whose repertoire contains `a`.
pub fn agents_sharing(agents: &[LocalAgent], action: &str) -> Result<BTreeSet<usize>> {
    if let Some(i) = parse_silent(action) {
        if (1..=agents.len()).contains(&i) {
            return Ok(BTreeSet::from([i]));
        }
        return Err(Error::UnknownAction(action.to_string()));
    }
    let out: BTreeSet<usize> = agents
        .iter()
        .filter(|a| a.actions.iter().any(|x| x == action))
        .map(|a| a.id)
        .collect();
    if out.is_empty() {
        return Err(Error::UnknownAction(action.to_string()));
    }
    Ok(out)
}

/// Successors of `g` in the interleaved product of `agents`.
pub fn successors(agents: &[LocalAgent], g: &GlobalState) -> Result<Vec<(String, GlobalState)>> {
    let comp = Composition::new(agents)?;
    check_shape(agents, g)?;
    Ok(comp
        .successors(g)
        .into_iter()
        .map(|(a, s)| (comp.actions[a.index()].clone(), s))
        .collect())
}

fn check_shape(agents: &[LocalAgent], g: &GlobalState) -> Result<()> {
    if g.len() != agents.len() {
        return Err(Error::InvalidAgent {
            agent: "<global state>".into(),
            reason: format!("state has {} components for {} agents", g.len(), agents.len()),
        });
    }
    for (a, &l) in agents.iter().zip(g.locals()) {
        if l as usize >= a.states.len() {
            return Err(Error::InvalidAgent {
                agent: a.name.clone(),
                reason: format!("local state index {l} undeclared"),
            });
        }
    }
    Ok(())
}

/// The reachable global state graph of an interleaved interpreted system.
///
/// Immutable once built. States are interned to dense ids in breadth-first
/// discovery order, so id 0 is the initial state and ids never decrease
/// along the BFS tree.
#[derive(Debug, Clone)]
pub struct ConcreteModel {
    agents: Vec<LocalAgent>,
    actions: Vec<String>,
    sharing: Vec<Vec<usize>>,
    states: Vec<GlobalState>,
    index: HashMap<GlobalState, StateId>,
    succ_start: Vec<u32>,
    succ: Vec<(ActionId, StateId)>,
    pred_start: Vec<u32>,
    pred: Vec<StateId>,
    parent: Vec<Option<(StateId, ActionId)>>,
    depth: Vec<u32>,
    // [agent][local state] -> states with that component, ascending
    classes: Vec<Vec<Vec<StateId>>>,
    template: Option<Arc<TemplateAgent>>,
}

/// Breadth-first closure of the interleaved successor relation from the
/// initial state.
pub fn build_model(agents: Vec<LocalAgent>, state_cap: usize) -> Result<ConcreteModel> {
    let comp = Composition::new(&agents)?;
    let init = comp.initial();
    let mut states = vec![init.clone()];
    let mut index = HashMap::from([(init, StateId(0))]);
    let mut parent = vec![None];
    let mut depth = vec![0u32];
    let mut edges: Vec<Vec<(ActionId, StateId)>> = Vec::new();
    let mut queue = VecDeque::from([StateId(0)]);
    if state_cap == 0 {
        return Err(Error::StateCap { cap: state_cap });
    }
    while let Some(id) = queue.pop_front() {
        let g = states[id.index()].clone();
        let mut out = Vec::new();
        for (a, next) in comp.successors(&g) {
            let target = match index.get(&next) {
                Some(&t) => t,
                None => {
                    if states.len() >= state_cap {
                        return Err(Error::StateCap { cap: state_cap });
                    }
                    let t = StateId(states.len() as u32);
                    index.insert(next.clone(), t);
                    states.push(next);
                    parent.push(Some((id, a)));
                    depth.push(depth[id.index()] + 1);
                    queue.push_back(t);
                    t
                }
            };
            out.push((a, target));
        }
        debug_assert_eq!(edges.len(), id.index());
        edges.push(out);
    }

    let mut succ_start = Vec::with_capacity(states.len() + 1);
    let mut succ = Vec::new();
    let mut indegree = vec![0u32; states.len()];
    for out in &edges {
        succ_start.push(succ.len() as u32);
        for &(a, t) in out {
            indegree[t.index()] += 1;
            succ.push((a, t));
        }
    }
    succ_start.push(succ.len() as u32);

    let mut pred_start = Vec::with_capacity(states.len() + 1);
    let mut acc = 0u32;
    for d in &indegree {
        pred_start.push(acc);
        acc += d;
    }
    pred_start.push(acc);
    let mut fill = pred_start.clone();
    let mut pred = vec![StateId(0); succ.len()];
    for (s, out) in edges.iter().enumerate() {
        for &(_, t) in out {
            pred[fill[t.index()] as usize] = StateId(s as u32);
            fill[t.index()] += 1;
        }
    }

    let mut classes: Vec<Vec<Vec<StateId>>> = agents
        .iter()
        .map(|a| vec![Vec::new(); a.states.len()])
        .collect();
    for (s, g) in states.iter().enumerate() {
        for (i, &l) in g.locals().iter().enumerate() {
            classes[i][l as usize].push(StateId(s as u32));
        }
    }

    Ok(ConcreteModel {
        actions: comp.actions.clone(),
        sharing: comp.sharing.clone(),
        agents,
        states,
        index,
        succ_start,
        succ,
        pred_start,
        pred,
        parent,
        depth,
        classes,
        template: None,
    })
}

impl ConcreteModel {
    pub(crate) fn with_template(mut self, t: Arc<TemplateAgent>) -> Self {
        self.template = Some(t);
        self
    }

    /// The template this model was instantiated from, if any.
    pub fn template(&self) -> Option<&Arc<TemplateAgent>> {
        self.template.as_ref()
    }

    pub fn init(&self) -> StateId {
        StateId(0)
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[LocalAgent] {
        &self.agents
    }

    /// Agent `i` (1-based).
    pub fn agent(&self, i: usize) -> Result<&LocalAgent> {
        self.check_agent(i)?;
        Ok(&self.agents[i - 1])
    }

    pub fn check_agent(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.agents.len() {
            return Err(Error::AgentOutOfRange {
                index: i,
                count: self.agents.len(),
            });
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transition_count(&self) -> usize {
        self.succ.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn state(&self, id: StateId) -> &GlobalState {
        &self.states[id.index()]
    }

    pub fn lookup(&self, g: &GlobalState) -> Option<StateId> {
        self.index.get(g).copied()
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a.index()]
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    /// Agents sharing global action `a` (1-based ids).
    pub fn action_agents(&self, a: ActionId) -> &[usize] {
        &self.sharing[a.index()]
    }

    pub fn successors(&self, id: StateId) -> &[(ActionId, StateId)] {
        let i = id.index();
        &self.succ[self.succ_start[i] as usize..self.succ_start[i + 1] as usize]
    }

    /// Source states of incoming edges, one entry per edge.
    pub fn predecessors(&self, id: StateId) -> &[StateId] {
        let i = id.index();
        &self.pred[self.pred_start[i] as usize..self.pred_start[i + 1] as usize]
    }

    /// BFS depth from the initial state.
    pub fn depth(&self, id: StateId) -> usize {
        self.depth[id.index()] as usize
    }

    /// A shortest path from the initial state to `id`.
    pub fn path_from_init(&self, id: StateId) -> WitnessPath {
        let mut states = vec![id];
        let mut actions = Vec::new();
        let mut cur = id;
        while let Some((p, a)) = self.parent[cur.index()] {
            states.push(p);
            actions.push(a);
            cur = p;
        }
        states.reverse();
        actions.reverse();
        WitnessPath { states, actions }
    }

    /// `{g' | g'_i = g_i}`, ascending by id.
    pub fn epistemic_class(&self, i: usize, g: StateId) -> Result<&[StateId]> {
        self.check_agent(i)?;
        let l = self.states[g.index()].local(i);
        Ok(&self.classes[i - 1][l])
    }

    /// States whose `i`-th component is local state `l`.
    pub fn class_of_local(&self, i: usize, l: usize) -> &[StateId] {
        &self.classes[i - 1][l]
    }

    /// Does proposition `prop` of agent `i` hold at `g`?
    pub fn holds(&self, g: StateId, prop: &str, i: usize) -> bool {
        let l = self.states[g.index()].local(i);
        self.agents[i - 1].labels[l].contains(prop)
    }

    /// Indexed propositions `p_i` true at `g`.
    pub fn valuation(&self, g: StateId) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (pos, &l) in self.states[g.index()].locals().iter().enumerate() {
            for p in &self.agents[pos].labels[l as usize] {
                out.insert(format!("{p}_{}", pos + 1));
            }
        }
        out
    }

    pub fn local_name(&self, i: usize, l: usize) -> &str {
        &self.agents[i - 1].states[l]
    }

    pub fn render_state(&self, g: StateId) -> String {
        StateDisplay { model: self, id: g }.to_string()
    }

    pub fn render_path(&self, p: &WitnessPath) -> String {
        let mut s = self.render_state(p.states[0]);
        for (a, t) in p.actions.iter().zip(&p.states[1..]) {
            s.push_str(&format!(" -{}-> {}", self.action_name(*a), self.render_state(*t)));
        }
        s
    }
}

struct StateDisplay<'a> {
    model: &'a ConcreteModel,
    id: StateId,
}

impl fmt::Display for StateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (pos, &l) in self.model.state(self.id).locals().iter().enumerate() {
            if pos > 0 {
                write!(f, " | ")?;
            }
            write!(f, "{}", self.model.agents[pos].states[l as usize])?;
        }
        write!(f, "]")
    }
}
