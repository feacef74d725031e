//! Template agents and their instantiation into `T(n)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iis::{build_model, silent_action, ConcreteModel, LocalAgent, SILENT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    /// Shared by every concrete agent.
    Sync,
    /// Private, renamed `a_i` for agent `i`.
    Async,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TemplateAction {
    pub name: String,
    pub kind: ActionKind,
}

/// What an enabled action without an evolution rule does.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnmatchedPolicy {
    /// The local state is left unchanged.
    #[default]
    SelfLoop,
    /// The action is removed from the protocol at that state.
    Disable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EvolutionRule {
    pub from: usize,
    pub action: usize,
    pub to: usize,
}

/// The template agent `<L, init, Act, P, t, h>`.
///
/// States and actions are referenced by position. The silent action is
/// implicit, enabled everywhere and mapped to the identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TemplateAgent {
    pub name: String,
    pub states: Vec<String>,
    pub init: usize,
    pub actions: Vec<TemplateAction>,
    pub protocol: Vec<BTreeSet<usize>>,
    pub evolution: Vec<EvolutionRule>,
    pub labels: Vec<BTreeSet<String>>,
    pub unmatched: UnmatchedPolicy,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

impl TemplateAgent {
    pub fn action_id(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a.name == name)
    }

    pub fn state_id(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn sync_actions(&self) -> impl Iterator<Item = &TemplateAction> {
        self.actions.iter().filter(|a| a.kind == ActionKind::Sync)
    }

    pub fn async_actions(&self) -> impl Iterator<Item = &TemplateAction> {
        self.actions.iter().filter(|a| a.kind == ActionKind::Async)
    }

    /// Evolution as a map; only meaningful on a validated template.
    fn rule_map(&self) -> BTreeMap<(usize, usize), usize> {
        self.evolution
            .iter()
            .map(|r| ((r.from, r.action), r.to))
            .collect()
    }

    /// Effective successor of `l` under template action `a`, after the
    /// unmatched-rule policy. `None` means not enabled.
    pub fn step(&self, l: usize, a: usize) -> Option<usize> {
        if !self.protocol[l].contains(&a) {
            return None;
        }
        match self.evolution.iter().find(|r| r.from == l && r.action == a) {
            Some(r) => Some(r.to),
            None => match self.unmatched {
                UnmatchedPolicy::SelfLoop => Some(l),
                UnmatchedPolicy::Disable => None,
            },
        }
    }
}

/// Structural checks on a template; warnings flag protocol-enabled actions
/// with no evolution rule.
pub fn validate_template(t: &TemplateAgent) -> ValidationReport {
    let mut r = ValidationReport::default();
    if t.states.is_empty() {
        r.errors.push("template has no states".into());
        return r;
    }
    if t.init >= t.states.len() {
        r.errors.push(format!("initial state index {} is undeclared", t.init));
    }
    let mut names = BTreeSet::new();
    for s in &t.states {
        if !names.insert(s) {
            r.errors.push(format!("state `{s}` declared twice"));
        }
    }
    let mut actions = BTreeSet::new();
    for a in &t.actions {
        if a.name == SILENT || a.name.starts_with(&format!("{SILENT}_")) {
            r.errors.push(format!("action name `{}` is reserved for the silent action", a.name));
        }
        if !actions.insert(a.name.as_str()) {
            r.errors.push(format!("action `{}` declared twice (sync and async sets must be disjoint)", a.name));
        }
    }
    // a sync action spelled like a renamed async action would make tl ambiguous
    for s in t.sync_actions() {
        for a in t.async_actions() {
            if let Some(rest) = s.name.strip_prefix(&format!("{}_", a.name)) {
                if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                    r.errors.push(format!(
                        "sync action `{}` clashes with concrete names of async action `{}`",
                        s.name, a.name
                    ));
                }
            }
        }
    }
    if t.protocol.len() != t.states.len() {
        r.errors.push("protocol must list every state".into());
    }
    if t.labels.len() != t.states.len() {
        r.errors.push("labels must list every state".into());
    }
    for (l, acts) in t.protocol.iter().enumerate() {
        for &a in acts {
            if a >= t.actions.len() {
                r.errors.push(format!("protocol of state {l} names undeclared action {a}"));
            }
        }
    }
    let mut heads: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for rule in &t.evolution {
        if rule.from >= t.states.len() || rule.to >= t.states.len() {
            r.errors.push(format!("evolution rule {rule:?} names an undeclared state"));
            continue;
        }
        if rule.action >= t.actions.len() {
            r.errors.push(format!("evolution rule {rule:?} names an undeclared action"));
            continue;
        }
        *heads.entry((rule.from, rule.action)).or_default() += 1;
    }
    for (&(l, a), &count) in &heads {
        if count > 1 {
            r.errors.push(format!(
                "nondeterministic evolution: {count} rules for `{}` under `{}`",
                t.states[l], t.actions[a].name
            ));
        }
    }
    if !r.errors.is_empty() {
        return r;
    }
    for (l, acts) in t.protocol.iter().enumerate() {
        for &a in acts {
            if !heads.contains_key(&(l, a)) {
                let effect = match t.unmatched {
                    UnmatchedPolicy::SelfLoop => "treated as a self-loop",
                    UnmatchedPolicy::Disable => "action disabled",
                };
                r.warnings.push(format!(
                    "`{}` is enabled at `{}` but has no evolution rule; {effect}",
                    t.actions[a].name, t.states[l]
                ));
            }
        }
    }
    r
}

/// A concrete local state: template state `local` owned by agent `agent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConcreteState {
    pub agent: usize,
    pub local: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConcreteObject {
    State(ConcreteState),
    Action(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateObject {
    State(usize),
    Action(usize),
    Silent,
}

/// Per-agent renaming of template objects for `T(n)`.
#[derive(Clone, Debug)]
pub struct ConcreteNaming {
    template: Arc<TemplateAgent>,
    n: usize,
}

impl ConcreteNaming {
    pub fn new(template: Arc<TemplateAgent>, n: usize) -> Self {
        ConcreteNaming { template, n }
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    /// Concrete name of template action `a` for agent `i`.
    pub fn rename_action(&self, i: usize, a: usize) -> String {
        let act = &self.template.actions[a];
        match act.kind {
            ActionKind::Sync => act.name.clone(),
            ActionKind::Async => format!("{}_{i}", act.name),
        }
    }

    pub fn rename_silent(&self, i: usize) -> String {
        silent_action(i)
    }

    pub fn rename_state(&self, i: usize, l: usize) -> ConcreteState {
        ConcreteState { agent: i, local: l }
    }

    /// Rendering `l_i` of a concrete state.
    pub fn state_name(&self, s: ConcreteState) -> String {
        format!("{}_{}", self.template.states[s.local], s.agent)
    }

    /// Template action behind a concrete action name, with the owning agent
    /// for private actions.
    pub fn tl_action(&self, name: &str) -> Result<(TemplateObject, Option<usize>)> {
        let foreign = || Error::ForeignObject(name.to_string());
        if let Some(a) = self
            .template
            .actions
            .iter()
            .position(|a| a.kind == ActionKind::Sync && a.name == name)
        {
            return Ok((TemplateObject::Action(a), None));
        }
        let (base, suffix) = name.rsplit_once('_').ok_or_else(foreign)?;
        if suffix.is_empty() || !suffix.bytes().all(|b| b.is_ascii_digit()) {
            return Err(foreign());
        }
        let i: usize = suffix.parse().map_err(|_| foreign())?;
        if i == 0 || i > self.n {
            return Err(foreign());
        }
        if base == SILENT {
            return Ok((TemplateObject::Silent, Some(i)));
        }
        let a = self
            .template
            .actions
            .iter()
            .position(|a| a.kind == ActionKind::Async && a.name == base)
            .ok_or_else(foreign)?;
        Ok((TemplateObject::Action(a), Some(i)))
    }

    pub fn tl_state(&self, s: ConcreteState) -> Result<usize> {
        if s.agent == 0 || s.agent > self.n || s.local >= self.template.states.len() {
            return Err(Error::ForeignObject(format!("{s:?}")));
        }
        Ok(s.local)
    }

    /// `tl(.)`: the template object a concrete object was renamed from.
    pub fn tl_of(&self, obj: &ConcreteObject) -> Result<TemplateObject> {
        match obj {
            ConcreteObject::State(s) => self.tl_state(*s).map(TemplateObject::State),
            ConcreteObject::Action(a) => self.tl_action(a).map(|(o, _)| o),
        }
    }

    /// The `i`-th concrete agent.
    pub fn agent(&self, i: usize) -> LocalAgent {
        let t = &self.template;
        let rules = t.rule_map();
        let mut protocol = vec![BTreeSet::new(); t.states.len()];
        let mut evolution = BTreeMap::new();
        for (l, acts) in t.protocol.iter().enumerate() {
            for &a in acts {
                let to = match rules.get(&(l, a)) {
                    Some(&to) => to,
                    None if t.unmatched == UnmatchedPolicy::Disable => continue,
                    None => l,
                };
                protocol[l].insert(a);
                evolution.insert((l, a), to);
            }
        }
        LocalAgent {
            id: i,
            name: format!("{}_{i}", t.name),
            states: t.states.clone(),
            init: t.init,
            actions: (0..t.actions.len()).map(|a| self.rename_action(i, a)).collect(),
            protocol,
            evolution,
            labels: t.labels.clone(),
        }
    }
}

/// Builds the reachable graph of `T(n)`.
pub fn instantiate(t: &Arc<TemplateAgent>, n: usize, state_cap: usize) -> Result<ConcreteModel> {
    if n == 0 {
        return Err(Error::ZeroInstance);
    }
    let report = validate_template(t);
    if !report.is_valid() {
        return Err(Error::InvalidTemplate(report.errors));
    }
    let naming = ConcreteNaming::new(Arc::clone(t), n);
    let agents = (1..=n).map(|i| naming.agent(i)).collect();
    Ok(build_model(agents, state_cap)?.with_template(Arc::clone(t)))
}

impl fmt::Display for ConcreteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}_{}", self.local, self.agent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iis::{agents_sharing, ActionId, DEFAULT_STATE_CAP};

    /// Two-state toggler: async `go` flips a bit, sync `tick` only from `on`.
    pub(crate) fn toggler() -> TemplateAgent {
        TemplateAgent {
            name: "Toggle".into(),
            states: vec!["off".into(), "on".into()],
            init: 0,
            actions: vec![
                TemplateAction { name: "tick".into(), kind: ActionKind::Sync },
                TemplateAction { name: "go".into(), kind: ActionKind::Async },
            ],
            protocol: vec![BTreeSet::from([1]), BTreeSet::from([0])],
            evolution: vec![
                EvolutionRule { from: 0, action: 1, to: 1 },
                EvolutionRule { from: 1, action: 0, to: 0 },
            ],
            labels: vec![BTreeSet::new(), BTreeSet::from(["up".to_string()])],
            unmatched: UnmatchedPolicy::SelfLoop,
        }
    }

    #[test]
    fn valid_template_has_no_diagnostics() {
        let r = validate_template(&toggler());
        assert!(r.is_valid(), "{:?}", r.errors);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn duplicate_rule_is_nondeterminism() {
        let mut t = toggler();
        t.evolution.push(EvolutionRule { from: 0, action: 1, to: 0 });
        let r = validate_template(&t);
        assert!(r.errors.iter().any(|e| e.contains("nondeterministic")));
    }

    #[test]
    fn overlapping_action_sets_are_rejected() {
        let mut t = toggler();
        t.actions.push(TemplateAction { name: "go".into(), kind: ActionKind::Sync });
        assert!(!validate_template(&t).is_valid());
        let mut t = toggler();
        t.actions.push(TemplateAction { name: "go_2".into(), kind: ActionKind::Sync });
        assert!(!validate_template(&t).is_valid());
    }

    #[test]
    fn missing_rule_warns_and_follows_policy() {
        let mut t = toggler();
        t.evolution.remove(0);
        let r = validate_template(&t);
        assert!(r.is_valid());
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].contains("self-loop"));
        assert_eq!(t.step(0, 1), Some(0));
        t.unmatched = UnmatchedPolicy::Disable;
        assert_eq!(t.step(0, 1), None);
        assert!(validate_template(&t).warnings[0].contains("disabled"));
    }

    #[test]
    fn empty_template_is_an_error() {
        let mut t = toggler();
        t.states.clear();
        assert!(!validate_template(&t).is_valid());
    }

    #[test]
    fn sync_shared_by_all_async_private() {
        let t = Arc::new(toggler());
        let m = instantiate(&t, 3, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(agents_sharing(m.agents(), "tick").unwrap(), BTreeSet::from([1, 2, 3]));
        assert_eq!(agents_sharing(m.agents(), "go_2").unwrap(), BTreeSet::from([2]));
        // each agent flips independently, tick only when all are on
        assert_eq!(m.state_count(), 8);
        let all_on = m.state_ids().find(|&g| m.state(g).locals() == [1, 1, 1]).unwrap();
        let tick = m.action_names().iter().position(|a| a == "tick").unwrap();
        assert!(m
            .successors(all_on)
            .iter()
            .any(|&(a, t)| a == ActionId(tick as u32) && m.state(t).locals() == [0, 0, 0]));
    }

    #[test]
    fn single_agent_performs_sync_alone() {
        let t = Arc::new(toggler());
        let m = instantiate(&t, 1, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(agents_sharing(m.agents(), "tick").unwrap(), BTreeSet::from([1]));
        assert_eq!(m.state_count(), 2);
    }

    #[test]
    fn zero_instance_is_rejected() {
        let t = Arc::new(toggler());
        assert!(matches!(instantiate(&t, 0, 10), Err(Error::ZeroInstance)));
    }

    #[test]
    fn tl_inverts_renaming() {
        let t = Arc::new(toggler());
        let naming = ConcreteNaming::new(Arc::clone(&t), 3);
        for i in 1..=3 {
            for a in 0..t.actions.len() {
                let name = naming.rename_action(i, a);
                assert_eq!(naming.tl_of(&ConcreteObject::Action(name)).unwrap(), TemplateObject::Action(a));
            }
            for l in 0..t.states.len() {
                let s = naming.rename_state(i, l);
                assert_eq!(naming.tl_of(&ConcreteObject::State(s)).unwrap(), TemplateObject::State(l));
            }
            assert_eq!(
                naming.tl_of(&ConcreteObject::Action(naming.rename_silent(i))).unwrap(),
                TemplateObject::Silent
            );
        }
        assert_eq!(naming.tl_of(&ConcreteObject::Action("tick".into())).unwrap(), TemplateObject::Action(0));
        assert!(naming.tl_of(&ConcreteObject::Action("go_4".into())).is_err());
        assert!(naming.tl_of(&ConcreteObject::Action("jump_1".into())).is_err());
        assert!(naming.tl_of(&ConcreteObject::State(ConcreteState { agent: 4, local: 0 })).is_err());
        assert_eq!(naming.state_name(naming.rename_state(2, 1)), "on_2");
    }
}
