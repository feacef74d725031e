//! Independent oracles and random generators shared by the integration
//! tests. Nothing here calls the checker, the composition or the simulation
//! code under test.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use proptest::prelude::*;

use piis_core::iis::{ConcreteModel, StateId};
use piis_core::logic::{Formula, GroundFormula, IndexedFormula, Literal};
use piis_core::template::{ActionKind, EvolutionRule, TemplateAction, TemplateAgent, UnmatchedPolicy};

pub mod source;

// ---------------------------------------------------------------------------
// composition oracle

/// Successor of template state `l` under action `a`, read straight off the
/// template tables.
pub fn template_step(t: &TemplateAgent, l: usize, a: usize) -> Option<usize> {
    if !t.protocol[l].contains(&a) {
        return None;
    }
    for r in &t.evolution {
        if r.from == l && r.action == a {
            return Some(r.to);
        }
    }
    match t.unmatched {
        UnmatchedPolicy::SelfLoop => Some(l),
        UnmatchedPolicy::Disable => None,
    }
}

/// Successors of a global state of `T(n)`: each synchronous action moves
/// every agent, each asynchronous one a single agent; plus the stay-put
/// move.
pub fn naive_successors(t: &TemplateAgent, g: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![g.to_vec()];
    for (a, act) in t.actions.iter().enumerate() {
        match act.kind {
            ActionKind::Sync => {
                let next: Option<Vec<usize>> = g.iter().map(|&l| template_step(t, l, a)).collect();
                if let Some(next) = next {
                    out.push(next);
                }
            }
            ActionKind::Async => {
                for i in 0..g.len() {
                    if let Some(l2) = template_step(t, g[i], a) {
                        let mut next = g.to_vec();
                        next[i] = l2;
                        out.push(next);
                    }
                }
            }
        }
    }
    out
}

/// Reachable global states of `T(n)` by plain BFS.
pub fn naive_reachable(t: &TemplateAgent, n: usize) -> BTreeSet<Vec<usize>> {
    let init = vec![t.init; n];
    let mut seen = BTreeSet::from([init.clone()]);
    let mut queue = VecDeque::from([init]);
    while let Some(g) = queue.pop_front() {
        for h in naive_successors(t, &g) {
            if seen.insert(h.clone()) {
                queue.push_back(h);
            }
        }
    }
    seen
}

/// The built model's states as plain vectors.
pub fn model_states(m: &ConcreteModel) -> BTreeSet<Vec<usize>> {
    m.state_ids()
        .map(|g| m.state(g).locals().iter().map(|&l| l as usize).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// checker oracle

fn lit_holds(m: &ConcreteModel, g: StateId, l: &Literal<usize>) -> bool {
    let local = m.state(g).locals()[l.index - 1] as usize;
    m.agents()[l.index - 1].labels[local].contains(&l.prop) == l.positive
}

fn targets(m: &ConcreteModel, g: StateId) -> Vec<StateId> {
    m.successors(g).iter().map(|&(_, t)| t).collect()
}

/// Direct evaluation by fixpoint iteration over all states.
pub fn naive_sat(m: &ConcreteModel, f: &GroundFormula) -> Vec<bool> {
    let ids: Vec<StateId> = m.state_ids().collect();
    match f {
        Formula::Const(b) => vec![*b; ids.len()],
        Formula::Lit(l) => ids.iter().map(|&g| lit_holds(m, g, l)).collect(),
        Formula::And(a, b) => {
            let (a, b) = (naive_sat(m, a), naive_sat(m, b));
            a.iter().zip(&b).map(|(x, y)| *x && *y).collect()
        }
        Formula::Or(a, b) => {
            let (a, b) = (naive_sat(m, a), naive_sat(m, b));
            a.iter().zip(&b).map(|(x, y)| *x || *y).collect()
        }
        Formula::Implies(l, b) => {
            let b = naive_sat(m, b);
            ids.iter().map(|&g| !lit_holds(m, g, l) || b[g.index()]).collect()
        }
        Formula::Knows(i, b) => {
            let b = naive_sat(m, b);
            ids.iter()
                .map(|&g| {
                    ids.iter()
                        .filter(|&&h| m.state(h).locals()[i - 1] == m.state(g).locals()[i - 1])
                        .all(|h| b[h.index()])
                })
                .collect()
        }
        Formula::AG(b) => naive_release(m, &vec![false; ids.len()], &naive_sat(m, b)),
        Formula::AF(b) => naive_until(m, &vec![true; ids.len()], &naive_sat(m, b)),
        Formula::AU(a, b) => naive_until(m, &naive_sat(m, a), &naive_sat(m, b)),
        Formula::AR(a, b) => naive_release(m, &naive_sat(m, a), &naive_sat(m, b)),
    }
}

/// Least fixpoint of `Z = psi | (phi & AX Z)`.
fn naive_until(m: &ConcreteModel, phi: &[bool], psi: &[bool]) -> Vec<bool> {
    let mut z = psi.to_vec();
    loop {
        let next: Vec<bool> = m
            .state_ids()
            .map(|g| psi[g.index()] || (phi[g.index()] && targets(m, g).iter().all(|t| z[t.index()])))
            .collect();
        if next == z {
            return z;
        }
        z = next;
    }
}

/// Greatest fixpoint of `Z = psi & (phi | AX Z)`.
fn naive_release(m: &ConcreteModel, phi: &[bool], psi: &[bool]) -> Vec<bool> {
    let mut z = vec![true; phi.len()];
    loop {
        let next: Vec<bool> = m
            .state_ids()
            .map(|g| psi[g.index()] && (phi[g.index()] || targets(m, g).iter().all(|t| z[t.index()])))
            .collect();
        if next == z {
            return z;
        }
        z = next;
    }
}

// ---------------------------------------------------------------------------
// generators

pub const PROPS: [&str; 2] = ["p", "q"];

/// Templates with 2 to 5 states and at most 4 actions. The initial state
/// always has one enabled action leading elsewhere.
pub fn arb_template() -> impl Strategy<Value = Arc<TemplateAgent>> {
    (2usize..=5, 1usize..=4).prop_flat_map(|(ns, na)| {
        let kinds = prop::collection::vec(any::<bool>(), na);
        // mostly nonempty protocols, so instances grow beyond the initial state
        let row = prop_oneof![
            1 => Just(BTreeSet::new()),
            6 => prop::collection::btree_set(0..na, 1..=na),
        ];
        let protocol = prop::collection::vec(row, ns);
        // per (state, action): None leaves the pair to the unmatched policy
        let targets = prop::collection::vec(prop::option::weighted(0.9, 0..ns), ns * na);
        let labels = prop::collection::vec(prop::collection::btree_set(prop::sample::select(PROPS.to_vec()), 0..=2), ns);
        let unmatched = prop_oneof![Just(UnmatchedPolicy::SelfLoop), Just(UnmatchedPolicy::Disable)];
        let exit = (0..na, 1..ns);
        (kinds, protocol, targets, labels, unmatched, exit).prop_map(move |(kinds, mut protocol, mut targets, labels, unmatched, exit)| {
            protocol[0].insert(exit.0);
            targets[exit.0] = Some(exit.1);
            let mut evolution = Vec::new();
            for l in 0..ns {
                for &a in &protocol[l] {
                    if let Some(to) = targets[l * na + a] {
                        evolution.push(EvolutionRule { from: l, action: a, to });
                    }
                }
            }
            Arc::new(TemplateAgent {
                name: "Fuzz".into(),
                states: (0..ns).map(|k| format!("s{k}")).collect(),
                init: 0,
                actions: kinds
                    .iter()
                    .enumerate()
                    .map(|(k, sync)| TemplateAction {
                        name: format!("a{k}"),
                        kind: if *sync { ActionKind::Sync } else { ActionKind::Async },
                    })
                    .collect(),
                protocol,
                evolution,
                labels: labels
                    .into_iter()
                    .map(|s| s.into_iter().map(String::from).collect())
                    .collect(),
                unmatched,
            })
        })
    })
}

fn arb_body(vars: Vec<String>) -> impl Strategy<Value = Formula<String>> {
    let lit = (prop::sample::select(PROPS.to_vec()), prop::sample::select(vars.clone()), any::<bool>())
        .prop_map(|(p, i, pos)| Literal {
            prop: p.to_string(),
            index: i,
            positive: pos,
        });
    let leaf = prop_oneof![
        1 => any::<bool>().prop_map(Formula::Const),
        6 => lit.clone().prop_map(Formula::Lit),
    ];
    leaf.prop_recursive(3, 12, 2, move |inner| {
        let b = |f| Box::new(f);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Formula::And(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Formula::Or(b(x), b(y))),
            (lit.clone(), inner.clone()).prop_map(move |(l, y)| Formula::Implies(l, b(y))),
            (prop::sample::select(vars.clone()), inner.clone()).prop_map(move |(i, x)| Formula::Knows(i, b(x))),
            inner.clone().prop_map(move |x| Formula::AG(b(x))),
            inner.clone().prop_map(move |x| Formula::AF(b(x))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Formula::AU(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Formula::AR(b(x), b(y))),
        ]
    })
}

/// Well-formed indexed formulas over at most two variables.
pub fn arb_indexed() -> impl Strategy<Value = IndexedFormula> {
    prop_oneof![Just(vec!["i".to_string()]), Just(vec!["i".to_string(), "j".to_string()])]
        .prop_flat_map(|vars| (arb_body(vars.clone()), Just(vars), any::<bool>()))
        .prop_map(|(body, vars, swap)| {
            // the binder lists exactly the variables that occur
            let used: BTreeSet<String> = body.indices().into_iter().cloned().collect();
            let body = if used.is_empty() {
                Formula::Or(Box::new(body), Box::new(Formula::lit("p", vars[0].clone(), true)))
            } else {
                body
            };
            let mut binder: Vec<String> = body.indices().into_iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
            if swap {
                binder.reverse();
            }
            IndexedFormula { binder, body }
        })
}

/// Applies an agent renaming to a ground formula.
pub fn permute(f: &GroundFormula, perm: &BTreeMap<usize, usize>) -> GroundFormula {
    f.map_index(|i| perm[i])
}
