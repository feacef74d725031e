mod support;

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use piis_core::checker::check;
use piis_core::corpus;
use piis_core::iis::{ConcreteModel, DEFAULT_STATE_CAP};
use piis_core::logic::reduce_symmetry;
use piis_core::pispl::{load, CompileOptions, Property};
use piis_core::simrel::{
    brute_force_match, check_jss, lift_relation, projection_relation, SimRelation, BRUTE_FORCE_BOUND,
};
use piis_core::template::{instantiate, ActionKind, TemplateAgent};

use support::template_step;

fn robot() -> Arc<TemplateAgent> {
    load(corpus::ROBOT, &CompileOptions::default()).unwrap().template().unwrap().clone()
}

fn models(t: &Arc<TemplateAgent>, k: usize, n: usize) -> (ConcreteModel, ConcreteModel) {
    (instantiate(t, k, DEFAULT_STATE_CAP).unwrap(), instantiate(t, n, DEFAULT_STATE_CAP).unwrap())
}

/// Membership in the lift relation written out from its definition.
fn lift_member(t: &TemplateAgent, k: usize, big: &[u32]) -> bool {
    let target = big[0] as usize;
    let extras = &big[k..];
    extras.iter().all(|&l| l as usize == target)
        || (0..t.actions.len()).filter(|&a| t.actions[a].kind == ActionKind::Async).any(|a| {
            extras
                .iter()
                .all(|&l| l as usize == target || template_step(t, l as usize, a) == Some(target))
        })
}

#[test]
fn robot_relations_pass_in_both_directions() {
    let t = robot();
    for (k, n) in [(1, 2), (2, 3)] {
        let (small, big) = models(&t, k, n);
        let down = projection_relation(&big, &small).unwrap();
        // every reachable state of T(n) projects onto a reachable state of T(k)
        assert_eq!(down.len(), big.state_count());
        assert!(check_jss(&down).passed(), "projection {k}/{n}");
        let up = lift_relation(&small, &big, &t).unwrap();
        assert!(check_jss(&up).passed(), "lift {k}/{n}");
    }
}

#[test]
fn brute_force_agrees_on_the_robot() {
    let t = robot();
    let (small, big) = models(&t, 1, 2);
    for r in [projection_relation(&big, &small).unwrap(), lift_relation(&small, &big, &t).unwrap()] {
        assert!(check_jss(&r).paths_passed());
        let m = brute_force_match(&r, 6).unwrap();
        assert!(m.passed(), "{:?}", m.failures.first());
        assert_eq!(m.depth, 6);
    }
}

#[test]
fn lift_pairs_follow_the_membership_rule() {
    let t = robot();
    let (small, big) = models(&t, 2, 3);
    let up = lift_relation(&small, &big, &t).unwrap();
    let got: BTreeSet<_> = up.pairs().into_iter().collect();
    let mut expected = BTreeSet::new();
    for h in big.state_ids() {
        let locals = big.state(h).locals();
        let prefix = small.state_ids().find(|&g| small.state(g).locals() == &locals[..2]);
        if let Some(g) = prefix {
            if lift_member(&t, 2, locals) {
                expected.insert((g, h));
            }
        }
    }
    assert_eq!(got, expected);
    assert!(got.contains(&(small.init(), big.init())));
}

#[test]
fn deleting_a_needed_pair_is_flagged_by_both_checkers() {
    let t = robot();
    let (small, big) = models(&t, 1, 2);
    let r = projection_relation(&big, &small).unwrap();
    // the first move of robot 1 from the initial state
    let (_, g) = *big
        .successors(big.init())
        .iter()
        .find(|&&(_, g)| g != big.init() && big.state(g).local(1) != big.state(big.init()).local(1))
        .unwrap();
    let h = r.partners(g)[0];
    let broken = r.without((g, h));
    assert!(!check_jss(&broken).paths_passed());
    assert!(!brute_force_match(&broken, 3).unwrap().passed());
}

#[test]
fn relations_between_different_templates_are_rejected() {
    let t = robot();
    let program = load(corpus::ROBOT, &CompileOptions::default()).unwrap();
    let mut other = (**program.template().unwrap()).clone();
    other.name = "Other".into();
    let other = Arc::new(other);
    let a = instantiate(&t, 1, DEFAULT_STATE_CAP).unwrap();
    let b = instantiate(&other, 2, DEFAULT_STATE_CAP).unwrap();
    assert!(projection_relation(&b, &a).is_err());
}

/// Mutual simulation gives equal verdicts on every reduced formula with at
/// most `k` indices.
#[test]
fn robot_verdicts_are_preserved_between_related_instances() {
    let p = load(corpus::ROBOT, &CompileOptions::default()).unwrap();
    let t = p.template().unwrap();
    for (k, n) in [(1, 2), (2, 3)] {
        let (small, big) = models(t, k, n);
        for f in &p.formulae {
            let Property::Indexed(f) = &f.property else { panic!() };
            if f.binder.len() > k {
                continue;
            }
            let g = reduce_symmetry(f).unwrap();
            assert_eq!(check(&small, &g).unwrap().holds, check(&big, &g).unwrap().holds, "{g}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_relations_are_stuttering_simulations(t in support::arb_template(), k in 1usize..=2, extra in 0usize..=2) {
        let n = k + extra;
        let (small, big) = models(&t, k, n);
        let down = check_jss(&projection_relation(&big, &small).unwrap());
        prop_assert!(down.passed(), "projection T({}) by T({}): {:?} on {:?}", n, k, down.violations.first(), t);
        let up = check_jss(&lift_relation(&small, &big, &t).unwrap());
        prop_assert!(up.passed(), "lift T({}) by T({}): {:?} on {:?}", k, n, up.violations.first(), t);
    }

    #[test]
    fn brute_force_agrees_with_the_local_form(t in support::arb_template(), k in 1usize..=2, extra in 0usize..=1) {
        let (small, big) = models(&t, k, k + extra);
        prop_assume!(big.state_count() <= BRUTE_FORCE_BOUND);
        let rels: [SimRelation; 2] = [projection_relation(&big, &small).unwrap(), lift_relation(&small, &big, &t).unwrap()];
        for r in rels {
            let local = check_jss(&r).paths_passed();
            let brute = brute_force_match(&r, 3).unwrap().passed();
            prop_assert_eq!(local, brute);
        }
    }

    #[test]
    fn related_instances_agree_on_small_formulas(t in support::arb_template(), f in support::arb_indexed(), extra in 1usize..=2) {
        let k = f.binder.len();
        let (small, big) = models(&t, k, k + extra);
        let g = reduce_symmetry(&f).unwrap();
        prop_assert_eq!(check(&small, &g).unwrap().holds, check(&big, &g).unwrap().holds);
    }
}
