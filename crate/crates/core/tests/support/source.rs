//! Generators of source-level syntax trees.

use proptest::prelude::*;

use piis_core::logic::{Formula, Literal};
use piis_core::pispl::ast::*;
use piis_core::template::UnmatchedPolicy;

pub fn id(name: impl Into<String>) -> Ident {
    Ident {
        name: name.into(),
        pos: Pos::default(),
    }
}

fn names(prefix: &'static str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

fn arb_ident(prefix: &'static str) -> impl Strategy<Value = Ident> + Clone {
    (0usize..4).prop_map(move |k| id(format!("{prefix}{k}")))
}

fn arb_idents(prefix: &'static str) -> impl Strategy<Value = Vec<Ident>> {
    prop::collection::vec(arb_ident(prefix), 0..4)
}

fn arb_expr() -> impl Strategy<Value = Expr> + Clone {
    prop_oneof![
        arb_ident("v").prop_map(Expr::Name),
        (-9i64..20).prop_map(Expr::Int),
        any::<bool>().prop_map(Expr::Bool),
        (arb_ident("v"), -3i64..4).prop_map(|(var, delta)| Expr::Offset { var, delta }),
    ]
}

fn arb_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge])
}

fn arb_guard() -> impl Strategy<Value = Guard> {
    // a comparison never starts with a boolean constant, which would read
    // as a constant guard
    let lhs = prop_oneof![
        arb_ident("v").prop_map(Expr::Name),
        (arb_ident("v"), -3i64..4).prop_map(|(var, delta)| Expr::Offset { var, delta }),
        (0i64..9).prop_map(Expr::Int),
    ];
    let leaf = prop_oneof![
        any::<bool>().prop_map(Guard::Const),
        arb_ident("v").prop_map(Guard::Var),
        (lhs, arb_op(), arb_expr()).prop_map(|(l, op, r)| Guard::Cmp(l, op, r)),
    ];
    leaf.prop_recursive(3, 10, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|g| Guard::Not(Box::new(g))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Guard::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Guard::Or(Box::new(a), Box::new(b))),
        ]
    })
}

fn arb_var_type() -> impl Strategy<Value = VarType> {
    prop_oneof![
        (-3i64..3, 0i64..5).prop_map(|(lo, w)| VarType::Range(lo, lo + w)),
        Just(VarType::Bool),
        prop::collection::vec(arb_ident("c"), 1..3).prop_map(VarType::Enum),
    ]
}

fn arb_var_template() -> impl Strategy<Value = VarTemplate> {
    let assign = (arb_ident("v"), arb_expr()).prop_map(|(var, value)| Assignment { var, value });
    (
        prop::collection::vec((arb_ident("v"), arb_var_type()).prop_map(|(name, ty)| VarDecl { name, ty }), 0..4),
        prop::collection::vec(assign.clone(), 0..3),
        arb_idents("a"),
        arb_idents("b"),
        prop::collection::vec(
            (arb_guard(), arb_idents("a")).prop_map(|(guard, actions)| ProtocolRule {
                guard,
                actions,
                pos: Pos::default(),
            }),
            0..3,
        ),
        prop::collection::vec(
            (arb_ident("a"), arb_guard(), prop::collection::vec(assign, 0..3))
                .prop_map(|(action, guard, updates)| UpdateRule { action, guard, updates }),
            0..3,
        ),
        prop::collection::vec((arb_ident("p"), arb_guard()).prop_map(|(name, guard)| LabelDef { name, guard }), 0..3),
    )
        .prop_map(|(vars, init, sync, asynch, protocol, evolution, labels)| VarTemplate {
            vars,
            init,
            sync,
            asynch,
            protocol,
            evolution,
            labels,
        })
}

fn arb_enum_body() -> impl Strategy<Value = EnumBody> {
    (
        prop::collection::vec(arb_ident("s"), 1..4),
        arb_ident("s"),
        prop::collection::vec((arb_ident("s"), arb_idents("a")), 0..3),
        prop::collection::vec((arb_ident("a"), arb_ident("s"), arb_ident("s")), 0..4),
        prop::collection::vec((arb_ident("p"), arb_idents("s")), 0..3),
    )
        .prop_map(|(states, init, protocol, evolution, labels)| EnumBody {
            states,
            init,
            protocol,
            evolution,
            labels,
        })
}

fn arb_options() -> impl Strategy<Value = TemplateOptions> {
    (
        prop::option::of(prop_oneof![Just(BoundaryMode::Disable), Just(BoundaryMode::Clamp)]),
        prop::option::of(prop_oneof![Just(UnmatchedPolicy::SelfLoop), Just(UnmatchedPolicy::Disable)]),
    )
        .prop_map(|(boundary, unmatched)| TemplateOptions { boundary, unmatched })
}

fn arb_decl() -> impl Strategy<Value = Decl> {
    let body = prop_oneof![
        arb_var_template().prop_map(TemplateBody::Vars),
        (arb_idents("a"), arb_idents("b"), arb_enum_body())
            .prop_map(|(sync, asynch, body)| TemplateBody::Enumerated(EnumTemplate { sync, asynch, body })),
    ];
    prop_oneof![
        (arb_ident("T"), arb_options(), body).prop_map(|(name, options, body)| Decl::Template(TemplateDecl {
            name,
            options,
            body
        })),
        (arb_ident("A"), arb_idents("a"), arb_enum_body())
            .prop_map(|(name, actions, body)| Decl::Agent(AgentDecl { name, actions, body })),
    ]
}

fn arb_index() -> impl Strategy<Value = IndexTerm> + Clone {
    prop_oneof![
        prop::sample::select(vec!["i", "j"]).prop_map(|v| IndexTerm::Var(v.into())),
        (1usize..4).prop_map(IndexTerm::Agent),
    ]
}

fn arb_formula() -> impl Strategy<Value = Formula<IndexTerm>> {
    let lit = (prop::sample::select(vec!["p", "in_t", "q2"]), arb_index(), any::<bool>()).prop_map(|(p, index, positive)| {
        Literal {
            prop: p.into(),
            index,
            positive,
        }
    });
    let leaf = prop_oneof![any::<bool>().prop_map(Formula::Const), lit.clone().prop_map(Formula::Lit)];
    leaf.prop_recursive(4, 16, 2, move |inner| {
        let b = |f| Box::new(f);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Formula::And(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Formula::Or(b(x), b(y))),
            (lit.clone(), inner.clone()).prop_map(move |(l, y)| Formula::Implies(l, b(y))),
            (arb_index(), inner.clone()).prop_map(move |(i, x)| Formula::Knows(i, b(x))),
            inner.clone().prop_map(move |x| Formula::AG(b(x))),
            inner.clone().prop_map(move |x| Formula::AF(b(x))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Formula::AU(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Formula::AR(b(x), b(y))),
        ]
    })
}

pub fn arb_file() -> impl Strategy<Value = SourceFile> {
    let named = (arb_ident("F"), prop::option::of(prop::collection::vec(arb_ident("i"), 1..3)), arb_formula())
        .prop_map(|(name, binder, body)| NamedFormula { name, binder, body });
    (prop::collection::vec(arb_decl(), 1..3), prop::collection::vec(named, 0..3))
        .prop_map(|(decls, formulae)| SourceFile { decls, formulae })
}

/// A well-formed variable template: ranges and booleans, at most one
/// update rule per action, every update in the variable's own domain type.
pub fn arb_valid_var_template() -> impl Strategy<Value = SourceFile> {
    let vars = prop::collection::vec(prop_oneof![(0i64..2, 1i64..4).prop_map(|(lo, w)| Some((lo, lo + w))), Just(None)], 1..4);
    (vars, 1usize..4, any::<u64>()).prop_flat_map(|(types, na, seed)| {
        let nv = types.len();
        let for_guards = types.clone();
        let guard = move || {
            let types = for_guards.clone();
            (0..nv, 0i64..5, arb_op(), any::<bool>()).prop_map(move |(v, k, op, neg)| {
                let g = match types[v] {
                    Some(_) => Guard::Cmp(Expr::Name(id(format!("v{v}"))), op, Expr::Int(k)),
                    None => Guard::Var(id(format!("v{v}"))),
                };
                if neg {
                    Guard::Not(Box::new(g))
                } else {
                    g
                }
            })
        };
        let types2 = types.clone();
        let update = (0..nv, -1i64..=1, any::<bool>()).prop_map(move |(v, d, b)| Assignment {
            var: id(format!("v{v}")),
            value: match types2[v] {
                Some(_) => Expr::Offset {
                    var: id(format!("v{v}")),
                    delta: d,
                },
                None => Expr::Bool(b),
            },
        });
        let rules = prop::collection::vec(prop::option::of((guard(), prop::collection::vec(update, 0..3))), na);
        let protocol = prop::collection::vec((guard(), prop::collection::btree_set(0..na, 1..=na)), 1..3);
        let types = types.clone();
        (rules, protocol).prop_map(move |(rules, protocol)| {
            let actions = names("a", na);
            let (sync, asynch): (Vec<_>, Vec<_>) =
                actions.iter().enumerate().partition(|(k, _)| seed >> k & 1 == 1);
            let vars = types
                .iter()
                .enumerate()
                .map(|(k, t)| VarDecl {
                    name: id(format!("v{k}")),
                    ty: match t {
                        Some((lo, hi)) => VarType::Range(*lo, *hi),
                        None => VarType::Bool,
                    },
                })
                .collect();
            let init = types
                .iter()
                .enumerate()
                .map(|(k, t)| Assignment {
                    var: id(format!("v{k}")),
                    value: match t {
                        Some((lo, _)) => Expr::Int(*lo),
                        None => Expr::Bool(false),
                    },
                })
                .collect();
            let evolution = rules
                .into_iter()
                .enumerate()
                .filter_map(|(a, r)| {
                    r.map(|(guard, mut updates)| {
                        updates.sort_by(|x, y| x.var.name.cmp(&y.var.name));
                        updates.dedup_by(|x, y| x.var.name == y.var.name);
                        UpdateRule {
                            action: id(format!("a{a}")),
                            guard,
                            updates,
                        }
                    })
                })
                .collect();
            let body = VarTemplate {
                vars,
                init,
                sync: sync.into_iter().map(|(_, a)| id(a.clone())).collect(),
                asynch: asynch.into_iter().map(|(_, a)| id(a.clone())).collect(),
                protocol: protocol
                    .into_iter()
                    .map(|(guard, acts)| ProtocolRule {
                        guard,
                        actions: acts.into_iter().map(|a| id(format!("a{a}"))).collect(),
                        pos: Pos::default(),
                    })
                    .collect(),
                evolution,
                labels: vec![LabelDef {
                    name: id("p"),
                    guard: Guard::Const(true),
                }],
            };
            SourceFile {
                decls: vec![Decl::Template(TemplateDecl {
                    name: id("T"),
                    options: TemplateOptions::default(),
                    body: TemplateBody::Vars(body),
                })],
                formulae: Vec::new(),
            }
        })
    })
}
