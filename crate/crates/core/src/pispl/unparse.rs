//! Canonical printing of a parsed source file.

use std::fmt::Write;

use super::ast::*;
use crate::template::UnmatchedPolicy;

fn idents(xs: &[Ident]) -> String {
    xs.iter().map(|x| x.name.as_str()).collect::<Vec<_>>().join(", ")
}

fn expr(e: &Expr) -> String {
    match e {
        Expr::Name(x) => x.name.clone(),
        Expr::Int(n) => n.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Offset { var, delta } if *delta < 0 => format!("{} - {}", var.name, delta.unsigned_abs()),
        Expr::Offset { var, delta } => format!("{} + {}", var.name, delta),
    }
}

/// Precedence: `|` 1, `&` 2, `!` and atoms 3.
fn guard(g: &Guard, ctx: u8) -> String {
    let (prec, text) = match g {
        Guard::Const(b) => (3, b.to_string()),
        Guard::Var(v) => (3, v.name.clone()),
        Guard::Cmp(l, op, r) => (3, format!("{} {} {}", expr(l), op.symbol(), expr(r))),
        Guard::Not(inner) => {
            let body = match **inner {
                Guard::Const(_) | Guard::Var(_) | Guard::Not(_) => guard(inner, 3),
                _ => format!("({})", guard(inner, 0)),
            };
            (3, format!("!{body}"))
        }
        Guard::Or(a, b) => (1, format!("{} | {}", guard(a, 1), guard(b, 2))),
        Guard::And(a, b) => (2, format!("{} & {}", guard(a, 2), guard(b, 3))),
    };
    if prec < ctx {
        format!("({text})")
    } else {
        text
    }
}

fn enum_body(out: &mut String, b: &EnumBody, actions: &[(&str, &[Ident])]) {
    let _ = writeln!(out, "  states {{ {} }}", idents(&b.states));
    let _ = writeln!(out, "  init {};", b.init.name);
    for (kw, list) in actions {
        let _ = writeln!(out, "  {kw} {{ {} }}", idents(list));
    }
    out.push_str("  protocol {\n");
    for (s, acts) in &b.protocol {
        let _ = writeln!(out, "    {}: {{ {} }};", s.name, idents(acts));
    }
    out.push_str("  }\n  evolution {\n");
    for (a, from, to) in &b.evolution {
        let _ = writeln!(out, "    {}: {} -> {};", a.name, from.name, to.name);
    }
    out.push_str("  }\n  labels {\n");
    for (p, states) in &b.labels {
        let _ = writeln!(out, "    {}: {{ {} }};", p.name, idents(states));
    }
    out.push_str("  }\n");
}

fn var_body(out: &mut String, t: &VarTemplate) {
    out.push_str("  vars {\n");
    for v in &t.vars {
        let ty = match &v.ty {
            VarType::Range(lo, hi) => format!("{lo}..{hi}"),
            VarType::Bool => "bool".into(),
            VarType::Enum(cs) => format!("{{ {} }}", idents(cs)),
        };
        let _ = writeln!(out, "    {}: {ty};", v.name.name);
    }
    out.push_str("  }\n  init {\n");
    for a in &t.init {
        let _ = writeln!(out, "    {} = {};", a.var.name, expr(&a.value));
    }
    out.push_str("  }\n");
    let _ = writeln!(out, "  sync {{ {} }}", idents(&t.sync));
    let _ = writeln!(out, "  async {{ {} }}", idents(&t.asynch));
    out.push_str("  protocol {\n");
    for r in &t.protocol {
        let _ = writeln!(out, "    [{}] -> {{ {} }};", guard(&r.guard, 0), idents(&r.actions));
    }
    out.push_str("  }\n  evolution {\n");
    for r in &t.evolution {
        let ups: Vec<String> = r
            .updates
            .iter()
            .map(|u| format!("{}' = {}", u.var.name, expr(&u.value)))
            .collect();
        let _ = writeln!(out, "    {}: [{}] -> ({});", r.action.name, guard(&r.guard, 0), ups.join(", "));
    }
    out.push_str("  }\n  labels {\n");
    for l in &t.labels {
        let _ = writeln!(out, "    {}: {};", l.name.name, guard(&l.guard, 0));
    }
    out.push_str("  }\n");
}

pub fn unparse(file: &SourceFile) -> String {
    let mut out = String::new();
    for d in &file.decls {
        match d {
            Decl::Template(t) => {
                let _ = writeln!(out, "template {} {{", t.name.name);
                if !t.options.is_empty() {
                    out.push_str("  options {\n");
                    if let Some(b) = t.options.boundary {
                        let v = match b {
                            BoundaryMode::Disable => "disable",
                            BoundaryMode::Clamp => "clamp",
                        };
                        let _ = writeln!(out, "    boundary = {v};");
                    }
                    if let Some(u) = t.options.unmatched {
                        let v = match u {
                            UnmatchedPolicy::SelfLoop => "loop",
                            UnmatchedPolicy::Disable => "disable",
                        };
                        let _ = writeln!(out, "    unmatched = {v};");
                    }
                    out.push_str("  }\n");
                }
                match &t.body {
                    TemplateBody::Vars(v) => var_body(&mut out, v),
                    TemplateBody::Enumerated(e) => {
                        enum_body(&mut out, &e.body, &[("sync", &e.sync), ("async", &e.asynch)])
                    }
                }
                out.push_str("}\n\n");
            }
            Decl::Agent(a) => {
                let _ = writeln!(out, "agent {} {{", a.name.name);
                let _ = writeln!(out, "  states {{ {} }}", idents(&a.body.states));
                let _ = writeln!(out, "  init {};", a.body.init.name);
                let _ = writeln!(out, "  actions {{ {} }}", idents(&a.actions));
                // states and init were already written; reuse the rest
                let mut rest = String::new();
                enum_body(&mut rest, &a.body, &[]);
                out.extend(rest.lines().skip(2).map(|l| format!("{l}\n")));
                out.push_str("}\n\n");
            }
        }
    }
    out.push_str("formulae {\n");
    for f in &file.formulae {
        let binder = match &f.binder {
            Some(vs) => format!("forall {{{}}}: ", idents(vs)),
            None => String::new(),
        };
        let _ = writeln!(out, "  {}: {binder}{};", f.name.name, f.body);
    }
    out.push_str("}\n");
    out
}
