//! Semantic analysis and lowering of a parsed file to a template or a set
//! of plain agents, plus its named formulae.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::ast::*;
use super::Diagnostic;
use crate::iis::LocalAgent;
use crate::logic::{well_formed, Formula, GroundFormula, IndexedFormula};
use crate::template::{validate_template, ActionKind, EvolutionRule, TemplateAction, TemplateAgent, UnmatchedPolicy};

/// Largest variable-product a template may declare.
pub const MAX_TEMPLATE_STATES: u64 = 1 << 20;

/// Overrides for options a file may set per template.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompileOptions {
    pub boundary: Option<BoundaryMode>,
    pub unmatched: Option<UnmatchedPolicy>,
}

#[derive(Clone, Debug)]
pub enum Model {
    /// A parameterised system; instantiate with [`crate::template::instantiate`].
    Template(Arc<TemplateAgent>),
    /// A fixed heterogeneous system.
    Agents(Vec<LocalAgent>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Property {
    Indexed(IndexedFormula),
    Ground(GroundFormula),
}

impl std::fmt::Display for Property {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Property::Indexed(x) => write!(f, "{x}"),
            Property::Ground(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NamedProperty {
    pub name: String,
    pub property: Property,
}

#[derive(Clone, Debug)]
pub struct Program {
    pub model: Model,
    pub formulae: Vec<NamedProperty>,
    /// Effective boundary mode for a variable template.
    pub boundary: BoundaryMode,
    pub warnings: Vec<Diagnostic>,
}

impl Program {
    pub fn formula(&self, name: &str) -> Option<&NamedProperty> {
        self.formulae.iter().find(|f| f.name == name)
    }

    pub fn template(&self) -> Option<&Arc<TemplateAgent>> {
        match &self.model {
            Model::Template(t) => Some(t),
            Model::Agents(_) => None,
        }
    }
}

struct Sink {
    errors: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
}

impl Sink {
    fn err(&mut self, pos: Pos, msg: impl Into<String>) {
        self.errors.push(Diagnostic::new(pos, msg.into()));
    }
}

pub fn compile(file: &SourceFile, opts: &CompileOptions) -> Result<Program, Vec<Diagnostic>> {
    let mut sink = Sink {
        errors: Vec::new(),
        warnings: Vec::new(),
    };
    let templates: Vec<&TemplateDecl> = file
        .decls
        .iter()
        .filter_map(|d| match d {
            Decl::Template(t) => Some(t),
            _ => None,
        })
        .collect();
    let agents: Vec<&AgentDecl> = file
        .decls
        .iter()
        .filter_map(|d| match d {
            Decl::Agent(a) => Some(a),
            _ => None,
        })
        .collect();

    let mut boundary = opts.boundary.unwrap_or_default();
    let model = if let Some(t) = templates.first() {
        for extra in templates.iter().skip(1) {
            sink.err(extra.name.pos, "a file declares at most one template");
        }
        if let Some(a) = agents.first() {
            sink.err(a.name.pos, "templates and plain agents cannot be mixed");
        }
        boundary = opts.boundary.or(t.options.boundary).unwrap_or_default();
        let unmatched = opts.unmatched.or(t.options.unmatched).unwrap_or_default();
        let tmpl = match &t.body {
            TemplateBody::Vars(v) => compile_vars(&t.name, v, boundary, unmatched, &mut sink),
            TemplateBody::Enumerated(e) => compile_enum_template(&t.name, e, unmatched, &mut sink),
        };
        tmpl.map(|t| Model::Template(Arc::new(t)))
    } else {
        let mut out = Vec::new();
        let mut names = BTreeSet::new();
        for (k, a) in agents.iter().enumerate() {
            if !names.insert(&a.name.name) {
                sink.err(a.name.pos, format!("agent `{}` declared twice", a.name.name));
            }
            if let Some(agent) = compile_agent(k + 1, a, &mut sink) {
                out.push(agent);
            }
        }
        Some(Model::Agents(out))
    };

    let mut formulae = Vec::new();
    let mut seen = BTreeSet::new();
    for f in &file.formulae {
        if !seen.insert(&f.name.name) {
            sink.err(f.name.pos, format!("formula `{}` declared twice", f.name.name));
        }
        if let Some(p) = lower_formula(f, model.as_ref(), &mut sink) {
            formulae.push(NamedProperty {
                name: f.name.name.clone(),
                property: p,
            });
        }
    }

    match model {
        Some(model) if sink.errors.is_empty() => Ok(Program {
            model,
            formulae,
            boundary,
            warnings: sink.warnings,
        }),
        _ => {
            sink.errors.sort_by_key(|d| (d.pos.line, d.pos.col));
            Err(sink.errors)
        }
    }
}

fn lower_formula(f: &NamedFormula, model: Option<&Model>, sink: &mut Sink) -> Option<Property> {
    let pos = f.name.pos;
    let before = sink.errors.len();
    // propositions are checked against the declared labels
    let props: Option<Vec<BTreeSet<&str>>> = model.map(|m| match m {
        Model::Template(t) => vec![t.labels.iter().flatten().map(|s| s.as_str()).collect()],
        Model::Agents(ags) => ags
            .iter()
            .map(|a| a.labels.iter().flatten().map(|s| s.as_str()).collect())
            .collect(),
    });
    let mut lits = Vec::new();
    collect_literals(&f.body, &mut lits);
    if let Some(props) = &props {
        for (prop, idx) in &lits {
            let known = match (props.len(), idx) {
                (1, _) if matches!(model, Some(Model::Template(_))) => props[0].contains(prop.as_str()),
                (_, IndexTerm::Agent(i)) => props.get(i - 1).is_none_or(|s| s.contains(prop.as_str())),
                _ => true,
            };
            if !known {
                sink.err(pos, format!("formula `{}`: unknown proposition `{prop}_{idx}`", f.name.name));
            }
        }
    }

    match &f.binder {
        Some(vars) => {
            let mut numeric = false;
            let body = f.body.map_index(|i| match i {
                IndexTerm::Var(v) => v.clone(),
                IndexTerm::Agent(n) => {
                    numeric = true;
                    n.to_string()
                }
            });
            if numeric {
                sink.err(pos, format!("formula `{}`: an indexed formula uses only bound variables", f.name.name));
            }
            let indexed = IndexedFormula {
                binder: vars.iter().map(|v| v.name.clone()).collect(),
                body,
            };
            for m in well_formed(&indexed) {
                sink.err(pos, format!("formula `{}`: {m}", f.name.name));
            }
            if matches!(model, Some(Model::Agents(_))) {
                sink.err(pos, format!("formula `{}`: indexed formulae need a template", f.name.name));
            }
            (sink.errors.len() == before).then_some(Property::Indexed(indexed))
        }
        None => {
            let ground = f.body.try_map_index(&mut |i: &IndexTerm| match i {
                IndexTerm::Agent(n) => Ok(*n),
                IndexTerm::Var(v) => Err(v.clone()),
            });
            match ground {
                Ok(g) => {
                    if let Some(Model::Agents(ags)) = model {
                        if g.max_agent() > ags.len() {
                            sink.err(
                                pos,
                                format!(
                                    "formula `{}`: agent {} does not exist ({} declared)",
                                    f.name.name,
                                    g.max_agent(),
                                    ags.len()
                                ),
                            );
                        }
                    }
                    (sink.errors.len() == before).then_some(Property::Ground(g))
                }
                Err(v) => {
                    sink.err(pos, format!("formula `{}`: variable `{v}` occurs free", f.name.name));
                    None
                }
            }
        }
    }
}

fn collect_literals<'a>(f: &'a Formula<IndexTerm>, out: &mut Vec<(&'a String, &'a IndexTerm)>) {
    match f {
        Formula::Const(_) => {}
        Formula::Lit(l) => out.push((&l.prop, &l.index)),
        Formula::Implies(l, b) => {
            out.push((&l.prop, &l.index));
            collect_literals(b, out);
        }
        Formula::Knows(_, b) | Formula::AG(b) | Formula::AF(b) => collect_literals(b, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::AU(a, b) | Formula::AR(a, b) => {
            collect_literals(a, out);
            collect_literals(b, out);
        }
    }
}

// ---------------------------------------------------------------------------
// enumerated templates and agents

struct EnumLowered {
    states: Vec<String>,
    init: usize,
    protocol: Vec<BTreeSet<usize>>,
    evolution: BTreeMap<(usize, usize), (usize, Pos)>,
    labels: Vec<BTreeSet<String>>,
}

fn declare_unique(items: &[Ident], what: &str, sink: &mut Sink) -> BTreeMap<String, usize> {
    let mut map = BTreeMap::new();
    for (k, x) in items.iter().enumerate() {
        if map.insert(x.name.clone(), k).is_some() {
            sink.err(x.pos, format!("{what} `{}` declared twice", x.name));
        }
    }
    map
}

fn resolve(map: &BTreeMap<String, usize>, x: &Ident, what: &str, sink: &mut Sink) -> Option<usize> {
    let r = map.get(&x.name).copied();
    if r.is_none() {
        sink.err(x.pos, format!("unknown {what} `{}`", x.name));
    }
    r
}

fn lower_enum_body(b: &EnumBody, actions: &BTreeMap<String, usize>, sink: &mut Sink) -> Option<EnumLowered> {
    if b.states.is_empty() {
        sink.err(b.init.pos, "no states declared");
        return None;
    }
    let states = declare_unique(&b.states, "state", sink);
    let init = resolve(&states, &b.init, "state", sink).unwrap_or(0);
    let mut protocol = vec![BTreeSet::new(); b.states.len()];
    for (s, acts) in &b.protocol {
        let Some(l) = resolve(&states, s, "state", sink) else { continue };
        for a in acts {
            if let Some(a) = resolve(actions, a, "action", sink) {
                protocol[l].insert(a);
            }
        }
    }
    let mut evolution = BTreeMap::new();
    for (a, from, to) in &b.evolution {
        let (Some(ai), Some(f), Some(t)) = (
            resolve(actions, a, "action", sink),
            resolve(&states, from, "state", sink),
            resolve(&states, to, "state", sink),
        ) else {
            continue;
        };
        if let Some((other, _)) = evolution.insert((f, ai), (t, a.pos)) {
            if other != t {
                sink.err(
                    a.pos,
                    format!("nondeterministic evolution: `{}` from `{}` has two targets", a.name, from.name),
                );
            }
        }
    }
    let mut labels = vec![BTreeSet::new(); b.states.len()];
    for (p, ls) in &b.labels {
        for s in ls {
            if let Some(l) = resolve(&states, s, "state", sink) {
                labels[l].insert(p.name.clone());
            }
        }
    }
    Some(EnumLowered {
        states: b.states.iter().map(|s| s.name.clone()).collect(),
        init,
        protocol,
        evolution,
        labels,
    })
}

fn compile_agent(id: usize, a: &AgentDecl, sink: &mut Sink) -> Option<LocalAgent> {
    let actions = declare_unique(&a.actions, "action", sink);
    for x in &a.actions {
        if x.name == crate::iis::SILENT || x.name.starts_with("eps_") {
            sink.err(x.pos, format!("action name `{}` is reserved", x.name));
        }
    }
    let body = lower_enum_body(&a.body, &actions, sink)?;
    Some(LocalAgent {
        id,
        name: a.name.name.clone(),
        states: body.states,
        init: body.init,
        actions: a.actions.iter().map(|x| x.name.clone()).collect(),
        protocol: body.protocol,
        evolution: body.evolution.into_iter().map(|(k, (t, _))| (k, t)).collect(),
        labels: body.labels,
    })
}

fn template_actions(sync: &[Ident], asynch: &[Ident], sink: &mut Sink) -> (Vec<TemplateAction>, BTreeMap<String, usize>) {
    let all: Vec<Ident> = sync.iter().chain(asynch).cloned().collect();
    let map = declare_unique(&all, "action", sink);
    let actions = all
        .iter()
        .enumerate()
        .map(|(k, x)| TemplateAction {
            name: x.name.clone(),
            kind: if k < sync.len() { ActionKind::Sync } else { ActionKind::Async },
        })
        .collect();
    (actions, map)
}

fn finish_template(t: TemplateAgent, pos: Pos, sink: &mut Sink) -> Option<TemplateAgent> {
    let report = validate_template(&t);
    for e in &report.errors {
        sink.err(pos, format!("template `{}`: {e}", t.name));
    }
    for w in &report.warnings {
        sink.warnings.push(Diagnostic::new(pos, format!("template `{}`: {w}", t.name)));
    }
    report.is_valid().then_some(t)
}

fn compile_enum_template(
    name: &Ident,
    e: &EnumTemplate,
    unmatched: UnmatchedPolicy,
    sink: &mut Sink,
) -> Option<TemplateAgent> {
    let (actions, map) = template_actions(&e.sync, &e.asynch, sink);
    let body = lower_enum_body(&e.body, &map, sink)?;
    let t = TemplateAgent {
        name: name.name.clone(),
        states: body.states,
        init: body.init,
        actions,
        protocol: body.protocol,
        evolution: body
            .evolution
            .into_iter()
            .map(|((from, action), (to, _))| EvolutionRule { from, action, to })
            .collect(),
        labels: body.labels,
        unmatched,
    };
    finish_template(t, name.pos, sink)
}

// ---------------------------------------------------------------------------
// variable templates

#[derive(Clone, Debug, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
    Enum(Vec<String>),
}

impl Ty {
    fn name(&self) -> String {
        match self {
            Ty::Int => "integer".into(),
            Ty::Bool => "bool".into(),
            Ty::Enum(cs) => format!("{{{}}}", cs.join(", ")),
        }
    }
}

struct Var {
    name: String,
    ty: Ty,
    lo: i64,
    hi: i64,
}

impl Var {
    fn render(&self, v: i64) -> String {
        match &self.ty {
            Ty::Int => v.to_string(),
            Ty::Bool => (v != 0).to_string(),
            Ty::Enum(cs) => cs[v as usize].clone(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum CExpr {
    Const(i64),
    Var(usize),
    Offset(usize, i64),
}

impl CExpr {
    fn eval(self, vals: &[i64]) -> i64 {
        match self {
            CExpr::Const(c) => c,
            CExpr::Var(v) => vals[v],
            CExpr::Offset(v, d) => vals[v].saturating_add(d),
        }
    }
}

enum CGuard {
    Const(bool),
    Cmp(CExpr, CmpOp, CExpr),
    Not(Box<CGuard>),
    And(Box<CGuard>, Box<CGuard>),
    Or(Box<CGuard>, Box<CGuard>),
}

impl CGuard {
    fn eval(&self, vals: &[i64]) -> bool {
        match self {
            CGuard::Const(b) => *b,
            CGuard::Cmp(l, op, r) => {
                let (l, r) = (l.eval(vals), r.eval(vals));
                match op {
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                }
            }
            CGuard::Not(g) => !g.eval(vals),
            CGuard::And(a, b) => a.eval(vals) && b.eval(vals),
            CGuard::Or(a, b) => a.eval(vals) || b.eval(vals),
        }
    }
}

struct Scope<'a> {
    vars: &'a [Var],
    index: BTreeMap<&'a str, usize>,
}

impl Scope<'_> {
    /// Resolves an expression; bare names that are not variables are read as
    /// enumeration constants of `expected`, or of the unique enumeration
    /// declaring them.
    fn expr(&self, e: &Expr, expected: Option<&Ty>, sink: &mut Sink) -> Option<(CExpr, Ty)> {
        match e {
            Expr::Int(n) => Some((CExpr::Const(*n), Ty::Int)),
            Expr::Bool(b) => Some((CExpr::Const(*b as i64), Ty::Bool)),
            Expr::Offset { var, delta } => {
                let Some(&v) = self.index.get(var.name.as_str()) else {
                    sink.err(var.pos, format!("unknown variable `{}`", var.name));
                    return None;
                };
                if self.vars[v].ty != Ty::Int {
                    sink.err(var.pos, format!("`{}` is not an integer variable", var.name));
                    return None;
                }
                Some((CExpr::Offset(v, *delta), Ty::Int))
            }
            Expr::Name(x) => {
                if let Some(&v) = self.index.get(x.name.as_str()) {
                    return Some((CExpr::Var(v), self.vars[v].ty.clone()));
                }
                if let Some(Ty::Enum(cs)) = expected {
                    if let Some(k) = cs.iter().position(|c| *c == x.name) {
                        return Some((CExpr::Const(k as i64), Ty::Enum(cs.clone())));
                    }
                }
                let owners: BTreeSet<&Vec<String>> = self
                    .vars
                    .iter()
                    .filter_map(|v| match &v.ty {
                        Ty::Enum(cs) if cs.contains(&x.name) => Some(cs),
                        _ => None,
                    })
                    .collect();
                match owners.len() {
                    1 => {
                        let cs = owners.into_iter().next().unwrap();
                        let k = cs.iter().position(|c| *c == x.name).unwrap();
                        Some((CExpr::Const(k as i64), Ty::Enum(cs.clone())))
                    }
                    0 => {
                        sink.err(x.pos, format!("unknown name `{}`", x.name));
                        None
                    }
                    _ => {
                        sink.err(x.pos, format!("ambiguous constant `{}`", x.name));
                        None
                    }
                }
            }
        }
    }

    fn guard(&self, g: &Guard, sink: &mut Sink) -> Option<CGuard> {
        Some(match g {
            Guard::Const(b) => CGuard::Const(*b),
            Guard::Var(x) => {
                let (e, ty) = self.expr(&Expr::Name(x.clone()), None, sink)?;
                if ty != Ty::Bool {
                    sink.err(x.pos, format!("`{}` is not a boolean", x.name));
                    return None;
                }
                CGuard::Cmp(e, CmpOp::Ne, CExpr::Const(0))
            }
            Guard::Cmp(l, op, r) => {
                // resolve the side that names a variable first so constants
                // on the other side get its type
                let l_is_const = matches!(l, Expr::Name(x) if !self.index.contains_key(x.name.as_str()));
                let (le, lt, re, rt) = if l_is_const {
                    let (re, rt) = self.expr(r, None, sink)?;
                    let (le, lt) = self.expr(l, Some(&rt), sink)?;
                    (le, lt, re, rt)
                } else {
                    let (le, lt) = self.expr(l, None, sink)?;
                    let (re, rt) = self.expr(r, Some(&lt), sink)?;
                    (le, lt, re, rt)
                };
                let pos = expr_pos(l).or(expr_pos(r)).unwrap_or_default();
                if lt != rt {
                    sink.err(pos, format!("cannot compare {} with {}", lt.name(), rt.name()));
                    return None;
                }
                if lt != Ty::Int && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    sink.err(pos, format!("`{}` needs integer operands", op.symbol()));
                    return None;
                }
                CGuard::Cmp(le, *op, re)
            }
            Guard::Not(a) => CGuard::Not(Box::new(self.guard(a, sink)?)),
            Guard::And(a, b) => {
                let (a, b) = (self.guard(a, sink), self.guard(b, sink));
                CGuard::And(Box::new(a?), Box::new(b?))
            }
            Guard::Or(a, b) => {
                let (a, b) = (self.guard(a, sink), self.guard(b, sink));
                CGuard::Or(Box::new(a?), Box::new(b?))
            }
        })
    }

    fn assignment(&self, a: &Assignment, sink: &mut Sink) -> Option<(usize, CExpr)> {
        let Some(&v) = self.index.get(a.var.name.as_str()) else {
            sink.err(a.var.pos, format!("unknown variable `{}`", a.var.name));
            return None;
        };
        let ty = &self.vars[v].ty;
        let (e, et) = self.expr(&a.value, Some(ty), sink)?;
        if et != *ty {
            sink.err(
                a.var.pos,
                format!("`{}` has type {} but is assigned a {}", a.var.name, ty.name(), et.name()),
            );
            return None;
        }
        Some((v, e))
    }
}

fn expr_pos(e: &Expr) -> Option<Pos> {
    match e {
        Expr::Name(x) | Expr::Offset { var: x, .. } => Some(x.pos),
        _ => None,
    }
}

struct CRule {
    action: usize,
    guard: CGuard,
    updates: Vec<(usize, CExpr)>,
    pos: Pos,
}

fn compile_vars(
    name: &Ident,
    t: &VarTemplate,
    boundary: BoundaryMode,
    unmatched: UnmatchedPolicy,
    sink: &mut Sink,
) -> Option<TemplateAgent> {
    let errors_before = sink.errors.len();
    if t.vars.is_empty() {
        sink.err(name.pos, format!("template `{}` declares no variables", name.name));
        return None;
    }
    let mut vars = Vec::new();
    let mut size: u64 = 1;
    for d in &t.vars {
        let (ty, lo, hi) = match &d.ty {
            VarType::Range(lo, hi) => {
                if lo > hi {
                    sink.err(d.name.pos, format!("empty range {lo}..{hi} for `{}`", d.name.name));
                }
                (Ty::Int, *lo, *hi)
            }
            VarType::Bool => (Ty::Bool, 0, 1),
            VarType::Enum(cs) => {
                if cs.is_empty() {
                    sink.err(d.name.pos, format!("enumeration `{}` has no values", d.name.name));
                }
                declare_unique(cs, "enumeration value", sink);
                (Ty::Enum(cs.iter().map(|c| c.name.clone()).collect()), 0, cs.len() as i64 - 1)
            }
        };
        let width = (hi as i128 - lo as i128 + 1).max(0) as u64;
        size = size.saturating_mul(width);
        vars.push(Var {
            name: d.name.name.clone(),
            ty,
            lo,
            hi,
        });
    }
    let index = declare_unique(&t.vars.iter().map(|d| d.name.clone()).collect::<Vec<_>>(), "variable", sink);
    if size > MAX_TEMPLATE_STATES {
        sink.err(
            name.pos,
            format!("template `{}` has {size} states, more than {MAX_TEMPLATE_STATES}", name.name),
        );
    }
    if sink.errors.len() > errors_before {
        return None;
    }
    let scope = Scope {
        vars: &vars,
        index: index.iter().map(|(k, v)| (k.as_str(), *v)).collect(),
    };

    // initial valuation
    let mut init = vec![None; vars.len()];
    for a in &t.init {
        if let Some((v, e)) = scope.assignment(a, sink) {
            let CExpr::Const(c) = e else {
                sink.err(a.var.pos, "initial values must be constants");
                continue;
            };
            if init[v].is_some() {
                sink.err(a.var.pos, format!("`{}` initialised twice", a.var.name));
            }
            if c < vars[v].lo || c > vars[v].hi {
                sink.err(a.var.pos, format!("initial value {c} of `{}` is outside its domain", a.var.name));
            }
            init[v] = Some(c);
        }
    }
    for (v, x) in init.iter().enumerate() {
        if x.is_none() {
            sink.err(name.pos, format!("variable `{}` has no initial value", vars[v].name));
        }
    }

    let (actions, amap) = template_actions(&t.sync, &t.asynch, sink);
    for a in t.sync.iter().chain(&t.asynch) {
        if a.name == crate::iis::SILENT || a.name.starts_with("eps_") {
            sink.err(a.pos, format!("action name `{}` is reserved", a.name));
        }
    }

    let mut protocol_rules = Vec::new();
    for r in &t.protocol {
        let g = scope.guard(&r.guard, sink);
        let acts: Vec<usize> = r.actions.iter().filter_map(|a| resolve(&amap, a, "action", sink)).collect();
        if let Some(g) = g {
            protocol_rules.push((g, acts));
        }
    }
    let mut rules = Vec::new();
    for r in &t.evolution {
        let a = resolve(&amap, &r.action, "action", sink);
        let g = scope.guard(&r.guard, sink);
        let mut updates = Vec::new();
        let mut touched = BTreeSet::new();
        for u in &r.updates {
            if let Some((v, e)) = scope.assignment(u, sink) {
                if !touched.insert(v) {
                    sink.err(u.var.pos, format!("`{}` updated twice in one rule", u.var.name));
                }
                updates.push((v, e));
            }
        }
        if let (Some(action), Some(guard)) = (a, g) {
            rules.push(CRule {
                action,
                guard,
                updates,
                pos: r.action.pos,
            });
        }
    }
    let mut label_defs = Vec::new();
    let mut label_names = BTreeSet::new();
    for l in &t.labels {
        if !label_names.insert(&l.name.name) {
            sink.err(l.name.pos, format!("label `{}` declared twice", l.name.name));
        }
        if let Some(g) = scope.guard(&l.guard, sink) {
            label_defs.push((l.name.name.clone(), g));
        }
    }
    if sink.errors.len() > errors_before {
        return None;
    }

    // enumerate the product, first variable most significant
    let n_states = size as usize;
    let encode = |vals: &[i64]| -> usize {
        vals.iter()
            .zip(&vars)
            .fold(0usize, |acc, (x, v)| acc * (v.hi - v.lo + 1) as usize + (x - v.lo) as usize)
    };
    let decode = |mut code: usize| -> Vec<i64> {
        let mut vals = vec![0; vars.len()];
        for k in (0..vars.len()).rev() {
            let w = (vars[k].hi - vars[k].lo + 1) as usize;
            vals[k] = vars[k].lo + (code % w) as i64;
            code /= w;
        }
        vals
    };

    let mut states = Vec::with_capacity(n_states);
    let mut protocol = vec![BTreeSet::new(); n_states];
    let mut evolution = Vec::new();
    let mut labels = vec![BTreeSet::new(); n_states];
    let mut out_of_domain: BTreeMap<usize, usize> = BTreeMap::new();
    let mut conflicts = BTreeSet::new();
    for code in 0..n_states {
        let vals = decode(code);
        let parts: Vec<String> = vars.iter().zip(&vals).map(|(v, x)| format!("{}={}", v.name, v.render(*x))).collect();
        states.push(format!("({})", parts.join(",")));
        for (p, g) in &label_defs {
            if g.eval(&vals) {
                labels[code].insert(p.clone());
            }
        }
        for (g, acts) in &protocol_rules {
            if g.eval(&vals) {
                protocol[code].extend(acts.iter().copied());
            }
        }
        let enabled: Vec<usize> = protocol[code].iter().copied().collect();
        for a in enabled {
            let applicable: Vec<(usize, &CRule)> =
                rules.iter().enumerate().filter(|(_, r)| r.action == a && r.guard.eval(&vals)).collect();
            match applicable.as_slice() {
                [] => {}
                [(k, r)] => {
                    let mut next = vals.clone();
                    let mut escaped = false;
                    for (v, e) in &r.updates {
                        let x = e.eval(&vals);
                        let var = &vars[*v];
                        next[*v] = if x < var.lo || x > var.hi {
                            escaped = true;
                            x.clamp(var.lo, var.hi)
                        } else {
                            x
                        };
                    }
                    if escaped && boundary == BoundaryMode::Disable {
                        *out_of_domain.entry(*k).or_default() += 1;
                        protocol[code].remove(&a);
                    } else {
                        evolution.push(EvolutionRule {
                            from: code,
                            action: a,
                            to: encode(&next),
                        });
                    }
                }
                [(k1, r1), (k2, r2), ..] => {
                    if conflicts.insert((*k1, *k2)) {
                        sink.err(
                            r2.pos,
                            format!(
                                "nondeterministic evolution: rules for `{}` at {} and {} both apply at {}",
                                actions[a].name,
                                r1.pos,
                                r2.pos,
                                states[code]
                            ),
                        );
                    }
                }
            }
        }
    }
    for (k, count) in out_of_domain {
        sink.warnings.push(Diagnostic::new(
            rules[k].pos,
            format!("update leaves the variable domain at {count} state(s); the action is disabled there"),
        ));
    }
    if sink.errors.len() > errors_before {
        return None;
    }
    let init_vals: Vec<i64> = init.into_iter().map(|x| x.unwrap_or(0)).collect();
    let t = TemplateAgent {
        name: name.name.clone(),
        states,
        init: encode(&init_vals),
        actions,
        protocol,
        evolution,
        labels,
        unmatched,
    };
    finish_template(t, name.pos, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pispl::parse;

    fn compile_src(src: &str) -> Result<Program, Vec<Diagnostic>> {
        compile(&parse(src).unwrap(), &CompileOptions::default())
    }

    const COUNTER: &str = "
template C {
  vars { x: 0..2; up: bool; }
  init { x = 0; up = true; }
  sync { }
  async { inc, dec }
  protocol {
    [up] -> { inc };
    [x > 0] -> { dec };
  }
  evolution {
    inc: [true] -> (x' = x + 1);
    dec: [true] -> (x' = x - 1, up' = false);
  }
  labels { top: x = 2; }
}
formulae { F: forall {i}: AG(!top_i | K_i(top_i)); }
";

    #[test]
    fn variable_template_enumerates_product() {
        let p = compile_src(COUNTER).unwrap();
        let t = p.template().unwrap();
        assert_eq!(t.states.len(), 6);
        assert_eq!(t.states[0], "(x=0,up=false)");
        assert_eq!(t.states[t.init], "(x=0,up=true)");
        let top = t.states.iter().position(|s| s == "(x=2,up=true)").unwrap();
        assert!(t.labels[top].contains("top"));
        // inc at x=2 leaves the domain and is disabled by default
        assert!(!t.protocol[top].contains(&0));
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].message.contains("leaves the variable domain"));
    }

    #[test]
    fn clamp_keeps_boundary_actions() {
        let opts = CompileOptions {
            boundary: Some(BoundaryMode::Clamp),
            unmatched: None,
        };
        let p = compile(&parse(COUNTER).unwrap(), &opts).unwrap();
        let t = p.template().unwrap();
        let top = t.states.iter().position(|s| s == "(x=2,up=true)").unwrap();
        assert_eq!(t.step(top, 0), Some(top));
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn overlapping_rules_are_rejected() {
        let src = COUNTER.replace("dec: [true]", "inc: [x >= 1] -> (x' = 0);\n    dec: [true]");
        let errs = compile_src(&src).unwrap_err();
        assert!(errs.iter().any(|d| d.message.contains("nondeterministic")), "{errs:?}");
    }

    #[test]
    fn collects_several_semantic_errors() {
        let src = COUNTER
            .replace("[up] -> { inc }", "[up] -> { jump }")
            .replace("top: x = 2", "top: y = 2")
            .replace("AG(!top_i", "AG(!top_j");
        let errs = compile_src(&src).unwrap_err();
        assert!(errs.len() >= 3, "{errs:?}");
        assert!(errs.iter().any(|d| d.message.contains("unknown action `jump`")));
        assert!(errs.iter().any(|d| d.message.contains("unknown name `y`")));
        assert!(errs.iter().any(|d| d.message.contains("occurs free")));
    }

    #[test]
    fn enum_values_resolve_against_their_variable() {
        let src = "
template E {
  vars { c: {red, green}; }
  init { c = red; }
  sync { s }
  async { }
  protocol { [c = red] -> { s }; }
  evolution { s: [true] -> (c' = green); }
  labels { g: c = green; }
}
formulae { }
";
        let t = compile_src(src).unwrap();
        let t = t.template().unwrap();
        assert_eq!(t.states, vec!["(c=red)", "(c=green)"]);
        assert_eq!(t.step(0, 0), Some(1));
    }

    #[test]
    fn plain_agents_and_ground_formulae() {
        let src = "
agent A { states { s, t } init s; actions { go } protocol { s: {go}; } evolution { go: s -> t; } labels { done: {t}; } }
agent B { states { u } init u; actions { } protocol { } evolution { } labels { } }
formulae { F: AF(done_1); G: AG(done_3); }
";
        let errs = compile_src(src).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("agent 3 does not exist"));
        let ok = compile_src(&src.replace(" G: AG(done_3);", "")).unwrap();
        let Model::Agents(ags) = &ok.model else { panic!() };
        assert_eq!(ags.len(), 2);
        assert_eq!(ags[1].id, 2);
    }
}
