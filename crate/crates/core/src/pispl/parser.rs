//! Lexer and recursive-descent parser for `.pispl` sources.

use super::ast::*;
use super::Diagnostic;
use crate::logic::{Formula, GroundFormula, Literal};
use crate::template::UnmatchedPolicy;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: Pos,
}

const SYMBOLS: &[&str] = &[
    "->", "!=", "<=", ">=", "..", "{", "}", "(", ")", "[", "]", ";", ":", ",", "'", "=", "<", ">", "&", "|",
    "!", "+", "-",
];

fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let text: String = chars[start..i].iter().collect();
            let value = text.parse().map_err(|_| Diagnostic::new(pos, format!("integer `{text}` is too large")))?;
            out.push(Token { tok: Tok::Int(value), pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token { tok: Tok::Sym(s), pos });
            }
            None => return Err(Diagnostic::new(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, Diagnostic>;

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(Diagnostic::new(
            self.pos(),
            format!("expected {expected}, found {}", describe(self.peek())),
        ))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(&format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let pos = self.pos();
                self.bump();
                Ok(Ident { name, pos })
            }
            _ => self.error("an identifier"),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat_sym("-");
        match *self.peek() {
            Tok::Int(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            _ => self.error("an integer"),
        }
    }

    /// `{ a, b, c }`, possibly empty.
    fn ident_set(&mut self) -> PResult<Vec<Ident>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        if !self.is_sym("}") {
            out.push(self.ident()?);
            while self.eat_sym(",") {
                out.push(self.ident()?);
            }
        }
        self.expect_sym("}")?;
        Ok(out)
    }

    fn file(&mut self) -> PResult<SourceFile> {
        let mut decls = Vec::new();
        loop {
            if self.is_kw("template") {
                decls.push(Decl::Template(self.template()?));
            } else if self.is_kw("agent") {
                decls.push(Decl::Agent(self.agent()?));
            } else {
                break;
            }
        }
        if decls.is_empty() {
            return self.error("`template` or `agent`");
        }
        self.expect_kw("formulae")?;
        self.expect_sym("{")?;
        let mut formulae = Vec::new();
        while !self.is_sym("}") {
            formulae.push(self.named_formula()?);
            self.expect_sym(";")?;
        }
        self.expect_sym("}")?;
        if *self.peek() != Tok::Eof {
            return self.error("end of input");
        }
        Ok(SourceFile { decls, formulae })
    }

    fn template(&mut self) -> PResult<TemplateDecl> {
        self.expect_kw("template")?;
        let name = self.ident()?;
        self.expect_sym("{")?;
        let options = if self.is_kw("options") { self.options()? } else { TemplateOptions::default() };
        let body = if self.is_kw("vars") {
            TemplateBody::Vars(self.var_template()?)
        } else if self.is_kw("states") {
            let states = self.states()?;
            let init = self.enum_init()?;
            let sync = self.action_list("sync")?;
            let asynch = self.action_list("async")?;
            let body = self.enum_rest(states, init)?;
            TemplateBody::Enumerated(EnumTemplate { sync, asynch, body })
        } else {
            return self.error("`vars` or `states`");
        };
        self.expect_sym("}")?;
        Ok(TemplateDecl { name, options, body })
    }

    fn options(&mut self) -> PResult<TemplateOptions> {
        self.expect_kw("options")?;
        self.expect_sym("{")?;
        let mut opts = TemplateOptions::default();
        while !self.is_sym("}") {
            let key = self.ident()?;
            self.expect_sym("=")?;
            let value = self.ident()?;
            match (key.name.as_str(), value.name.as_str()) {
                ("boundary", "disable") => opts.boundary = Some(BoundaryMode::Disable),
                ("boundary", "clamp") => opts.boundary = Some(BoundaryMode::Clamp),
                ("unmatched", "loop") => opts.unmatched = Some(UnmatchedPolicy::SelfLoop),
                ("unmatched", "disable") => opts.unmatched = Some(UnmatchedPolicy::Disable),
                ("boundary", _) | ("unmatched", _) => {
                    return Err(Diagnostic::new(
                        value.pos,
                        format!("invalid value `{}` for option `{}`", value.name, key.name),
                    ))
                }
                _ => return Err(Diagnostic::new(key.pos, format!("unknown option `{}`", key.name))),
            }
            self.expect_sym(";")?;
        }
        self.expect_sym("}")?;
        Ok(opts)
    }

    fn var_template(&mut self) -> PResult<VarTemplate> {
        self.expect_kw("vars")?;
        self.expect_sym("{")?;
        let mut vars = Vec::new();
        while !self.is_sym("}") {
            let name = self.ident()?;
            self.expect_sym(":")?;
            let ty = if self.is_kw("bool") {
                self.bump();
                VarType::Bool
            } else if self.is_sym("{") {
                VarType::Enum(self.ident_set()?)
            } else {
                let lo = self.int()?;
                self.expect_sym("..")?;
                let hi = self.int()?;
                VarType::Range(lo, hi)
            };
            self.expect_sym(";")?;
            vars.push(VarDecl { name, ty });
        }
        self.expect_sym("}")?;

        self.expect_kw("init")?;
        self.expect_sym("{")?;
        let mut init = Vec::new();
        while !self.is_sym("}") {
            let var = self.ident()?;
            self.expect_sym("=")?;
            let value = self.expr()?;
            self.expect_sym(";")?;
            init.push(Assignment { var, value });
        }
        self.expect_sym("}")?;

        let sync = self.action_list("sync")?;
        let asynch = self.action_list("async")?;

        self.expect_kw("protocol")?;
        self.expect_sym("{")?;
        let mut protocol = Vec::new();
        while !self.is_sym("}") {
            let pos = self.pos();
            self.expect_sym("[")?;
            let guard = self.guard()?;
            self.expect_sym("]")?;
            self.expect_sym("->")?;
            let actions = self.ident_set()?;
            self.expect_sym(";")?;
            protocol.push(ProtocolRule { guard, actions, pos });
        }
        self.expect_sym("}")?;

        self.expect_kw("evolution")?;
        self.expect_sym("{")?;
        let mut evolution = Vec::new();
        while !self.is_sym("}") {
            let action = self.ident()?;
            self.expect_sym(":")?;
            self.expect_sym("[")?;
            let guard = self.guard()?;
            self.expect_sym("]")?;
            self.expect_sym("->")?;
            self.expect_sym("(")?;
            let mut updates = Vec::new();
            if !self.is_sym(")") {
                loop {
                    let var = self.ident()?;
                    self.expect_sym("'")?;
                    self.expect_sym("=")?;
                    let value = self.expr()?;
                    updates.push(Assignment { var, value });
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            evolution.push(UpdateRule { action, guard, updates });
        }
        self.expect_sym("}")?;

        self.expect_kw("labels")?;
        self.expect_sym("{")?;
        let mut labels = Vec::new();
        while !self.is_sym("}") {
            let name = self.ident()?;
            self.expect_sym(":")?;
            let guard = self.guard()?;
            self.expect_sym(";")?;
            labels.push(LabelDef { name, guard });
        }
        self.expect_sym("}")?;

        Ok(VarTemplate {
            vars,
            init,
            sync,
            asynch,
            protocol,
            evolution,
            labels,
        })
    }

    fn action_list(&mut self, kw: &str) -> PResult<Vec<Ident>> {
        self.expect_kw(kw)?;
        self.ident_set()
    }

    fn states(&mut self) -> PResult<Vec<Ident>> {
        self.expect_kw("states")?;
        self.ident_set()
    }

    fn enum_init(&mut self) -> PResult<Ident> {
        self.expect_kw("init")?;
        let s = self.ident()?;
        self.expect_sym(";")?;
        Ok(s)
    }

    fn enum_rest(&mut self, states: Vec<Ident>, init: Ident) -> PResult<EnumBody> {
        self.expect_kw("protocol")?;
        self.expect_sym("{")?;
        let mut protocol = Vec::new();
        while !self.is_sym("}") {
            let s = self.ident()?;
            self.expect_sym(":")?;
            let acts = self.ident_set()?;
            self.expect_sym(";")?;
            protocol.push((s, acts));
        }
        self.expect_sym("}")?;
        self.expect_kw("evolution")?;
        self.expect_sym("{")?;
        let mut evolution = Vec::new();
        while !self.is_sym("}") {
            let a = self.ident()?;
            self.expect_sym(":")?;
            let from = self.ident()?;
            self.expect_sym("->")?;
            let to = self.ident()?;
            self.expect_sym(";")?;
            evolution.push((a, from, to));
        }
        self.expect_sym("}")?;
        self.expect_kw("labels")?;
        self.expect_sym("{")?;
        let mut labels = Vec::new();
        while !self.is_sym("}") {
            let p = self.ident()?;
            self.expect_sym(":")?;
            let states = self.ident_set()?;
            self.expect_sym(";")?;
            labels.push((p, states));
        }
        self.expect_sym("}")?;
        Ok(EnumBody {
            states,
            init,
            protocol,
            evolution,
            labels,
        })
    }

    fn agent(&mut self) -> PResult<AgentDecl> {
        self.expect_kw("agent")?;
        let name = self.ident()?;
        self.expect_sym("{")?;
        let states = self.states()?;
        let init = self.enum_init()?;
        let actions = self.action_list("actions")?;
        let body = self.enum_rest(states, init)?;
        self.expect_sym("}")?;
        Ok(AgentDecl { name, actions, body })
    }

    fn expr(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(_) => Ok(Expr::Int(self.int()?)),
            Tok::Sym("-") => Ok(Expr::Int(self.int()?)),
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::Ident(_) => {
                let var = self.ident()?;
                if self.is_sym("+") || self.is_sym("-") {
                    let minus = self.is_sym("-");
                    self.bump();
                    let k = match *self.peek() {
                        Tok::Int(k) => k,
                        _ => return self.error("an integer offset"),
                    };
                    self.bump();
                    Ok(Expr::Offset {
                        var,
                        delta: if minus { -k } else { k },
                    })
                } else {
                    Ok(Expr::Name(var))
                }
            }
            _ => self.error("an expression"),
        }
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        match self.peek() {
            Tok::Sym("=") => Some(CmpOp::Eq),
            Tok::Sym("!=") => Some(CmpOp::Ne),
            Tok::Sym("<") => Some(CmpOp::Lt),
            Tok::Sym("<=") => Some(CmpOp::Le),
            Tok::Sym(">") => Some(CmpOp::Gt),
            Tok::Sym(">=") => Some(CmpOp::Ge),
            _ => None,
        }
    }

    fn guard(&mut self) -> PResult<Guard> {
        let mut g = self.guard_and()?;
        while self.eat_sym("|") {
            g = Guard::Or(Box::new(g), Box::new(self.guard_and()?));
        }
        Ok(g)
    }

    fn guard_and(&mut self) -> PResult<Guard> {
        let mut g = self.guard_not()?;
        while self.eat_sym("&") {
            g = Guard::And(Box::new(g), Box::new(self.guard_not()?));
        }
        Ok(g)
    }

    fn guard_not(&mut self) -> PResult<Guard> {
        if self.eat_sym("!") {
            return Ok(Guard::Not(Box::new(self.guard_not()?)));
        }
        if self.eat_sym("(") {
            let g = self.guard()?;
            self.expect_sym(")")?;
            return Ok(g);
        }
        let pos = self.pos();
        let lhs = self.expr()?;
        if let Some(op) = self.cmp_op() {
            self.bump();
            let rhs = self.expr()?;
            return Ok(Guard::Cmp(lhs, op, rhs));
        }
        match lhs {
            Expr::Bool(b) => Ok(Guard::Const(b)),
            Expr::Name(v) => Ok(Guard::Var(v)),
            _ => Err(Diagnostic::new(pos, "expected a comparison".to_string())),
        }
    }

    fn named_formula(&mut self) -> PResult<NamedFormula> {
        let name = self.ident()?;
        self.expect_sym(":")?;
        let binder = if self.is_kw("forall") {
            self.bump();
            let vars = self.ident_set()?;
            self.expect_sym(":")?;
            Some(vars)
        } else {
            None
        };
        let body = self.formula()?;
        Ok(NamedFormula { name, binder, body })
    }

    fn formula(&mut self) -> PResult<Formula<IndexTerm>> {
        let pos = self.pos();
        let lhs = self.formula_or()?;
        if self.eat_sym("->") {
            let Formula::Lit(lit) = lhs else {
                return Err(Diagnostic::new(pos, "the antecedent of `->` must be a literal".to_string()));
            };
            let rhs = self.formula()?;
            return Ok(Formula::Implies(lit, Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn formula_or(&mut self) -> PResult<Formula<IndexTerm>> {
        let mut f = self.formula_and()?;
        while self.eat_sym("|") {
            f = Formula::Or(Box::new(f), Box::new(self.formula_and()?));
        }
        Ok(f)
    }

    fn formula_and(&mut self) -> PResult<Formula<IndexTerm>> {
        let mut f = self.formula_unary()?;
        while self.eat_sym("&") {
            f = Formula::And(Box::new(f), Box::new(self.formula_unary()?));
        }
        Ok(f)
    }

    fn starts_unary(&self) -> bool {
        match self.peek_at(1) {
            Tok::Sym("(") | Tok::Sym("!") => true,
            // `U` and `R` close the left operand of `A(.. U ..)`
            Tok::Ident(s) => s != "U" && s != "R",
            _ => false,
        }
    }

    fn formula_unary(&mut self) -> PResult<Formula<IndexTerm>> {
        let pos = self.pos();
        if self.eat_sym("!") {
            if self.is_sym("(") {
                return Err(Diagnostic::new(pos, "negation is only allowed on atomic propositions".to_string()));
            }
            let id = self.ident()?;
            let (prop, index) = split_literal(&id)?;
            return Ok(Formula::Lit(Literal { prop, index, positive: false }));
        }
        if self.eat_sym("(") {
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        let id = match self.peek().clone() {
            Tok::Ident(s) => s,
            _ => return self.error("a formula"),
        };
        match id.as_str() {
            "true" | "false" => {
                self.bump();
                Ok(Formula::Const(id == "true"))
            }
            "AG" | "AF" => {
                self.bump();
                let inner = Box::new(self.formula_unary()?);
                Ok(if id == "AG" { Formula::AG(inner) } else { Formula::AF(inner) })
            }
            "A" if matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.bump();
                self.bump();
                let lhs = self.formula()?;
                let op = self.ident()?;
                let rhs = self.formula()?;
                self.expect_sym(")")?;
                match op.name.as_str() {
                    "U" => Ok(Formula::AU(Box::new(lhs), Box::new(rhs))),
                    "R" => Ok(Formula::AR(Box::new(lhs), Box::new(rhs))),
                    _ => Err(Diagnostic::new(op.pos, format!("expected `U` or `R`, found `{}`", op.name))),
                }
            }
            k if k.starts_with("K_") && self.starts_unary() => {
                let ident = self.ident()?;
                let index = parse_index(&ident.name[2..], ident.pos)?;
                let inner = self.formula_unary()?;
                Ok(Formula::Knows(index, Box::new(inner)))
            }
            _ => {
                let ident = self.ident()?;
                let (prop, index) = split_literal(&ident)?;
                Ok(Formula::Lit(Literal { prop, index, positive: true }))
            }
        }
    }
}

fn parse_index(text: &str, pos: Pos) -> PResult<IndexTerm> {
    if !text.is_empty() && text.bytes().all(|b| b.is_ascii_digit()) {
        let n: usize = text
            .parse()
            .map_err(|_| Diagnostic::new(pos, format!("agent index `{text}` is too large")))?;
        if n == 0 {
            return Err(Diagnostic::new(pos, "agent indices start at 1".to_string()));
        }
        return Ok(IndexTerm::Agent(n));
    }
    if text.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return Ok(IndexTerm::Var(text.to_string()));
    }
    Err(Diagnostic::new(pos, format!("invalid index `{text}`")))
}

/// `prop_idx`, split at the last underscore.
fn split_literal(id: &Ident) -> PResult<(String, IndexTerm)> {
    match id.name.rsplit_once('_') {
        Some((prop, idx)) if !prop.is_empty() => Ok((prop.to_string(), parse_index(idx, id.pos)?)),
        _ => Err(Diagnostic::new(
            id.pos,
            format!("`{}` is not an indexed proposition (expected `name_index`)", id.name),
        )),
    }
}

pub fn parse(src: &str) -> Result<SourceFile, Diagnostic> {
    let mut p = Parser { toks: lex(src)?, at: 0 };
    p.file()
}

/// Parses a bare formula (no name, no binder).
pub fn parse_formula(src: &str) -> Result<Formula<IndexTerm>, Diagnostic> {
    let mut p = Parser { toks: lex(src)?, at: 0 };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return p.error("end of formula");
    }
    Ok(f)
}

/// Parses a formula whose indices are all agent numbers.
pub fn parse_ground_formula(src: &str) -> Result<GroundFormula, Diagnostic> {
    let f = parse_formula(src)?;
    f.try_map_index(&mut |i: &IndexTerm| match i {
        IndexTerm::Agent(n) => Ok(*n),
        IndexTerm::Var(v) => Err(Diagnostic::new(Pos::default(), format!("variable index `{v}` in a ground formula"))),
    })
}
