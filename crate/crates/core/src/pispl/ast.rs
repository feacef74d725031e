use std::fmt;

use crate::logic::Formula;
use crate::template::UnmatchedPolicy;

/// A source position (1-based line and column).
///
/// Positions never take part in equality, so two ASTs compare equal when
/// they have the same structure regardless of layout.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Pos) -> bool {
        true
    }
}

impl Eq for Pos {}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceFile {
    pub decls: Vec<Decl>,
    pub formulae: Vec<NamedFormula>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decl {
    Template(TemplateDecl),
    Agent(AgentDecl),
}

/// How updates that leave a variable's domain are handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// The action is not enabled at that state.
    #[default]
    Disable,
    /// The value is clamped into the domain.
    Clamp,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TemplateOptions {
    pub boundary: Option<BoundaryMode>,
    pub unmatched: Option<UnmatchedPolicy>,
}

impl TemplateOptions {
    pub fn is_empty(&self) -> bool {
        self.boundary.is_none() && self.unmatched.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateDecl {
    pub name: Ident,
    pub options: TemplateOptions,
    pub body: TemplateBody,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateBody {
    Vars(VarTemplate),
    Enumerated(EnumTemplate),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarType {
    Range(i64, i64),
    Bool,
    Enum(Vec<Ident>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: Ident,
    pub ty: VarType,
}

/// Right-hand side of an update, or an operand of a comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    /// A variable or an enumeration constant; resolved during analysis.
    Name(Ident),
    Int(i64),
    Bool(bool),
    Offset { var: Ident, delta: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Guard {
    Const(bool),
    /// A bare boolean variable.
    Var(Ident),
    Cmp(Expr, CmpOp, Expr),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub var: Ident,
    pub value: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolRule {
    pub guard: Guard,
    pub actions: Vec<Ident>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateRule {
    pub action: Ident,
    pub guard: Guard,
    pub updates: Vec<Assignment>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelDef {
    pub name: Ident,
    pub guard: Guard,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarTemplate {
    pub vars: Vec<VarDecl>,
    pub init: Vec<Assignment>,
    pub sync: Vec<Ident>,
    pub asynch: Vec<Ident>,
    pub protocol: Vec<ProtocolRule>,
    pub evolution: Vec<UpdateRule>,
    pub labels: Vec<LabelDef>,
}

/// Explicitly listed states, protocol, transitions and labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumBody {
    pub states: Vec<Ident>,
    pub init: Ident,
    pub protocol: Vec<(Ident, Vec<Ident>)>,
    /// `action: from -> to`
    pub evolution: Vec<(Ident, Ident, Ident)>,
    pub labels: Vec<(Ident, Vec<Ident>)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumTemplate {
    pub sync: Vec<Ident>,
    pub asynch: Vec<Ident>,
    pub body: EnumBody,
}

/// A plain interleaved agent of a heterogeneous system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentDecl {
    pub name: Ident,
    pub actions: Vec<Ident>,
    pub body: EnumBody,
}

/// Agent subscript as written: a variable or an agent number.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexTerm {
    Var(String),
    Agent(usize),
}

impl fmt::Display for IndexTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexTerm::Var(v) => write!(f, "{v}"),
            IndexTerm::Agent(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedFormula {
    pub name: Ident,
    pub binder: Option<Vec<Ident>>,
    pub body: Formula<IndexTerm>,
}
