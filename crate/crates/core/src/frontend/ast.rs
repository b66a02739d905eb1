//! Terms of the Lua subset, including the runtime-only forms that appear
//! while a configuration is being reduced.

use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::heaps::{ClosureId, Loc, TableId, Value, ValueRef};

pub type Name = String;
pub type NodeId = u32;

/// Source position plus a per-parse node id. Spans never take part in term
/// equality or hashing.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    #[serde(skip)]
    pub id: NodeId,
}

impl Span {
    pub const DUMMY: Span = Span { line: 0, col: 0, id: 0 };

    pub fn new(line: u32, col: u32, id: NodeId) -> Span {
        Span { line, col, id }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Stmt {
    pub kind: StmtKind,
    #[serde(skip)]
    pub span: Span,
}

pub type Term = Stmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum StmtKind {
    Skip,
    Seq(Box<Stmt>, Box<Stmt>),
    /// Surface block; its `LocalDecl`s scope over the rest of the block.
    Block(Vec<Stmt>),
    /// Surface `local x, ... = e, ...` without an explicit body.
    LocalDecl(Vec<Name>, Vec<Expr>),
    /// Surface `local function f(...) ... end`.
    LocalFunction(Name, Box<FuncBody>),
    /// Surface `function f(...) ... end`.
    FunctionDecl(Name, Box<FuncBody>),
    /// Function call in statement position.
    Eval(Expr),
    /// `local x, ... = e, ... in s end`.
    Local(Vec<Name>, Vec<Expr>, Box<Stmt>),
    Assign(Vec<Expr>, Vec<Expr>),
    Return(Vec<Expr>),
    Break,
    If(Expr, Box<Stmt>, Box<Stmt>),
    While(Expr, Box<Stmt>),
    /// Runtime: the extent of a running loop, target of `break`.
    Loop(Box<Stmt>),
    /// Runtime: `$err v`.
    Raise(Value),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ExprKind {
    Val(Value),
    Var(Name),
    /// Runtime: a value reference, dereferenced implicitly when evaluated.
    Ref(ValueRef),
    Index(Box<Expr>, Box<Expr>),
    /// Surface `e.name`.
    Field(Box<Expr>, Name),
    Call(Box<Expr>, Vec<Expr>),
    Function(Box<FuncBody>),
    Table(Vec<TableField>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Un(UnOp, Box<Expr>),
    Paren(Box<Expr>),
    /// Runtime: the values produced by a call or `pcall`.
    Tuple(Vec<Value>),
    /// Runtime: a running function body, target of `return`.
    RetPoint(Box<Stmt>),
    /// Runtime: a running protected call, target of `$err`.
    Protected(Box<Expr>),
    /// Runtime: `$err v` in expression position.
    Raise(Value),
    /// Runtime: a finalizer call spliced in by the collector; its results
    /// are discarded.
    Finalizing(Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FuncBody {
    pub params: Vec<Name>,
    pub body: Stmt,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TableField {
    Positional(Expr),
    Named(Name, Expr),
    Keyed(Expr, Expr),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum UnOp {
    Neg,
    Not,
    Len,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Pow => "^",
            BinOp::Concat => "..",
            BinOp::Eq => "==",
            BinOp::Ne => "~=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    /// Binding power: left and right.
    pub fn precedence(self) -> (u8, u8) {
        match self {
            BinOp::Or => (1, 1),
            BinOp::And => (2, 2),
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => (3, 3),
            BinOp::Concat => (5, 4),
            BinOp::Add | BinOp::Sub => (6, 6),
            BinOp::Mul | BinOp::Div | BinOp::Mod => (7, 7),
            BinOp::Pow => (10, 9),
        }
    }
}

/// Binding power of unary operators: above `*`, below `^`.
pub const UNARY_PRECEDENCE: u8 = 8;

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Not => "not ",
            UnOp::Len => "#",
        }
    }
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt { kind, span: Span::DUMMY }
    }

    pub fn at(kind: StmtKind, span: Span) -> Stmt {
        Stmt { kind, span }
    }

    pub fn skip() -> Stmt {
        Stmt::new(StmtKind::Skip)
    }

    pub fn eval(e: Expr) -> Stmt {
        Stmt::new(StmtKind::Eval(e))
    }

    pub fn seq(a: Stmt, b: Stmt) -> Stmt {
        Stmt::new(StmtKind::Seq(Box::new(a), Box::new(b)))
    }

    pub fn is_skip(&self) -> bool {
        matches!(self.kind, StmtKind::Skip)
    }

    /// Appends every location occurring literally in the statement.
    pub fn locations(&self, out: &mut Vec<Loc>) {
        self.walk(&mut |n| node_locations(n, out));
    }

    /// Pre-order traversal over every statement and expression.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(Node<'a>)) {
        f(Node::Stmt(self));
        match &self.kind {
            StmtKind::Skip | StmtKind::Break | StmtKind::Raise(_) => {}
            StmtKind::Seq(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            StmtKind::Block(ss) => ss.iter().for_each(|s| s.walk(f)),
            StmtKind::LocalDecl(_, es) | StmtKind::Return(es) => es.iter().for_each(|e| e.walk(f)),
            StmtKind::LocalFunction(_, fb) | StmtKind::FunctionDecl(_, fb) => fb.body.walk(f),
            StmtKind::Eval(e) => e.walk(f),
            StmtKind::Local(_, es, body) => {
                es.iter().for_each(|e| e.walk(f));
                body.walk(f);
            }
            StmtKind::Assign(ts, es) => {
                ts.iter().for_each(|e| e.walk(f));
                es.iter().for_each(|e| e.walk(f));
            }
            StmtKind::If(c, a, b) => {
                c.walk(f);
                a.walk(f);
                b.walk(f);
            }
            StmtKind::While(c, b) => {
                c.walk(f);
                b.walk(f);
            }
            StmtKind::Loop(s) => s.walk(f),
        }
    }

    /// Largest node id in the term.
    pub fn max_id(&self) -> NodeId {
        let mut m = 0;
        self.walk(&mut |n| m = m.max(n.span().id));
        m
    }
}

fn node_locations(n: Node<'_>, out: &mut Vec<Loc>) {
    match n {
        Node::Expr(e) => match &e.kind {
            ExprKind::Val(v) | ExprKind::Raise(v) => push_value(v, out),
            ExprKind::Ref(r) => out.push(Loc::Ref(*r)),
            ExprKind::Tuple(vs) => vs.iter().for_each(|v| push_value(v, out)),
            _ => {}
        },
        Node::Stmt(s) => {
            if let StmtKind::Raise(v) = &s.kind {
                push_value(v, out)
            }
        }
    }
}

fn push_value(v: &Value, out: &mut Vec<Loc>) {
    if let Some(l) = v.loc() {
        out.push(l);
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Node<'a> {
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

impl Node<'_> {
    pub fn span(&self) -> Span {
        match self {
            Node::Stmt(s) => s.span,
            Node::Expr(e) => e.span,
        }
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr { kind, span: Span::DUMMY }
    }

    pub fn at(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }

    pub fn val(v: Value) -> Expr {
        Expr::new(ExprKind::Val(v))
    }

    pub fn var(n: &str) -> Expr {
        Expr::new(ExprKind::Var(n.to_string()))
    }

    pub fn table(t: TableId) -> Expr {
        Expr::val(Value::Table(t))
    }

    pub fn closure(c: ClosureId) -> Expr {
        Expr::val(Value::Closure(c))
    }

    pub fn call(f: Expr, args: Vec<Expr>) -> Expr {
        Expr::new(ExprKind::Call(Box::new(f), args))
    }

    pub fn index(t: Expr, k: Expr) -> Expr {
        Expr::new(ExprKind::Index(Box::new(t), Box::new(k)))
    }

    pub fn as_value(&self) -> Option<&Value> {
        match &self.kind {
            ExprKind::Val(v) => Some(v),
            _ => None,
        }
    }

    pub fn locations(&self, out: &mut Vec<Loc>) {
        self.walk(&mut |n| node_locations(n, out));
    }

    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(Node<'a>)) {
        f(Node::Expr(self));
        match &self.kind {
            ExprKind::Val(_)
            | ExprKind::Var(_)
            | ExprKind::Ref(_)
            | ExprKind::Tuple(_)
            | ExprKind::Raise(_) => {}
            ExprKind::Index(a, b) | ExprKind::Bin(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Field(a, _) | ExprKind::Un(_, a) | ExprKind::Paren(a) | ExprKind::Protected(a) | ExprKind::Finalizing(a) => {
                a.walk(f)
            }
            ExprKind::Call(g, args) => {
                g.walk(f);
                args.iter().for_each(|a| a.walk(f));
            }
            ExprKind::Function(fb) => fb.body.walk(f),
            ExprKind::Table(fields) => {
                for fld in fields {
                    match fld {
                        TableField::Positional(e) | TableField::Named(_, e) => e.walk(f),
                        TableField::Keyed(k, v) => {
                            k.walk(f);
                            v.walk(f);
                        }
                    }
                }
            }
            ExprKind::RetPoint(s) => s.walk(f),
        }
    }
}

/// Something whose literal locations can root a reachability query.
pub trait HasLocations {
    fn push_locations(&self, out: &mut Vec<Loc>);

    fn location_list(&self) -> Vec<Loc> {
        let mut v = Vec::new();
        self.push_locations(&mut v);
        v
    }
}

impl HasLocations for Stmt {
    fn push_locations(&self, out: &mut Vec<Loc>) {
        self.locations(out)
    }
}

impl HasLocations for Expr {
    fn push_locations(&self, out: &mut Vec<Loc>) {
        self.locations(out)
    }
}

impl HasLocations for Value {
    fn push_locations(&self, out: &mut Vec<Loc>) {
        push_value(self, out)
    }
}

impl HasLocations for [Value] {
    fn push_locations(&self, out: &mut Vec<Loc>) {
        self.iter().for_each(|v| push_value(v, out))
    }
}

impl HasLocations for Loc {
    fn push_locations(&self, out: &mut Vec<Loc>) {
        out.push(*self)
    }
}

impl HasLocations for [Loc] {
    fn push_locations(&self, out: &mut Vec<Loc>) {
        out.extend_from_slice(self)
    }
}
