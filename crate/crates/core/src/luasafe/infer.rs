//! Constraint-based type inference.
//!
//! Every expression and every variable binding gets a type variable.
//! Generation walks the desugared program once and emits constraints; the
//! solver then runs them to a fixpoint over a union-find of variables whose
//! classes carry a shape. Scalar flows join towards the least common
//! supertype (singletons widen to their primitive type, then to `dyn`)
//! without merging classes, so a variable's class records every value
//! assigned to it while each literal keeps its own singleton class.
//! Structured flows (tables, functions) merge classes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use super::types::{Prim, StaticType, Weakness};
use crate::frontend::ast::*;
use crate::heaps::{Builtin, Value};

pub type TVar = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BindingId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Binding {
    pub name: String,
    pub line: u32,
    pub col: u32,
    /// Node that introduces the binding: a `local` statement or a function.
    pub point: NodeId,
    #[serde(skip)]
    pub var: TVar,
}

impl Binding {
    pub fn label(&self) -> String {
        format!("{}@{}:{}", self.name, self.line, self.col)
    }
}

/// A definition of a variable: where it happens and which expression's
/// value it stores (`None` for `local x` without initializer).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DefSite {
    pub binding: BindingId,
    pub point: NodeId,
    pub source: Option<TVar>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
pub enum InferenceError {
    #[error("{line}:{col}: unsatisfiable constraint: {left} against {right}")]
    Unsatisfiable { left: String, right: String, line: u32, col: u32 },
    #[error("{line}:{col}: outside the analyzed fragment: {what}")]
    OutOfScope { what: String, line: u32, col: u32 },
}

#[derive(Clone, Debug, PartialEq)]
enum Scalar {
    /// No value flowed here yet.
    Unknown,
    Single(Value),
    Prim(Prim),
}

fn is_nilish(s: &Scalar) -> bool {
    matches!(s, Scalar::Unknown | Scalar::Single(Value::Nil) | Scalar::Prim(Prim::Nil))
}

/// Least upper bound of two scalar types; `None` means `dyn`. `nil` is
/// absorbed by any other type so that clearing a variable keeps its type.
fn join_scalar(a: &Scalar, b: &Scalar) -> Option<Scalar> {
    use super::types::Prim as P;
    use Scalar as S;
    let nil = |s: &Scalar| matches!(s, S::Single(Value::Nil) | S::Prim(P::Nil));
    match (a, b) {
        (S::Unknown, x) | (x, S::Unknown) => Some(x.clone()),
        (x, y) if nil(x) => Some(y.clone()),
        (x, y) if nil(y) => Some(x.clone()),
        (S::Single(x), S::Single(y)) if x == y => Some(a.clone()),
        (S::Single(x), S::Single(y)) if P::of(x) == P::of(y) => P::of(x).map(S::Prim),
        (S::Single(x), S::Prim(p)) | (S::Prim(p), S::Single(x)) if P::of(x) == Some(*p) => Some(S::Prim(*p)),
        (S::Prim(p), S::Prim(q)) if p == q => Some(a.clone()),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Scalar(Scalar),
    Table(Vec<(Value, TVar)>),
    Fun(Vec<TVar>, TVar),
    Dyn,
}

impl Shape {
    fn describe(&self) -> &'static str {
        match self {
            Shape::Scalar(_) => "a primitive value",
            Shape::Table(_) => "a table",
            Shape::Fun(..) => "a function",
            Shape::Dyn => "dyn",
        }
    }
}

/// Union-find over type variables; each class root owns a shape.
#[derive(Clone, Debug, Default)]
pub struct Solver {
    parent: Vec<usize>,
    shape: Vec<Shape>,
    changed: bool,
}

#[derive(Clone, Debug)]
enum Constraint {
    Equal(TVar, TVar),
    /// A value of the first flows into the second.
    Sub(TVar, TVar),
    HasField { table: TVar, key: Value, result: TVar },
    SetField { table: TVar, key: Value, value: TVar },
    Call { callee: TVar, args: Vec<TVar>, result: TVar },
}

type Unsat = (String, String);

impl Solver {
    fn fresh(&mut self, s: Shape) -> TVar {
        self.parent.push(self.parent.len());
        self.shape.push(s);
        self.parent.len() - 1
    }

    pub fn find(&self, mut v: TVar) -> TVar {
        while self.parent[v] != v {
            v = self.parent[v];
        }
        v
    }

    fn shape_of(&self, v: TVar) -> &Shape {
        &self.shape[self.find(v)]
    }

    fn set_shape(&mut self, v: TVar, s: Shape) {
        let r = self.find(v);
        if self.shape[r] != s {
            self.shape[r] = s;
            self.changed = true;
        }
    }

    fn unify(&mut self, a: TVar, b: TVar) -> Result<(), Unsat> {
        let mut work = vec![(a, b)];
        while let Some((a, b)) = work.pop() {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra == rb {
                continue;
            }
            let sa = std::mem::replace(&mut self.shape[ra], Shape::Dyn);
            let sb = std::mem::replace(&mut self.shape[rb], Shape::Dyn);
            let merged = match (sa, sb) {
                (Shape::Dyn, _) | (_, Shape::Dyn) => Shape::Dyn,
                (Shape::Scalar(x), Shape::Scalar(y)) => join_scalar(&x, &y).map_or(Shape::Dyn, Shape::Scalar),
                (Shape::Scalar(x), other) | (other, Shape::Scalar(x)) => {
                    if is_nilish(&x) {
                        other
                    } else {
                        Shape::Dyn
                    }
                }
                (Shape::Table(mut fa), Shape::Table(fb)) => {
                    for (k, v) in fb {
                        match fa.iter().find(|(k2, _)| *k2 == k) {
                            Some((_, u)) => work.push((*u, v)),
                            None => fa.push((k, v)),
                        }
                    }
                    Shape::Table(fa)
                }
                (Shape::Fun(mut pa, ra_), Shape::Fun(pb, rb_)) => {
                    for (i, p) in pb.iter().enumerate() {
                        match pa.get(i) {
                            Some(q) => work.push((*q, *p)),
                            None => pa.push(*p),
                        }
                    }
                    work.push((ra_, rb_));
                    Shape::Fun(pa, ra_)
                }
                (x, y) => return Err((x.describe().into(), y.describe().into())),
            };
            self.parent[rb] = ra;
            self.shape[ra] = merged;
            self.changed = true;
        }
        Ok(())
    }

    fn sub(&mut self, a: TVar, b: TVar) -> Result<(), Unsat> {
        match (self.shape_of(a).clone(), self.shape_of(b).clone()) {
            (Shape::Scalar(x), Shape::Scalar(y)) => {
                let j = join_scalar(&y, &x).map_or(Shape::Dyn, Shape::Scalar);
                self.set_shape(b, j);
                Ok(())
            }
            (Shape::Scalar(x), Shape::Table(_) | Shape::Fun(..)) if is_nilish(&x) => Ok(()),
            (Shape::Scalar(_), Shape::Dyn) => Ok(()),
            (Shape::Scalar(_), _) => {
                self.set_shape(b, Shape::Dyn);
                Ok(())
            }
            _ => self.unify(a, b),
        }
    }

    fn apply(&mut self, c: &Constraint) -> Result<bool, Unsat> {
        match c {
            Constraint::Equal(a, b) => self.unify(*a, *b).map(|_| true),
            Constraint::Sub(a, b) => self.sub(*a, *b).map(|_| true),
            Constraint::HasField { table, key, result } => match self.shape_of(*table).clone() {
                Shape::Table(fs) => match fs.iter().find(|(k, _)| k == key) {
                    Some((_, f)) => self.unify(*result, *f).map(|_| true),
                    None => Ok(false),
                },
                Shape::Dyn => {
                    self.set_shape(*result, Shape::Dyn);
                    Ok(true)
                }
                Shape::Scalar(s) if is_nilish(&s) => Ok(false),
                s => Err((s.describe().into(), "a table".into())),
            },
            Constraint::SetField { table, key, value } => match self.shape_of(*table).clone() {
                Shape::Table(fs) => {
                    let f = match fs.iter().find(|(k, _)| k == key) {
                        Some((_, f)) => *f,
                        None => {
                            let f = self.fresh(Shape::Scalar(Scalar::Unknown));
                            let mut fs = fs;
                            fs.push((key.clone(), f));
                            self.set_shape(*table, Shape::Table(fs));
                            f
                        }
                    };
                    self.sub(*value, f).map(|_| true)
                }
                Shape::Dyn => Ok(true),
                Shape::Scalar(s) if is_nilish(&s) => {
                    self.set_shape(*table, Shape::Table(Vec::new()));
                    self.apply(c)
                }
                s => Err((s.describe().into(), "a table".into())),
            },
            Constraint::Call { callee, args, result } => match self.shape_of(*callee).clone() {
                Shape::Fun(ps, r) => {
                    for (a, p) in args.iter().zip(&ps) {
                        self.sub(*a, *p)?;
                    }
                    self.unify(*result, r).map(|_| true)
                }
                Shape::Dyn => {
                    self.set_shape(*result, Shape::Dyn);
                    Ok(true)
                }
                Shape::Scalar(Scalar::Unknown) => {
                    let ps = args.iter().map(|_| self.fresh(Shape::Scalar(Scalar::Unknown))).collect();
                    let r = self.fresh(Shape::Scalar(Scalar::Unknown));
                    self.set_shape(*callee, Shape::Fun(ps, r));
                    self.apply(c)
                }
                s => Err((s.describe().into(), "a function".into())),
            },
        }
    }

    /// The class's shape as a static type; classes met again on the way
    /// become `μ`-bound variables.
    pub fn extract(&self, v: TVar) -> StaticType {
        self.extract_in(v, &mut Vec::new(), &mut BTreeSet::new())
    }

    fn extract_in(&self, v: TVar, stack: &mut Vec<TVar>, used: &mut BTreeSet<TVar>) -> StaticType {
        let r = self.find(v);
        if let Some(i) = stack.iter().position(|x| *x == r) {
            used.insert(r);
            return StaticType::Var(i as u32);
        }
        let depth = stack.len() as u32;
        stack.push(r);
        let t = match &self.shape[r] {
            Shape::Scalar(Scalar::Unknown) => StaticType::Prim(Prim::Nil),
            Shape::Scalar(Scalar::Single(x)) => StaticType::Singleton(x.clone()),
            Shape::Scalar(Scalar::Prim(p)) => StaticType::Prim(*p),
            Shape::Dyn => StaticType::Dyn,
            Shape::Table(fs) => StaticType::Table(
                fs.iter().map(|(k, f)| (k.clone(), self.extract_in(*f, stack, used))).collect(),
                Weakness::Strong,
            ),
            Shape::Fun(ps, ret) => StaticType::Fun(
                Box::new(StaticType::Tuple(ps.iter().map(|p| self.extract_in(*p, stack, used)).collect())),
                Box::new(self.extract_in(*ret, stack, used)),
            ),
        };
        stack.pop();
        if used.remove(&r) {
            StaticType::Rec(depth, Box::new(t))
        } else {
            t
        }
    }

    /// Builds a class for a static type (used for ascriptions).
    fn build(&mut self, t: &StaticType, env: &mut Vec<TVar>) -> TVar {
        match t {
            StaticType::Prim(Prim::Nil) => self.fresh(Shape::Scalar(Scalar::Unknown)),
            StaticType::Prim(p) => self.fresh(Shape::Scalar(Scalar::Prim(*p))),
            StaticType::Singleton(v) => self.fresh(Shape::Scalar(Scalar::Single(v.clone()))),
            StaticType::Dyn => self.fresh(Shape::Dyn),
            StaticType::Table(fs, _) => {
                let fs = fs.iter().map(|(k, ft)| (k.clone(), self.build(ft, env))).collect();
                self.fresh(Shape::Table(fs))
            }
            StaticType::Fun(a, r) => {
                let ps = match &**a {
                    StaticType::Tuple(ts) => ts.iter().map(|p| self.build(p, env)).collect(),
                    other => vec![self.build(other, env)],
                };
                let r = self.build(r, env);
                self.fresh(Shape::Fun(ps, r))
            }
            StaticType::Rec(y, body) => {
                let v = self.fresh(Shape::Scalar(Scalar::Unknown));
                if env.len() <= *y as usize {
                    env.resize(*y as usize + 1, v);
                }
                env[*y as usize] = v;
                let b = self.build(body, env);
                let _ = self.unify(v, b);
                v
            }
            StaticType::Var(y) => env[*y as usize],
            StaticType::Tuple(_) => self.fresh(Shape::Dyn),
        }
    }

    /// True for table and function classes, and for `dyn`.
    pub fn is_collectible(&self, v: TVar) -> bool {
        matches!(self.shape_of(v), Shape::Table(_) | Shape::Fun(..) | Shape::Dyn)
    }

    pub fn is_table(&self, v: TVar) -> bool {
        matches!(self.shape_of(v), Shape::Table(_))
    }

    pub fn is_dyn(&self, v: TVar) -> bool {
        matches!(self.shape_of(v), Shape::Dyn)
    }

    /// Field classes of a table class, in insertion order.
    pub fn fields(&self, v: TVar) -> Vec<(Value, TVar)> {
        match self.shape_of(v) {
            Shape::Table(fs) => fs.clone(),
            _ => Vec::new(),
        }
    }

    pub fn field(&self, v: TVar, key: &Value) -> Option<TVar> {
        self.fields(v).into_iter().find(|(k, _)| k == key).map(|(_, f)| f)
    }

    /// The literal string of a singleton-string class.
    pub fn singleton_str(&self, v: TVar) -> Option<String> {
        match self.shape_of(v) {
            Shape::Scalar(Scalar::Single(Value::Str(s))) => Some(s.clone()),
            _ => None,
        }
    }
}

/// A `setmetatable(t, m)` call site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SetMetatableSite {
    pub call: NodeId,
    pub table: TVar,
    /// `None` for a literal `nil`.
    pub meta: Option<TVar>,
}

/// The program with a type variable for every expression and binding.
#[derive(Clone, Debug)]
pub struct TypedProgram {
    pub term: Term,
    pub solver: Solver,
    pub bindings: Vec<Binding>,
    /// Variable occurrences to their bindings.
    pub uses: HashMap<NodeId, BindingId>,
    pub expr_var: HashMap<NodeId, TVar>,
    pub defs: Vec<DefSite>,
    /// Function literals: their class and the outer bindings they capture.
    pub captures: Vec<(TVar, Vec<BindingId>)>,
    pub setmetatables: Vec<SetMetatableSite>,
    /// Index reads whose key matched no field of the table type.
    pub unmatched: BTreeSet<NodeId>,
}

impl TypedProgram {
    pub fn binding(&self, b: BindingId) -> &Binding {
        &self.bindings[b.0]
    }

    pub fn type_of_binding(&self, b: BindingId) -> StaticType {
        self.solver.extract(self.bindings[b.0].var)
    }

    pub fn type_of_expr(&self, id: NodeId) -> Option<StaticType> {
        self.expr_var.get(&id).map(|v| self.solver.extract(*v))
    }

    /// `name@line:col` of every binding with its inferred type, in program
    /// order.
    pub fn annotations(&self) -> Vec<(String, StaticType)> {
        (0..self.bindings.len()).map(|i| (self.bindings[i].label(), self.type_of_binding(BindingId(i)))).collect()
    }

    /// Function classes by root, with the bindings they capture.
    pub fn captures_by_root(&self) -> BTreeMap<TVar, Vec<BindingId>> {
        let mut m: BTreeMap<TVar, Vec<BindingId>> = BTreeMap::new();
        for (v, bs) in &self.captures {
            m.entry(self.solver.find(*v)).or_default().extend(bs.iter().copied());
        }
        m
    }
}

struct Frame {
    ret: Option<TVar>,
    /// Scope depth at which the function's own scopes begin.
    base: usize,
    captured: BTreeSet<BindingId>,
}

struct Gen {
    s: Solver,
    cs: Vec<Constraint>,
    scopes: Vec<Vec<(String, BindingId)>>,
    frames: Vec<Frame>,
    bindings: Vec<Binding>,
    uses: HashMap<NodeId, BindingId>,
    expr_var: HashMap<NodeId, TVar>,
    defs: Vec<DefSite>,
    captures: Vec<(TVar, Vec<BindingId>)>,
    setmetatables: Vec<SetMetatableSite>,
    reads: Vec<(NodeId, usize)>,
}

fn out_of_scope(what: impl Into<String>, sp: Span) -> InferenceError {
    InferenceError::OutOfScope { what: what.into(), line: sp.line, col: sp.col }
}

fn literal_key(k: &Expr) -> Result<Value, InferenceError> {
    match &k.kind {
        ExprKind::Val(v) if Prim::of(v).is_some() && *v != Value::Nil => Ok(v.clone()),
        ExprKind::Paren(e) => literal_key(e),
        _ => Err(out_of_scope("table key that is not a literal", k.span)),
    }
}

impl Gen {
    fn scalar(&mut self, s: Scalar) -> TVar {
        self.s.fresh(Shape::Scalar(s))
    }

    fn lookup(&self, n: &str) -> Option<(usize, BindingId)> {
        for (depth, scope) in self.scopes.iter().enumerate().rev() {
            if let Some((_, b)) = scope.iter().rev().find(|(m, _)| m == n) {
                return Some((depth, *b));
            }
        }
        None
    }

    fn bind(&mut self, name: &str, sp: Span, point: NodeId) -> BindingId {
        let var = self.scalar(Scalar::Unknown);
        let id = BindingId(self.bindings.len());
        self.bindings.push(Binding { name: name.into(), line: sp.line, col: sp.col, point, var });
        id
    }

    fn use_var(&mut self, n: &str, e: &Expr) -> Result<Option<BindingId>, InferenceError> {
        match self.lookup(n) {
            Some((depth, b)) => {
                for f in self.frames.iter_mut().rev() {
                    if depth >= f.base {
                        break;
                    }
                    f.captured.insert(b);
                }
                self.uses.insert(e.span.id, b);
                Ok(Some(b))
            }
            None if Builtin::from_name(n).is_some() => Ok(None),
            None => Err(out_of_scope(format!("global variable {n}"), e.span)),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<TVar, InferenceError> {
        let v = self.expr_inner(e)?;
        self.expr_var.insert(e.span.id, v);
        Ok(v)
    }

    fn expr_inner(&mut self, e: &Expr) -> Result<TVar, InferenceError> {
        Ok(match &e.kind {
            ExprKind::Val(v) if Prim::of(v).is_some() => self.scalar(Scalar::Single(v.clone())),
            ExprKind::Var(n) => match self.use_var(n, e)? {
                Some(b) => self.bindings[b.0].var,
                None => self.s.fresh(Shape::Dyn),
            },
            ExprKind::Index(t, k) => {
                let key = literal_key(k)?;
                self.expr(k)?;
                let table = self.expr(t)?;
                let result = self.scalar(Scalar::Unknown);
                self.reads.push((e.span.id, self.cs.len()));
                self.cs.push(Constraint::HasField { table, key, result });
                result
            }
            ExprKind::Call(f, args) => return self.call(e, f, args),
            ExprKind::Function(fb) => self.function(e, fb)?,
            ExprKind::Table(fields) => {
                let table = self.s.fresh(Shape::Table(Vec::new()));
                for f in fields {
                    let TableField::Keyed(k, v) = f else {
                        return Err(out_of_scope("table constructor field", e.span));
                    };
                    let key = literal_key(k)?;
                    self.expr(k)?;
                    let value = self.expr(v)?;
                    self.cs.push(Constraint::SetField { table, key, value });
                }
                table
            }
            ExprKind::Bin(op, a, b) => {
                let (va, vb) = (self.expr(a)?, self.expr(b)?);
                match op {
                    BinOp::And | BinOp::Or => {
                        let r = self.scalar(Scalar::Unknown);
                        self.cs.push(Constraint::Sub(va, r));
                        self.cs.push(Constraint::Sub(vb, r));
                        r
                    }
                    BinOp::Concat => self.scalar(Scalar::Prim(Prim::Str)),
                    BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        self.scalar(Scalar::Prim(Prim::Bool))
                    }
                    _ => self.scalar(Scalar::Prim(Prim::Num)),
                }
            }
            ExprKind::Un(op, a) => {
                self.expr(a)?;
                match op {
                    UnOp::Not => self.scalar(Scalar::Prim(Prim::Bool)),
                    UnOp::Neg | UnOp::Len => self.scalar(Scalar::Prim(Prim::Num)),
                }
            }
            ExprKind::Paren(a) => self.expr(a)?,
            _ => return Err(out_of_scope("runtime or surface-only form", e.span)),
        })
    }

    fn builtin_callee(&self, f: &Expr) -> Option<Builtin> {
        match &f.kind {
            ExprKind::Var(n) if self.lookup(n).is_none() => Builtin::from_name(n),
            _ => None,
        }
    }

    fn call(&mut self, e: &Expr, f: &Expr, args: &[Expr]) -> Result<TVar, InferenceError> {
        let builtin = self.builtin_callee(f);
        if builtin.is_none() {
            let callee = self.expr(f)?;
            let args = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
            let result = self.scalar(Scalar::Unknown);
            self.cs.push(Constraint::Call { callee, args, result });
            return Ok(result);
        }
        let vs = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
        Ok(match builtin.expect("checked above") {
            Builtin::SetMetatable => {
                let Some(&table) = vs.first() else {
                    return Err(out_of_scope("setmetatable without arguments", e.span));
                };
                let meta = match args.get(1).map(|a| &a.kind) {
                    None | Some(ExprKind::Val(Value::Nil)) => None,
                    Some(_) => Some(vs[1]),
                };
                self.setmetatables.push(SetMetatableSite { call: e.span.id, table, meta });
                table
            }
            Builtin::Pcall => {
                if let Some((&callee, rest)) = vs.split_first() {
                    let result = self.scalar(Scalar::Unknown);
                    self.cs.push(Constraint::Call { callee, args: rest.to_vec(), result });
                }
                self.scalar(Scalar::Prim(Prim::Bool))
            }
            Builtin::Print | Builtin::Error => self.scalar(Scalar::Single(Value::Nil)),
            Builtin::ToString | Builtin::Type => self.scalar(Scalar::Prim(Prim::Str)),
            Builtin::CollectGarbage => self.scalar(Scalar::Prim(Prim::Num)),
            Builtin::GetMetatable => self.s.fresh(Shape::Dyn),
        })
    }

    fn function(&mut self, e: &Expr, fb: &FuncBody) -> Result<TVar, InferenceError> {
        let base = self.scopes.len();
        let mut scope = Vec::new();
        let mut params = Vec::new();
        for p in &fb.params {
            let b = self.bind(p, e.span, e.span.id);
            let var = self.bindings[b.0].var;
            self.defs.push(DefSite { binding: b, point: e.span.id, source: Some(var) });
            params.push(var);
            scope.push((p.clone(), b));
        }
        self.scopes.push(scope);
        let ret = self.scalar(Scalar::Unknown);
        self.frames.push(Frame { ret: Some(ret), base, captured: BTreeSet::new() });
        self.stmt(&fb.body)?;
        let frame = self.frames.pop().expect("pushed above");
        self.scopes.pop();
        let v = self.s.fresh(Shape::Fun(params, ret));
        self.captures.push((v, frame.captured.into_iter().collect()));
        Ok(v)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), InferenceError> {
        match &s.kind {
            StmtKind::Skip | StmtKind::Break => {}
            StmtKind::Seq(a, b) => {
                self.stmt(a)?;
                self.stmt(b)?;
            }
            StmtKind::Eval(e) => {
                self.expr(e)?;
            }
            StmtKind::Local(names, es, body) => {
                if names.len() > 1 || es.len() > 1 {
                    return Err(out_of_scope("multiple local variables in one declaration", s.span));
                }
                let source = es.first().map(|e| self.expr(e)).transpose()?;
                let b = self.bind(&names[0], s.span, s.span.id);
                if let Some(src) = source {
                    self.cs.push(Constraint::Sub(src, self.bindings[b.0].var));
                }
                self.defs.push(DefSite { binding: b, point: s.span.id, source });
                self.scopes.push(vec![(names[0].clone(), b)]);
                self.stmt(body)?;
                self.scopes.pop();
            }
            StmtKind::Assign(targets, es) => {
                if targets.len() != 1 || es.len() != 1 {
                    return Err(out_of_scope("multiple assignment", s.span));
                }
                let (t, e) = (&targets[0], &es[0]);
                match &t.kind {
                    ExprKind::Var(n) => {
                        let value = self.expr(e)?;
                        let Some(b) = self.use_var(n, t)? else {
                            return Err(out_of_scope(format!("assignment to builtin {n}"), t.span));
                        };
                        self.expr_var.insert(t.span.id, self.bindings[b.0].var);
                        self.cs.push(Constraint::Sub(value, self.bindings[b.0].var));
                        self.defs.push(DefSite { binding: b, point: s.span.id, source: Some(value) });
                    }
                    ExprKind::Index(tab, k) => {
                        let key = literal_key(k)?;
                        let table = self.expr(tab)?;
                        self.expr(k)?;
                        let value = self.expr(e)?;
                        self.cs.push(Constraint::SetField { table, key, value });
                    }
                    _ => return Err(out_of_scope("assignment target", t.span)),
                }
            }
            StmtKind::Return(es) => {
                if es.len() > 1 {
                    return Err(out_of_scope("multiple return values", s.span));
                }
                let v = es.first().map(|e| self.expr(e)).transpose()?;
                if let (Some(v), Some(ret)) = (v, self.frames.last().and_then(|f| f.ret)) {
                    self.cs.push(Constraint::Sub(v, ret));
                }
            }
            StmtKind::If(c, a, b) => {
                self.expr(c)?;
                self.stmt(a)?;
                self.stmt(b)?;
            }
            StmtKind::While(c, b) => {
                self.expr(c)?;
                self.stmt(b)?;
            }
            _ => return Err(out_of_scope("runtime or surface-only statement", s.span)),
        }
        Ok(())
    }
}

fn span_of(t: &Term, id: NodeId) -> Span {
    let mut sp = t.span;
    t.walk(&mut |n| {
        if n.span().id == id {
            sp = n.span();
        }
    });
    sp
}

/// Infers types for a desugared program.
pub fn infer(t: &Term) -> Result<TypedProgram, InferenceError> {
    infer_with(t, &[])
}

/// As [`infer`], with extra type ascriptions on bindings, given as
/// `(binding index, type)`.
pub fn infer_with(t: &Term, ascriptions: &[(usize, StaticType)]) -> Result<TypedProgram, InferenceError> {
    let mut g = Gen {
        s: Solver::default(),
        cs: Vec::new(),
        scopes: Vec::new(),
        frames: vec![Frame { ret: None, base: 0, captured: BTreeSet::new() }],
        bindings: Vec::new(),
        uses: HashMap::new(),
        expr_var: HashMap::new(),
        defs: Vec::new(),
        captures: Vec::new(),
        setmetatables: Vec::new(),
        reads: Vec::new(),
    };
    g.stmt(t)?;
    for (i, ty) in ascriptions {
        let Some(b) = g.bindings.get(*i) else { continue };
        let bv = b.var;
        let v = g.s.build(ty, &mut Vec::new());
        g.cs.push(Constraint::Equal(bv, v));
    }

    let mut resolved = vec![false; g.cs.len()];
    loop {
        g.s.changed = false;
        for (i, c) in g.cs.iter().enumerate() {
            match g.s.apply(c) {
                Ok(done) => resolved[i] |= done,
                Err((left, right)) => {
                    let sp = g.reads.iter().find(|(_, j)| *j == i).map_or(t.span, |(id, _)| span_of(t, *id));
                    return Err(InferenceError::Unsatisfiable { left, right, line: sp.line, col: sp.col });
                }
            }
        }
        if !g.s.changed {
            break;
        }
    }
    let unmatched = g.reads.iter().filter(|(_, i)| !resolved[*i]).map(|(id, _)| *id).collect();
    Ok(TypedProgram {
        term: t.clone(),
        solver: g.s,
        bindings: g.bindings,
        uses: g.uses,
        expr_var: g.expr_var,
        defs: g.defs,
        captures: g.captures,
        setmetatables: g.setmetatables,
        unmatched,
    })
}
