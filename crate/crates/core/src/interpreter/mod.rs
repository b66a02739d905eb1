//! Small-step reduction `↦L` over configurations `σ ; θ ; s`.
//!
//! Evaluation is left to right and call-by-value. A term is split into an
//! evaluation context and a redex by [`decompose`]; contexts are paths of
//! child positions from the root. Variables are replaced by the references
//! allocated for them, so a term's free locations are exactly its roots.

mod builtins;
mod context;
mod subst;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::frontend::ast::*;
use crate::heaps::{Builtin, ClosureObject, Key, ObjectStore, TableObject, Value, ValueStore};

pub use context::{decompose, Decomposition, EvalContext, NodeRef};
pub use subst::{resolve_globals, substitute};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub sigma: ValueStore,
    pub theta: ObjectStore,
    pub term: Term,
    /// Lines written by `print`, in order.
    pub output: Vec<String>,
}

impl Configuration {
    /// Initial configuration for a desugared program. Free names become
    /// builtins or fields of a global table allocated on demand.
    pub fn new(term: Term) -> Configuration {
        let mut c = Configuration {
            sigma: ValueStore::default(),
            theta: ObjectStore::default(),
            term,
            output: Vec::new(),
        };
        resolve_globals(&mut c.term, &mut c.theta);
        c
    }

    pub fn from_source(src: &str) -> Result<Configuration, crate::frontend::SyntaxError> {
        Ok(Configuration::new(crate::frontend::desugar(&crate::frontend::parse_str(src)?)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FinalKind {
    /// `E[[return v...]]` with no enclosing function body.
    Returned(Vec<Value>),
    /// `$err v` at top level.
    Error(Value),
    /// `;`
    Empty,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("stuck term: {0}")]
pub struct StuckTerm(pub String);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepInfo {
    pub rule: &'static str,
    pub redex: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Stepped(StepInfo),
    Final(FinalKind),
    /// The redex is `collectgarbage(...)`; nothing was reduced.
    GcRequest,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Stepped(Configuration),
    Final(FinalKind),
}

/// One `↦L` step. `collectgarbage()` reduces to `0`.
pub fn step_l(c: &Configuration) -> Result<StepOutcome, StuckTerm> {
    let mut next = c.clone();
    match step_in_place(&mut next, false)? {
        Step::Final(k) => Ok(StepOutcome::Final(k)),
        Step::Stepped(_) => Ok(StepOutcome::Stepped(next)),
        Step::GcRequest => unreachable!("gc requests are reduced when not honored"),
    }
}

/// One `↦L` step on `c` in place. With `honor_gc`, a pending
/// `collectgarbage()` is reported instead of reduced.
pub fn step_in_place(c: &mut Configuration, honor_gc: bool) -> Result<Step, StuckTerm> {
    let ctx = match decompose(&c.term) {
        Decomposition::Final(k) => return Ok(Step::Final(k)),
        Decomposition::Redex(ctx) => ctx,
    };
    if honor_gc && is_gc_call(&ctx, &c.term) {
        return Ok(Step::GcRequest);
    }
    let redex = ctx.redex(&c.term).print_oneline();
    let rule = reduce(c, &ctx)?;
    Ok(Step::Stepped(StepInfo { rule, redex }))
}

fn is_gc_call(ctx: &EvalContext, term: &Term) -> bool {
    matches!(ctx.redex(term), NodeRef::Expr(Expr { kind: ExprKind::Call(f, _), .. })
        if matches!(f.kind, ExprKind::Val(Value::Builtin(Builtin::CollectGarbage))))
}

/// Reduces a pending `collectgarbage(...)` redex to `0`.
pub fn complete_gc_request(c: &mut Configuration) {
    if let Decomposition::Redex(ctx) = decompose(&c.term) {
        if is_gc_call(&ctx, &c.term) {
            *ctx.expr_mut(&mut c.term) = Expr::val(Value::Num(0.0));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunOutcome {
    Final(FinalKind, Configuration),
    FuelExhausted(Configuration),
}

/// Runs `↦L` alone for at most `fuel` steps.
pub fn run_pure(c: Configuration, fuel: usize) -> Result<RunOutcome, StuckTerm> {
    let mut c = c;
    for _ in 0..fuel {
        if let Step::Final(k) = step_in_place(&mut c, false)? {
            return Ok(RunOutcome::Final(k, c));
        }
    }
    match decompose(&c.term) {
        Decomposition::Final(k) => Ok(RunOutcome::Final(k, c)),
        Decomposition::Redex(_) => Ok(RunOutcome::FuelExhausted(c)),
    }
}

fn err(msg: impl Into<String>) -> Result<Reduced, StuckTerm> {
    Ok(Reduced::Raise(Value::Str(msg.into())))
}

enum Reduced {
    Stmt(Stmt),
    Expr(Expr),
    Raise(Value),
}

/// Values of a fully evaluated expression list; a trailing tuple expands.
fn list_values(es: &[Expr]) -> Vec<Value> {
    let mut out = Vec::new();
    for (i, e) in es.iter().enumerate() {
        match &e.kind {
            ExprKind::Val(v) => out.push(v.clone()),
            ExprKind::Tuple(vs) if i + 1 == es.len() => out.extend(vs.iter().cloned()),
            ExprKind::Tuple(vs) => out.push(vs.first().cloned().unwrap_or(Value::Nil)),
            _ => unreachable!("list not evaluated"),
        }
    }
    out
}

fn adjust(mut vs: Vec<Value>, n: usize) -> Vec<Value> {
    vs.resize(n, Value::Nil);
    vs
}

fn val(e: &Expr) -> &Value {
    e.as_value().expect("operand evaluated")
}

fn reduce(c: &mut Configuration, ctx: &EvalContext) -> Result<&'static str, StuckTerm> {
    if let Some(rule) = unwind(c, ctx)? {
        return Ok(rule);
    }
    let (rule, out) = match ctx.redex(&c.term) {
        NodeRef::Stmt(s) => reduce_stmt(c, s.clone())?,
        NodeRef::Expr(e) => reduce_expr(c, e.clone())?,
    };
    let is_stmt = matches!(ctx.redex(&c.term), NodeRef::Stmt(_));
    match (out, is_stmt) {
        (Reduced::Stmt(s), true) => *ctx.stmt_mut(&mut c.term) = s,
        (Reduced::Expr(e), false) => *ctx.expr_mut(&mut c.term) = e,
        (Reduced::Raise(v), true) => *ctx.stmt_mut(&mut c.term) = Stmt::new(StmtKind::Raise(v)),
        (Reduced::Raise(v), false) => *ctx.expr_mut(&mut c.term) = Expr::new(ExprKind::Raise(v)),
        _ => unreachable!("reduct kind mismatch"),
    }
    Ok(rule)
}

/// Control transfers: `return`, `break` and `$err` move to the nearest
/// enclosing function body, loop or protected call.
fn unwind(c: &mut Configuration, ctx: &EvalContext) -> Result<Option<&'static str>, StuckTerm> {
    let signal = match ctx.redex(&c.term) {
        NodeRef::Stmt(Stmt { kind: StmtKind::Return(es), .. }) => Signal::Return(list_values(es)),
        NodeRef::Stmt(Stmt { kind: StmtKind::Break, .. }) => Signal::Break,
        NodeRef::Stmt(Stmt { kind: StmtKind::Raise(v), .. })
        | NodeRef::Expr(Expr { kind: ExprKind::Raise(v), .. }) => Signal::Raise(v.clone()),
        _ => return Ok(None),
    };
    let ancestors = ctx.ancestors(&c.term);
    let target = ancestors.iter().rposition(|n| match (&signal, n) {
        (Signal::Return(_), NodeRef::Expr(e)) => matches!(e.kind, ExprKind::RetPoint(_)),
        (Signal::Break, NodeRef::Stmt(s)) => matches!(s.kind, StmtKind::Loop(_)),
        (Signal::Break, NodeRef::Expr(e)) => matches!(e.kind, ExprKind::RetPoint(_)),
        (Signal::Raise(_), NodeRef::Expr(e)) => matches!(e.kind, ExprKind::Protected(_)),
        _ => false,
    });
    let at = ctx.prefix(target.unwrap_or(0));
    match (signal, target) {
        (Signal::Return(vs), Some(_)) => {
            *at.expr_mut(&mut c.term) = Expr::new(ExprKind::Tuple(vs));
            Ok(Some("return"))
        }
        (Signal::Return(_), None) => Err(StuckTerm("return outside a function body".into())),
        (Signal::Break, Some(i)) => {
            if !matches!(ancestors[i], NodeRef::Stmt(_)) {
                return Err(StuckTerm("break crosses a function boundary".into()));
            }
            *at.stmt_mut(&mut c.term) = Stmt::skip();
            Ok(Some("break"))
        }
        (Signal::Break, None) => Err(StuckTerm("break outside a loop".into())),
        (Signal::Raise(v), Some(_)) => {
            *at.expr_mut(&mut c.term) = Expr::new(ExprKind::Tuple(vec![Value::Bool(false), v]));
            Ok(Some("pcall-error"))
        }
        (Signal::Raise(v), None) => {
            c.term = Stmt::new(StmtKind::Raise(v));
            Ok(Some("error-propagate"))
        }
    }
}

enum Signal {
    Return(Vec<Value>),
    Break,
    Raise(Value),
}

fn reduce_stmt(c: &mut Configuration, s: Stmt) -> Result<(&'static str, Reduced), StuckTerm> {
    let span = s.span;
    let out = match s.kind {
        StmtKind::Seq(a, b) if a.is_skip() => ("seq", Reduced::Stmt(*b)),
        StmtKind::Eval(_) => ("discard", Reduced::Stmt(Stmt::at(StmtKind::Skip, span))),
        StmtKind::Local(names, es, body) => {
            let vs = adjust(list_values(&es), names.len());
            let mut map = BTreeMap::new();
            for (n, v) in names.iter().zip(vs) {
                map.insert(n.clone(), c.sigma.alloc(v));
            }
            let mut body = *body;
            substitute(&mut body, &map);
            ("local", Reduced::Stmt(body))
        }
        StmtKind::Assign(ts, es) => {
            let vs = adjust(list_values(&es), ts.len());
            for (t, v) in ts.iter().zip(vs) {
                match &t.kind {
                    ExprKind::Ref(r) => match c.sigma.map.get_mut(r) {
                        Some(slot) => *slot = v,
                        None => return Ok(("assign", err(format!("dangling reference r{}", r.0))?)),
                    },
                    ExprKind::Index(tb, k) => {
                        let (tb, k) = (val(tb), val(k));
                        let Value::Table(tid) = tb else {
                            return Ok(("assign", err(format!("attempt to index a {} value", tb.type_name()))?));
                        };
                        let Some(obj) = c.theta.table_mut(*tid) else {
                            return Ok(("assign", err(format!("dangling table tid{}", tid.0))?));
                        };
                        if let Err(e) = obj.set(k.clone(), v) {
                            let what = if matches!(k, Value::Nil) { "nil" } else { "NaN" };
                            let _ = e;
                            return Ok(("assign", err(format!("table index is {what}"))?));
                        }
                    }
                    _ => return Err(StuckTerm("invalid assignment target".into())),
                }
            }
            ("assign", Reduced::Stmt(Stmt::at(StmtKind::Skip, span)))
        }
        StmtKind::If(cond, a, b) => {
            if val(&cond).truthy() {
                ("if-true", Reduced::Stmt(*a))
            } else {
                ("if-false", Reduced::Stmt(*b))
            }
        }
        StmtKind::While(cond, body) => {
            let w = Stmt::at(StmtKind::While(cond, body), span);
            ("while", Reduced::Stmt(Stmt::at(StmtKind::Loop(Box::new(w)), span)))
        }
        StmtKind::Loop(inner) => match inner.kind {
            StmtKind::Skip => ("loop-end", Reduced::Stmt(Stmt::at(StmtKind::Skip, span))),
            StmtKind::While(cond, body) => {
                let again = Stmt::at(StmtKind::While(cond.clone(), body.clone()), inner.span);
                let iter = Stmt::at(StmtKind::Seq(body, Box::new(again)), inner.span);
                let test = Stmt::at(StmtKind::If(cond, Box::new(iter), Box::new(Stmt::skip())), inner.span);
                ("loop-unfold", Reduced::Stmt(Stmt::at(StmtKind::Loop(Box::new(test)), span)))
            }
            k => return Err(StuckTerm(format!("loop redex {k:?}"))),
        },
        k => return Err(StuckTerm(format!("no rule for statement {:?}", k))),
    };
    Ok(out)
}

fn reduce_expr(c: &mut Configuration, e: Expr) -> Result<(&'static str, Reduced), StuckTerm> {
    let span = e.span;
    let ex = |k: ExprKind| Reduced::Expr(Expr::at(k, span));
    let out = match e.kind {
        ExprKind::Ref(r) => match c.sigma.get(r) {
            Some(v) => ("deref", ex(ExprKind::Val(v.clone()))),
            None => ("deref", err(format!("dangling reference r{}", r.0))?),
        },
        ExprKind::Var(n) => return Err(StuckTerm(format!("free variable {n}"))),
        ExprKind::Tuple(vs) => ("truncate", ex(ExprKind::Val(vs.into_iter().next().unwrap_or(Value::Nil)))),
        ExprKind::Paren(inner) => match inner.kind {
            ExprKind::Val(v) => ("paren", ex(ExprKind::Val(v))),
            ExprKind::Tuple(vs) => ("paren", ex(ExprKind::Val(vs.into_iter().next().unwrap_or(Value::Nil)))),
            k => return Err(StuckTerm(format!("paren redex {k:?}"))),
        },
        ExprKind::Index(t, k) => index(c, val(&t), val(&k), span)?,
        ExprKind::Function(fb) => {
            let cid = c.theta.alloc_closure(ClosureObject { params: fb.params, body: fb.body });
            ("closure", ex(ExprKind::Val(Value::Closure(cid))))
        }
        ExprKind::Table(fields) => {
            let mut t = TableObject::new();
            for f in &fields {
                let TableField::Keyed(k, v) = f else {
                    return Err(StuckTerm("table constructor not desugared".into()));
                };
                let (k, v) = (val(k).clone(), val(v).clone());
                if matches!(v, Value::Nil) {
                    continue;
                }
                if let Err(_e) = Key::new(k.clone()) {
                    let what = if matches!(k, Value::Nil) { "nil" } else { "NaN" };
                    return Ok(("table", err(format!("table index is {what}"))?));
                }
                t.set(k, v).expect("key checked");
            }
            let tid = c.theta.alloc_table(t);
            ("table", ex(ExprKind::Val(Value::Table(tid))))
        }
        ExprKind::Call(f, args) => {
            let vs = list_values(&args);
            match val(&f).clone() {
                Value::Closure(cid) => {
                    let Some(clo) = c.theta.closure(cid) else {
                        return Ok(("call", err(format!("dangling closure cid{}", cid.0))?));
                    };
                    let (params, mut body) = (clo.params.clone(), clo.body.clone());
                    let vs = adjust(vs, params.len());
                    let mut map = BTreeMap::new();
                    for (p, v) in params.iter().zip(vs) {
                        map.insert(p.clone(), c.sigma.alloc(v));
                    }
                    substitute(&mut body, &map);
                    ("call", ex(ExprKind::RetPoint(Box::new(body))))
                }
                Value::Builtin(b) => builtins::apply(c, b, vs, span)?,
                other => ("call", err(format!("attempt to call a {} value", other.type_name()))?),
            }
        }
        ExprKind::Bin(op @ (BinOp::And | BinOp::Or), a, b) => {
            let a = val(&a).clone();
            let keep_left = (op == BinOp::And) != a.truthy();
            let rule = if op == BinOp::And { "and" } else { "or" };
            if keep_left {
                (rule, ex(ExprKind::Val(a)))
            } else if matches!(b.kind, ExprKind::Call(..)) {
                (rule, ex(ExprKind::Paren(b)))
            } else {
                (rule, Reduced::Expr(*b))
            }
        }
        ExprKind::Bin(op, a, b) => ("binop", arith(op, val(&a), val(&b), span)),
        ExprKind::Un(op, a) => ("unop", unary(op, val(&a), &c.theta, span)),
        ExprKind::RetPoint(body) if body.is_skip() => ("return-none", ex(ExprKind::Tuple(Vec::new()))),
        ExprKind::Protected(inner) => {
            let mut vs = vec![Value::Bool(true)];
            match inner.kind {
                ExprKind::Val(v) => vs.push(v),
                ExprKind::Tuple(more) => vs.extend(more),
                k => return Err(StuckTerm(format!("pcall redex {k:?}"))),
            }
            ("pcall-ok", ex(ExprKind::Tuple(vs)))
        }
        ExprKind::Finalizing(_) => ("finalizer-done", ex(ExprKind::Tuple(Vec::new()))),
        k => return Err(StuckTerm(format!("no rule for expression {k:?}"))),
    };
    Ok(out)
}

fn index(c: &Configuration, t: &Value, k: &Value, span: Span) -> Result<(&'static str, Reduced), StuckTerm> {
    let Value::Table(tid) = t else {
        return Ok(("index", err(format!("attempt to index a {} value", t.type_name()))?));
    };
    let Some(obj) = c.theta.table(*tid) else {
        return Ok(("index", err(format!("dangling table tid{}", tid.0))?));
    };
    let v = obj.get(k);
    if matches!(v, Value::Nil) {
        if let Value::Table(next) = crate::heaps::index_metatable(*tid, "__index", &c.theta) {
            let e = Expr::at(
                ExprKind::Index(Box::new(Expr::table(next)), Box::new(Expr::val(k.clone()))),
                span,
            );
            return Ok(("index-meta", Reduced::Expr(e)));
        }
    }
    Ok(("index", Reduced::Expr(Expr::at(ExprKind::Val(v), span))))
}

fn num_arith(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        BinOp::Mod => a - (a / b).floor() * b,
        BinOp::Pow => a.powf(b),
        _ => unreachable!(),
    }
}

fn arith(op: BinOp, a: &Value, b: &Value, span: Span) -> Reduced {
    let v = |v: Value| Reduced::Expr(Expr::at(ExprKind::Val(v), span));
    let fail = |m: String| Reduced::Raise(Value::Str(m));
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod | BinOp::Pow => match (a, b) {
            (Value::Num(x), Value::Num(y)) => v(Value::Num(num_arith(op, *x, *y))),
            _ => {
                let bad = if matches!(a, Value::Num(_)) { b } else { a };
                fail(format!("attempt to perform arithmetic on a {} value", bad.type_name()))
            }
        },
        BinOp::Concat => match (a, b) {
            (Value::Str(_) | Value::Num(_), Value::Str(_) | Value::Num(_)) => {
                v(Value::Str(format!("{a}{b}")))
            }
            _ => {
                let bad = if matches!(a, Value::Str(_) | Value::Num(_)) { b } else { a };
                fail(format!("attempt to concatenate a {} value", bad.type_name()))
            }
        },
        BinOp::Eq => v(Value::Bool(a.lua_eq(b))),
        BinOp::Ne => v(Value::Bool(!a.lua_eq(b))),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (a, b) {
                (Value::Num(x), Value::Num(y)) => x.partial_cmp(y),
                (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
                _ => {
                    return fail(format!("attempt to compare {} with {}", a.type_name(), b.type_name()));
                }
            };
            use std::cmp::Ordering::*;
            let r = match (op, ord) {
                (_, None) => false,
                (BinOp::Lt, Some(o)) => o == Less,
                (BinOp::Le, Some(o)) => o != Greater,
                (BinOp::Gt, Some(o)) => o == Greater,
                (BinOp::Ge, Some(o)) => o != Less,
                _ => unreachable!(),
            };
            v(Value::Bool(r))
        }
        BinOp::And | BinOp::Or => unreachable!("short-circuit operators reduce separately"),
    }
}

fn unary(op: UnOp, a: &Value, theta: &ObjectStore, span: Span) -> Reduced {
    let v = |v: Value| Reduced::Expr(Expr::at(ExprKind::Val(v), span));
    match (op, a) {
        (UnOp::Not, a) => v(Value::Bool(!a.truthy())),
        (UnOp::Neg, Value::Num(n)) => v(Value::Num(-n)),
        (UnOp::Neg, a) => Reduced::Raise(Value::Str(format!(
            "attempt to perform arithmetic on a {} value",
            a.type_name()
        ))),
        (UnOp::Len, Value::Str(s)) => v(Value::Num(s.len() as f64)),
        (UnOp::Len, Value::Table(t)) => match theta.table(*t) {
            Some(obj) => v(Value::Num(obj.border() as f64)),
            None => Reduced::Raise(Value::Str(format!("dangling table tid{}", t.0))),
        },
        (UnOp::Len, a) => Reduced::Raise(Value::Str(format!("attempt to get length of a {} value", a.type_name()))),
    }
}

/// Splices a finalizer call `v(tid)` in front of the current redex: before
/// the redex statement, or as the ignored argument of a thunk returning the
/// redex expression. The call is wrapped in a `$fin` marker so schedulers
/// can tell that a finalizer is running. False when the configuration is
/// final.
pub fn interleave_finalizer(term: &mut Term, f: Value, tid: crate::heaps::TableId) -> bool {
    let ctx = match decompose(term) {
        Decomposition::Final(_) => return false,
        Decomposition::Redex(ctx) => ctx,
    };
    let call = Expr::new(ExprKind::Finalizing(Box::new(Expr::call(Expr::val(f), vec![Expr::table(tid)]))));
    match ctx.redex(term) {
        NodeRef::Stmt(_) => {
            let slot = ctx.stmt_mut(term);
            let old = std::mem::replace(slot, Stmt::skip());
            *slot = Stmt::seq(Stmt::eval(call), old);
        }
        NodeRef::Expr(_) => {
            let slot = ctx.expr_mut(term);
            let old = std::mem::replace(slot, Expr::val(Value::Nil));
            let thunk = FuncBody { params: Vec::new(), body: Stmt::new(StmtKind::Return(vec![old])) };
            *slot = Expr::call(Expr::new(ExprKind::Function(Box::new(thunk))), vec![call]);
        }
    }
    true
}

/// True while a spliced finalizer call has not returned.
pub fn finalizer_running(term: &Term) -> bool {
    let mut found = false;
    term.walk(&mut |n| {
        if let Node::Expr(Expr { kind: ExprKind::Finalizing(_), .. }) = n {
            found = true;
        }
    });
    found
}
