//! Capture-avoiding replacement of variables by references, and load-time
//! resolution of free names.

use std::collections::{BTreeMap, BTreeSet};

use crate::frontend::ast::*;
use crate::heaps::{Builtin, ObjectStore, TableId, TableObject, Value, ValueRef};

/// `s[x₁\r₁, ...]`: replaces free occurrences of each name by its reference.
pub fn substitute(s: &mut Stmt, map: &BTreeMap<String, ValueRef>) {
    if map.is_empty() {
        return;
    }
    let mut f = |e: &mut Expr, bound: &BTreeSet<String>, _target: bool| {
        if let ExprKind::Var(n) = &e.kind {
            if !bound.contains(n) {
                if let Some(r) = map.get(n) {
                    e.kind = ExprKind::Ref(*r);
                }
            }
        }
    };
    visit_stmt(s, &mut BTreeSet::new(), &mut f);
}

/// Free names become builtins, or fields of a single global table that is
/// allocated on first use. Assignment targets always denote globals.
pub fn resolve_globals(t: &mut Term, theta: &mut ObjectStore) {
    let mut globals: Option<TableId> = None;
    let mut f = |e: &mut Expr, bound: &BTreeSet<String>, target: bool| {
        let ExprKind::Var(n) = &e.kind else { return };
        if bound.contains(n) {
            return;
        }
        if let Some(b) = Builtin::from_name(n).filter(|_| !target) {
            e.kind = ExprKind::Val(Value::Builtin(b));
            return;
        }
        let g = *globals.get_or_insert_with(|| theta.alloc_table(TableObject::new()));
        let key = Expr::val(Value::str(n.clone()));
        e.kind = ExprKind::Index(Box::new(Expr::table(g)), Box::new(key));
    };
    visit_stmt(t, &mut BTreeSet::new(), &mut f);
}

/// Called on each `Var`, with the names bound there and whether the
/// variable is an assignment target.
type VarFn<'a> = dyn FnMut(&mut Expr, &BTreeSet<String>, bool) + 'a;

fn with_bound(bound: &mut BTreeSet<String>, names: &[String], body: impl FnOnce(&mut BTreeSet<String>)) {
    let added: Vec<String> = names.iter().filter(|n| bound.insert((*n).clone())).cloned().collect();
    body(bound);
    for n in added {
        bound.remove(&n);
    }
}

fn visit_stmt(s: &mut Stmt, bound: &mut BTreeSet<String>, f: &mut VarFn<'_>) {
    match &mut s.kind {
        StmtKind::Skip | StmtKind::Break | StmtKind::Raise(_) => {}
        StmtKind::Seq(a, b) => {
            visit_stmt(a, bound, f);
            visit_stmt(b, bound, f);
        }
        StmtKind::Block(ss) => visit_block(ss, bound, f),
        StmtKind::LocalDecl(_, es) | StmtKind::Return(es) => es.iter_mut().for_each(|e| visit_expr(e, bound, f)),
        StmtKind::LocalFunction(n, fb) => {
            let n = n.clone();
            with_bound(bound, &[n], |b| visit_func(fb, b, f));
        }
        StmtKind::FunctionDecl(_, fb) => visit_func(fb, bound, f),
        StmtKind::Eval(e) => visit_expr(e, bound, f),
        StmtKind::Local(ns, es, body) => {
            es.iter_mut().for_each(|e| visit_expr(e, bound, f));
            let ns = ns.clone();
            with_bound(bound, &ns, |b| visit_stmt(body, b, f));
        }
        StmtKind::Assign(ts, es) => {
            for t in ts.iter_mut() {
                if matches!(t.kind, ExprKind::Var(_)) {
                    f(t, bound, true);
                } else {
                    visit_expr(t, bound, f);
                }
            }
            es.iter_mut().for_each(|e| visit_expr(e, bound, f));
        }
        StmtKind::If(c, a, b) => {
            visit_expr(c, bound, f);
            visit_stmt(a, bound, f);
            visit_stmt(b, bound, f);
        }
        StmtKind::While(c, b) => {
            visit_expr(c, bound, f);
            visit_stmt(b, bound, f);
        }
        StmtKind::Loop(b) => visit_stmt(b, bound, f),
    }
}

// Surface blocks: a `LocalDecl` scopes over the statements after it.
fn visit_block(ss: &mut [Stmt], bound: &mut BTreeSet<String>, f: &mut VarFn<'_>) {
    let Some((first, rest)) = ss.split_first_mut() else { return };
    match &mut first.kind {
        StmtKind::LocalDecl(ns, es) => {
            es.iter_mut().for_each(|e| visit_expr(e, bound, f));
            let ns = ns.clone();
            with_bound(bound, &ns, |b| visit_block(rest, b, f));
        }
        StmtKind::LocalFunction(n, _) => {
            let n = n.clone();
            with_bound(bound, &[n], |b| {
                visit_stmt(first, b, f);
                visit_block(rest, b, f);
            });
        }
        _ => {
            visit_stmt(first, bound, f);
            visit_block(rest, bound, f);
        }
    }
}

fn visit_func(fb: &mut FuncBody, bound: &mut BTreeSet<String>, f: &mut VarFn<'_>) {
    let ps = fb.params.clone();
    with_bound(bound, &ps, |b| visit_stmt(&mut fb.body, b, f));
}

fn visit_expr(e: &mut Expr, bound: &mut BTreeSet<String>, f: &mut VarFn<'_>) {
    match &mut e.kind {
        ExprKind::Var(_) => f(e, bound, false),
        ExprKind::Val(_) | ExprKind::Ref(_) | ExprKind::Tuple(_) | ExprKind::Raise(_) => {}
        ExprKind::Index(a, b) | ExprKind::Bin(_, a, b) => {
            visit_expr(a, bound, f);
            visit_expr(b, bound, f);
        }
        ExprKind::Field(a, _) | ExprKind::Un(_, a) | ExprKind::Paren(a) | ExprKind::Protected(a) | ExprKind::Finalizing(a) => {
            visit_expr(a, bound, f)
        }
        ExprKind::Call(g, args) => {
            visit_expr(g, bound, f);
            args.iter_mut().for_each(|a| visit_expr(a, bound, f));
        }
        ExprKind::Function(fb) => visit_func(fb, bound, f),
        ExprKind::Table(fields) => {
            for fld in fields {
                match fld {
                    TableField::Positional(v) | TableField::Named(_, v) => visit_expr(v, bound, f),
                    TableField::Keyed(k, v) => {
                        visit_expr(k, bound, f);
                        visit_expr(v, bound, f);
                    }
                }
            }
        }
        ExprKind::RetPoint(s) => visit_stmt(s, bound, f),
    }
}
