//! Evaluation contexts as child-index paths, and the unique decomposition of
//! a term into a context and a redex.

use super::{list_values, FinalKind};
use crate::frontend::ast::*;
use crate::frontend::print::{print_expr, print_stmt_oneline};

#[derive(Clone, Copy, Debug)]
pub enum NodeRef<'a> {
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

impl NodeRef<'_> {
    pub fn print_oneline(&self) -> String {
        match self {
            NodeRef::Stmt(s) => print_stmt_oneline(s),
            NodeRef::Expr(e) => print_expr(e),
        }
    }
}

/// A one-hole context, identified by the path from the root to the hole.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct EvalContext {
    path: Vec<usize>,
}

#[derive(Clone, Debug)]
pub enum Decomposition {
    Final(FinalKind),
    Redex(EvalContext),
}

// Child numbering; only positions that can hold a hole are listed.
fn child(n: NodeRef<'_>, i: usize) -> NodeRef<'_> {
    match n {
        NodeRef::Stmt(s) => match &s.kind {
            StmtKind::Seq(a, b) => NodeRef::Stmt(if i == 0 { a } else { b }),
            StmtKind::Eval(e) => NodeRef::Expr(e),
            StmtKind::Local(_, es, body) => {
                if i < es.len() {
                    NodeRef::Expr(&es[i])
                } else {
                    NodeRef::Stmt(body)
                }
            }
            StmtKind::Assign(ts, es) => NodeRef::Expr(if i < ts.len() { &ts[i] } else { &es[i - ts.len()] }),
            StmtKind::Return(es) => NodeRef::Expr(&es[i]),
            StmtKind::If(c, a, b) => match i {
                0 => NodeRef::Expr(c),
                1 => NodeRef::Stmt(a),
                _ => NodeRef::Stmt(b),
            },
            StmtKind::While(c, b) => {
                if i == 0 {
                    NodeRef::Expr(c)
                } else {
                    NodeRef::Stmt(b)
                }
            }
            StmtKind::Loop(b) => NodeRef::Stmt(b),
            k => panic!("no children in {k:?}"),
        },
        NodeRef::Expr(e) => match &e.kind {
            ExprKind::Index(a, b) | ExprKind::Bin(_, a, b) => NodeRef::Expr(if i == 0 { a } else { b }),
            ExprKind::Call(f, args) => NodeRef::Expr(if i == 0 { f } else { &args[i - 1] }),
            ExprKind::Table(fields) => match &fields[i / 2] {
                TableField::Keyed(k, v) => NodeRef::Expr(if i % 2 == 0 { k } else { v }),
                TableField::Positional(v) | TableField::Named(_, v) => NodeRef::Expr(v),
            },
            ExprKind::Un(_, a) | ExprKind::Paren(a) | ExprKind::Protected(a) | ExprKind::Finalizing(a) | ExprKind::Field(a, _) => {
                NodeRef::Expr(a)
            }
            ExprKind::RetPoint(s) => NodeRef::Stmt(s),
            k => panic!("no children in {k:?}"),
        },
    }
}

enum SlotMut<'a> {
    Stmt(&'a mut Stmt),
    Expr(&'a mut Expr),
}

fn child_mut(n: SlotMut<'_>, i: usize) -> SlotMut<'_> {
    match n {
        SlotMut::Stmt(s) => match &mut s.kind {
            StmtKind::Seq(a, b) => SlotMut::Stmt(if i == 0 { a } else { b }),
            StmtKind::Eval(e) => SlotMut::Expr(e),
            StmtKind::Local(_, es, body) => {
                if i < es.len() {
                    SlotMut::Expr(&mut es[i])
                } else {
                    SlotMut::Stmt(body)
                }
            }
            StmtKind::Assign(ts, es) => {
                let n = ts.len();
                SlotMut::Expr(if i < n { &mut ts[i] } else { &mut es[i - n] })
            }
            StmtKind::Return(es) => SlotMut::Expr(&mut es[i]),
            StmtKind::If(c, a, b) => match i {
                0 => SlotMut::Expr(c),
                1 => SlotMut::Stmt(a),
                _ => SlotMut::Stmt(b),
            },
            StmtKind::While(c, b) => {
                if i == 0 {
                    SlotMut::Expr(c)
                } else {
                    SlotMut::Stmt(b)
                }
            }
            StmtKind::Loop(b) => SlotMut::Stmt(b),
            k => panic!("no children in {k:?}"),
        },
        SlotMut::Expr(e) => match &mut e.kind {
            ExprKind::Index(a, b) | ExprKind::Bin(_, a, b) => SlotMut::Expr(if i == 0 { a } else { b }),
            ExprKind::Call(f, args) => SlotMut::Expr(if i == 0 { f } else { &mut args[i - 1] }),
            ExprKind::Table(fields) => match &mut fields[i / 2] {
                TableField::Keyed(k, v) => SlotMut::Expr(if i % 2 == 0 { k } else { v }),
                TableField::Positional(v) | TableField::Named(_, v) => SlotMut::Expr(v),
            },
            ExprKind::Un(_, a) | ExprKind::Paren(a) | ExprKind::Protected(a) | ExprKind::Finalizing(a) | ExprKind::Field(a, _) => {
                SlotMut::Expr(a)
            }
            ExprKind::RetPoint(s) => SlotMut::Stmt(s),
            k => panic!("no children in {k:?}"),
        },
    }
}

impl EvalContext {
    pub fn path(&self) -> &[usize] {
        &self.path
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn prefix(&self, n: usize) -> EvalContext {
        EvalContext { path: self.path[..n].to_vec() }
    }

    pub fn redex<'a>(&self, t: &'a Term) -> NodeRef<'a> {
        self.path.iter().fold(NodeRef::Stmt(t), |n, &i| child(n, i))
    }

    /// Nodes strictly above the hole, root first.
    pub fn ancestors<'a>(&self, t: &'a Term) -> Vec<NodeRef<'a>> {
        let mut out = Vec::with_capacity(self.path.len());
        let mut n = NodeRef::Stmt(t);
        for &i in &self.path {
            out.push(n);
            n = child(n, i);
        }
        out
    }

    fn slot<'a>(&self, t: &'a mut Term) -> SlotMut<'a> {
        self.path.iter().fold(SlotMut::Stmt(t), |n, &i| child_mut(n, i))
    }

    pub fn stmt_mut<'a>(&self, t: &'a mut Term) -> &'a mut Stmt {
        match self.slot(t) {
            SlotMut::Stmt(s) => s,
            SlotMut::Expr(_) => panic!("hole holds an expression"),
        }
    }

    pub fn expr_mut<'a>(&self, t: &'a mut Term) -> &'a mut Expr {
        match self.slot(t) {
            SlotMut::Expr(e) => e,
            SlotMut::Stmt(_) => panic!("hole holds a statement"),
        }
    }

    /// `E[[s]]`.
    pub fn plug_stmt(&self, t: &Term, s: Stmt) -> Term {
        let mut out = t.clone();
        *self.stmt_mut(&mut out) = s;
        out
    }

    /// `E[[e]]`.
    pub fn plug_expr(&self, t: &Term, e: Expr) -> Term {
        let mut out = t.clone();
        *self.expr_mut(&mut out) = e;
        out
    }
}

enum Found {
    Redex,
    Done,
    Value,
    Tuple,
}

/// Splits `t` into `E[[redex]]`, or reports the final form.
pub fn decompose(t: &Term) -> Decomposition {
    let mut path = Vec::new();
    match find_stmt(t, &mut path) {
        Found::Done => return Decomposition::Final(FinalKind::Empty),
        Found::Redex => {}
        Found::Value | Found::Tuple => unreachable!("statements are not values"),
    }
    let ctx = EvalContext { path };
    match ctx.redex(t) {
        NodeRef::Stmt(Stmt { kind: StmtKind::Return(es), .. }) => {
            let inside_fn = ctx
                .ancestors(t)
                .iter()
                .any(|n| matches!(n, NodeRef::Expr(Expr { kind: ExprKind::RetPoint(_), .. })));
            if !inside_fn {
                return Decomposition::Final(FinalKind::Returned(list_values(es)));
            }
        }
        NodeRef::Stmt(Stmt { kind: StmtKind::Raise(v), .. }) if ctx.is_empty() => {
            return Decomposition::Final(FinalKind::Error(v.clone()));
        }
        _ => {}
    }
    Decomposition::Redex(ctx)
}

/// Descends into a single-value position; a tuple there is a redex.
fn single(e: &Expr, i: usize, path: &mut Vec<usize>) -> bool {
    path.push(i);
    match find_expr(e, path) {
        Found::Redex | Found::Tuple => true,
        Found::Value | Found::Done => {
            path.pop();
            false
        }
    }
}

/// Descends into an expression list; only the last element may stay a tuple.
fn list(es: &[Expr], base: usize, path: &mut Vec<usize>) -> bool {
    for (j, e) in es.iter().enumerate() {
        path.push(base + j);
        match find_expr(e, path) {
            Found::Redex => return true,
            Found::Tuple if j + 1 < es.len() => return true,
            _ => {
                path.pop();
            }
        }
    }
    false
}

fn find_stmt(s: &Stmt, path: &mut Vec<usize>) -> Found {
    // Descending leaves `path` at the innermost redex; otherwise `s` is it.
    let _descended = match &s.kind {
        StmtKind::Skip => return Found::Done,
        StmtKind::Seq(a, _) => {
            if a.is_skip() {
                false
            } else {
                path.push(0);
                find_stmt(a, path);
                true
            }
        }
        StmtKind::Eval(e) => {
            path.push(0);
            match find_expr(e, path) {
                Found::Redex => true,
                _ => {
                    path.pop();
                    false
                }
            }
        }
        StmtKind::Local(_, es, _) => list(es, 0, path),
        StmtKind::Assign(ts, es) => {
            let mut found = false;
            for (i, t) in ts.iter().enumerate() {
                if let ExprKind::Index(a, b) = &t.kind {
                    path.push(i);
                    if single(a, 0, path) || single(b, 1, path) {
                        found = true;
                        break;
                    }
                    path.pop();
                }
            }
            found || list(es, ts.len(), path)
        }
        StmtKind::Return(es) => list(es, 0, path),
        StmtKind::If(c, _, _) => single(c, 0, path),
        StmtKind::Loop(b) => {
            if matches!(b.kind, StmtKind::Skip | StmtKind::While(..)) {
                false
            } else {
                path.push(0);
                find_stmt(b, path);
                true
            }
        }
        _ => false,
    };
    Found::Redex
}

fn find_expr(e: &Expr, path: &mut Vec<usize>) -> Found {
    let _descended = match &e.kind {
        ExprKind::Val(_) => return Found::Value,
        ExprKind::Tuple(_) => return Found::Tuple,
        ExprKind::Index(a, b) => single(a, 0, path) || single(b, 1, path),
        ExprKind::Call(f, args) => single(f, 0, path) || list(args, 1, path),
        ExprKind::Table(fields) => {
            let mut found = false;
            for (j, f) in fields.iter().enumerate() {
                if let TableField::Keyed(k, v) = f {
                    if single(k, 2 * j, path) || single(v, 2 * j + 1, path) {
                        found = true;
                        break;
                    }
                }
            }
            found
        }
        ExprKind::Bin(BinOp::And | BinOp::Or, a, _) => single(a, 0, path),
        ExprKind::Bin(_, a, b) => single(a, 0, path) || single(b, 1, path),
        ExprKind::Un(_, a) => single(a, 0, path),
        ExprKind::Paren(a) | ExprKind::Protected(a) | ExprKind::Finalizing(a) => {
            path.push(0);
            match find_expr(a, path) {
                Found::Redex => true,
                _ => {
                    path.pop();
                    false
                }
            }
        }
        ExprKind::RetPoint(s) => {
            path.push(0);
            match find_stmt(s, path) {
                Found::Redex => true,
                _ => {
                    path.pop();
                    false
                }
            }
        }
        _ => false,
    };
    Found::Redex
}
