//! Surface-to-core translation. Blocks become right-nested sequences,
//! block-scoped `local` declarations take the rest of their block as body,
//! `t.k` becomes `t["k"]` and table constructors get explicit keys.

use super::ast::*;
use crate::heaps::Value;

pub fn desugar(t: &Stmt) -> Stmt {
    let mut d = Desugarer { next: t.max_id() };
    d.stmt(t)
}

pub fn desugar_expr(e: &Expr) -> Expr {
    let mut next = 0;
    e.walk(&mut |n| next = next.max(n.span().id));
    Desugarer { next }.expr(e)
}

/// True when the term uses only core forms.
pub fn is_core(t: &Stmt) -> bool {
    let mut ok = true;
    t.walk(&mut |n| match n {
        Node::Stmt(s) => {
            if matches!(
                s.kind,
                StmtKind::Block(_)
                    | StmtKind::LocalDecl(..)
                    | StmtKind::LocalFunction(..)
                    | StmtKind::FunctionDecl(..)
            ) {
                ok = false
            }
        }
        Node::Expr(e) => match &e.kind {
            ExprKind::Field(..) => ok = false,
            ExprKind::Table(fs) => {
                if fs.iter().any(|f| !matches!(f, TableField::Keyed(..))) {
                    ok = false
                }
            }
            _ => {}
        },
    });
    ok
}

struct Desugarer {
    next: NodeId,
}

impl Desugarer {
    fn fresh(&mut self, like: Span) -> Span {
        self.next += 1;
        Span::new(like.line, like.col, self.next)
    }

    fn stmt(&mut self, s: &Stmt) -> Stmt {
        let span = s.span;
        let kind = match &s.kind {
            StmtKind::Block(ss) => return self.block(ss, span),
            StmtKind::LocalDecl(..) | StmtKind::LocalFunction(..) => return self.block(std::slice::from_ref(s), span),
            StmtKind::FunctionDecl(n, fb) => {
                let target = Expr::at(ExprKind::Var(n.clone()), self.fresh(span));
                let f = Expr::at(ExprKind::Function(Box::new(self.func(fb))), self.fresh(span));
                StmtKind::Assign(vec![target], vec![f])
            }
            StmtKind::Skip => StmtKind::Skip,
            StmtKind::Break => StmtKind::Break,
            StmtKind::Raise(v) => StmtKind::Raise(v.clone()),
            StmtKind::Seq(a, b) => StmtKind::Seq(Box::new(self.stmt(a)), Box::new(self.stmt(b))),
            StmtKind::Eval(e) => StmtKind::Eval(self.expr(e)),
            StmtKind::Local(ns, es, body) => {
                StmtKind::Local(ns.clone(), self.exprs(es), Box::new(self.stmt(body)))
            }
            StmtKind::Assign(ts, es) => StmtKind::Assign(self.exprs(ts), self.exprs(es)),
            StmtKind::Return(es) => StmtKind::Return(self.exprs(es)),
            StmtKind::If(c, a, b) => {
                StmtKind::If(self.expr(c), Box::new(self.stmt(a)), Box::new(self.stmt(b)))
            }
            StmtKind::While(c, b) => StmtKind::While(self.expr(c), Box::new(self.stmt(b))),
            StmtKind::Loop(b) => StmtKind::Loop(Box::new(self.stmt(b))),
        };
        Stmt::at(kind, span)
    }

    fn block(&mut self, ss: &[Stmt], span: Span) -> Stmt {
        let mut acc: Option<Stmt> = None;
        for s in ss.iter().rev() {
            let rest = |acc: Option<Stmt>| Box::new(acc.unwrap_or_else(|| Stmt::at(StmtKind::Skip, s.span)));
            let next = match &s.kind {
                StmtKind::LocalDecl(ns, es) => {
                    Stmt::at(StmtKind::Local(ns.clone(), self.exprs(es), rest(acc.take())), s.span)
                }
                StmtKind::LocalFunction(n, fb) => {
                    let target = Expr::at(ExprKind::Var(n.clone()), self.fresh(s.span));
                    let f = Expr::at(ExprKind::Function(Box::new(self.func(fb))), self.fresh(s.span));
                    let assign = Stmt::at(StmtKind::Assign(vec![target], vec![f]), self.fresh(s.span));
                    let body = match acc.take() {
                        None => assign,
                        Some(r) => Stmt::at(StmtKind::Seq(Box::new(assign), Box::new(r)), self.fresh(s.span)),
                    };
                    Stmt::at(StmtKind::Local(vec![n.clone()], Vec::new(), Box::new(body)), s.span)
                }
                _ => {
                    let d = self.stmt(s);
                    match acc.take() {
                        None => d,
                        Some(r) => {
                            let sp = self.fresh(d.span);
                            Stmt::at(StmtKind::Seq(Box::new(d), Box::new(r)), sp)
                        }
                    }
                }
            };
            acc = Some(next);
        }
        acc.unwrap_or_else(|| Stmt::at(StmtKind::Skip, span))
    }

    fn func(&mut self, fb: &FuncBody) -> FuncBody {
        FuncBody { params: fb.params.clone(), body: self.stmt(&fb.body) }
    }

    fn exprs(&mut self, es: &[Expr]) -> Vec<Expr> {
        es.iter().map(|e| self.expr(e)).collect()
    }

    fn expr(&mut self, e: &Expr) -> Expr {
        let span = e.span;
        let kind = match &e.kind {
            ExprKind::Field(t, n) => {
                let key = Expr::at(ExprKind::Val(Value::Str(n.clone())), self.fresh(span));
                ExprKind::Index(Box::new(self.expr(t)), Box::new(key))
            }
            ExprKind::Table(fields) => {
                let mut out = Vec::new();
                let mut pos = 0;
                for f in fields {
                    out.push(match f {
                        TableField::Positional(v) => {
                            pos += 1;
                            let key = Expr::at(ExprKind::Val(Value::Num(pos as f64)), self.fresh(v.span));
                            TableField::Keyed(key, self.expr(v))
                        }
                        TableField::Named(n, v) => {
                            let key = Expr::at(ExprKind::Val(Value::Str(n.clone())), self.fresh(v.span));
                            TableField::Keyed(key, self.expr(v))
                        }
                        TableField::Keyed(k, v) => TableField::Keyed(self.expr(k), self.expr(v)),
                    });
                }
                ExprKind::Table(out)
            }
            ExprKind::Val(_) | ExprKind::Var(_) | ExprKind::Ref(_) | ExprKind::Tuple(_) | ExprKind::Raise(_) => {
                e.kind.clone()
            }
            ExprKind::Index(a, b) => ExprKind::Index(Box::new(self.expr(a)), Box::new(self.expr(b))),
            ExprKind::Call(f, args) => ExprKind::Call(Box::new(self.expr(f)), self.exprs(args)),
            ExprKind::Function(fb) => ExprKind::Function(Box::new(self.func(fb))),
            ExprKind::Bin(op, a, b) => ExprKind::Bin(*op, Box::new(self.expr(a)), Box::new(self.expr(b))),
            ExprKind::Un(op, a) => ExprKind::Un(*op, Box::new(self.expr(a))),
            ExprKind::Paren(a) => ExprKind::Paren(Box::new(self.expr(a))),
            ExprKind::RetPoint(s) => ExprKind::RetPoint(Box::new(self.stmt(s))),
            ExprKind::Protected(a) => ExprKind::Protected(Box::new(self.expr(a))),
            ExprKind::Finalizing(a) => ExprKind::Finalizing(Box::new(self.expr(a))),
        };
        Expr::at(kind, span)
    }
}
