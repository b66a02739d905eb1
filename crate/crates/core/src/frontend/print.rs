//! Pretty-printer. Surface and core forms print as Lua that the parser
//! reads back to the same term; runtime forms print in a readable but
//! non-parseable notation (`r1`, `tid2`, `$err v`, `((s))`).

use super::ast::*;
use crate::heaps::{Loc, Value};

type Namer<'a> = &'a dyn Fn(Loc) -> String;

fn default_name(l: Loc) -> String {
    l.to_string()
}

pub fn print_stmt(s: &Stmt) -> String {
    print_stmt_with(s, &default_name)
}

pub fn print_expr(e: &Expr) -> String {
    let mut p = Printer { out: String::new(), indent: 0, oneline: true, namer: &default_name };
    p.expr(e);
    p.out
}

/// Multi-line print with runtime locations named by `namer`.
pub fn print_stmt_with(s: &Stmt, namer: Namer<'_>) -> String {
    let mut p = Printer { out: String::new(), indent: 0, oneline: false, namer };
    p.stmt(s);
    p.out
}

/// Single-line print, used for trace redexes.
pub fn print_stmt_oneline(s: &Stmt) -> String {
    let mut p = Printer { out: String::new(), indent: 0, oneline: true, namer: &default_name };
    p.stmt(s);
    p.out
}

pub fn print_value(v: &Value, namer: Namer<'_>) -> String {
    let mut p = Printer { out: String::new(), indent: 0, oneline: true, namer };
    p.value(v);
    p.out
}

struct Printer<'a> {
    out: String,
    indent: usize,
    oneline: bool,
    namer: Namer<'a>,
}

fn quote(s: &str) -> String {
    let mut o = String::from("\"");
    for c in s.chars() {
        match c {
            '\n' => o.push_str("\\n"),
            '\t' => o.push_str("\\t"),
            '\\' => o.push_str("\\\\"),
            '"' => o.push_str("\\\""),
            c => o.push(c),
        }
    }
    o.push('"');
    o
}

fn number(n: f64) -> String {
    if n.is_nan() {
        "(0/0)".into()
    } else if n.is_infinite() {
        if n > 0.0 { "(1/0)" } else { "(-1/0)" }.into()
    } else if n == n.trunc() && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n:?}")
    }
}

impl Printer<'_> {
    fn w(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn nl(&mut self) {
        if self.oneline {
            self.out.push(' ');
        } else {
            self.out.push('\n');
            for _ in 0..self.indent {
                self.out.push_str("  ");
            }
        }
    }

    fn nested(&mut self, s: &Stmt) {
        self.indent += 1;
        if !is_empty(s) {
            self.nl();
            self.stmt(s);
        }
        self.indent -= 1;
        self.nl();
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Skip => self.w(";"),
            StmtKind::Seq(a, b) => {
                self.stmt(a);
                self.nl();
                self.stmt(b);
            }
            StmtKind::Block(ss) => {
                for (i, s) in ss.iter().enumerate() {
                    if i > 0 {
                        self.nl();
                    }
                    self.stmt(s);
                }
            }
            StmtKind::LocalDecl(ns, es) => {
                self.w("local ");
                self.w(&ns.join(", "));
                if !es.is_empty() {
                    self.w(" = ");
                    self.exprs(es);
                }
            }
            StmtKind::LocalFunction(n, fb) => {
                self.w("local function ");
                self.w(n);
                self.funcbody(fb);
            }
            StmtKind::FunctionDecl(n, fb) => {
                self.w("function ");
                self.w(n);
                self.funcbody(fb);
            }
            StmtKind::Eval(e) => self.expr(e),
            StmtKind::Local(ns, es, body) => {
                self.w("local ");
                self.w(&ns.join(", "));
                if !es.is_empty() {
                    self.w(" = ");
                    self.exprs(es);
                }
                self.w(" in");
                self.nested(body);
                self.w("end");
            }
            StmtKind::Assign(ts, es) => {
                self.exprs(ts);
                self.w(" = ");
                self.exprs(es);
            }
            StmtKind::Return(es) => {
                self.w("return");
                if !es.is_empty() {
                    self.w(" ");
                    self.exprs(es);
                }
            }
            StmtKind::Break => self.w("break"),
            StmtKind::If(c, a, b) => {
                self.w("if ");
                self.expr(c);
                self.w(" then");
                self.nested(a);
                self.else_part(b);
            }
            StmtKind::While(c, b) => {
                self.w("while ");
                self.expr(c);
                self.w(" do");
                self.nested(b);
                self.w("end");
            }
            StmtKind::Loop(b) => {
                self.w("$loop");
                self.nested(b);
                self.w("end");
            }
            StmtKind::Raise(v) => {
                self.w("$err ");
                self.value(v);
            }
        }
    }

    fn else_part(&mut self, b: &Stmt) {
        match &b.kind {
            StmtKind::Skip => self.w("end"),
            StmtKind::If(c, a, b2) => {
                self.w("elseif ");
                self.expr(c);
                self.w(" then");
                self.nested(a);
                self.else_part(b2);
            }
            _ => {
                self.w("else");
                self.nested(b);
                self.w("end");
            }
        }
    }

    fn funcbody(&mut self, fb: &FuncBody) {
        self.w("(");
        self.w(&fb.params.join(", "));
        self.w(")");
        self.nested(&fb.body);
        self.w("end");
    }

    fn exprs(&mut self, es: &[Expr]) {
        for (i, e) in es.iter().enumerate() {
            if i > 0 {
                self.w(", ");
            }
            self.expr(e);
        }
    }

    fn value(&mut self, v: &Value) {
        match v {
            Value::Nil => self.w("nil"),
            Value::Bool(b) => self.w(if *b { "true" } else { "false" }),
            Value::Num(n) => self.w(&number(*n)),
            Value::Str(s) => self.w(&quote(s)),
            Value::Builtin(b) => self.w(b.name()),
            Value::Table(_) | Value::Closure(_) => {
                let name = (self.namer)(v.loc().expect("location value"));
                self.w(&name)
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Val(v) => self.value(v),
            ExprKind::Var(n) => self.w(n),
            ExprKind::Ref(r) => {
                let name = (self.namer)(Loc::Ref(*r));
                self.w(&name)
            }
            ExprKind::Index(t, k) => {
                self.expr(t);
                self.w("[");
                self.expr(k);
                self.w("]");
            }
            ExprKind::Field(t, n) => {
                self.expr(t);
                self.w(".");
                self.w(n);
            }
            ExprKind::Call(f, args) => {
                self.expr(f);
                self.w("(");
                self.exprs(args);
                self.w(")");
            }
            ExprKind::Function(fb) => {
                self.w("function");
                self.funcbody(fb);
            }
            ExprKind::Table(fields) => {
                self.w("{");
                for (i, f) in fields.iter().enumerate() {
                    if i > 0 {
                        self.w(", ");
                    }
                    match f {
                        TableField::Positional(v) => self.expr(v),
                        TableField::Named(n, v) => {
                            self.w(n);
                            self.w(" = ");
                            self.expr(v);
                        }
                        TableField::Keyed(k, v) => {
                            self.w("[");
                            self.expr(k);
                            self.w("] = ");
                            self.expr(v);
                        }
                    }
                }
                self.w("}");
            }
            ExprKind::Bin(op, a, b) => {
                self.expr(a);
                self.w(" ");
                self.w(op.symbol());
                self.w(" ");
                self.expr(b);
            }
            ExprKind::Un(op, a) => {
                self.w(op.symbol());
                let mark = self.out.len();
                self.expr(a);
                if *op == UnOp::Neg && self.out[mark..].starts_with('-') {
                    self.out.insert(mark, ' ');
                }
            }
            ExprKind::Paren(a) => {
                self.w("(");
                self.expr(a);
                self.w(")");
            }
            ExprKind::Tuple(vs) => {
                self.w("<");
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        self.w(", ");
                    }
                    self.value(v);
                }
                self.w(">");
            }
            ExprKind::RetPoint(s) => {
                self.w("((");
                self.nested(s);
                self.w("))");
            }
            ExprKind::Protected(a) => {
                self.w("$pcall(");
                self.expr(a);
                self.w(")");
            }
            ExprKind::Finalizing(a) => {
                self.w("$fin(");
                self.expr(a);
                self.w(")");
            }
            ExprKind::Raise(v) => {
                self.w("$err ");
                self.value(v);
            }
        }
    }
}

fn is_empty(s: &Stmt) -> bool {
    matches!(&s.kind, StmtKind::Block(ss) if ss.is_empty())
}
