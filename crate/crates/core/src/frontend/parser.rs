//! Recursive-descent parser producing surface terms. Every node gets a
//! fresh id in creation order.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;
use crate::heaps::Value;

pub fn parse_str(src: &str, origin: &str) -> Result<Stmt, SyntaxError> {
    let toks = tokenize(src, origin)?;
    let mut p = Parser { toks, pos: 0, origin: origin.to_string(), next_id: 0, loop_depth: 0 };
    let body = p.block()?;
    if p.peek() != &Tok::Eof {
        return Err(p.error("'<eof>' expected"));
    }
    Ok(body)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    origin: String,
    next_id: NodeId,
    loop_depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn span_at(&mut self, (line, col): (u32, u32)) -> Span {
        self.next_id += 1;
        Span::new(line, col, self.next_id)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> SyntaxError {
        let (line, col) = self.here();
        SyntaxError { origin: self.origin.clone(), line, col, message: msg.into() }
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == k)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.error(format!("'{k}' expected")))
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(format!("'{s}' expected")))
        }
    }

    fn name(&mut self) -> Result<Name, SyntaxError> {
        match self.peek().clone() {
            Tok::Name(n) => {
                self.advance();
                Ok(n)
            }
            _ => Err(self.error("<name> expected")),
        }
    }

    fn unsupported(&self, what: &str) -> SyntaxError {
        self.error(format!("unsupported construct: {what}"))
    }

    fn block_follows(&self) -> bool {
        matches!(self.peek(), Tok::Eof | Tok::Kw("end" | "else" | "elseif" | "until"))
    }

    fn block(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.here();
        let mut stmts = Vec::new();
        while !self.block_follows() {
            if self.eat_sym(";") {
                continue;
            }
            if self.is_kw("return") {
                stmts.push(self.return_stat()?);
                break;
            }
            stmts.push(self.statement()?);
        }
        let span = self.span_at(start);
        Ok(Stmt::at(StmtKind::Block(stmts), span))
    }

    fn return_stat(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.here();
        self.advance();
        let es = if self.block_follows() || self.is_sym(";") { Vec::new() } else { self.exprlist()? };
        self.eat_sym(";");
        if !self.block_follows() {
            return Err(self.error("'end' expected after return"));
        }
        let span = self.span_at(start);
        Ok(Stmt::at(StmtKind::Return(es), span))
    }

    fn loop_body(&mut self) -> Result<Stmt, SyntaxError> {
        self.loop_depth += 1;
        let b = self.block();
        self.loop_depth -= 1;
        b
    }

    fn statement(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.here();
        match self.peek().clone() {
            Tok::Kw("break") => {
                if self.loop_depth == 0 {
                    return Err(self.error("break outside a loop"));
                }
                self.advance();
                let span = self.span_at(start);
                Ok(Stmt::at(StmtKind::Break, span))
            }
            Tok::Kw("if") => {
                self.advance();
                self.if_rest(start)
            }
            Tok::Kw("while") => {
                self.advance();
                let c = self.expr()?;
                self.expect_kw("do")?;
                let body = self.loop_body()?;
                self.expect_kw("end")?;
                let span = self.span_at(start);
                Ok(Stmt::at(StmtKind::While(c, Box::new(body)), span))
            }
            Tok::Kw("local") => {
                self.advance();
                if self.eat_kw("function") {
                    let name = self.name()?;
                    let fb = self.funcbody()?;
                    let span = self.span_at(start);
                    return Ok(Stmt::at(StmtKind::LocalFunction(name, Box::new(fb)), span));
                }
                let mut names = vec![self.name()?];
                while self.eat_sym(",") {
                    names.push(self.name()?);
                }
                let es = if self.eat_sym("=") { self.exprlist()? } else { Vec::new() };
                if self.eat_kw("in") {
                    let body = self.block()?;
                    self.expect_kw("end")?;
                    let span = self.span_at(start);
                    return Ok(Stmt::at(StmtKind::Local(names, es, Box::new(body)), span));
                }
                let span = self.span_at(start);
                Ok(Stmt::at(StmtKind::LocalDecl(names, es), span))
            }
            Tok::Kw("function") => {
                self.advance();
                let name = self.name()?;
                if self.is_sym(".") || self.is_sym(":") {
                    return Err(self.unsupported("qualified function name"));
                }
                let fb = self.funcbody()?;
                let span = self.span_at(start);
                Ok(Stmt::at(StmtKind::FunctionDecl(name, Box::new(fb)), span))
            }
            Tok::Kw(k @ ("for" | "repeat" | "goto" | "do")) => Err(self.unsupported(k)),
            Tok::Sym("::") => Err(self.unsupported("label")),
            _ => self.expr_stat(start),
        }
    }

    fn if_rest(&mut self, start: (u32, u32)) -> Result<Stmt, SyntaxError> {
        let c = self.expr()?;
        self.expect_kw("then")?;
        let then = self.block()?;
        let els = if self.is_kw("elseif") {
            let s = self.here();
            self.advance();
            self.if_rest(s)?
        } else if self.eat_kw("else") {
            let b = self.block()?;
            self.expect_kw("end")?;
            b
        } else {
            self.expect_kw("end")?;
            Stmt::skip()
        };
        let span = self.span_at(start);
        Ok(Stmt::at(StmtKind::If(c, Box::new(then), Box::new(els)), span))
    }

    fn expr_stat(&mut self, start: (u32, u32)) -> Result<Stmt, SyntaxError> {
        let e = self.suffixed()?;
        if self.is_sym("=") || self.is_sym(",") {
            let mut targets = vec![e];
            while self.eat_sym(",") {
                targets.push(self.suffixed()?);
            }
            for t in &targets {
                if !matches!(t.kind, ExprKind::Var(_) | ExprKind::Index(..) | ExprKind::Field(..)) {
                    return Err(SyntaxError {
                        origin: self.origin.clone(),
                        line: t.span.line,
                        col: t.span.col,
                        message: "cannot assign to this expression".into(),
                    });
                }
            }
            self.expect_sym("=")?;
            let es = self.exprlist()?;
            let span = self.span_at(start);
            return Ok(Stmt::at(StmtKind::Assign(targets, es), span));
        }
        if !matches!(e.kind, ExprKind::Call(..)) {
            return Err(self.error("syntax error: statement expected"));
        }
        let span = self.span_at(start);
        Ok(Stmt::at(StmtKind::Eval(e), span))
    }

    fn funcbody(&mut self) -> Result<FuncBody, SyntaxError> {
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                if self.is_sym("...") {
                    return Err(self.unsupported("varargs"));
                }
                params.push(self.name()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let saved = std::mem::replace(&mut self.loop_depth, 0);
        let body = self.block();
        self.loop_depth = saved;
        let body = body?;
        self.expect_kw("end")?;
        Ok(FuncBody { params, body })
    }

    fn exprlist(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        let mut es = vec![self.expr()?];
        while self.eat_sym(",") {
            es.push(self.expr()?);
        }
        Ok(es)
    }

    pub fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.subexpr(0)
    }

    fn unop(&self) -> Option<UnOp> {
        match self.peek() {
            Tok::Kw("not") => Some(UnOp::Not),
            Tok::Sym("-") => Some(UnOp::Neg),
            Tok::Sym("#") => Some(UnOp::Len),
            _ => None,
        }
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Sym("+") => BinOp::Add,
            Tok::Sym("-") => BinOp::Sub,
            Tok::Sym("*") => BinOp::Mul,
            Tok::Sym("/") => BinOp::Div,
            Tok::Sym("%") => BinOp::Mod,
            Tok::Sym("^") => BinOp::Pow,
            Tok::Sym("..") => BinOp::Concat,
            Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("~=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Kw("and") => BinOp::And,
            Tok::Kw("or") => BinOp::Or,
            _ => return None,
        })
    }

    fn subexpr(&mut self, limit: u8) -> Result<Expr, SyntaxError> {
        let start = self.here();
        let mut lhs = if let Some(op) = self.unop() {
            self.advance();
            let e = self.subexpr(UNARY_PRECEDENCE)?;
            let span = self.span_at(start);
            Expr::at(ExprKind::Un(op, Box::new(e)), span)
        } else {
            self.simple()?
        };
        while let Some(op) = self.binop() {
            let (left, right) = op.precedence();
            if left <= limit {
                break;
            }
            self.advance();
            let rhs = self.subexpr(right)?;
            let span = self.span_at(start);
            lhs = Expr::at(ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn simple(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.here();
        let kind = match self.peek().clone() {
            Tok::Kw("nil") => ExprKind::Val(Value::Nil),
            Tok::Kw("true") => ExprKind::Val(Value::Bool(true)),
            Tok::Kw("false") => ExprKind::Val(Value::Bool(false)),
            Tok::Num(n) => ExprKind::Val(Value::Num(n)),
            Tok::Str(s) => ExprKind::Val(Value::Str(s)),
            Tok::Sym("...") => return Err(self.unsupported("varargs")),
            Tok::Kw("function") => {
                self.advance();
                let fb = self.funcbody()?;
                let span = self.span_at(start);
                return Ok(Expr::at(ExprKind::Function(Box::new(fb)), span));
            }
            Tok::Sym("{") => return self.table(),
            _ => return self.suffixed(),
        };
        self.advance();
        let span = self.span_at(start);
        Ok(Expr::at(kind, span))
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.here();
        match self.peek().clone() {
            Tok::Name(n) => {
                self.advance();
                let span = self.span_at(start);
                Ok(Expr::at(ExprKind::Var(n), span))
            }
            Tok::Sym("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_sym(")")?;
                let span = self.span_at(start);
                Ok(Expr::at(ExprKind::Paren(Box::new(e)), span))
            }
            _ => Err(self.error("unexpected symbol")),
        }
    }

    fn suffixed(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.here();
        let mut e = self.primary()?;
        loop {
            match self.peek().clone() {
                Tok::Sym(".") => {
                    self.advance();
                    let n = self.name()?;
                    let span = self.span_at(start);
                    e = Expr::at(ExprKind::Field(Box::new(e), n), span);
                }
                Tok::Sym("[") => {
                    self.advance();
                    let k = self.expr()?;
                    self.expect_sym("]")?;
                    let span = self.span_at(start);
                    e = Expr::at(ExprKind::Index(Box::new(e), Box::new(k)), span);
                }
                Tok::Sym(":") => return Err(self.unsupported("method call")),
                Tok::Sym("(") => {
                    self.advance();
                    let args = if self.is_sym(")") { Vec::new() } else { self.exprlist()? };
                    self.expect_sym(")")?;
                    let span = self.span_at(start);
                    e = Expr::at(ExprKind::Call(Box::new(e), args), span);
                }
                Tok::Sym("{") => {
                    let t = self.table()?;
                    let span = self.span_at(start);
                    e = Expr::at(ExprKind::Call(Box::new(e), vec![t]), span);
                }
                Tok::Str(s) => {
                    let at = self.here();
                    self.advance();
                    let sspan = self.span_at(at);
                    let arg = Expr::at(ExprKind::Val(Value::Str(s)), sspan);
                    let span = self.span_at(start);
                    e = Expr::at(ExprKind::Call(Box::new(e), vec![arg]), span);
                }
                _ => return Ok(e),
            }
        }
    }

    fn table(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.here();
        self.expect_sym("{")?;
        let mut fields = Vec::new();
        while !self.is_sym("}") {
            if self.eat_sym("[") {
                let k = self.expr()?;
                self.expect_sym("]")?;
                self.expect_sym("=")?;
                fields.push(TableField::Keyed(k, self.expr()?));
            } else if matches!(self.peek(), Tok::Name(_)) && self.peek_at(1) == &Tok::Sym("=") {
                let n = self.name()?;
                self.advance();
                fields.push(TableField::Named(n, self.expr()?));
            } else {
                fields.push(TableField::Positional(self.expr()?));
            }
            if !self.eat_sym(",") && !self.eat_sym(";") {
                break;
            }
        }
        self.expect_sym("}")?;
        let span = self.span_at(start);
        Ok(Expr::at(ExprKind::Table(fields), span))
    }
}
