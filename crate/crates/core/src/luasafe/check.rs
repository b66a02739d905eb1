//! Type checking of table reads against the weakness of their tables.
//!
//! Weakness is tracked per table class and changes only at `setmetatable`
//! sites. The walk is flow-sensitive: branches join by taking the union of
//! weak flags and loops iterate to a fixpoint. Function bodies may run at
//! any later time, so they are checked under the weakest tag each class
//! ever receives; the same holds everywhere for classes retagged inside a
//! function body.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use super::cfg::ReachingDefs;
use super::infer::{BindingId, TVar, TypedProgram};
use super::types::Weakness;
use crate::frontend::ast::*;
use crate::frontend::print_expr;
use crate::heaps::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Unsafe,
    Warning,
    Info,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    WeakValueNotStronglyReachable,
    WeakTableNondeterminism,
    TypeError,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::WeakValueNotStronglyReachable => "weak-value-not-strongly-reachable",
            Reason::WeakTableNondeterminism => "weak-table-nondeterminism",
            Reason::TypeError => "type-error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: u32,
    pub col: u32,
    pub severity: Severity,
    pub reason: Reason,
    /// The weak table, as written.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    /// The offending expression, as written.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub access: Option<String>,
    pub explanation: String,
    /// Definitions reaching the access, as `name@line:col`.
    pub witness: Vec<String>,
}

/// Weakness per table class root. Absent classes are strong.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeEnv {
    tags: BTreeMap<TVar, Weakness>,
}

impl TypeEnv {
    pub fn get(&self, root: TVar) -> Weakness {
        self.tags.get(&root).copied().unwrap_or_default()
    }

    pub fn set(&mut self, root: TVar, w: Weakness) {
        if w == Weakness::Strong {
            self.tags.remove(&root);
        } else {
            self.tags.insert(root, w);
        }
    }

    /// Pointwise join.
    pub fn join(&self, o: &TypeEnv) -> TypeEnv {
        let mut out = self.clone();
        for (r, w) in &o.tags {
            out.set(*r, out.get(*r).join(*w));
        }
        out
    }
}

/// What a `setmetatable` site does to its table's tag.
#[derive(Clone, Debug)]
struct Retag {
    root: TVar,
    tag: Weakness,
    /// The `__mode` value is not a known string.
    unknown_mode: bool,
}

fn retag_of(tp: &TypedProgram, table: TVar, meta: Option<TVar>) -> Retag {
    let s = &tp.solver;
    let root = s.find(table);
    let Some(m) = meta else {
        return Retag { root, tag: Weakness::Strong, unknown_mode: false };
    };
    if s.is_dyn(m) {
        return Retag { root, tag: Weakness::Wkv, unknown_mode: true };
    }
    match s.field(m, &Value::Str("__mode".into())) {
        None => Retag { root, tag: Weakness::Strong, unknown_mode: false },
        Some(f) => match s.singleton_str(f) {
            Some(mode) => Retag { root, tag: Weakness::from_mode(&mode), unknown_mode: false },
            None => Retag { root, tag: Weakness::Wkv, unknown_mode: true },
        },
    }
}

/// Whether the value class `target` is reachable from the definitions
/// valid at `point` through strong occurrences only.
///
/// Tables contribute their fields unless their values are weak (keys are
/// literals, so ephemeron entries are strong) and their metatables;
/// closures contribute the values of every definition of each captured
/// variable.
pub fn static_reach_cte(
    tp: &TypedProgram,
    defs: &ReachingDefs,
    point: NodeId,
    target: TVar,
    env: &dyn Fn(TVar) -> Weakness,
) -> bool {
    let s = &tp.solver;
    let target = s.find(target);
    let captures = tp.captures_by_root();
    let mut metas: HashMap<TVar, Vec<TVar>> = HashMap::new();
    for site in &tp.setmetatables {
        if let Some(m) = site.meta {
            metas.entry(s.find(site.table)).or_default().push(m);
        }
    }
    let sources = |b: BindingId| tp.defs.iter().filter(move |d| d.binding == b).filter_map(|d| d.source);

    let mut seen = BTreeSet::new();
    let mut work: VecDeque<TVar> = defs.defs_at(point).iter().filter_map(|d| d.source).collect();
    while let Some(v) = work.pop_front() {
        let r = s.find(v);
        if !seen.insert(r) {
            continue;
        }
        if r == target {
            return true;
        }
        if s.is_table(r) && !env(r).weak_values() {
            work.extend(s.fields(r).into_iter().map(|(_, f)| f));
        }
        work.extend(metas.get(&r).into_iter().flatten().copied());
        for b in captures.get(&r).into_iter().flatten() {
            work.extend(sources(*b));
        }
    }
    false
}

struct Checker<'a> {
    tp: &'a TypedProgram,
    defs: &'a ReachingDefs,
    retags: HashMap<NodeId, Retag>,
    /// Weakest tag each class ever gets.
    ever: TypeEnv,
    /// Classes retagged inside some function body.
    floating: BTreeSet<TVar>,
    /// Inside a function body: use `ever` throughout.
    in_function: usize,
    breaks: Vec<Vec<TypeEnv>>,
    diags: BTreeMap<(NodeId, Reason), Diagnostic>,
}

impl Checker<'_> {
    fn tag(&self, env: &TypeEnv, root: TVar) -> Weakness {
        if self.in_function > 0 || self.floating.contains(&root) {
            self.ever.get(root)
        } else {
            env.get(root)
        }
    }

    fn witness(&self, point: NodeId) -> Vec<String> {
        let names: BTreeSet<String> =
            self.defs.defs_at(point).iter().map(|d| self.tp.binding(d.binding).label()).collect();
        names.into_iter().collect()
    }

    fn report(&mut self, id: NodeId, d: Diagnostic) {
        self.diags.entry((id, d.reason)).or_insert(d);
    }

    fn stmt(&mut self, s: &Stmt, mut env: TypeEnv) -> TypeEnv {
        let id = s.span.id;
        match &s.kind {
            StmtKind::Seq(a, b) => {
                let env = self.stmt(a, env);
                self.stmt(b, env)
            }
            StmtKind::Eval(e) => {
                self.expr(e, id, &mut env);
                env
            }
            StmtKind::Local(_, es, body) => {
                for e in es {
                    self.expr(e, id, &mut env);
                }
                self.stmt(body, env)
            }
            StmtKind::Assign(ts, es) => {
                for t in ts {
                    match &t.kind {
                        ExprKind::Index(tab, k) => {
                            self.expr(tab, id, &mut env);
                            self.expr(k, id, &mut env);
                        }
                        _ => {}
                    }
                }
                for e in es {
                    self.expr(e, id, &mut env);
                }
                env
            }
            StmtKind::Return(es) => {
                for e in es {
                    self.expr(e, id, &mut env);
                }
                env
            }
            StmtKind::Break => {
                if let Some(b) = self.breaks.last_mut() {
                    b.push(env.clone());
                }
                env
            }
            StmtKind::If(c, a, b) => {
                self.expr(c, id, &mut env);
                let ea = self.stmt(a, env.clone());
                let eb = self.stmt(b, env);
                ea.join(&eb)
            }
            StmtKind::While(c, body) => {
                let mut head = env;
                loop {
                    let mut cond = head.clone();
                    self.expr(c, id, &mut cond);
                    self.breaks.push(Vec::new());
                    let end = self.stmt(body, cond.clone());
                    let exits = self.breaks.pop().expect("pushed above");
                    let next = head.join(&end);
                    if next == head {
                        return exits.iter().fold(cond, |acc, e| acc.join(e));
                    }
                    head = next;
                }
            }
            _ => env,
        }
    }

    /// Checks reads in `e`, evaluated at statement `point`, in evaluation
    /// order; `setmetatable` calls update `env` after their arguments.
    fn expr(&mut self, e: &Expr, point: NodeId, env: &mut TypeEnv) {
        match &e.kind {
            ExprKind::Index(tab, k) => {
                self.expr(tab, point, env);
                self.expr(k, point, env);
                self.read(e, tab, point, env);
            }
            ExprKind::Call(f, args) => {
                self.expr(f, point, env);
                for a in args {
                    self.expr(a, point, env);
                }
                if let Some(r) = self.retags.get(&e.span.id) {
                    if self.in_function == 0 {
                        env.set(r.root, r.tag);
                    }
                }
            }
            ExprKind::Function(fb) => {
                self.in_function += 1;
                self.stmt(&fb.body, TypeEnv::default());
                self.in_function -= 1;
            }
            ExprKind::Table(fs) => {
                for f in fs {
                    if let TableField::Keyed(k, v) = f {
                        self.expr(k, point, env);
                        self.expr(v, point, env);
                    }
                }
            }
            ExprKind::Bin(_, a, b) => {
                self.expr(a, point, env);
                self.expr(b, point, env);
            }
            ExprKind::Un(_, a) | ExprKind::Paren(a) => self.expr(a, point, env),
            _ => {}
        }
    }

    fn read(&mut self, e: &Expr, tab: &Expr, point: NodeId, env: &TypeEnv) {
        let tp = self.tp;
        let s = &tp.solver;
        if tp.unmatched.contains(&e.span.id) {
            self.report(e.span.id, Diagnostic {
                line: e.span.line,
                col: e.span.col,
                severity: Severity::Warning,
                reason: Reason::TypeError,
                table: Some(print_expr(tab)),
                access: Some(print_expr(e)),
                explanation: "the key matches no field of the table's type".into(),
                witness: Vec::new(),
            });
        }
        let (Some(&tv), Some(&rv)) = (tp.expr_var.get(&tab.span.id), tp.expr_var.get(&e.span.id)) else {
            return;
        };
        let root = s.find(tv);
        if !self.tag(env, root).weak_values() || !s.is_collectible(rv) {
            return;
        }
        let tag = |r: TVar| self.tag(env, r);
        if static_reach_cte(tp, self.defs, point, rv, &tag) {
            return;
        }
        let witness = self.witness(point);
        let held = if witness.is_empty() { "no variable".to_string() } else { witness.join(", ") };
        let d = Diagnostic {
            line: e.span.line,
            col: e.span.col,
            severity: Severity::Unsafe,
            reason: Reason::WeakValueNotStronglyReachable,
            table: Some(print_expr(tab)),
            access: Some(print_expr(e)),
            explanation: format!(
                "{} holds a collectible value in a weak-valued table and no strong path from {} reaches it",
                print_expr(e),
                held
            ),
            witness,
        };
        self.report(e.span.id, d);
    }
}

fn nodes_in_functions(t: &Term) -> BTreeSet<NodeId> {
    let mut inside = BTreeSet::new();
    t.walk(&mut |n| {
        if let Node::Expr(Expr { kind: ExprKind::Function(fb), .. }) = n {
            fb.body.walk(&mut |m| {
                inside.insert(m.span().id);
            });
        }
    });
    inside
}

/// Checks every table read of `tp`.
pub fn typecheck(tp: &TypedProgram, defs: &ReachingDefs) -> Vec<Diagnostic> {
    let inside = nodes_in_functions(&tp.term);
    let mut retags = HashMap::new();
    let mut ever = TypeEnv::default();
    let mut floating = BTreeSet::new();
    let mut diags = BTreeMap::new();
    for site in &tp.setmetatables {
        let r = retag_of(tp, site.table, site.meta);
        ever.set(r.root, ever.get(r.root).join(r.tag));
        if inside.contains(&site.call) {
            floating.insert(r.root);
        }
        if r.unknown_mode {
            let sp = span_of(&tp.term, site.call);
            diags.insert((site.call, Reason::WeakTableNondeterminism), Diagnostic {
                line: sp.line,
                col: sp.col,
                severity: Severity::Warning,
                reason: Reason::WeakTableNondeterminism,
                table: None,
                access: None,
                explanation: "the __mode string is not known statically; the table is treated as weak in keys and values"
                    .into(),
                witness: Vec::new(),
            });
        }
        retags.insert(site.call, r);
    }
    let mut c = Checker { tp, defs, retags, ever, floating, in_function: 0, breaks: Vec::new(), diags };
    c.stmt(&tp.term, TypeEnv::default());
    let mut out: Vec<Diagnostic> = c.diags.into_values().collect();
    out.sort_by_key(|d| (d.line, d.col, d.reason));
    out
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
