//! Control-flow graph and reaching definitions.
//!
//! Program points are the ids of atomic statements (`local`, assignment,
//! call, `return`, `break`) and of the condition of `if` and `while`.
//! Every function literal adds an entry point, whose predecessor is the
//! statement that creates the closure and which defines the parameters;
//! captured variables therefore see the definitions that reach the closure's
//! creation. A definition stops reaching once its binding goes out of
//! scope; closures keep captured variables alive through their own edges in
//! the reachability check instead.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::infer::{BindingId, DefSite, TypedProgram};
use crate::frontend::ast::*;

#[derive(Clone, Debug, Default)]
pub struct ReachingDefs {
    /// Definitions valid on entry to each point.
    pub at: HashMap<NodeId, BTreeSet<DefSite>>,
    /// Successor edges.
    pub succ: HashMap<NodeId, Vec<NodeId>>,
}

impl ReachingDefs {
    pub fn defs_at(&self, p: NodeId) -> BTreeSet<DefSite> {
        self.at.get(&p).cloned().unwrap_or_default()
    }
}

struct Builder<'a> {
    tp: &'a TypedProgram,
    succ: HashMap<NodeId, Vec<NodeId>>,
    nodes: Vec<NodeId>,
    gen: HashMap<NodeId, Vec<DefSite>>,
    breaks: Vec<Vec<NodeId>>,
    /// Bindings introduced by each `local` statement or function literal.
    introduced: HashMap<NodeId, Vec<BindingId>>,
    /// Bindings in scope, innermost last.
    scope: Vec<BindingId>,
    visible: HashMap<NodeId, BTreeSet<BindingId>>,
}

impl Builder<'_> {
    fn node(&mut self, id: NodeId, preds: &[NodeId]) {
        self.nodes.push(id);
        self.visible.insert(id, self.scope.iter().copied().collect());
        self.succ.entry(id).or_default();
        for p in preds {
            self.succ.entry(*p).or_default().push(id);
        }
    }

    /// Function literals in `e` hang off point `at`.
    fn functions(&mut self, e: &Expr, at: NodeId) {
        match &e.kind {
            ExprKind::Function(fb) => {
                let entry = e.span.id;
                let depth = self.scope.len();
                self.scope.extend(self.introduced.get(&entry).cloned().unwrap_or_default());
                self.node(entry, &[at]);
                self.stmt(&fb.body, vec![entry]);
                self.scope.truncate(depth);
            }
            ExprKind::Index(a, b) | ExprKind::Bin(_, a, b) => {
                self.functions(a, at);
                self.functions(b, at);
            }
            ExprKind::Call(f, args) => {
                self.functions(f, at);
                for a in args {
                    self.functions(a, at);
                }
            }
            ExprKind::Table(fs) => {
                for f in fs {
                    if let TableField::Keyed(k, v) = f {
                        self.functions(k, at);
                        self.functions(v, at);
                    }
                }
            }
            ExprKind::Un(_, a) | ExprKind::Paren(a) => self.functions(a, at),
            _ => {}
        }
    }

    /// Builds `s` with the given predecessors; returns the points control
    /// leaves `s` from.
    fn stmt(&mut self, s: &Stmt, preds: Vec<NodeId>) -> Vec<NodeId> {
        let id = s.span.id;
        match &s.kind {
            StmtKind::Skip => preds,
            StmtKind::Seq(a, b) => {
                let mid = self.stmt(a, preds);
                self.stmt(b, mid)
            }
            StmtKind::Eval(e) => {
                self.node(id, &preds);
                self.functions(e, id);
                vec![id]
            }
            StmtKind::Local(_, es, body) => {
                self.node(id, &preds);
                for e in es {
                    self.functions(e, id);
                }
                let depth = self.scope.len();
                self.scope.extend(self.introduced.get(&id).cloned().unwrap_or_default());
                let out = self.stmt(body, vec![id]);
                self.scope.truncate(depth);
                out
            }
            StmtKind::Assign(ts, es) => {
                self.node(id, &preds);
                for e in ts.iter().chain(es) {
                    self.functions(e, id);
                }
                vec![id]
            }
            StmtKind::Return(es) => {
                self.node(id, &preds);
                for e in es {
                    self.functions(e, id);
                }
                Vec::new()
            }
            StmtKind::Break => {
                self.node(id, &preds);
                if let Some(b) = self.breaks.last_mut() {
                    b.push(id);
                }
                Vec::new()
            }
            StmtKind::If(c, a, b) => {
                self.node(id, &preds);
                self.functions(c, id);
                let mut out = self.stmt(a, vec![id]);
                out.extend(self.stmt(b, vec![id]));
                out
            }
            StmtKind::While(c, body) => {
                self.node(id, &preds);
                self.functions(c, id);
                self.breaks.push(Vec::new());
                let ends = self.stmt(body, vec![id]);
                for e in ends {
                    self.succ.entry(e).or_default().push(id);
                }
                let mut out = vec![id];
                out.extend(self.breaks.pop().expect("pushed above"));
                out
            }
            _ => preds,
        }
    }

    fn solve(mut self) -> ReachingDefs {
        for d in &self.tp.defs {
            self.gen.entry(d.point).or_default().push(*d);
        }
        let mut preds: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for (p, ss) in &self.succ {
            for s in ss {
                preds.entry(*s).or_default().push(*p);
            }
        }
        let mut inn: HashMap<NodeId, BTreeSet<DefSite>> = self.nodes.iter().map(|n| (*n, BTreeSet::new())).collect();
        let mut out: HashMap<NodeId, BTreeSet<DefSite>> = inn.clone();
        let mut work: VecDeque<NodeId> = self.nodes.iter().copied().collect();
        while let Some(n) = work.pop_front() {
            let mut i = BTreeSet::new();
            let visible = &self.visible[&n];
            for p in preds.get(&n).into_iter().flatten() {
                i.extend(out[p].iter().filter(|d| visible.contains(&d.binding)).copied());
            }
            let gen = self.gen.get(&n).cloned().unwrap_or_default();
            let killed: BTreeSet<BindingId> = gen.iter().map(|d| d.binding).collect();
            let mut o: BTreeSet<DefSite> = i.iter().filter(|d| !killed.contains(&d.binding)).copied().collect();
            o.extend(gen);
            inn.insert(n, i);
            if out[&n] != o {
                out.insert(n, o);
                work.extend(self.succ.get(&n).into_iter().flatten().copied());
            }
        }
        ReachingDefs { at: inn, succ: self.succ }
    }
}

/// Reaching definitions over the whole program, function bodies included.
pub fn build_cfg(tp: &TypedProgram) -> ReachingDefs {
    let mut introduced: HashMap<NodeId, Vec<BindingId>> = HashMap::new();
    for (i, b) in tp.bindings.iter().enumerate() {
        introduced.entry(b.point).or_default().push(BindingId(i));
    }
    let mut b = Builder {
        tp,
        succ: HashMap::new(),
        nodes: Vec::new(),
        gen: HashMap::new(),
        breaks: Vec::new(),
        introduced,
        scope: Vec::new(),
        visible: HashMap::new(),
    };
    b.stmt(&tp.term, Vec::new());
    b.solve()
}
