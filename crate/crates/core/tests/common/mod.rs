//! Generators shared by the property tests and the acceptance harness.
#![allow(dead_code)]

use std::path::PathBuf;

use luagc::executor::CorpusEntry;
use luagc::frontend::ast::{Expr, ExprKind, Stmt, StmtKind};
use luagc::heaps::{ClosureObject, Loc, ObjectStore, TableObject, Value, ValueStore};
use rand::Rng;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_source(rel: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(rel)).unwrap()
}

pub fn manifest() -> Vec<CorpusEntry> {
    serde_json::from_str(&std::fs::read_to_string(corpus_dir().join("manifest.json")).unwrap()).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Table,
    Ref,
    Closure,
}

/// What a generated location points to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    None,
    /// Ref value, table value under a literal key, or closure environment.
    To(usize),
    /// Table entry whose key is the location and whose value is `true`.
    Key(usize),
    /// Table entry from one location to another.
    Pair(usize, usize),
    /// Closure environment or table with several entries.
    Many(Vec<usize>),
}

/// A heap description: kinds, one slot per location, the table mode.
#[derive(Clone, Debug)]
pub struct HeapSpec {
    pub kinds: Vec<Kind>,
    pub slots: Vec<Slot>,
    /// `__mode` per table, `None` for no metatable.
    pub modes: Vec<Option<&'static str>>,
    pub roots: Vec<usize>,
}

pub struct Heap {
    pub sigma: ValueStore,
    pub theta: ObjectStore,
    pub locs: Vec<Loc>,
    pub roots: Vec<Loc>,
}

fn value_of(l: Loc) -> Value {
    match l {
        Loc::Table(t) => Value::Table(t),
        Loc::Closure(c) => Value::Closure(c),
        Loc::Ref(_) => unreachable!("refs are not values"),
    }
}

fn closure_body(env: &[Loc]) -> Stmt {
    let es = env
        .iter()
        .map(|l| match l {
            Loc::Ref(r) => Expr::new(ExprKind::Ref(*r)),
            other => Expr::val(value_of(*other)),
        })
        .collect();
    Stmt::new(StmtKind::Return(es))
}

impl HeapSpec {
    pub fn build(&self) -> Heap {
        let mut sigma = ValueStore::default();
        let mut theta = ObjectStore::default();
        // Allocate first so every slot can name any location.
        let locs: Vec<Loc> = self
            .kinds
            .iter()
            .map(|k| match k {
                Kind::Table => Loc::Table(theta.alloc_table(TableObject::new())),
                Kind::Ref => Loc::Ref(sigma.alloc(Value::Nil)),
                Kind::Closure => Loc::Closure(theta.alloc_closure(ClosureObject { params: vec![], body: Stmt::skip() })),
            })
            .collect();
        let mut metas = std::collections::BTreeMap::new();
        let mut ti = 0;
        for (i, l) in locs.iter().enumerate() {
            let targets: Vec<usize> = match &self.slots[i] {
                Slot::None => vec![],
                Slot::To(x) | Slot::Key(x) => vec![*x],
                Slot::Pair(a, b) => vec![*a, *b],
                Slot::Many(xs) => xs.clone(),
            };
            match *l {
                Loc::Ref(r) => {
                    if let Some(x) = targets.first() {
                        sigma.map.insert(r, value_of(locs[*x]));
                    }
                }
                Loc::Closure(c) => {
                    let env: Vec<Loc> = targets.iter().map(|x| locs[*x]).collect();
                    theta.closures.get_mut(&c).unwrap().body = closure_body(&env);
                }
                Loc::Table(t) => {
                    let mode = self.modes.get(ti).copied().flatten();
                    ti += 1;
                    let meta = mode.map(|m| {
                        *metas.entry(m).or_insert_with(|| {
                            let mut mt = TableObject::new();
                            mt.set(Value::str("__mode"), Value::str(m)).unwrap();
                            theta.alloc_table(mt)
                        })
                    });
                    let tb = theta.tables.get_mut(&t).unwrap();
                    tb.meta = meta;
                    match &self.slots[i] {
                        Slot::None => {}
                        Slot::To(x) => tb.set(Value::Num(1.0), value_of(locs[*x])).unwrap(),
                        Slot::Key(x) => tb.set(value_of(locs[*x]), Value::Bool(true)).unwrap(),
                        Slot::Pair(a, b) => tb.set(value_of(locs[*a]), value_of(locs[*b])).unwrap(),
                        Slot::Many(xs) => {
                            for (j, x) in xs.iter().enumerate() {
                                tb.set(Value::Num(j as f64 + 1.0), value_of(locs[*x])).unwrap();
                            }
                        }
                    }
                }
            }
        }
        let roots = self.roots.iter().map(|i| locs[*i]).collect();
        Heap { sigma, theta, locs, roots }
    }
}

fn collectible(kinds: &[Kind]) -> Vec<usize> {
    (0..kinds.len()).filter(|i| kinds[*i] != Kind::Ref).collect()
}

fn slot_options(kinds: &[Kind], i: usize, pairs: bool) -> Vec<Slot> {
    let n = kinds.len();
    let cte = collectible(kinds);
    let mut v = vec![Slot::None];
    match kinds[i] {
        Kind::Ref => v.extend(cte.iter().map(|x| Slot::To(*x))),
        Kind::Closure if pairs => v.extend((0..n).filter(|x| kinds[*x] == Kind::Ref).map(Slot::To)),
        Kind::Closure => v.extend((0..n).map(Slot::To)),
        Kind::Table => {
            v.extend(cte.iter().map(|x| Slot::To(*x)));
            if pairs {
                v.extend(cte.iter().map(|x| Slot::Key(*x)));
                for a in &cte {
                    for b in &cte {
                        if a != b {
                            v.push(Slot::Pair(*a, *b));
                        }
                    }
                }
            }
        }
    }
    v
}

/// Every heap of the grammar with `n` locations: kinds follow `pattern`,
/// each location has one slot, location 0 is the only root. With `weak`,
/// table slots also range over keys and key/value pairs, closures capture
/// refs only, and all tables share one `__mode` out of none, `k`, `v` and
/// `kv`.
pub fn enumerate_heaps(n: usize, pattern: &[Kind], weak: bool, mut f: impl FnMut(&HeapSpec)) {
    let kinds: Vec<Kind> = pattern[..n].to_vec();
    let options: Vec<Vec<Slot>> = (0..n).map(|i| slot_options(&kinds, i, weak)).collect();
    let tables = kinds.iter().filter(|k| **k == Kind::Table).count();
    let modes: &[Option<&'static str>] = if weak { &[None, Some("k"), Some("v"), Some("kv")] } else { &[None] };
    for m in modes {
        let mut idx = vec![0usize; n];
        loop {
            let spec = HeapSpec {
                kinds: kinds.clone(),
                slots: idx.iter().enumerate().map(|(i, j)| options[i][*j].clone()).collect(),
                modes: vec![*m; tables],
                roots: vec![0],
            };
            f(&spec);
            let mut i = 0;
            loop {
                if i == n {
                    break;
                }
                idx[i] += 1;
                if idx[i] < options[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }
}

pub const PLAIN_PATTERN: [Kind; 6] = [Kind::Table, Kind::Ref, Kind::Table, Kind::Closure, Kind::Table, Kind::Ref];
pub const WEAK_PATTERN: [Kind; 6] = [Kind::Table, Kind::Ref, Kind::Closure, Kind::Table, Kind::Ref, Kind::Closure];

/// A random heap with up to `max` locations, one or two roots and, with
/// `weak`, random `__mode` strings.
pub fn random_heap(rng: &mut impl Rng, max: usize, weak: bool) -> HeapSpec {
    let n = rng.gen_range(1..=max);
    let kinds: Vec<Kind> = (0..n)
        .map(|i| if i == 0 { Kind::Table } else { [Kind::Table, Kind::Ref, Kind::Closure][rng.gen_range(0..3)] })
        .collect();
    let cte = collectible(&kinds);
    let slots = (0..n)
        .map(|i| match kinds[i] {
            Kind::Ref => {
                if rng.gen_bool(0.8) {
                    Slot::To(cte[rng.gen_range(0..cte.len())])
                } else {
                    Slot::None
                }
            }
            Kind::Closure => Slot::Many((0..rng.gen_range(0..3)).map(|_| rng.gen_range(0..n)).collect()),
            Kind::Table => match rng.gen_range(0..4) {
                0 => Slot::None,
                1 => Slot::Many((0..rng.gen_range(1..4)).map(|_| cte[rng.gen_range(0..cte.len())]).collect()),
                2 => Slot::Key(cte[rng.gen_range(0..cte.len())]),
                _ => Slot::Pair(cte[rng.gen_range(0..cte.len())], cte[rng.gen_range(0..cte.len())]),
            },
        })
        .collect();
    let tables = kinds.iter().filter(|k| **k == Kind::Table).count();
    let modes = (0..tables)
        .map(|_| if weak { [None, Some("k"), Some("v"), Some("kv")][rng.gen_range(0..4)] } else { None })
        .collect();
    let mut roots = vec![0];
    if n > 1 && rng.gen_bool(0.5) {
        roots.push(rng.gen_range(1..n));
    }
    HeapSpec { kinds, slots, modes, roots }
}

/// Statement templates over locals `a`, `b` (tables) and `c` (a number).
const STATEMENTS: &[&str] = &[
    "a = {b}",
    "b = {1, c}",
    "a[1] = b",
    "b.k = c",
    "b = nil",
    "a = {}",
    "c = c + 1",
    "print(c)",
    "collectgarbage()",
    "local f = function(x) return x end in c = f(c) end",
    "if c > 1 then a = {c} else b = {a} end",
    "local i = 0 in while i < 2 do i = i + 1 c = c + i end end",
    "local d = {a, b} in a = d[2] end",
    "b = {k = function() return c end}",
];

const WEAK_STATEMENTS: &[&str] = &[
    "setmetatable(a, {__mode = 'v'})",
    "setmetatable(b, {__mode = 'k'})",
    "setmetatable(a, {__gc = function(o) print('fin') end})",
];

/// A small terminating program built from the templates; `weak` adds
/// weak-table and finalizer statements.
pub fn random_program(rng: &mut impl Rng, len: usize, weak: bool) -> String {
    let mut s = String::from("local a = {}\nlocal b = {}\nlocal c = 0\n");
    for _ in 0..len {
        let stmt = if weak && rng.gen_bool(0.25) {
            WEAK_STATEMENTS[rng.gen_range(0..WEAK_STATEMENTS.len())]
        } else {
            STATEMENTS[rng.gen_range(0..STATEMENTS.len())]
        };
        s.push_str(stmt);
        s.push('\n');
    }
    s.push_str("return c");
    s
}
