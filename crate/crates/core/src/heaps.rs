//! Values, locations and the two stores of a configuration.
//!
//! `σ` ([`ValueStore`]) binds value references created by `local` and by
//! parameter passing. `θ` ([`ObjectStore`]) holds tables and closures. Every
//! id is drawn from a counter that never goes backwards, so a collected id is
//! never handed out again.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::ast::{Stmt, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ValueRef(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TableId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClosureId(pub u64);

/// A store location of any of the three kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Loc {
    Ref(ValueRef),
    Table(TableId),
    Closure(ClosureId),
}

impl Loc {
    /// Collectible table entities: tables and closures.
    pub fn is_cte(self) -> bool {
        !matches!(self, Loc::Ref(_))
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Ref(r) => write!(f, "r{}", r.0),
            Loc::Table(t) => write!(f, "tid{}", t.0),
            Loc::Closure(c) => write!(f, "cid{}", c.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Builtin {
    Print,
    SetMetatable,
    GetMetatable,
    Error,
    Pcall,
    CollectGarbage,
    ToString,
    Type,
}

impl Builtin {
    pub const ALL: [Builtin; 8] = [
        Builtin::Print,
        Builtin::SetMetatable,
        Builtin::GetMetatable,
        Builtin::Error,
        Builtin::Pcall,
        Builtin::CollectGarbage,
        Builtin::ToString,
        Builtin::Type,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Print => "print",
            Builtin::SetMetatable => "setmetatable",
            Builtin::GetMetatable => "getmetatable",
            Builtin::Error => "error",
            Builtin::Pcall => "pcall",
            Builtin::CollectGarbage => "collectgarbage",
            Builtin::ToString => "tostring",
            Builtin::Type => "type",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }
}

/// A runtime value. Equality is structural: numbers compare by bit pattern
/// (with `-0 == 0`), which keeps `Eq` and `Hash` lawful. Lua's own `==` is
/// [`Value::lua_eq`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Value {
    Nil,
    Bool(bool),
    Num(f64),
    Str(String),
    Table(TableId),
    Closure(ClosureId),
    Builtin(Builtin),
}

fn num_bits(n: f64) -> u64 {
    if n == 0.0 {
        0
    } else {
        n.to_bits()
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Nil, Value::Nil) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => num_bits(*a) == num_bits(*b),
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Table(a), Value::Table(b)) => a == b,
            (Value::Closure(a), Value::Closure(b)) => a == b,
            (Value::Builtin(a), Value::Builtin(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Nil => {}
            Value::Bool(b) => b.hash(state),
            Value::Num(n) => num_bits(*n).hash(state),
            Value::Str(s) => s.hash(state),
            Value::Table(t) => t.hash(state),
            Value::Closure(c) => c.hash(state),
            Value::Builtin(b) => b.hash(state),
        }
    }
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Value::Nil => 0,
            Value::Bool(_) => 1,
            Value::Num(_) => 2,
            Value::Str(_) => 3,
            Value::Table(_) => 4,
            Value::Closure(_) => 5,
            Value::Builtin(_) => 6,
        }
    }
}

/// Structural total order, consistent with `Eq`; not Lua's `<`.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Num(a), Value::Num(b)) => f64::from_bits(num_bits(*a)).total_cmp(&f64::from_bits(num_bits(*b))),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Table(a), Value::Table(b)) => a.cmp(b),
            (Value::Closure(a), Value::Closure(b)) => a.cmp(b),
            (Value::Builtin(a), Value::Builtin(b)) => (*a as u8).cmp(&(*b as u8)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Value {
    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn truthy(&self) -> bool {
        !matches!(self, Value::Nil | Value::Bool(false))
    }

    pub fn loc(&self) -> Option<Loc> {
        match self {
            Value::Table(t) => Some(Loc::Table(*t)),
            Value::Closure(c) => Some(Loc::Closure(*c)),
            _ => None,
        }
    }

    pub fn is_cte(&self) -> bool {
        self.loc().is_some()
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Nil => "nil",
            Value::Bool(_) => "boolean",
            Value::Num(_) => "number",
            Value::Str(_) => "string",
            Value::Table(_) => "table",
            Value::Closure(_) | Value::Builtin(_) => "function",
        }
    }

    /// Lua's primitive equality.
    pub fn lua_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a == b,
            _ => self == other,
        }
    }
}

/// Formats a number the way Lua 5.2 does (`%.14g`).
pub fn format_number(n: f64) -> String {
    if n.is_nan() {
        return if n.is_sign_negative() { "-nan" } else { "nan" }.to_string();
    }
    if n.is_infinite() {
        return if n > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if n == n.trunc() && n.abs() < 1e15 {
        return format!("{}", n as i64);
    }
    let s = format!("{:.13e}", n);
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..14).contains(&exp) {
        let decimals = (13 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, n);
        let fixed = fixed.trim_end_matches('0').trim_end_matches('.');
        fixed.to_string()
    } else {
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{}e{}{:02}", mant, if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => write!(f, "nil"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(n) => write!(f, "{}", format_number(*n)),
            Value::Str(s) => write!(f, "{s}"),
            Value::Table(t) => write!(f, "table: 0x{:08x}", t.0),
            Value::Closure(c) => write!(f, "function: 0x{:08x}", c.0),
            Value::Builtin(b) => write!(f, "builtin: {}", b.name()),
        }
    }
}

/// A table key: any value except `nil` and NaN.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Key(Value);

impl Key {
    pub fn new(v: Value) -> Result<Key, HeapError> {
        match v {
            Value::Nil => Err(HeapError::InvalidKey("nil")),
            Value::Num(n) if n.is_nan() => Err(HeapError::InvalidKey("NaN")),
            Value::Num(n) if n == 0.0 => Ok(Key(Value::Num(0.0))),
            v => Ok(Key(v)),
        }
    }

    pub fn value(&self) -> &Value {
        &self.0
    }

    pub fn into_value(self) -> Value {
        self.0
    }
}

/// Finalization status of a table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FinalizationMark {
    /// `⊥`: not marked.
    Unmarked,
    /// `⊘`: finalizer already scheduled; never marked again.
    Finalized,
    /// Marked for finalization with a priority; larger is more recent.
    Priority(u64),
}

impl FinalizationMark {
    pub fn is_marked(self) -> bool {
        matches!(self, FinalizationMark::Priority(_))
    }

    /// Ordering key with `⊥` as the minimum; `⊘` has no place in the order.
    pub fn priority(self) -> Option<u64> {
        match self {
            FinalizationMark::Unmarked => Some(0),
            FinalizationMark::Priority(p) => Some(p),
            FinalizationMark::Finalized => None,
        }
    }
}

impl fmt::Display for FinalizationMark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FinalizationMark::Unmarked => write!(f, "⊥"),
            FinalizationMark::Finalized => write!(f, "⊘"),
            FinalizationMark::Priority(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableObject {
    pub fields: IndexMap<Key, Value>,
    pub meta: Option<TableId>,
    pub pos: FinalizationMark,
}

impl Hash for TableObject {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.fields.len().hash(state);
        for (k, v) in &self.fields {
            k.hash(state);
            v.hash(state);
        }
        self.meta.hash(state);
        self.pos.hash(state);
    }
}

impl TableObject {
    pub fn new() -> TableObject {
        TableObject { fields: IndexMap::new(), meta: None, pos: FinalizationMark::Unmarked }
    }

    pub fn get(&self, key: &Value) -> Value {
        match Key::new(key.clone()) {
            Ok(k) => self.fields.get(&k).cloned().unwrap_or(Value::Nil),
            Err(_) => Value::Nil,
        }
    }

    pub fn get_str(&self, key: &str) -> Option<&Value> {
        self.fields.get(&Key(Value::str(key)))
    }

    /// Raw store; assigning `nil` removes the field.
    pub fn set(&mut self, key: Value, value: Value) -> Result<(), HeapError> {
        let k = Key::new(key)?;
        if matches!(value, Value::Nil) {
            self.fields.shift_remove(&k);
        } else {
            self.fields.insert(k, value);
        }
        Ok(())
    }

    /// Length of the border starting at 1.
    pub fn border(&self) -> usize {
        let mut n = 0usize;
        while self.fields.contains_key(&Key(Value::Num((n + 1) as f64))) {
            n += 1;
        }
        n
    }
}

impl Default for TableObject {
    fn default() -> Self {
        TableObject::new()
    }
}

/// A closure: parameters and a body in which captured variables have been
/// replaced by the references they denote. Its environment is therefore the
/// set of locations occurring in the body.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ClosureObject {
    pub params: Vec<String>,
    pub body: Stmt,
}

impl ClosureObject {
    pub fn env(&self) -> Vec<Loc> {
        let mut out = Vec::new();
        self.body.locations(&mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HeapError {
    #[error("invalid table key: {0}")]
    InvalidKey(&'static str),
    #[error("dangling location {0}")]
    Dangling(Loc),
    #[error("{0} is not a table")]
    NotATable(Value),
    #[error("duplicate finalization priority {0}")]
    DuplicatePriority(u64),
}

/// `σ`: value references to values.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValueStore {
    pub map: BTreeMap<ValueRef, Value>,
    pub next: u64,
}

impl ValueStore {
    pub fn alloc(&mut self, v: Value) -> ValueRef {
        self.next += 1;
        let r = ValueRef(self.next);
        self.map.insert(r, v);
        r
    }

    pub fn get(&self, r: ValueRef) -> Option<&Value> {
        self.map.get(&r)
    }

    pub fn contains(&self, r: ValueRef) -> bool {
        self.map.contains_key(&r)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// `θ`: tables and closures, in disjoint id spaces.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct ObjectStore {
    pub tables: BTreeMap<TableId, TableObject>,
    pub closures: BTreeMap<ClosureId, ClosureObject>,
    pub next_table: u64,
    pub next_closure: u64,
}

impl ObjectStore {
    pub fn alloc_table(&mut self, t: TableObject) -> TableId {
        self.next_table += 1;
        let id = TableId(self.next_table);
        self.tables.insert(id, t);
        id
    }

    pub fn alloc_closure(&mut self, c: ClosureObject) -> ClosureId {
        self.next_closure += 1;
        let id = ClosureId(self.next_closure);
        self.closures.insert(id, c);
        id
    }

    pub fn table(&self, id: TableId) -> Option<&TableObject> {
        self.tables.get(&id)
    }

    pub fn table_mut(&mut self, id: TableId) -> Option<&mut TableObject> {
        self.tables.get_mut(&id)
    }

    pub fn closure(&self, id: ClosureId) -> Option<&ClosureObject> {
        self.closures.get(&id)
    }

    pub fn contains(&self, l: Loc) -> bool {
        match l {
            Loc::Table(t) => self.tables.contains_key(&t),
            Loc::Closure(c) => self.closures.contains_key(&c),
            Loc::Ref(_) => false,
        }
    }

    pub fn len(&self) -> usize {
        self.tables.len() + self.closures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest priority among marked tables (`⊥` counts as 0).
    pub fn max_priority(&self) -> u64 {
        self.tables.values().filter_map(|t| t.pos.priority()).max().unwrap_or(0)
    }
}

/// `alloc_value(σ, v)`.
pub fn alloc_value(sigma: &mut ValueStore, v: Value) -> ValueRef {
    sigma.alloc(v)
}

/// `alloc_table(θ, fields)`: a fresh table with no metatable and mark `⊥`.
pub fn alloc_table(
    theta: &mut ObjectStore,
    fields: impl IntoIterator<Item = (Value, Value)>,
) -> Result<TableId, HeapError> {
    let mut t = TableObject::new();
    for (k, v) in fields {
        t.set(k, v)?;
    }
    Ok(theta.alloc_table(t))
}

/// Raw lookup of `key` in the immediate metatable of `tid`; `nil` when there
/// is no metatable or no such field.
pub fn index_metatable(tid: TableId, key: &str, theta: &ObjectStore) -> Value {
    theta
        .table(tid)
        .and_then(|t| t.meta)
        .and_then(|m| theta.table(m))
        .and_then(|m| m.get_str(key).cloned())
        .unwrap_or(Value::Nil)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Weakness {
    Strong,
    WeakKeys,
    WeakValues,
    WeakBoth,
}

impl Weakness {
    pub fn weak_keys(self) -> bool {
        matches!(self, Weakness::WeakKeys | Weakness::WeakBoth)
    }

    pub fn weak_values(self) -> bool {
        matches!(self, Weakness::WeakValues | Weakness::WeakBoth)
    }

    pub fn from_mode(mode: &str) -> Weakness {
        match (mode.contains('k'), mode.contains('v')) {
            (false, false) => Weakness::Strong,
            (true, false) => Weakness::WeakKeys,
            (false, true) => Weakness::WeakValues,
            (true, true) => Weakness::WeakBoth,
        }
    }
}

/// Weakness from the `__mode` field of the immediate metatable; anything but
/// a string means strong.
pub fn weakness(tid: TableId, theta: &ObjectStore) -> Weakness {
    match index_metatable(tid, "__mode", theta) {
        Value::Str(s) => Weakness::from_mode(&s),
        _ => Weakness::Strong,
    }
}

/// Locations occurring literally in a value.
pub fn value_locations(v: &Value, out: &mut Vec<Loc>) {
    if let Some(l) = v.loc() {
        out.push(l);
    }
}

/// Outgoing edges of a bound location: everything a binding mentions.
pub fn successors(l: Loc, sigma: &ValueStore, theta: &ObjectStore) -> Option<Vec<Loc>> {
    let mut out = Vec::new();
    match l {
        Loc::Ref(r) => value_locations(sigma.get(r)?, &mut out),
        Loc::Table(t) => {
            let t = theta.table(t)?;
            for (k, v) in &t.fields {
                value_locations(k.value(), &mut out);
                value_locations(v, &mut out);
            }
            if let Some(m) = t.meta {
                out.push(Loc::Table(m));
            }
        }
        Loc::Closure(c) => theta.closure(c)?.body.locations(&mut out),
    }
    Some(out)
}

pub fn is_bound(l: Loc, sigma: &ValueStore, theta: &ObjectStore) -> bool {
    match l {
        Loc::Ref(r) => sigma.contains(r),
        _ => theta.contains(l),
    }
}

/// Well-formedness: no dangling locations in the term or the stores, and
/// pairwise distinct finalization priorities.
pub fn validate(term: &Term, sigma: &ValueStore, theta: &ObjectStore) -> Result<(), HeapError> {
    let mut locs = Vec::new();
    term.locations(&mut locs);
    for l in locs {
        if !is_bound(l, sigma, theta) {
            return Err(HeapError::Dangling(l));
        }
    }
    let all = sigma
        .map
        .keys()
        .map(|r| Loc::Ref(*r))
        .chain(theta.tables.keys().map(|t| Loc::Table(*t)))
        .chain(theta.closures.keys().map(|c| Loc::Closure(*c)));
    for l in all {
        for s in successors(l, sigma, theta).unwrap_or_default() {
            if !is_bound(s, sigma, theta) {
                return Err(HeapError::Dangling(s));
            }
        }
    }
    let mut seen = BTreeSet::new();
    for t in theta.tables.values() {
        if let FinalizationMark::Priority(p) = t.pos {
            if !seen.insert(p) {
                return Err(HeapError::DuplicatePriority(p));
            }
        }
    }
    Ok(())
}

/// A JSON-ready snapshot of the stores with ids renumbered in discovery
/// order from the term (then the rest in id order).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeapSnapshot {
    pub refs: Vec<SnapshotRef>,
    pub tables: Vec<SnapshotTable>,
    pub closures: Vec<SnapshotClosure>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotRef {
    pub id: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotTable {
    pub id: String,
    pub fields: Vec<(String, String)>,
    pub meta: Option<String>,
    pub pos: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotClosure {
    pub id: String,
    pub params: Vec<String>,
    pub body: String,
}

/// Canonical renaming of locations, assigned in DFS order from a root list.
#[derive(Clone, Debug, Default)]
pub struct Renaming {
    refs: BTreeMap<ValueRef, usize>,
    tables: BTreeMap<TableId, usize>,
    closures: BTreeMap<ClosureId, usize>,
    pub order: Vec<Loc>,
}

impl Renaming {
    /// Numbers every location reachable from `roots`; edges from a binding
    /// are visited in store order (fields in insertion order, then the
    /// metatable).
    pub fn from_roots(roots: &[Loc], sigma: &ValueStore, theta: &ObjectStore) -> Renaming {
        let mut r = Renaming::default();
        let mut stack: Vec<Loc> = roots.iter().rev().copied().collect();
        while let Some(l) = stack.pop() {
            if !r.assign(l) {
                continue;
            }
            if let Some(succ) = successors(l, sigma, theta) {
                stack.extend(succ.into_iter().rev());
            }
        }
        r
    }

    fn assign(&mut self, l: Loc) -> bool {
        let fresh = match l {
            Loc::Ref(x) => insert_next(&mut self.refs, x),
            Loc::Table(x) => insert_next(&mut self.tables, x),
            Loc::Closure(x) => insert_next(&mut self.closures, x),
        };
        if fresh {
            self.order.push(l);
        }
        fresh
    }

    /// Extends the renaming to every bound location not yet numbered.
    pub fn complete(&mut self, sigma: &ValueStore, theta: &ObjectStore) {
        for r in sigma.map.keys() {
            self.assign(Loc::Ref(*r));
        }
        for t in theta.tables.keys() {
            self.assign(Loc::Table(*t));
        }
        for c in theta.closures.keys() {
            self.assign(Loc::Closure(*c));
        }
    }

    pub fn name(&self, l: Loc) -> String {
        match l {
            Loc::Ref(x) => self.refs.get(&x).map_or_else(|| format!("r?{}", x.0), |n| format!("r{n}")),
            Loc::Table(x) => {
                self.tables.get(&x).map_or_else(|| format!("tid?{}", x.0), |n| format!("tid{n}"))
            }
            Loc::Closure(x) => {
                self.closures.get(&x).map_or_else(|| format!("cid?{}", x.0), |n| format!("cid{n}"))
            }
        }
    }

    pub fn contains(&self, l: Loc) -> bool {
        match l {
            Loc::Ref(x) => self.refs.contains_key(&x),
            Loc::Table(x) => self.tables.contains_key(&x),
            Loc::Closure(x) => self.closures.contains_key(&x),
        }
    }

    pub fn value(&self, v: &Value) -> String {
        match v {
            Value::Str(s) => format!("{s:?}"),
            v => match v.loc() {
                Some(l) => self.name(l),
                None => v.to_string(),
            },
        }
    }
}

fn insert_next<K: Ord>(m: &mut BTreeMap<K, usize>, k: K) -> bool {
    if m.contains_key(&k) {
        return false;
    }
    let n = m.len() + 1;
    m.insert(k, n);
    true
}

/// Snapshot of the stores of a configuration, ids canonicalized from `term`.
pub fn snapshot(term: &Term, sigma: &ValueStore, theta: &ObjectStore) -> HeapSnapshot {
    let mut roots = Vec::new();
    term.locations(&mut roots);
    let mut ren = Renaming::from_roots(&roots, sigma, theta);
    ren.complete(sigma, theta);
    snapshot_with(&ren, sigma, theta)
}

/// Snapshot of exactly the locations numbered by `ren`, in numbering order.
pub fn snapshot_with(ren: &Renaming, sigma: &ValueStore, theta: &ObjectStore) -> HeapSnapshot {
    let mut snap = HeapSnapshot { refs: Vec::new(), tables: Vec::new(), closures: Vec::new() };
    for &l in &ren.order {
        match l {
            Loc::Ref(r) => {
                if let Some(v) = sigma.get(r) {
                    snap.refs.push(SnapshotRef { id: ren.name(l), value: ren.value(v) });
                }
            }
            Loc::Table(t) => {
                if let Some(obj) = theta.table(t) {
                    snap.tables.push(SnapshotTable {
                        id: ren.name(l),
                        fields: obj
                            .fields
                            .iter()
                            .map(|(k, v)| (ren.value(k.value()), ren.value(v)))
                            .collect(),
                        meta: obj.meta.map(|m| ren.name(Loc::Table(m))),
                        pos: obj.pos.to_string(),
                    });
                }
            }
            Loc::Closure(c) => {
                if let Some(obj) = theta.closure(c) {
                    snap.closures.push(SnapshotClosure {
                        id: ren.name(l),
                        params: obj.params.clone(),
                        body: crate::frontend::print::print_stmt_with(&obj.body, &|l| ren.name(l)),
                    });
                }
            }
        }
    }
    snap
}
