//! Static types and subtyping.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::heaps::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Prim {
    Nil,
    Num,
    Bool,
    Str,
}

impl Prim {
    /// The primitive type of a primitive value.
    pub fn of(v: &Value) -> Option<Prim> {
        match v {
            Value::Nil => Some(Prim::Nil),
            Value::Num(_) => Some(Prim::Num),
            Value::Bool(_) => Some(Prim::Bool),
            Value::Str(_) => Some(Prim::Str),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Prim::Nil => "nil",
            Prim::Num => "num",
            Prim::Bool => "bool",
            Prim::Str => "str",
        }
    }
}

/// Weakness tag of a table type. Subtyping ignores it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Weakness {
    #[default]
    Strong,
    Wk,
    Wv,
    Wkv,
}

impl Weakness {
    pub fn from_flags(k: bool, v: bool) -> Weakness {
        match (k, v) {
            (false, false) => Weakness::Strong,
            (true, false) => Weakness::Wk,
            (false, true) => Weakness::Wv,
            (true, true) => Weakness::Wkv,
        }
    }

    /// Weakness named by a `__mode` string.
    pub fn from_mode(s: &str) -> Weakness {
        Weakness::from_flags(s.contains('k'), s.contains('v'))
    }

    pub fn weak_keys(self) -> bool {
        matches!(self, Weakness::Wk | Weakness::Wkv)
    }

    pub fn weak_values(self) -> bool {
        matches!(self, Weakness::Wv | Weakness::Wkv)
    }

    /// Least tag at least as weak as both.
    pub fn join(self, o: Weakness) -> Weakness {
        Weakness::from_flags(self.weak_keys() || o.weak_keys(), self.weak_values() || o.weak_values())
    }
}

/// Types of the analyzer. Table keys are singleton types, i.e. literal
/// primitive values; `Var` occurs only under the `Rec` binding it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StaticType {
    Prim(Prim),
    /// `⟨v : p⟩`; `v` is a primitive value.
    Singleton(Value),
    Dyn,
    Fun(Box<StaticType>, Box<StaticType>),
    Table(Vec<(Value, StaticType)>, Weakness),
    Rec(u32, Box<StaticType>),
    Var(u32),
    /// Products; `Tuple(vec![])` is the empty tuple.
    Tuple(Vec<StaticType>),
}

impl StaticType {
    pub fn singleton(v: Value) -> StaticType {
        debug_assert!(Prim::of(&v).is_some());
        StaticType::Singleton(v)
    }

    pub fn field(&self, k: &Value) -> Option<&StaticType> {
        match self {
            StaticType::Table(fs, _) => fs.iter().find(|(f, _)| f == k).map(|(_, t)| t),
            _ => None,
        }
    }

    /// Tables and functions may be collected; `dyn` might be either.
    pub fn is_collectible(&self) -> bool {
        matches!(self, StaticType::Table(..) | StaticType::Fun(..) | StaticType::Rec(..) | StaticType::Dyn)
    }
}

/// `a <: b`: `dyn` on top, singletons below their primitive type, tables by
/// width, depth and permutation, products covariantly. Functions and
/// recursive types are related only to themselves.
pub fn subtype(a: &StaticType, b: &StaticType) -> bool {
    use StaticType as T;
    if a == b {
        return true;
    }
    match (a, b) {
        (_, T::Dyn) => true,
        (T::Singleton(v), T::Prim(p)) => Prim::of(v) == Some(*p),
        (T::Table(fa, _), T::Table(fb, _)) => {
            fb.iter().all(|(k, tb)| fa.iter().any(|(k2, ta)| k == k2 && subtype(ta, tb)))
        }
        (T::Tuple(xs), T::Tuple(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| subtype(x, y)),
        _ => false,
    }
}

impl fmt::Display for StaticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StaticType::Prim(p) => f.write_str(p.name()),
            StaticType::Singleton(v) => write!(f, "<{v}:{}>", Prim::of(v).map_or("?", Prim::name)),
            StaticType::Dyn => f.write_str("dyn"),
            StaticType::Fun(a, r) => write!(f, "{a} -> {r}"),
            StaticType::Table(fs, w) => {
                f.write_str("{")?;
                for (i, (k, t)) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "[{}]: {t}", StaticType::Singleton(k.clone()))?;
                }
                f.write_str("}")?;
                if *w != Weakness::Strong {
                    write!(f, " {}", format!("{w:?}").to_lowercase())?;
                }
                Ok(())
            }
            StaticType::Rec(y, t) => write!(f, "mu y{y}. {t}"),
            StaticType::Var(y) => write!(f, "y{y}"),
            StaticType::Tuple(ts) => {
                f.write_str("(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" x ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl Serialize for StaticType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
