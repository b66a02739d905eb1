use super::{Configuration, Reduced, StuckTerm};
use crate::frontend::ast::{Expr, ExprKind, Span};
use crate::heaps::{index_metatable, Builtin, Value};

fn arg(vs: &[Value], i: usize) -> Value {
    vs.get(i).cloned().unwrap_or(Value::Nil)
}

fn tuple(vs: Vec<Value>, span: Span) -> Reduced {
    Reduced::Expr(Expr::at(ExprKind::Tuple(vs), span))
}

fn raise(msg: String) -> Reduced {
    Reduced::Raise(Value::Str(msg))
}

pub(super) fn apply(
    c: &mut Configuration,
    b: Builtin,
    vs: Vec<Value>,
    span: Span,
) -> Result<(&'static str, Reduced), StuckTerm> {
    let out = match b {
        Builtin::Print => {
            let line: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
            c.output.push(line.join("\t"));
            tuple(Vec::new(), span)
        }
        Builtin::SetMetatable => {
            let (t, m) = (arg(&vs, 0), arg(&vs, 1));
            let Value::Table(tid) = t else {
                return Ok(("setmetatable", raise(format!(
                    "bad argument #1 to 'setmetatable' (table expected, got {})",
                    t.type_name()
                ))));
            };
            let meta = match m {
                Value::Nil => None,
                Value::Table(m) => Some(m),
                other => {
                    return Ok(("setmetatable", raise(format!(
                        "bad argument #2 to 'setmetatable' (nil or table expected, got {})",
                        other.type_name()
                    ))))
                }
            };
            if !matches!(index_metatable(tid, "__metatable", &c.theta), Value::Nil) {
                return Ok(("setmetatable", raise("cannot change a protected metatable".into())));
            }
            let pos = crate::gc::set_fin(tid, meta, &c.theta);
            let Some(obj) = c.theta.table_mut(tid) else {
                return Ok(("setmetatable", raise(format!("dangling table tid{}", tid.0))));
            };
            obj.meta = meta;
            obj.pos = pos;
            tuple(vec![Value::Table(tid)], span)
        }
        Builtin::GetMetatable => {
            let v = match arg(&vs, 0) {
                Value::Table(tid) => match index_metatable(tid, "__metatable", &c.theta) {
                    Value::Nil => c.theta.table(tid).and_then(|t| t.meta).map_or(Value::Nil, Value::Table),
                    protected => protected,
                },
                _ => Value::Nil,
            };
            tuple(vec![v], span)
        }
        Builtin::Error => Reduced::Raise(arg(&vs, 0)),
        Builtin::Pcall => {
            if vs.is_empty() {
                return Ok(("pcall", raise("bad argument #1 to 'pcall' (value expected)".into())));
            }
            let f = Expr::val(vs[0].clone());
            let args = vs[1..].iter().cloned().map(Expr::val).collect();
            let call = Expr::at(ExprKind::Call(Box::new(f), args), span);
            Reduced::Expr(Expr::at(ExprKind::Protected(Box::new(call)), span))
        }
        Builtin::CollectGarbage => tuple(vec![Value::Num(0.0)], span),
        Builtin::ToString => match arg(&vs, 0) {
            v @ (Value::Nil | Value::Bool(_) | Value::Num(_) | Value::Str(_)) => {
                tuple(vec![Value::Str(v.to_string())], span)
            }
            v => raise(format!("tostring is not supported on {} values", v.type_name())),
        },
        Builtin::Type => tuple(vec![Value::str(arg(&vs, 0).type_name())], span),
    };
    Ok((b.name(), out))
}
