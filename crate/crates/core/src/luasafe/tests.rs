use super::*;
use crate::frontend::ast::{Node, StmtKind};
use crate::frontend::parse_str;
use crate::heaps::Value;

const FIG1: &str = include_str!("../../../../corpus/figures/fig1.lua");
const FIG8: &str = include_str!("../../../../corpus/figures/fig8.lua");
const FIG9: &str = include_str!("../../../../corpus/figures/fig9.lua");

fn unsafe_at(r: &AnalysisReport) -> Vec<(u32, u32)> {
    r.diagnostics.iter().filter(|d| d.severity == Severity::Unsafe).map(|d| (d.line, d.col)).collect()
}

#[test]
fn fig1_rejected_at_loop_read() {
    let r = check_str(FIG1).unwrap();
    assert_eq!(r.verdict, Verdict::Unsafe, "{}", r.to_text(true));
    assert_eq!(unsafe_at(&r), vec![(8, 10)]);
}

#[test]
fn fig8_flags_only_unshared_closures() {
    let r = check_str(FIG8).unwrap();
    assert_eq!(r.verdict, Verdict::Unsafe);
    assert_eq!(r.unsafe_lines(), vec![9, 10], "{}", r.to_text(true));
}

#[test]
fn fig9_flags_method_not_argument() {
    let r = check_str(FIG9).unwrap();
    assert_eq!(unsafe_at(&r), vec![(6, 1)], "{}", r.to_text(true));
}

#[test]
fn trivial_program_is_safe() {
    let r = check_str("local x = 1\nprint(x)").unwrap();
    assert_eq!(r.verdict, Verdict::Safe);
    assert!(r.diagnostics.is_empty());
}

fn typed(src: &str) -> TypedProgram {
    infer(&crate::frontend::desugar(&parse_str(src).unwrap())).unwrap()
}

fn ty(tp: &TypedProgram, name: &str) -> StaticType {
    let i = tp.bindings.iter().position(|b| b.name == name).unwrap();
    tp.type_of_binding(BindingId(i))
}

fn num(n: f64) -> Value {
    Value::Num(n)
}

#[test]
fn subtype_examples() {
    use StaticType as T;
    assert!(subtype(&T::Singleton(num(5.0)), &T::Prim(Prim::Num)));
    assert!(!subtype(&T::Prim(Prim::Num), &T::Singleton(num(5.0))));
    assert!(subtype(&T::Fun(Box::new(T::Tuple(vec![])), Box::new(T::Dyn)), &T::Dyn));
    let wide = T::Table(vec![(num(1.0), T::Prim(Prim::Num)), (num(2.0), T::Prim(Prim::Str))], Weakness::Strong);
    let narrow = T::Table(vec![(num(1.0), T::Prim(Prim::Num))], Weakness::Wv);
    assert!(subtype(&wide, &narrow));
    assert!(!subtype(&narrow, &wide));
    let perm = T::Table(vec![(num(2.0), T::Prim(Prim::Str)), (num(1.0), T::Singleton(num(3.0)))], Weakness::Wk);
    assert!(subtype(&perm, &wide));
    let f = T::Fun(Box::new(T::Prim(Prim::Num)), Box::new(T::Prim(Prim::Num)));
    let g = T::Fun(Box::new(T::Singleton(num(1.0))), Box::new(T::Prim(Prim::Num)));
    assert!(!subtype(&f, &g) && !subtype(&g, &f));
}

#[test]
fn literals_get_singleton_types() {
    let tp = typed("local x = 1 in ; end");
    assert_eq!(ty(&tp, "x"), StaticType::Singleton(num(1.0)));
    let tp = typed("local x = 1\nx = 2\nx = nil");
    assert_eq!(ty(&tp, "x"), StaticType::Prim(Prim::Num));
    let tp = typed("local x = 1\nx = 'a'");
    assert_eq!(ty(&tp, "x"), StaticType::Dyn);
}

#[test]
fn identity_function_keeps_argument_type() {
    let tp = typed("local f = function(x) return x end in f(1) end");
    let one = StaticType::Singleton(num(1.0));
    assert_eq!(ty(&tp, "f"), StaticType::Fun(Box::new(StaticType::Tuple(vec![one.clone()])), Box::new(one)));
}

#[test]
fn fig9_method_field_is_num_to_num() {
    let tp = typed(FIG9);
    let t1 = ty(&tp, "t1");
    let m = t1.field(&Value::Str("method".into())).unwrap();
    let n = StaticType::Prim(Prim::Num);
    assert_eq!(*m, StaticType::Fun(Box::new(StaticType::Tuple(vec![n.clone()])), Box::new(n)));
}

#[test]
fn self_reference_gives_recursive_type() {
    let tp = typed("local t = {}\nt.self = t");
    match ty(&tp, "t") {
        StaticType::Rec(0, body) => assert_eq!(body.field(&Value::Str("self".into())), Some(&StaticType::Var(0))),
        other => panic!("{other}"),
    }
}

#[test]
fn inference_is_stable_under_its_own_annotations() {
    for src in [FIG1, FIG8, FIG9, "local t = {}\nt.self = t", "local f = function(x) return x end in f(1) end"] {
        let t = crate::frontend::desugar(&parse_str(src).unwrap());
        let tp = infer(&t).unwrap();
        let asc: Vec<(usize, StaticType)> = (0..tp.bindings.len()).map(|i| (i, tp.type_of_binding(BindingId(i)))).collect();
        let again = infer_with(&t, &asc).unwrap();
        assert_eq!(tp.annotations(), again.annotations(), "{src}");
    }
}

#[test]
fn out_of_scope_forms_are_unknown() {
    for src in ["local a, b = 1, 2", "local t = {}\nlocal k = 1\nt[k] = 2", "g = 1", "return 1, 2"] {
        let r = check_str(src).unwrap();
        assert_eq!(r.verdict, Verdict::Unknown, "{src}");
        assert!(r.note.is_some());
    }
}

#[test]
fn missing_field_is_a_type_error_warning() {
    let r = check_str("local t = {a = 1}\nprint(t.b)").unwrap();
    assert_eq!(r.verdict, Verdict::Safe);
    assert_eq!(r.diagnostics.len(), 1);
    assert_eq!(r.diagnostics[0].reason, Reason::TypeError);
}

fn point_of_line(tp: &TypedProgram, line: u32) -> crate::frontend::ast::NodeId {
    let mut id = None;
    tp.term.walk(&mut |n| {
        if let Node::Stmt(s) = n {
            if s.span.line == line && id.is_none() && !matches!(s.kind, StmtKind::Seq(..) | StmtKind::Skip) {
                id = Some(s.span.id);
            }
        }
    });
    id.unwrap()
}

fn reaching(tp: &TypedProgram, defs: &ReachingDefs, line: u32) -> Vec<(String, crate::frontend::ast::NodeId)> {
    defs.defs_at(point_of_line(tp, line)).iter().map(|d| (tp.binding(d.binding).name.clone(), d.point)).collect()
}

#[test]
fn reaching_definitions() {
    let tp = typed("local a = {}\nlocal b = 1\nprint(a)");
    let defs = build_cfg(&tp);
    let names: Vec<String> = reaching(&tp, &defs, 3).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["a", "b"]);

    let tp = typed("local a = {}\na = {}\nprint(a)");
    let defs = build_cfg(&tp);
    let r = reaching(&tp, &defs, 3);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].1, point_of_line(&tp, 2));

    let tp = typed(FIG1);
    let defs = build_cfg(&tp);
    let names: Vec<String> = reaching(&tp, &defs, 8).into_iter().map(|(n, _)| n).collect();
    assert!(names.contains(&"t".to_string()));
    assert_eq!(names.iter().filter(|n| *n == "i").count(), 1);
    // Both the initial and the in-loop definition of i reach the loop head.
    let names: Vec<String> = reaching(&tp, &defs, 5).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.iter().filter(|n| *n == "i").count(), 2);
}

#[test]
fn setmetatable_without_mode_makes_table_strong() {
    let src = "local t = {}\nsetmetatable(t, {__mode = 'v'})\nt[1] = {}\nsetmetatable(t, {})\nprint(t[1])";
    assert_eq!(check_str(src).unwrap().verdict, Verdict::Safe);
    let src = "local t = {}\nsetmetatable(t, {__mode = 'v'})\nt[1] = {}\nsetmetatable(t, nil)\nprint(t[1])";
    assert_eq!(check_str(src).unwrap().verdict, Verdict::Safe);
    let src = "local t = {}\nsetmetatable(t, {__mode = 'v'})\nt[1] = {}\nprint(t[1])";
    assert_eq!(check_str(src).unwrap().verdict, Verdict::Unsafe);
}

#[test]
fn weak_keys_and_primitive_values_are_safe() {
    let src = "local t = {}\nsetmetatable(t, {__mode = 'k'})\nt[1] = {}\nprint(t[1])";
    assert_eq!(check_str(src).unwrap().verdict, Verdict::Safe);
    let src = "local t = {}\nsetmetatable(t, {__mode = 'v'})\nt[1] = 5\nprint(t[1])";
    assert_eq!(check_str(src).unwrap().verdict, Verdict::Safe);
}

#[test]
fn strong_alias_protects_weak_value() {
    let src = "local v = {}\nlocal t = {}\nsetmetatable(t, {__mode = 'v'})\nt[1] = v\nprint(t[1])";
    assert_eq!(check_str(src).unwrap().verdict, Verdict::Safe);
    let src = "local v = {}\nlocal t = {}\nsetmetatable(t, {__mode = 'v'})\nt[1] = v\nv = nil\nprint(t[1])";
    assert_eq!(check_str(src).unwrap().verdict, Verdict::Unsafe);
}

#[test]
fn weakness_joins_at_branches() {
    let src = "local t = {}\nt[1] = {}\nif 1 < 2 then setmetatable(t, {__mode = 'v'}) end\nprint(t[1])";
    assert_eq!(check_str(src).unwrap().unsafe_lines(), vec![4]);
}

#[test]
fn closures_read_under_the_weakest_tag() {
    let src = "local t = {}\nt[1] = {}\nlocal f = function() return t[1] end\nsetmetatable(t, {__mode = 'v'})\nsetmetatable(t, nil)";
    assert_eq!(check_str(src).unwrap().unsafe_lines(), vec![3]);
}

#[test]
fn unknown_mode_string_is_treated_as_weak() {
    let src = "local m = {}\nm.__mode = 'v'\nm.__mode = 'k'\nlocal t = {}\nsetmetatable(t, m)\nt[1] = {}\nprint(t[1])";
    let r = check_str(src).unwrap();
    assert_eq!(r.verdict, Verdict::Unsafe);
    assert!(r.diagnostics.iter().any(|d| d.reason == Reason::WeakTableNondeterminism));
}

#[test]
fn json_report_shape() {
    let r = check_str(FIG1).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(v["verdict"], "UNSAFE");
    let d = &v["diagnostics"][0];
    assert_eq!((d["line"].as_u64(), d["col"].as_u64()), (Some(8), Some(10)));
    assert_eq!(d["severity"], "unsafe");
    assert_eq!(d["reason"], "weak-value-not-strongly-reachable");
    assert!(d["witness"].as_array().unwrap().iter().any(|w| w == "t@1:1"));
}

#[test]
fn definitions_stop_reaching_outside_their_scope() {
    let src = "local t = {}\nsetmetatable(t, {__mode = 'v'})\nlocal v = {} in t[1] = v end\nprint(t[1])";
    assert_eq!(check_str(src).unwrap().unsafe_lines(), vec![4]);
    let src = "local t = {}\nsetmetatable(t, {__mode = 'v'})\nlocal v = {} in t[1] = v\nprint(t[1]) end";
    assert_eq!(check_str(src).unwrap().verdict, Verdict::Safe);
}
