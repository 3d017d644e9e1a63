use std::fs;

use proptest::prelude::*;
use thornlet::ccl::{
    interface_to_ccl, param_to_ccl, parfile_to_text, parse_interface, parse_param,
    parse_parameter_file, parse_schedule, schedule_to_ccl, ParamScope, ParamType, ParamValue,
    ParameterDecl, RangeSpec, SourceLine, Steerable,
};
use thornlet::thorns::{load_thorns, thorn_dir};

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,10}"
}

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 ,.'()\"\\\\-]{0,24}"
}

fn interval(ty: ParamType) -> impl Strategy<Value = (RangeSpec, ParamValue)> {
    let scale = if ty == ParamType::Int { 1.0 } else { 0.25 };
    (
        proptest::option::of(-40i64..40),
        0i64..40,
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
        text(),
    )
        .prop_map(move |(lo, width, unbounded_hi, lc, uc, description)| {
            let lower = lo.map(|l| l as f64 * scale);
            let upper = if unbounded_hi {
                None
            } else {
                Some(lower.unwrap_or(0.0) + (width + 2) as f64 * scale)
            };
            // Pick a default strictly inside the interval.
            let inner = lower.map_or(upper.map_or(0.0, |u| u - scale), |l| l + scale);
            let default = if ty == ParamType::Int {
                ParamValue::Int(inner as i64)
            } else {
                ParamValue::Real(inner)
            };
            let range = RangeSpec::Interval {
                lower,
                upper,
                lower_closed: lc || lower.is_none(),
                upper_closed: uc || upper.is_none(),
                description,
            };
            (range, default)
        })
}

fn decl() -> impl Strategy<Value = ParameterDecl> {
    let numeric = prop_oneof![Just(ParamType::Real), Just(ParamType::Int)]
        .prop_flat_map(|ty| (Just(ty), proptest::collection::vec(interval(ty), 1..4)))
        .prop_map(|(ty, rs)| {
            let default = rs[0].1.clone();
            (
                ty,
                rs.into_iter().map(|(r, _)| r).collect::<Vec<_>>(),
                default,
            )
        });
    let keyword = proptest::collection::btree_set(ident(), 1..4).prop_map(|set| {
        let words: Vec<String> = set.into_iter().collect();
        let default = ParamValue::Keyword(words[0].clone());
        let ranges = words
            .into_iter()
            .map(|w| RangeSpec::Literal {
                description: format!("use {w}"),
                value: w,
            })
            .collect();
        (ParamType::Keyword, ranges, default)
    });
    let boolean = any::<bool>().prop_map(|b| (ParamType::Boolean, Vec::new(), ParamValue::Bool(b)));
    let string = ident().prop_map(|s| {
        (
            ParamType::String,
            vec![RangeSpec::Literal {
                value: ".*".into(),
                description: "anything".into(),
            }],
            ParamValue::Str(s),
        )
    });
    (
        ident(),
        prop_oneof![Just(ParamScope::Private), Just(ParamScope::Restricted)],
        text(),
        any::<bool>(),
        prop_oneof![numeric, keyword, boolean, string],
    )
        .prop_map(
            |(name, scope, description, steer, (data_type, ranges, default))| ParameterDecl {
                name,
                scope,
                data_type,
                description,
                ranges,
                default,
                steerable: if steer {
                    Steerable::Always
                } else {
                    Steerable::Never
                },
                line: SourceLine(0),
            },
        )
}

fn unique_names(decls: Vec<ParameterDecl>) -> Vec<ParameterDecl> {
    let mut seen = std::collections::HashSet::new();
    decls
        .into_iter()
        .filter(|d| seen.insert(d.name.clone()))
        .collect()
}

proptest! {
    #[test]
    fn param_declarations_round_trip(decls in proptest::collection::vec(decl(), 1..6).prop_map(unique_names)) {
        let text = param_to_ccl(&decls);
        let parsed = parse_param(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&parsed, &decls);
        prop_assert_eq!(param_to_ccl(&parsed), text);
    }

    /// Damaged input is rejected or accepted, never a panic.
    #[test]
    fn mutated_files_never_panic(file in 0usize..24, pos in any::<prop::sample::Index>(), edit in 0u8..3, byte in "[{}()\\[\\]:*\"=# a-z0-9\n]") {
        let thorns = load_thorns().unwrap();
        let m = &thorns[file % thorns.len()];
        let name = ["interface.ccl", "param.ccl", "schedule.ccl"][file % 3];
        let mut src = fs::read_to_string(m.source_dir.join(name)).unwrap();
        if !src.is_empty() {
            let mut at = pos.index(src.len());
            while !src.is_char_boundary(at) {
                at -= 1;
            }
            match edit {
                0 => { src.remove(at); }
                1 => src.insert_str(at, &byte),
                _ => src.replace_range(at..at + src[at..].chars().next().unwrap().len_utf8(), &byte),
            }
        }
        let _ = match name {
            "interface.ccl" => parse_interface(&src).map(|_| ()),
            "param.ccl" => parse_param(&src).map(|_| ()),
            _ => parse_schedule(&src).map(|_| ()),
        };
    }
}

#[test]
fn shipped_thorns_round_trip() {
    for m in load_thorns().unwrap() {
        let itf = interface_to_ccl(&m.interface);
        assert_eq!(
            parse_interface(&itf).unwrap(),
            m.interface,
            "{}",
            m.thorn_name
        );
        let params = param_to_ccl(&m.parameters);
        assert_eq!(
            parse_param(&params).unwrap(),
            m.parameters,
            "{}",
            m.thorn_name
        );
        let sched = schedule_to_ccl(&m.schedule_items);
        assert_eq!(
            parse_schedule(&sched).unwrap(),
            m.schedule_items,
            "{}",
            m.thorn_name
        );
    }
}

#[test]
fn parameter_files_round_trip() {
    let dir = thorn_dir().join("../par");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let pf = parse_parameter_file(&fs::read_to_string(&path).unwrap()).unwrap();
        let again = parse_parameter_file(&parfile_to_text(&pf)).unwrap();
        assert_eq!(again.active_thorns, pf.active_thorns, "{}", path.display());
        assert_eq!(again.assignments, pf.assignments, "{}", path.display());
    }
}

#[test]
fn verbatim_block_parses() {
    let block = "private:\nREAL central_density \"The star's central density\"\n{\n  (0.0:* :: \"The central density must be positive\"\n} 1.0\n";
    let d = &parse_param(block).unwrap()[0];
    assert_eq!(d.scope, ParamScope::Private);
    assert_eq!(d.default, ParamValue::Real(1.0));
    assert!(!d.admits(&ParamValue::Real(0.0)));
    assert!(d.admits(&ParamValue::Real(1e-300)));
}
