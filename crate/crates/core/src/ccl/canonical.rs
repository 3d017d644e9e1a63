//! Deterministic serialization of parsed declarations. Clause order within
//! an item is fixed, so equal records always print to equal text.

use std::fmt::Write;

use super::{
    DataType, GroupKind, ImplementationInterface, Location, ParamScope, ParamType, ParamValue,
    ParameterDecl, ParameterFile, RangeSpec, RawValue, ScheduleItem, Steerable, Visibility,
};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn interface_to_ccl(itf: &ImplementationInterface) -> String {
    let mut out = format!("implements: {}\n", itf.implements);
    if !itf.inherits.is_empty() {
        let _ = writeln!(out, "inherits: {}", itf.inherits.join(", "));
    }
    let mut current: Option<Visibility> = None;
    for g in &itf.variable_groups {
        if current != Some(g.visibility) {
            out.push_str(match g.visibility {
                Visibility::Public => "\npublic:\n",
                Visibility::Private => "\nprivate:\n",
            });
            current = Some(g.visibility);
        }
        let ty = match g.data_type {
            DataType::Real => "REAL",
            DataType::Int => "INT",
        };
        let kind = match g.kind {
            GroupKind::Gf => "GF",
            GroupKind::Array => "ARRAY",
            GroupKind::Scalar => "SCALAR",
        };
        let _ = write!(
            out,
            "{ty} {} TYPE={kind} TIMELEVELS={}",
            g.name, g.timelevels
        );
        if let Some(d) = g.dims {
            let _ = write!(out, " DIM={d}");
        }
        let _ = writeln!(out, " {}", quote(&g.description));
    }
    out
}

fn bound(v: Option<f64>, ty: ParamType) -> String {
    match v {
        None => "*".into(),
        Some(x) if ty == ParamType::Int => format!("{}", x as i64),
        Some(x) => format!("{x:?}"),
    }
}

fn value(v: &ParamValue) -> String {
    match v {
        ParamValue::Real(x) => format!("{x:?}"),
        ParamValue::Int(x) => x.to_string(),
        ParamValue::Bool(b) => if *b { "yes" } else { "no" }.into(),
        ParamValue::Keyword(s) | ParamValue::Str(s) => quote(s),
    }
}

pub fn param_to_ccl(decls: &[ParameterDecl]) -> String {
    let mut out = String::new();
    let mut scope: Option<ParamScope> = None;
    for d in decls {
        if scope != Some(d.scope) {
            out.push_str(match d.scope {
                ParamScope::Private => "private:\n",
                ParamScope::Restricted => "restricted:\n",
            });
            scope = Some(d.scope);
        }
        let _ = write!(out, "{} {} {}", d.data_type, d.name, quote(&d.description));
        if d.steerable == Steerable::Always {
            out.push_str(" STEERABLE=ALWAYS");
        }
        out.push_str("\n{\n");
        for r in &d.ranges {
            match r {
                RangeSpec::Interval {
                    lower,
                    upper,
                    lower_closed,
                    upper_closed,
                    description,
                } => {
                    let _ = writeln!(
                        out,
                        "  {}{}:{}{} :: {}",
                        if *lower_closed { '[' } else { '(' },
                        bound(*lower, d.data_type),
                        bound(*upper, d.data_type),
                        if *upper_closed { ']' } else { ')' },
                        quote(description)
                    );
                }
                RangeSpec::Literal { value, description } => {
                    let _ = writeln!(out, "  {} :: {}", quote(value), quote(description));
                }
            }
        }
        let _ = writeln!(out, "}} {}\n", value(&d.default));
    }
    out
}

pub fn schedule_to_ccl(items: &[ScheduleItem]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str("schedule ");
        if it.is_group {
            out.push_str("GROUP ");
        }
        out.push_str(&it.name);
        match &it.location {
            Location::At(bin) => {
                let _ = write!(out, " AT {}", bin.name().to_ascii_lowercase());
            }
            Location::In(g) => {
                let _ = write!(out, " IN {g}");
            }
        }
        if !it.before.is_empty() {
            let _ = write!(out, " BEFORE ({})", it.before.join(", "));
        }
        if !it.after.is_empty() {
            let _ = write!(out, " AFTER ({})", it.after.join(", "));
        }
        if let Some(c) = &it.if_condition {
            let _ = write!(out, " IF {c}");
        }
        if let Some(c) = &it.while_condition {
            let _ = write!(out, " WHILE {c}");
        }
        out.push_str("\n{\n");
        if !it.storage.is_empty() {
            let list: Vec<String> = it
                .storage
                .iter()
                .map(|s| match s.timelevels {
                    Some(n) => format!("{}[{n}]", s.group),
                    None => s.group.to_string(),
                })
                .collect();
            let _ = writeln!(out, "  STORAGE: {}", list.join(", "));
        }
        for (kw, list) in [
            ("SYNC", &it.sync),
            ("READS", &it.reads),
            ("WRITES", &it.writes),
        ] {
            if !list.is_empty() {
                let names: Vec<String> = list.iter().map(|q| q.to_string()).collect();
                let _ = writeln!(out, "  {kw}: {}", names.join(", "));
            }
        }
        let _ = writeln!(out, "}} {}\n", quote(&it.description));
    }
    out
}

pub fn parfile_to_text(pf: &ParameterFile) -> String {
    let mut out = format!("ActiveThorns = {}\n", quote(&pf.active_thorns.join(" ")));
    for a in &pf.assignments {
        let v = match &a.value {
            RawValue::Number(s) | RawValue::Word(s) => s.clone(),
            RawValue::Str(s) => quote(s),
        };
        let _ = writeln!(out, "{}::{} = {v}", a.scope, a.name);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{parse_interface, parse_param, parse_parameter_file, parse_schedule};
    use super::*;

    #[test]
    fn schedule_clause_order_is_fixed() {
        let a = parse_schedule("schedule x AT evol WHILE t::w IF t::i AFTER y BEFORE z { SYNC: q STORAGE: q[2] } \"d\"").unwrap();
        let text = schedule_to_ccl(&a);
        assert_eq!(
            text,
            "schedule x AT evol BEFORE (z) AFTER (y) IF t::i WHILE t::w\n{\n  STORAGE: q[2]\n  SYNC: q\n} \"d\"\n\n"
        );
        assert_eq!(parse_schedule(&text).unwrap(), a);
    }

    #[test]
    fn param_round_trip_keeps_unbounded_side() {
        let src = "private:\nREAL central_density \"The star's central density\"\n{\n  (0.0:* :: \"The central density must be positive\"\n} 1.0\n";
        let a = parse_param(src).unwrap();
        let text = param_to_ccl(&a);
        assert!(text.contains("(0.0:*]"));
        assert_eq!(parse_param(&text).unwrap(), a);
    }

    #[test]
    fn interface_and_parfile_round_trip() {
        let itf = parse_interface("implements: a\ninherits: b, c\nINT n TYPE=SCALAR \"n\"\npublic:\nREAL f TYPE=GF TIMELEVELS=2 DIM=2 \"quoted \\\"f\\\"\"").unwrap();
        assert_eq!(parse_interface(&interface_to_ccl(&itf)).unwrap(), itf);
        let pf =
            parse_parameter_file("ActiveThorns = \"x y\"\nx::a = 1e-3\nx::b = \"s\"\ny::c = no\n")
                .unwrap();
        let again = parse_parameter_file(&parfile_to_text(&pf)).unwrap();
        assert_eq!(again.assignments, pf.assignments);
        assert_eq!(again.active_thorns, pf.active_thorns);
    }
}
