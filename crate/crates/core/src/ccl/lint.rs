use std::fmt;

use serde::Serialize;

use super::{DataType, GroupKind, ParamType, QualifiedName, ThornManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub thorn: String,
    pub file: &'static str,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{sev}: {}/{}:{}: {}",
            self.thorn, self.file, self.line, self.message
        )
    }
}

enum Owner {
    Own,
    Inherited,
    Foreign,
}

fn owner(m: &ThornManifest, q: &QualifiedName) -> Owner {
    match &q.scope {
        None => Owner::Own,
        Some(s) if m.answers_to(s) => Owner::Own,
        Some(s)
            if m.interface
                .inherits
                .iter()
                .any(|i| i.eq_ignore_ascii_case(s)) =>
        {
            Owner::Inherited
        }
        Some(_) => Owner::Foreign,
    }
}

/// Checks one thorn's declarations for internal consistency without
/// assembling a configuration. References into inherited interfaces are
/// left to assembly.
pub fn lint_thorn(m: &ThornManifest) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |severity, file, line, message: String| {
        out.push(Diagnostic {
            severity,
            thorn: m.thorn_name.clone(),
            file,
            line,
            message,
        })
    };

    for item in &m.schedule_items {
        let line = item.line.0;
        let lists = item
            .storage
            .iter()
            .map(|s| ("STORAGE", &s.group))
            .chain(item.sync.iter().map(|q| ("SYNC", q)))
            .chain(item.reads.iter().map(|q| ("READS", q)))
            .chain(item.writes.iter().map(|q| ("WRITES", q)));
        for (clause, q) in lists {
            let severity = if matches!(clause, "STORAGE" | "SYNC") {
                Severity::Error
            } else {
                Severity::Warning
            };
            match owner(m, q) {
                Owner::Own => {
                    match m.interface.group(&q.name) {
                        None => push(
                            severity,
                            "schedule.ccl",
                            line,
                            format!("{clause} of `{}` references undeclared variable group `{q}`", item.name),
                        ),
                        Some(g) if clause == "SYNC" && g.kind == GroupKind::Scalar => push(
                            Severity::Error,
                            "schedule.ccl",
                            line,
                            format!("SYNC of `{}` names scalar group `{q}`", item.name),
                        ),
                        _ => {}
                    }
                }
                Owner::Inherited => {}
                Owner::Foreign => push(
                    severity,
                    "schedule.ccl",
                    line,
                    format!("{clause} of `{}` references `{q}` from an interface this thorn does not inherit", item.name),
                ),
            }
        }
        if let Some(st) = item.storage.iter().find(|s| {
            matches!(owner(m, &s.group), Owner::Own)
                && m.interface
                    .group(&s.group.name)
                    .is_some_and(|g| s.timelevels.is_some_and(|n| n > g.timelevels))
        }) {
            push(
                Severity::Error,
                "schedule.ccl",
                line,
                format!(
                    "STORAGE requests more timelevels for `{}` than declared",
                    st.group
                ),
            );
        }

        for (clause, guard, allow_scalar) in [
            ("IF", &item.if_condition, false),
            ("WHILE", &item.while_condition, true),
        ] {
            let Some(q) = guard else { continue };
            if !matches!(owner(m, q), Owner::Own) {
                continue;
            }
            if let Some(p) = m.parameter(&q.name) {
                if !matches!(p.data_type, ParamType::Boolean | ParamType::Int) {
                    push(
                        Severity::Error,
                        "schedule.ccl",
                        line,
                        format!(
                            "{clause} guard `{q}` is a {} parameter (needs BOOLEAN or INT)",
                            p.data_type
                        ),
                    );
                }
            } else if let Some(g) = m.interface.group(&q.name).filter(|_| allow_scalar) {
                if !(g.kind == GroupKind::Scalar && g.data_type == DataType::Int) {
                    push(
                        Severity::Error,
                        "schedule.ccl",
                        line,
                        format!("{clause} guard `{q}` is not an INT scalar"),
                    );
                }
            } else {
                push(
                    Severity::Error,
                    "schedule.ccl",
                    line,
                    format!("{clause} guard `{q}` references an undeclared parameter"),
                );
            }
        }
    }

    for p in &m.parameters {
        if !p.admits(&p.default) {
            push(
                Severity::Error,
                "param.ccl",
                p.line.0,
                format!(
                    "default {} of `{}` lies in no declared range",
                    p.default, p.name
                ),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;
    use crate::ccl::{ParamValue, RangeSpec};

    fn manifest(itf: &str, par: &str, sch: &str) -> ThornManifest {
        ThornManifest::from_texts("t", itf, par, sch, Path::new("t")).unwrap()
    }

    #[test]
    fn undeclared_sync_group() {
        let m = manifest(
            "implements: t\nREAL phi TYPE=GF \"p\"",
            "",
            "schedule s AT evol { SYNC: ghost_var } \"s\"",
        );
        let d = lint_thorn(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Error);
        assert!(d[0].message.contains("ghost_var"));
    }

    #[test]
    fn while_guard_on_real_parameter() {
        let m = manifest(
            "implements: t",
            "REAL speed \"s\" { (*:*) :: \"any\" } 1.0",
            "schedule s AT evol WHILE speed {} \"s\"",
        );
        let d = lint_thorn(&m);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("REAL"));
    }

    #[test]
    fn guards_on_int_scalar_and_boolean_are_clean() {
        let m = manifest(
            "implements: t\nINT counter TYPE=SCALAR \"c\"",
            "BOOLEAN on \"o\" { } yes",
            "schedule s AT evol IF t::on WHILE counter {} \"s\"",
        );
        assert!(lint_thorn(&m).is_empty());
    }

    #[test]
    fn inherited_references_are_deferred() {
        let m = manifest(
            "implements: t\ninherits: grid",
            "",
            "schedule s AT evol { SYNC: grid::coords } \"s\"\nschedule u AT evol { SYNC: other::x } \"u\"",
        );
        let d = lint_thorn(&m);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("does not inherit"));
    }

    #[test]
    fn programmatic_default_outside_ranges() {
        let mut m = manifest(
            "implements: t",
            "REAL x \"x\" { (0.0:* :: \"positive\" } 1.0",
            "",
        );
        m.parameters[0].default = ParamValue::Real(-1.0);
        assert!(matches!(
            m.parameters[0].ranges[0],
            RangeSpec::Interval { .. }
        ));
        let d = lint_thorn(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].file, "param.ccl");
    }
}
