use super::lexer::{tokenize, Tok, Token};
use super::{Assignment, CclError, CclErrorKind, ParameterFile, RawValue, SourceLine, Strictness};

/// Parses a run-time parameter file.
///
/// Every statement sits on one line: either `ActiveThorns = "a b c"` or
/// `thorn::name = value`. Values stay raw until bound against their
/// declarations.
pub fn parse_parameter_file(text: &str) -> Result<ParameterFile, CclError> {
    let toks = tokenize(text)?;
    let mut active: Option<Vec<String>> = None;
    let mut assignments: Vec<Assignment> = Vec::new();

    let mut i = 0;
    while i < toks.len() {
        let line = toks[i].line;
        let mut j = i;
        while j < toks.len() && toks[j].line == line {
            j += 1;
        }
        let stmt = &toks[i..j];
        i = j;
        parse_statement(stmt, &mut active, &mut assignments)?;
    }

    let active_thorns = active.ok_or_else(|| {
        CclError::new(
            CclErrorKind::MissingActiveThorns,
            1,
            1,
            "missing ActiveThorns declaration",
        )
    })?;
    Ok(ParameterFile {
        active_thorns,
        assignments,
        strictness: Strictness::default(),
        source: text.to_string(),
    })
}

fn parse_statement(
    stmt: &[Token],
    active: &mut Option<Vec<String>>,
    assignments: &mut Vec<Assignment>,
) -> Result<(), CclError> {
    let first = &stmt[0];
    let line = first.line;
    let err_at = |t: &Token, msg: String| CclError::syntax(t.line, t.col, msg);
    let Some(eq_pos) = stmt.iter().position(|t| t.tok == Tok::Eq) else {
        return Err(CclError::new(
            CclErrorKind::MissingEquals,
            line,
            first.col,
            "expected `name = value` (no `=` on this line)",
        ));
    };
    let lhs = &stmt[..eq_pos];
    let rhs = &stmt[eq_pos + 1..];
    let value = match rhs {
        [] => {
            return Err(CclError::syntax(
                line,
                stmt[eq_pos].col,
                "missing value after `=`",
            ))
        }
        [v] => match &v.tok {
            Tok::Number(s) => RawValue::Number(s.clone()),
            Tok::Str(s) => RawValue::Str(s.clone()),
            Tok::Ident(s) => RawValue::Word(s.clone()),
            other => {
                return Err(err_at(
                    v,
                    format!("expected a value, found {}", other.describe()),
                ))
            }
        },
        [_, extra, ..] => {
            return Err(err_at(
                extra,
                format!("unexpected {} after value", extra.tok.describe()),
            ))
        }
    };

    match lhs {
        [Token {
            tok: Tok::Ident(kw),
            ..
        }] if kw.eq_ignore_ascii_case("activethorns") => {
            let RawValue::Str(list) = value else {
                return Err(err_at(
                    &rhs[0],
                    "ActiveThorns expects a quoted list of thorn names".into(),
                ));
            };
            if active.is_some() {
                return Err(CclError::new(
                    CclErrorKind::DuplicateAssignment,
                    line,
                    first.col,
                    "ActiveThorns given twice",
                ));
            }
            let names: Vec<String> = list.split_whitespace().map(str::to_string).collect();
            if names.is_empty() {
                return Err(err_at(&rhs[0], "ActiveThorns is empty".into()));
            }
            if let Some(bad) = names.iter().find(|n| !super::is_identifier(n)) {
                return Err(err_at(&rhs[0], format!("`{bad}` is not a thorn name")));
            }
            *active = Some(names);
        }
        [Token {
            tok: Tok::Ident(scope),
            ..
        }, Token {
            tok: Tok::DoubleColon,
            ..
        }, Token {
            tok: Tok::Ident(name),
            ..
        }] => {
            if let Some(prev) = assignments
                .iter()
                .find(|a| a.scope.eq_ignore_ascii_case(scope) && a.name == *name)
            {
                return Err(CclError::new(
                    CclErrorKind::DuplicateAssignment,
                    line,
                    first.col,
                    format!(
                        "duplicate assignment to {scope}::{name} (first set on line {})",
                        prev.line.0
                    ),
                ));
            }
            assignments.push(Assignment {
                scope: scope.clone(),
                name: name.clone(),
                value,
                line: SourceLine(line),
            });
        }
        [] => {
            return Err(CclError::syntax(
                line,
                stmt[eq_pos].col,
                "missing parameter name before `=`",
            ))
        }
        _ => {
            return Err(err_at(
                first,
                "expected `thorn::parameter` or `ActiveThorns` before `=`".into(),
            ))
        }
    }
    Ok(())
}
