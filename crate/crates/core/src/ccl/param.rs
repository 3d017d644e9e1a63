use super::lexer::{tokenize, Parser, Tok, Token};
use super::{
    parse_bool, CclError, CclErrorKind, ParamScope, ParamType, ParamValue, ParameterDecl,
    RangeSpec, SourceLine, Steerable,
};

const RESERVED: &[&str] = &[
    "private",
    "restricted",
    "public",
    "real",
    "int",
    "boolean",
    "keyword",
    "string",
    "steerable",
];

/// Parses the contents of a `param.ccl` file.
///
/// Interval ranges are written `(lo:hi)`, `[lo:hi]` or mixed, with `*` for
/// an unbounded side. The closing bracket may be left out after a `*` upper
/// bound, so `(0.0:*` reads as `(0.0:*)`.
pub fn parse_param(text: &str) -> Result<Vec<ParameterDecl>, CclError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks, text);
    let mut scope = ParamScope::Private;
    let mut decls: Vec<ParameterDecl> = Vec::new();

    while let Some(tok) = p.peek() {
        let (line, col) = (tok.line, tok.col);
        if p.eat_keyword("private") {
            p.expect(&Tok::Colon)?;
            scope = ParamScope::Private;
        } else if p.eat_keyword("restricted") {
            p.expect(&Tok::Colon)?;
            scope = ParamScope::Restricted;
        } else if p.is_keyword("public") {
            return Err(p.error_here("`public:` is not a parameter scope (use `restricted:`)"));
        } else if let Some(ty) = type_keyword(tok) {
            p.bump();
            let decl = parse_decl(&mut p, ty, scope, line)?;
            if decls.iter().any(|d| d.name == decl.name) {
                return Err(CclError::new(
                    CclErrorKind::DuplicateParameter,
                    line,
                    col,
                    format!("parameter `{}` declared twice", decl.name),
                ));
            }
            decls.push(decl);
        } else if let Tok::Ident(word) = &tok.tok {
            return Err(CclError::new(
                CclErrorKind::UnknownType,
                line,
                col,
                format!("unknown parameter type `{word}`"),
            ));
        } else {
            return Err(p.unexpected("a parameter declaration"));
        }
    }
    Ok(decls)
}

fn type_keyword(tok: &Token) -> Option<ParamType> {
    let Tok::Ident(word) = &tok.tok else {
        return None;
    };
    match word.to_ascii_uppercase().as_str() {
        "REAL" => Some(ParamType::Real),
        "INT" => Some(ParamType::Int),
        "BOOLEAN" => Some(ParamType::Boolean),
        "KEYWORD" => Some(ParamType::Keyword),
        "STRING" => Some(ParamType::String),
        _ => None,
    }
}

fn parse_decl(
    p: &mut Parser<'_>,
    ty: ParamType,
    scope: ParamScope,
    line: usize,
) -> Result<ParameterDecl, CclError> {
    let (name, _) = p.expect_ident("parameter name", RESERVED)?;
    let description = p.expect_string("parameter description string")?;
    let mut steerable = Steerable::Never;
    if p.eat_keyword("steerable") {
        p.expect(&Tok::Eq)?;
        steerable = if p.eat_keyword("always") {
            Steerable::Always
        } else if p.eat_keyword("never") {
            Steerable::Never
        } else {
            return Err(p.unexpected("ALWAYS or NEVER"));
        };
    }
    p.expect(&Tok::LBrace)?;
    let mut ranges = Vec::new();
    while !p.eat(&Tok::RBrace) {
        ranges.push(parse_range(p, ty)?);
    }
    let default_tok = p.peek();
    let default = parse_default(p, ty)?;
    let decl = ParameterDecl {
        name,
        scope,
        data_type: ty,
        description,
        ranges,
        default,
        steerable,
        line: SourceLine(line),
    };
    if !decl.admits(&decl.default) {
        let t = default_tok.expect("default token was consumed");
        return Err(CclError::new(
            CclErrorKind::DefaultOutOfRange,
            t.line,
            t.col,
            format!(
                "default {} of parameter `{}` violates all ranges ({})",
                decl.default,
                decl.name,
                decl.range_descriptions()
            ),
        ));
    }
    Ok(decl)
}

fn parse_range(p: &mut Parser<'_>, ty: ParamType) -> Result<RangeSpec, CclError> {
    let start = p.peek().ok_or_else(|| p.unexpected("a range or `}`"))?;
    let (line, col) = (start.line, start.col);
    let malformed = |msg: String| CclError::new(CclErrorKind::MalformedRange, line, col, msg);
    match ty {
        ParamType::Real | ParamType::Int => {
            // The opening bracket may be omitted, as in `*:*` or `0:*`.
            let bare = matches!(start.tok, Tok::Star | Tok::Number(_));
            let lower_closed = if p.eat(&Tok::LParen) {
                false
            } else if p.eat(&Tok::LBracket) || bare {
                true
            } else {
                return Err(malformed(format!(
                    "expected `(`, `[` or a bound to open a {ty} range, found {}",
                    start.tok.describe()
                )));
            };
            let lower = parse_bound(p, ty)?;
            p.expect(&Tok::Colon)?;
            let upper = parse_bound(p, ty)?;
            let upper_closed = if p.eat(&Tok::RParen) {
                false
            } else if p.eat(&Tok::RBracket) || upper.is_none() || bare {
                true
            } else {
                return Err(p.unexpected("`)` or `]` to close the range"));
            };
            if let (Some(l), Some(u)) = (lower, upper) {
                if l > u {
                    return Err(malformed(format!(
                        "range lower bound {l} exceeds upper bound {u}"
                    )));
                }
            }
            p.expect(&Tok::DoubleColon)?;
            let description = p.expect_string("range description string")?;
            Ok(RangeSpec::Interval {
                lower,
                upper,
                lower_closed,
                upper_closed,
                description,
            })
        }
        ParamType::Keyword | ParamType::String => {
            let value = match &start.tok {
                Tok::Str(s) => s.clone(),
                other => {
                    return Err(malformed(format!(
                        "expected a quoted {ty} literal, found {}",
                        other.describe()
                    )))
                }
            };
            if ty == ParamType::String && regex::Regex::new(&value).is_err() {
                return Err(malformed(format!("invalid STRING pattern \"{value}\"")));
            }
            p.bump();
            p.expect(&Tok::DoubleColon)?;
            let description = p.expect_string("range description string")?;
            Ok(RangeSpec::Literal { value, description })
        }
        ParamType::Boolean => Err(malformed("BOOLEAN parameters take no ranges".into())),
    }
}

fn parse_bound(p: &mut Parser<'_>, ty: ParamType) -> Result<Option<f64>, CclError> {
    if p.eat(&Tok::Star) {
        return Ok(None);
    }
    let (text, t) = p.expect_number("a numeric bound or `*`")?;
    let bad = || {
        CclError::new(
            CclErrorKind::MalformedRange,
            t.line,
            t.col,
            format!("bad {ty} bound `{text}`"),
        )
    };
    match ty {
        ParamType::Int => text
            .parse::<i64>()
            .map(|v| Some(v as f64))
            .map_err(|_| bad()),
        _ => text.parse::<f64>().map(Some).map_err(|_| bad()),
    }
}

fn parse_default(p: &mut Parser<'_>, ty: ParamType) -> Result<ParamValue, CclError> {
    let Some(t) = p.peek() else {
        return Err(p.unexpected("a default value"));
    };
    let bad = |what: &str| {
        CclError::syntax(
            t.line,
            t.col,
            format!("expected {what} default, found {}", t.tok.describe()),
        )
    };
    let value = match (ty, &t.tok) {
        (ParamType::Real, Tok::Number(s)) => {
            ParamValue::Real(s.parse().map_err(|_| bad("a REAL"))?)
        }
        (ParamType::Int, Tok::Number(s)) => ParamValue::Int(s.parse().map_err(|_| bad("an INT"))?),
        (ParamType::Boolean, Tok::Ident(s) | Tok::Str(s) | Tok::Number(s)) => {
            ParamValue::Bool(parse_bool(s).ok_or_else(|| bad("a BOOLEAN"))?)
        }
        (ParamType::Keyword, Tok::Str(s)) => ParamValue::Keyword(s.clone()),
        (ParamType::String, Tok::Str(s)) => ParamValue::Str(s.clone()),
        (ParamType::Real, _) => return Err(bad("a REAL")),
        (ParamType::Int, _) => return Err(bad("an INT")),
        (ParamType::Boolean, _) => return Err(bad("a BOOLEAN")),
        (ParamType::Keyword, _) => return Err(bad("a quoted KEYWORD")),
        (ParamType::String, _) => return Err(bad("a quoted STRING")),
    };
    p.bump();
    Ok(value)
}
