use super::lexer::{tokenize, Parser, Tok};
use super::{
    CclError, CclErrorKind, DataType, GroupKind, ImplementationInterface, SourceLine,
    VariableGroup, Visibility,
};

const RESERVED: &[&str] = &[
    "implements",
    "inherits",
    "public",
    "private",
    "real",
    "int",
    "type",
    "timelevels",
    "dim",
];

/// Parses the contents of an `interface.ccl` file.
///
/// A `public:` or `private:` marker applies to every following group until
/// the next marker; groups before any marker are private.
pub fn parse_interface(text: &str) -> Result<ImplementationInterface, CclError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks, text);
    let mut implements: Option<String> = None;
    let mut inherits: Vec<(String, usize, usize)> = Vec::new();
    let mut groups: Vec<VariableGroup> = Vec::new();
    let mut visibility = Visibility::Private;

    while let Some(tok) = p.peek() {
        let (line, col) = (tok.line, tok.col);
        if p.eat_keyword("implements") {
            p.expect(&Tok::Colon)?;
            let (name, _) = p.expect_ident("implementation name", RESERVED)?;
            if implements.is_some() {
                return Err(CclError::new(
                    CclErrorKind::DuplicateImplements,
                    line,
                    col,
                    format!("duplicate implements (second declaration `{name}`)"),
                ));
            }
            implements = Some(name);
        } else if p.eat_keyword("inherits") {
            p.expect(&Tok::Colon)?;
            loop {
                let (name, t) = p.expect_ident("implementation name", RESERVED)?;
                if inherits.iter().any(|(n, _, _)| *n == name) {
                    return Err(CclError::new(
                        CclErrorKind::InvalidInherits,
                        t.line,
                        t.col,
                        format!("`{name}` inherited twice"),
                    ));
                }
                inherits.push((name, t.line, t.col));
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
        } else if p.is_keyword("public") || p.is_keyword("private") {
            visibility = if p.eat_keyword("public") {
                Visibility::Public
            } else {
                p.bump();
                Visibility::Private
            };
            p.expect(&Tok::Colon)?;
        } else if p.is_keyword("real") || p.is_keyword("int") {
            let data_type = if p.eat_keyword("real") {
                DataType::Real
            } else {
                p.bump();
                DataType::Int
            };
            let group = parse_group(&mut p, data_type, visibility, line)?;
            if groups.iter().any(|g| g.name == group.name) {
                return Err(CclError::new(
                    CclErrorKind::DuplicateGroup,
                    line,
                    col,
                    format!("duplicate group name `{}`", group.name),
                ));
            }
            groups.push(group);
        } else if let Some(Tok::Ident(word)) = p.peek().map(|t| &t.tok) {
            return Err(p.error_here(format!("unknown statement `{word}`")));
        } else {
            return Err(p.unexpected("a statement"));
        }
    }

    let implements = implements.ok_or_else(|| {
        CclError::new(
            CclErrorKind::MissingImplements,
            1,
            1,
            "missing implements: declaration",
        )
    })?;
    if let Some((name, line, col)) = inherits.iter().find(|(n, _, _)| *n == implements) {
        return Err(CclError::new(
            CclErrorKind::InvalidInherits,
            *line,
            *col,
            format!("interface `{name}` cannot inherit from itself"),
        ));
    }
    Ok(ImplementationInterface {
        implements,
        inherits: inherits.into_iter().map(|(n, _, _)| n).collect(),
        variable_groups: groups,
    })
}

fn parse_group(
    p: &mut Parser<'_>,
    data_type: DataType,
    visibility: Visibility,
    line: usize,
) -> Result<VariableGroup, CclError> {
    let (name, _) = p.expect_ident("group name", RESERVED)?;
    let mut kind: Option<GroupKind> = None;
    let mut timelevels: Option<u32> = None;
    let mut dims: Option<u8> = None;
    while let Some(tok) = p.peek() {
        let (attr_line, attr_col) = (tok.line, tok.col);
        if p.eat_keyword("type") {
            p.expect(&Tok::Eq)?;
            let (word, _) = p.expect_ident("group type (GF, ARRAY or SCALAR)", &[])?;
            let k = match word.to_ascii_uppercase().as_str() {
                "GF" => GroupKind::Gf,
                "ARRAY" => GroupKind::Array,
                "SCALAR" => GroupKind::Scalar,
                _ => {
                    return Err(CclError::new(
                        CclErrorKind::UnknownType,
                        attr_line,
                        attr_col,
                        format!("unknown group type `{word}`"),
                    ))
                }
            };
            if kind.replace(k).is_some() {
                return Err(CclError::syntax(attr_line, attr_col, "TYPE given twice"));
            }
        } else if p.eat_keyword("timelevels") {
            p.expect(&Tok::Eq)?;
            let (n, t) = p.expect_number("timelevel count")?;
            let n: u32 = n.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
                CclError::syntax(t.line, t.col, "TIMELEVELS must be a positive integer")
            })?;
            if timelevels.replace(n).is_some() {
                return Err(CclError::syntax(
                    attr_line,
                    attr_col,
                    "TIMELEVELS given twice",
                ));
            }
        } else if p.eat_keyword("dim") {
            p.expect(&Tok::Eq)?;
            let (n, t) = p.expect_number("dimension")?;
            let n: u8 = n
                .parse()
                .ok()
                .filter(|n| (1..=3).contains(n))
                .ok_or_else(|| CclError::syntax(t.line, t.col, "DIM must be 1, 2 or 3"))?;
            if dims.replace(n).is_some() {
                return Err(CclError::syntax(attr_line, attr_col, "DIM given twice"));
            }
        } else {
            break;
        }
    }
    let description = p.expect_string("group description string")?;
    let kind =
        kind.ok_or_else(|| CclError::syntax(line, 1, format!("group `{name}` has no TYPE")))?;
    let dims = match kind {
        GroupKind::Scalar => {
            if dims.is_some() {
                return Err(CclError::syntax(
                    line,
                    1,
                    format!("scalar group `{name}` cannot have DIM"),
                ));
            }
            None
        }
        _ => Some(dims.unwrap_or(1)),
    };
    Ok(VariableGroup {
        name,
        data_type,
        kind,
        timelevels: timelevels.unwrap_or(1),
        visibility,
        dims,
        description,
        line: SourceLine(line),
    })
}
