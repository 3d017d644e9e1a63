use super::lexer::{tokenize, Parser, Tok};
use super::{
    Bin, CclError, CclErrorKind, Location, QualifiedName, ScheduleItem, SourceLine, StorageSpec,
};

const RESERVED: &[&str] = &[
    "schedule", "group", "at", "in", "before", "after", "if", "while", "storage", "sync", "reads",
    "writes",
];

/// Parses the contents of a `schedule.ccl` file. Items keep file order.
pub fn parse_schedule(text: &str) -> Result<Vec<ScheduleItem>, CclError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks, text);
    let mut items = Vec::new();
    while !p.at_end() {
        if !p.is_keyword("schedule") {
            return match p.peek().map(|t| &t.tok) {
                Some(Tok::Ident(w)) => Err(p.error_here(format!("unknown statement `{w}`"))),
                _ => Err(p.unexpected("`schedule`")),
            };
        }
        items.push(parse_item(&mut p)?);
    }
    Ok(items)
}

fn parse_item(p: &mut Parser<'_>) -> Result<ScheduleItem, CclError> {
    let head = p.expect_keyword("schedule")?;
    let line = head.line;
    let is_group = p.eat_keyword("group");
    let (name, _) = p.expect_ident(
        if is_group {
            "group name"
        } else {
            "routine name"
        },
        RESERVED,
    )?;

    let mut at: Option<Bin> = None;
    let mut in_group: Option<String> = None;
    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut if_condition = None;
    let mut while_condition = None;

    loop {
        let Some(tok) = p.peek() else {
            return Err(p.unexpected("a clause or `{`"));
        };
        let (cl, cc) = (tok.line, tok.col);
        if p.eat(&Tok::LBrace) {
            break;
        } else if p.eat_keyword("at") {
            let (bin_name, t) = p.expect_ident("time bin", RESERVED)?;
            let bin = Bin::from_name(&bin_name).ok_or_else(|| {
                CclError::syntax(t.line, t.col, format!("unknown time bin `{bin_name}`"))
            })?;
            if at.replace(bin).is_some() {
                return Err(CclError::syntax(cl, cc, "AT given twice"));
            }
        } else if p.eat_keyword("in") {
            let (group, _) = p.expect_ident("schedule group name", RESERVED)?;
            if in_group.replace(group).is_some() {
                return Err(CclError::syntax(cl, cc, "IN given twice"));
            }
        } else if p.eat_keyword("before") {
            before.extend(parse_names(p)?);
        } else if p.eat_keyword("after") {
            after.extend(parse_names(p)?);
        } else if p.eat_keyword("if") {
            if if_condition
                .replace(parse_qref(p, "IF condition")?)
                .is_some()
            {
                return Err(CclError::syntax(cl, cc, "IF given twice"));
            }
        } else if p.eat_keyword("while") {
            if while_condition
                .replace(parse_qref(p, "WHILE condition")?)
                .is_some()
            {
                return Err(CclError::syntax(cl, cc, "WHILE given twice"));
            }
        } else if let Tok::Ident(w) = &tok.tok {
            return Err(CclError::new(
                CclErrorKind::UnknownClause,
                cl,
                cc,
                format!("unknown schedule clause `{w}`"),
            ));
        } else {
            return Err(p.unexpected("a clause or `{`"));
        }
    }

    let mut storage = Vec::new();
    let mut sync = Vec::new();
    let mut reads = Vec::new();
    let mut writes = Vec::new();
    while !p.eat(&Tok::RBrace) {
        let Some(tok) = p.peek() else {
            return Err(p.unexpected("a block clause or `}`"));
        };
        let (cl, cc) = (tok.line, tok.col);
        if p.eat_keyword("storage") {
            p.expect(&Tok::Colon)?;
            loop {
                let group = parse_qref(p, "variable group")?;
                let mut timelevels = None;
                if p.eat(&Tok::LBracket) {
                    let (n, t) = p.expect_number("timelevel count")?;
                    let n: u32 = n.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
                        CclError::syntax(
                            t.line,
                            t.col,
                            "timelevel count must be a positive integer",
                        )
                    })?;
                    p.expect(&Tok::RBracket)?;
                    timelevels = Some(n);
                }
                storage.push(StorageSpec { group, timelevels });
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
        } else if p.eat_keyword("sync") {
            p.expect(&Tok::Colon)?;
            sync.extend(parse_qref_list(p)?);
        } else if p.eat_keyword("reads") {
            p.expect(&Tok::Colon)?;
            reads.extend(parse_qref_list(p)?);
        } else if p.eat_keyword("writes") {
            p.expect(&Tok::Colon)?;
            writes.extend(parse_qref_list(p)?);
        } else if let Tok::Ident(w) = &tok.tok {
            return Err(CclError::new(
                CclErrorKind::UnknownClause,
                cl,
                cc,
                format!("unknown block clause `{w}`"),
            ));
        } else {
            return Err(p.unexpected("a block clause or `}`"));
        }
    }
    let description = p.expect_string("schedule item description string")?;

    let location = match (at, in_group) {
        (Some(_), Some(_)) => {
            return Err(CclError::new(
                CclErrorKind::AtAndIn,
                line,
                1,
                format!("`{name}` is scheduled both AT a bin and IN a group"),
            ))
        }
        (Some(bin), None) => Location::At(bin),
        (None, Some(g)) => Location::In(g),
        (None, None) => {
            return Err(CclError::syntax(
                line,
                1,
                format!("`{name}` needs AT <bin> or IN <group>"),
            ))
        }
    };
    if let Some(n) = before
        .iter()
        .chain(after.iter())
        .find(|n| QualifiedName::parse(n).name == name)
    {
        return Err(CclError::syntax(
            line,
            1,
            format!("`{name}` cannot be ordered relative to itself (`{n}`)"),
        ));
    }

    Ok(ScheduleItem {
        name,
        is_group,
        location,
        before,
        after,
        if_condition,
        while_condition,
        storage,
        sync,
        reads,
        writes,
        description,
        line: SourceLine(line),
    })
}

fn parse_qref(p: &mut Parser<'_>, what: &str) -> Result<QualifiedName, CclError> {
    let (first, _) = p.expect_ident(what, RESERVED)?;
    if p.eat(&Tok::DoubleColon) {
        let (second, _) = p.expect_ident(what, RESERVED)?;
        Ok(QualifiedName {
            scope: Some(first),
            name: second,
        })
    } else {
        Ok(QualifiedName {
            scope: None,
            name: first,
        })
    }
}

fn parse_qref_list(p: &mut Parser<'_>) -> Result<Vec<QualifiedName>, CclError> {
    let mut out = vec![parse_qref(p, "variable group")?];
    while p.eat(&Tok::Comma) {
        out.push(parse_qref(p, "variable group")?);
    }
    Ok(out)
}

/// `name` or `(a, b, ...)`.
fn parse_names(p: &mut Parser<'_>) -> Result<Vec<String>, CclError> {
    if p.eat(&Tok::LParen) {
        let mut out = vec![parse_qref(p, "routine or group name")?.to_string()];
        while p.eat(&Tok::Comma) {
            out.push(parse_qref(p, "routine or group name")?.to_string());
        }
        p.expect(&Tok::RParen)?;
        Ok(out)
    } else {
        Ok(vec![parse_qref(p, "routine or group name")?.to_string()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routine_with_after_and_sync() {
        let items =
            parse_schedule("schedule adv_update AT evol AFTER adv_rhs { SYNC: phi } \"update\"")
                .unwrap();
        let it = &items[0];
        assert_eq!(it.name, "adv_update");
        assert!(!it.is_group);
        assert_eq!(it.location, Location::At(Bin::Evol));
        assert_eq!(it.after, vec!["adv_rhs"]);
        assert_eq!(it.sync, vec![QualifiedName::new(None, "phi")]);
        assert_eq!(it.description, "update");
    }

    #[test]
    fn group_item() {
        let items = parse_schedule("schedule GROUP my_analysis AT analysis {} \"grp\"").unwrap();
        assert!(items[0].is_group);
        assert_eq!(items[0].name, "my_analysis");
        assert_eq!(items[0].location, Location::At(Bin::Analysis));
    }

    #[test]
    fn while_condition() {
        let items = parse_schedule("schedule foo AT evol WHILE adv::not_done {} \"loop\"").unwrap();
        assert_eq!(
            items[0].while_condition,
            Some(QualifiedName::new(Some("adv"), "not_done"))
        );
    }

    #[test]
    fn at_and_in_rejected() {
        let err = parse_schedule("schedule foo AT evol IN grp {} \"x\"").unwrap_err();
        assert_eq!(err.kind, CclErrorKind::AtAndIn);
    }

    #[test]
    fn unknown_clause_rejected() {
        let err = parse_schedule("schedule foo AT evol OPTIONS global {} \"x\"").unwrap_err();
        assert_eq!(err.kind, CclErrorKind::UnknownClause);
        let err = parse_schedule("schedule foo AT evol { LANG: C } \"x\"").unwrap_err();
        assert_eq!(err.kind, CclErrorKind::UnknownClause);
    }

    #[test]
    fn lists_storage_and_order() {
        let items = parse_schedule(
            "# init\nschedule a AT initial BEFORE (b, other::c) AFTER d IF t::flag\n{\n  STORAGE: phi[2], flux\n  READS: phi\n  WRITES: phi, flux\n} \"a\"\nschedule b IN grp {} \"b\"",
        )
        .unwrap();
        assert_eq!(items.len(), 2);
        let a = &items[0];
        assert_eq!(a.before, vec!["b", "other::c"]);
        assert_eq!(a.after, vec!["d"]);
        assert_eq!(a.if_condition, Some(QualifiedName::new(Some("t"), "flag")));
        assert_eq!(a.storage[0].timelevels, Some(2));
        assert_eq!(a.storage[1].timelevels, None);
        assert_eq!(a.writes.len(), 2);
        assert_eq!(a.line.0, 2);
        assert_eq!(items[1].location, Location::In("grp".into()));
    }

    #[test]
    fn self_ordering_rejected() {
        assert!(parse_schedule("schedule a AT evol AFTER a {} \"x\"").is_err());
    }

    #[test]
    fn missing_location_rejected() {
        assert!(parse_schedule("schedule a {} \"x\"").is_err());
        assert!(parse_schedule("schedule a AT nowhere {} \"x\"").is_err());
    }
}
