//! Tokenizer shared by the declaration-file and parameter-file parsers.

use super::CclError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Numeric literal, kept as written.
    Number(String),
    /// Quoted string with escapes resolved.
    Str(String),
    Colon,
    DoubleColon,
    Comma,
    Eq,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Star,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Colon => "`:`".into(),
            Tok::DoubleColon => "`::`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Star => "`*`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    /// Byte range in the source text.
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, CclError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let col = i - line_start + 1;
        match c {
            b'\n' => {
                i += 1;
                line += 1;
                line_start = i;
            }
            b' ' | b'\t' | b'\r' => i += 1,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'"' => {
                let start = i;
                i += 1;
                let mut s = String::new();
                loop {
                    if i >= bytes.len() {
                        return Err(CclError::syntax(line, col, "unterminated string"));
                    }
                    match bytes[i] {
                        b'"' => {
                            i += 1;
                            break;
                        }
                        b'\\' if i + 1 < bytes.len() => {
                            let esc = bytes[i + 1];
                            s.push(match esc {
                                b'n' => '\n',
                                b't' => '\t',
                                other => other as char,
                            });
                            i += 2;
                        }
                        b'\n' => {
                            return Err(CclError::syntax(line, col, "unterminated string"));
                        }
                        _ => {
                            // Copy one full UTF-8 character.
                            let ch = text[i..].chars().next().unwrap();
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    line,
                    col,
                    start,
                    end: i,
                });
            }
            b':' => {
                if bytes.get(i + 1) == Some(&b':') {
                    out.push(Token {
                        tok: Tok::DoubleColon,
                        line,
                        col,
                        start: i,
                        end: i + 2,
                    });
                    i += 2;
                } else {
                    out.push(Token {
                        tok: Tok::Colon,
                        line,
                        col,
                        start: i,
                        end: i + 1,
                    });
                    i += 1;
                }
            }
            b',' | b'=' | b'{' | b'}' | b'(' | b')' | b'[' | b']' | b'*' => {
                let tok = match c {
                    b',' => Tok::Comma,
                    b'=' => Tok::Eq,
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    _ => Tok::Star,
                };
                out.push(Token {
                    tok,
                    line,
                    col,
                    start: i,
                    end: i + 1,
                });
                i += 1;
            }
            b'0'..=b'9' | b'.' | b'+' | b'-' => {
                let start = i;
                let end = scan_number(bytes, i).ok_or_else(|| {
                    CclError::syntax(line, col, format!("unexpected character `{}`", c as char))
                })?;
                i = end;
                out.push(Token {
                    tok: Tok::Number(text[start..end].to_string()),
                    line,
                    col,
                    start,
                    end,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    line,
                    col,
                    start,
                    end: i,
                });
            }
            _ => {
                let ch = text[i..].chars().next().unwrap();
                return Err(CclError::syntax(
                    line,
                    col,
                    format!("unexpected character `{ch}`"),
                ));
            }
        }
    }
    Ok(out)
}

/// Returns the end offset of a numeric literal starting at `i`, if any.
fn scan_number(b: &[u8], mut i: usize) -> Option<usize> {
    if b[i] == b'+' || b[i] == b'-' {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut ndigits = i - digits_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        ndigits += i - frac;
    }
    if ndigits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp {
            i = j;
        }
    }
    Some(i)
}

/// Cursor over a token stream with keyword-aware helpers.
pub struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    /// Line/column reported for errors at end of input.
    eof_line: usize,
}

impl<'a> Parser<'a> {
    pub fn new(toks: &'a [Token], text: &str) -> Self {
        let eof_line = text.lines().count().max(1);
        Parser {
            toks,
            pos: 0,
            eof_line,
        }
    }

    pub fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn bump(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn error_here(&self, msg: impl Into<String>) -> CclError {
        match self.peek() {
            Some(t) => CclError::syntax(t.line, t.col, msg),
            None => CclError::syntax(self.eof_line, 1, msg),
        }
    }

    pub fn unexpected(&self, expected: &str) -> CclError {
        match self.peek() {
            Some(t) => self.error_here(format!("expected {expected}, found {}", t.tok.describe())),
            None => self.error_here(format!("expected {expected}, found end of input")),
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s.eq_ignore_ascii_case(kw))
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<&'a Token, CclError> {
        if self.is_keyword(kw) {
            Ok(self.bump().unwrap())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    pub fn is(&self, tok: &Tok) -> bool {
        matches!(self.peek(), Some(t) if &t.tok == tok)
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.is(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<&'a Token, CclError> {
        if self.is(tok) {
            Ok(self.bump().unwrap())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    /// An identifier that is not one of `reserved` (case-insensitive).
    pub fn expect_ident(
        &mut self,
        what: &str,
        reserved: &[&str],
    ) -> Result<(String, &'a Token), CclError> {
        match self.peek() {
            Some(
                t @ Token {
                    tok: Tok::Ident(s), ..
                },
            ) => {
                if reserved.iter().any(|r| r.eq_ignore_ascii_case(s)) {
                    return Err(
                        self.error_here(format!("expected {what}, found reserved word `{s}`"))
                    );
                }
                self.pos += 1;
                Ok((s.clone(), t))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    pub fn expect_string(&mut self, what: &str) -> Result<String, CclError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Str(s), ..
            }) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.unexpected(what)),
        }
    }

    pub fn expect_number(&mut self, what: &str) -> Result<(String, &'a Token), CclError> {
        match self.peek() {
            Some(
                t @ Token {
                    tok: Tok::Number(s),
                    ..
                },
            ) => {
                self.pos += 1;
                Ok((s.clone(), t))
            }
            _ => Err(self.unexpected(what)),
        }
    }
}
