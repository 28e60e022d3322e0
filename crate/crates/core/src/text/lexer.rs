use alloc::string::String;
use alloc::vec::Vec;

use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    At,
    Colon,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => alloc::format!("`{s}`"),
            Tok::Int(n) => alloc::format!("`{n}`"),
            Tok::At => "`@`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Pos {
    /// Byte offset into the source.
    pub offset: usize,
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&(offset, c)) = chars.peek() {
        let pos = Pos { offset, line, col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        let tok = if c == '@' || c == ':' {
            chars.next();
            col += 1;
            if c == '@' {
                Tok::At
            } else {
                Tok::Colon
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            Tok::Ident(s)
        } else if c.is_ascii_digit() {
            let mut n: u64 = 0;
            while let Some(&(_, c)) = chars.peek() {
                if let Some(d) = c.to_digit(10) {
                    n = match n.checked_mul(10).and_then(|n| n.checked_add(d as u64)) {
                        Some(n) => n,
                        None => return Err(ParseError::at(pos, "integer literal too large".into(), &["integer"])),
                    };
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            Tok::Int(n)
        } else {
            return Err(ParseError::at(
                pos,
                alloc::format!("character `{c}`"),
                &["identifier", "integer", "`@`", "`:`"],
            ));
        };
        out.push(Token { tok, pos });
    }
    let offset = src.len();
    out.push(Token { tok: Tok::Eof, pos: Pos { offset, line, col } });
    Ok(out)
}
