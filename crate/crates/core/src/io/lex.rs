//! Tokenizer for problem files. Every byte sequence either tokenizes or
//! yields a located diagnostic; there are no panics on malformed input.

use std::fmt;

use crate::lang::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    // punctuation and operators
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Arrow,     // ->
    FatArrow,  // =>
    DotDot,    // ..
    Pipe,      // |
    OrOr,      // ||
    AndAnd,    // &&
    Bang,      // !
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    Assign, // =
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::FatArrow => write!(f, "`=>`"),
            Tok::DotDot => write!(f, "`..`"),
            Tok::Pipe => write!(f, "`|`"),
            Tok::OrOr => write!(f, "`||`"),
            Tok::AndAnd => write!(f, "`&&`"),
            Tok::Bang => write!(f, "`!`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Percent => write!(f, "`%`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::EqEq => write!(f, "`==`"),
            Tok::Ne => write!(f, "`!=`"),
            Tok::Assign => write!(f, "`=`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("{span}: {msg}")]
pub struct LexError {
    pub msg: String,
    pub span: Span,
}

#[derive(Debug)]
pub struct Lexer {
    pub toks: Vec<(Tok, Span)>,
}

pub fn lex(src: &str) -> Result<Lexer, LexError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    macro_rules! span {
        () => {
            Span { line, col }
        };
    }
    while i < bytes.len() {
        let c = bytes[i] as char;
        let here = span!();
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
                continue;
            }
            '/' if i + 1 < bytes.len() && bytes[i + 1] == b'/' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            _ => {}
        }
        let mut push2 = |tok: Tok, len: u32, i: &mut usize, col: &mut u32| {
            toks.push((tok, here));
            *i += len as usize;
            *col += len;
        };
        match c {
            '{' => push2(Tok::LBrace, 1, &mut i, &mut col),
            '}' => push2(Tok::RBrace, 1, &mut i, &mut col),
            '(' => push2(Tok::LParen, 1, &mut i, &mut col),
            ')' => push2(Tok::RParen, 1, &mut i, &mut col),
            '[' => push2(Tok::LBracket, 1, &mut i, &mut col),
            ']' => push2(Tok::RBracket, 1, &mut i, &mut col),
            ',' => push2(Tok::Comma, 1, &mut i, &mut col),
            ';' => push2(Tok::Semi, 1, &mut i, &mut col),
            ':' => push2(Tok::Colon, 1, &mut i, &mut col),
            '+' => push2(Tok::Plus, 1, &mut i, &mut col),
            '*' => push2(Tok::Star, 1, &mut i, &mut col),
            '%' => push2(Tok::Percent, 1, &mut i, &mut col),
            '/' => push2(Tok::Slash, 1, &mut i, &mut col),
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    push2(Tok::Arrow, 2, &mut i, &mut col)
                } else {
                    push2(Tok::Minus, 1, &mut i, &mut col)
                }
            }
            '.' => {
                if bytes.get(i + 1) == Some(&b'.') {
                    push2(Tok::DotDot, 2, &mut i, &mut col)
                } else {
                    return Err(LexError { msg: "unexpected `.`".into(), span: here });
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    push2(Tok::OrOr, 2, &mut i, &mut col)
                } else {
                    push2(Tok::Pipe, 1, &mut i, &mut col)
                }
            }
            '&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    push2(Tok::AndAnd, 2, &mut i, &mut col)
                } else {
                    return Err(LexError { msg: "unexpected `&` (use `&&`)".into(), span: here });
                }
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    push2(Tok::Ne, 2, &mut i, &mut col)
                } else {
                    push2(Tok::Bang, 1, &mut i, &mut col)
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    push2(Tok::Le, 2, &mut i, &mut col)
                } else {
                    push2(Tok::Lt, 1, &mut i, &mut col)
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    push2(Tok::Ge, 2, &mut i, &mut col)
                } else {
                    push2(Tok::Gt, 1, &mut i, &mut col)
                }
            }
            '=' => match bytes.get(i + 1) {
                Some(&b'=') => push2(Tok::EqEq, 2, &mut i, &mut col),
                Some(&b'>') => push2(Tok::FatArrow, 2, &mut i, &mut col),
                _ => push2(Tok::Assign, 1, &mut i, &mut col),
            },
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text = &src[start..i];
                let n: i64 = text.parse().map_err(|_| LexError {
                    msg: format!("integer literal `{text}` out of range"),
                    span: here,
                })?;
                col += (i - start) as u32;
                toks.push((Tok::Int(n), here));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                // trailing primes mark renamed output-state variables
                while i < bytes.len() && bytes[i] == b'\'' {
                    i += 1;
                }
                let text = &src[start..i];
                col += (i - start) as u32;
                toks.push((Tok::Ident(text.to_string()), here));
            }
            other => {
                return Err(LexError {
                    msg: format!("unexpected character `{other}`"),
                    span: here,
                })
            }
        }
    }
    toks.push((Tok::Eof, span!()));
    Ok(Lexer { toks })
}
