//! Tokenizer for the MDX subset.

use super::MdxError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(super) enum Tok {
    /// Bracket-quoted identifier, content verbatim.
    Ident(String),
    /// Bare word (keyword or function name).
    Word(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Dot,
}

#[derive(Clone, Debug)]
pub(super) struct Spanned {
    pub tok: Tok,
    pub offset: usize,
}

pub(super) fn syntax_error(text: &str, offset: usize, msg: impl Into<String>) -> MdxError {
    let mut line = 1;
    let mut col = 1;
    for (i, c) in text.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    MdxError::Syntax { offset, line, col, msg: msg.into() }
}

pub(super) fn lex(text: &str) -> Result<Vec<Spanned>, MdxError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            c if c.is_whitespace() => i += 1,
            '{' | '}' | '(' | ')' | ',' | '.' => {
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => Tok::Dot,
                };
                toks.push(Spanned { tok, offset: i });
                i += 1;
            }
            '[' => {
                let start = i;
                let rest = &text[i + 1..];
                match rest.find(']') {
                    None => return Err(syntax_error(text, start, "unterminated `[` identifier")),
                    Some(end) => {
                        let content = &rest[..end];
                        if content.is_empty() {
                            return Err(syntax_error(text, start, "empty `[]` identifier"));
                        }
                        toks.push(Spanned {
                            tok: Tok::Ident(content.to_string()),
                            offset: start,
                        });
                        i += end + 2;
                    }
                }
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < bytes.len() {
                    let c = bytes[i] as char;
                    if c.is_ascii_alphanumeric() || c == '_' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                toks.push(Spanned {
                    tok: Tok::Word(text[start..i].to_string()),
                    offset: start,
                });
            }
            other => {
                return Err(syntax_error(text, i, format!("unexpected character {other:?}")))
            }
        }
    }
    Ok(toks)
}
