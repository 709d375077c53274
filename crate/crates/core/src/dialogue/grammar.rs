//! The interchange grammar for annotated questions and answers:
//!
//! ```text
//! body text <name1: [a, b, c, d], name2: [a, b, c, d]>
//! ```

use thiserror::Error;

use super::Annotation;
use crate::geometry::{convert, BoxFormat, GeometryError, ImageDims};

/// Decimal places used when rendering coordinates.
pub const RENDER_PRECISION: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("unterminated annotation suffix starting at offset {offset}")]
    Unterminated { offset: usize },
    #[error("quadruple has {count} numbers at offset {offset}")]
    WrongArity { offset: usize, count: usize },
    #[error("empty annotation name at offset {offset}")]
    EmptyName { offset: usize },
    #[error("expected {expected} at offset {offset}")]
    Unexpected { offset: usize, expected: &'static str },
    #[error("invalid number '{token}' at offset {offset}")]
    BadNumber { offset: usize, token: String },
    #[error("trailing text after annotation suffix at offset {offset}")]
    Trailing { offset: usize },
    #[error("bad box at offset {offset}: {source}")]
    Geometry {
        offset: usize,
        #[source]
        source: GeometryError,
    },
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn expect(&mut self, want: char, expected: &'static str) -> Result<(), GrammarError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            None if want == '>' || want == ']' => Err(GrammarError::Unterminated { offset: self.pos }),
            _ => Err(GrammarError::Unexpected {
                offset: self.pos,
                expected,
            }),
        }
    }
}

/// Split one question or answer line into its clean body and annotations.
///
/// Offsets in errors are byte offsets into `raw`.
pub fn parse_annotated_text(
    raw: &str,
    format: BoxFormat,
    dims: Option<ImageDims>,
) -> Result<(String, Vec<Annotation>), GrammarError> {
    let Some(open) = raw.find('<') else {
        return Ok((raw.trim().to_string(), Vec::new()));
    };
    let body = raw[..open].trim().to_string();

    let mut cur = Cursor { src: raw, pos: open + 1 };
    let mut annotations = Vec::new();
    cur.skip_ws();
    if cur.peek() == Some('>') {
        cur.bump();
    } else {
        loop {
            annotations.push(parse_entry(&mut cur, format, dims)?);
            cur.skip_ws();
            match cur.bump() {
                Some(',') => continue,
                Some('>') => break,
                None => return Err(GrammarError::Unterminated { offset: open }),
                Some(_) => {
                    return Err(GrammarError::Unexpected {
                        offset: cur.pos - 1,
                        expected: "',' or '>'",
                    })
                }
            }
        }
    }
    cur.skip_ws();
    if cur.pos < raw.len() {
        return Err(GrammarError::Trailing { offset: cur.pos });
    }
    Ok((body, annotations))
}

fn parse_entry(
    cur: &mut Cursor<'_>,
    format: BoxFormat,
    dims: Option<ImageDims>,
) -> Result<Annotation, GrammarError> {
    cur.skip_ws();
    let name_start = cur.pos;
    while let Some(c) = cur.peek() {
        if matches!(c, ':' | '<' | '>' | '[' | ']' | ',') {
            break;
        }
        cur.bump();
    }
    let name = cur.src[name_start..cur.pos].trim();
    if cur.peek().is_none() {
        return Err(GrammarError::Unterminated { offset: name_start });
    }
    if name.is_empty() {
        return Err(GrammarError::EmptyName { offset: name_start });
    }
    cur.expect(':', "':' after annotation name")?;
    cur.skip_ws();
    let bracket = cur.pos;
    cur.expect('[', "'['")?;

    let mut numbers = Vec::with_capacity(4);
    loop {
        cur.skip_ws();
        let start = cur.pos;
        while cur
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
        {
            cur.bump();
        }
        let token = &cur.src[start..cur.pos];
        if token.is_empty() {
            if numbers.is_empty() && cur.peek() == Some(']') {
                cur.bump();
                break;
            }
            if cur.peek().is_none() {
                return Err(GrammarError::Unterminated { offset: bracket });
            }
            return Err(GrammarError::Unexpected {
                offset: cur.pos,
                expected: "number",
            });
        }
        let value: f64 = token.parse().map_err(|_| GrammarError::BadNumber {
            offset: start,
            token: token.to_string(),
        })?;
        numbers.push(value);
        cur.skip_ws();
        match cur.bump() {
            Some(',') => continue,
            Some(']') => break,
            None => return Err(GrammarError::Unterminated { offset: bracket }),
            Some(_) => {
                return Err(GrammarError::Unexpected {
                    offset: cur.pos - 1,
                    expected: "',' or ']'",
                })
            }
        }
    }

    let quad: [f64; 4] = numbers
        .as_slice()
        .try_into()
        .map_err(|_| GrammarError::WrongArity {
            offset: bracket,
            count: numbers.len(),
        })?;
    let bbox = convert(quad, format, dims).map_err(|source| GrammarError::Geometry {
        offset: bracket,
        source,
    })?;
    Ok(Annotation::new(name, bbox))
}

/// Inverse of [`parse_annotated_text`]; coordinates use [`RENDER_PRECISION`]
/// decimal places in normalized units.
pub fn render_annotated_text(text: &str, annotations: &[Annotation], format: BoxFormat) -> String {
    if annotations.is_empty() {
        return text.to_string();
    }
    let entries: Vec<String> = annotations
        .iter()
        .map(|a| {
            let q = a.bbox.to_quad(format, None);
            format!(
                "{}: [{:.p$}, {:.p$}, {:.p$}, {:.p$}]",
                a.name,
                q[0],
                q[1],
                q[2],
                q[3],
                p = RENDER_PRECISION
            )
        })
        .collect();
    if text.is_empty() {
        format!("<{}>", entries.join(", "))
    } else {
        format!("{} <{}>", text, entries.join(", "))
    }
}
