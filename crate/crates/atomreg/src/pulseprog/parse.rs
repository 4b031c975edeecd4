//! Line-oriented parser with position-carrying diagnostics.

use thiserror::Error;

use super::{Program, Span, Spanned, Statement};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("expected INIT")]
    ExpectedInit,
    #[error("unknown statement `{0}`; expected INIT, ROT, PI, PI2, WAIT, or MEASURE")]
    UnknownStatement(String),
    #[error("duplicate INIT")]
    DuplicateInit,
    #[error("statement after MEASURE")]
    StatementAfterMeasure,
    #[error("expected {expected}, found `{found}`")]
    Expected {
        expected: &'static str,
        found: String,
    },
    #[error("expected {0} at end of line")]
    UnexpectedEndOfLine(&'static str),
    #[error("trailing token `{0}`")]
    TrailingToken(String),
    #[error("invalid number `{0}`")]
    BadNumber(String),
    #[error("number `{found}` must carry unit suffix `{expected}`")]
    WrongUnit {
        expected: &'static str,
        found: String,
    },
    #[error("atom label must be a positive integer, got `{0}`")]
    BadLabel(String),
    #[error("wait duration must be >= 0, got {0}")]
    NegativeDuration(f64),
}

struct Token<'a> {
    text: &'a str,
    col: u32,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in body.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &body[s..i],
                    col: s as u32 + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &body[s..],
            col: s as u32 + 1,
        });
    }
    tokens
}

struct LineParser<'a> {
    tokens: Vec<Token<'a>>,
    line: u32,
    next: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, col: u32, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            col,
            kind,
        }
    }

    fn end_col(&self) -> u32 {
        self.tokens
            .last()
            .map(|t| t.col + t.text.len() as u32)
            .unwrap_or(1)
    }

    fn take(&mut self, what: &'static str) -> Result<&Token<'a>, ParseError> {
        match self.tokens.get(self.next) {
            Some(tok) => {
                self.next += 1;
                Ok(tok)
            }
            None => Err(self.err(self.end_col(), ParseErrorKind::UnexpectedEndOfLine(what))),
        }
    }

    fn keyword(&mut self, kw: &'static str) -> Result<(), ParseError> {
        let tok = self.take(kw)?;
        if tok.text.eq_ignore_ascii_case(kw) {
            Ok(())
        } else {
            let (col, found) = (tok.col, tok.text.to_owned());
            Err(self.err(
                col,
                ParseErrorKind::Expected {
                    expected: kw,
                    found,
                },
            ))
        }
    }

    fn label(&mut self) -> Result<u32, ParseError> {
        let tok = self.take("atom label")?;
        let (col, text) = (tok.col, tok.text.to_owned());
        match text.parse::<u32>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(self.err(col, ParseErrorKind::BadLabel(text))),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let tok = self.take("shape name")?;
        let (col, text) = (tok.col, tok.text.to_owned());
        let mut chars = text.chars();
        let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
        if head_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
            Ok(text)
        } else {
            Err(self.err(
                col,
                ParseErrorKind::Expected {
                    expected: "shape name",
                    found: text,
                },
            ))
        }
    }

    fn number(&mut self, unit: &'static str) -> Result<f64, ParseError> {
        let tok = self.take("number")?;
        let (col, text) = (tok.col, tok.text.to_owned());
        let suffix_len = text
            .chars()
            .rev()
            .take_while(|c| c.is_ascii_alphabetic())
            .count();
        let split = text.len() - suffix_len;
        let (digits, suffix) = text.split_at(split);
        if !suffix.eq_ignore_ascii_case(unit) {
            return Err(self.err(
                col,
                ParseErrorKind::WrongUnit {
                    expected: unit,
                    found: text,
                },
            ));
        }
        match digits.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(col, ParseErrorKind::BadNumber(text))),
        }
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        match self.tokens.get(self.next) {
            Some(tok) => {
                let (col, text) = (tok.col, tok.text.to_owned());
                Err(self.err(col, ParseErrorKind::TrailingToken(text)))
            }
            None => Ok(()),
        }
    }
}

/// Parses program source into a structurally validated [`Program`].
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let mut statements: Vec<Spanned<Statement>> = Vec::new();
    let mut seen_init = false;
    let mut seen_measure = false;

    for (line_idx, raw) in source.lines().enumerate() {
        let line_no = line_idx as u32 + 1;
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            continue;
        }
        let head_col = tokens[0].col;
        let head = tokens[0].text.to_ascii_uppercase();
        let mut lp = LineParser {
            tokens,
            line: line_no,
            next: 1,
        };
        let node = match head.as_str() {
            "INIT" => Statement::Init,
            "PI" => {
                lp.keyword("ATOM")?;
                let target = lp.label()?;
                lp.keyword("SHAPE")?;
                let shape = lp.ident()?;
                Statement::Pi { target, shape }
            }
            "PI2" => {
                lp.keyword("ATOM")?;
                let target = lp.label()?;
                lp.keyword("SHAPE")?;
                let shape = lp.ident()?;
                Statement::Pi2 { target, shape }
            }
            "ROT" => {
                lp.keyword("ATOM")?;
                let target = lp.label()?;
                lp.keyword("ANGLE")?;
                let angle_rad = lp.number("rad")?;
                lp.keyword("SHAPE")?;
                let shape = lp.ident()?;
                Statement::Rot {
                    target,
                    angle_rad,
                    shape,
                }
            }
            "WAIT" => {
                let duration_us = lp.number("us")?;
                if duration_us < 0.0 {
                    return Err(lp.err(head_col, ParseErrorKind::NegativeDuration(duration_us)));
                }
                Statement::Wait { duration_us }
            }
            "MEASURE" => Statement::Measure,
            other => {
                return Err(lp.err(head_col, ParseErrorKind::UnknownStatement(other.to_owned())))
            }
        };
        lp.finish()?;

        let span = Span {
            line: line_no,
            col: head_col,
        };
        if seen_measure {
            return Err(ParseError {
                line: span.line,
                col: span.col,
                kind: ParseErrorKind::StatementAfterMeasure,
            });
        }
        match &node {
            Statement::Init => {
                if seen_init {
                    return Err(ParseError {
                        line: span.line,
                        col: span.col,
                        kind: ParseErrorKind::DuplicateInit,
                    });
                }
                seen_init = true;
            }
            Statement::Measure => seen_measure = true,
            Statement::Rot { .. } | Statement::Pi { .. } | Statement::Pi2 { .. } => {
                if !seen_init {
                    return Err(ParseError {
                        line: span.line,
                        col: span.col,
                        kind: ParseErrorKind::ExpectedInit,
                    });
                }
            }
            Statement::Wait { .. } => {}
        }
        statements.push(Spanned { node, span });
    }

    if !seen_init {
        return Err(ParseError {
            line: 1,
            col: 1,
            kind: ParseErrorKind::ExpectedInit,
        });
    }
    Ok(Program { statements })
}
