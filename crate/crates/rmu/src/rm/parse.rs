//! Parser for the line-oriented RM DSL.
//!
//! ```text
//! props gold home;
//! state u0 init;
//! state u1;
//! terminal fail;
//! terminal success;
//! edge u0 : gold & !home -> u1 @ 0;
//! ```
//!
//! Formula operators by precedence: `!` (highest), `&`, `|` (lowest), plus
//! parentheses and the constants `true`/`false`. `#` starts a comment that
//! runs to end of line.

use super::{Alphabet, Formula, RewardMachine, RmEdge, RmError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: unknown proposition `{name}`")]
    UnknownProp { line: usize, col: usize, name: String },
    #[error("{line}:{col}: unknown state `{name}`")]
    UnknownState { line: usize, col: usize, name: String },
    #[error("{line}:{col}: duplicate state id `{name}`")]
    DuplicateState { line: usize, col: usize, name: String },
    #[error("{line}:{col}: duplicate `props` declaration")]
    DuplicateProps { line: usize, col: usize },
    #[error("{line}:{col}: duplicate `init` marker")]
    DuplicateInit { line: usize, col: usize },
    #[error("missing `props` declaration")]
    MissingProps,
    #[error("no state marked `init`")]
    MissingInit,
    #[error("invalid machine: {0}")]
    Invalid(#[from] RmError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Semi,
    Colon,
    Arrow,
    At,
    And,
    Or,
    Not,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut toks = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let bytes: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let col = i + 1;
            match c {
                '#' => break,
                c if c.is_whitespace() => {
                    i += 1;
                }
                ';' => {
                    toks.push(Spanned { tok: Tok::Semi, line: line_no, col });
                    i += 1;
                }
                ':' => {
                    toks.push(Spanned { tok: Tok::Colon, line: line_no, col });
                    i += 1;
                }
                '@' => {
                    toks.push(Spanned { tok: Tok::At, line: line_no, col });
                    i += 1;
                }
                '&' => {
                    toks.push(Spanned { tok: Tok::And, line: line_no, col });
                    i += 1;
                }
                '|' => {
                    toks.push(Spanned { tok: Tok::Or, line: line_no, col });
                    i += 1;
                }
                '!' => {
                    toks.push(Spanned { tok: Tok::Not, line: line_no, col });
                    i += 1;
                }
                '(' => {
                    toks.push(Spanned { tok: Tok::LParen, line: line_no, col });
                    i += 1;
                }
                ')' => {
                    toks.push(Spanned { tok: Tok::RParen, line: line_no, col });
                    i += 1;
                }
                '-' if i + 1 < bytes.len() && bytes[i + 1] == '>' => {
                    toks.push(Spanned { tok: Tok::Arrow, line: line_no, col });
                    i += 2;
                }
                c if c.is_ascii_digit() || c == '-' || c == '.' => {
                    let start = i;
                    i += 1;
                    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.' || bytes[i] == 'e' || bytes[i] == 'E' || bytes[i] == '-' || bytes[i] == '+') {
                        // Stop before an arrow so `->` is not eaten by exponent handling.
                        if bytes[i] == '-' && i + 1 < bytes.len() && bytes[i + 1] == '>' {
                            break;
                        }
                        i += 1;
                    }
                    let text: String = bytes[start..i].iter().collect();
                    let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                        line: line_no,
                        col,
                        message: format!("invalid number `{text}`"),
                    })?;
                    toks.push(Spanned { tok: Tok::Number(value), line: line_no, col });
                }
                c if c.is_alphanumeric() || c == '_' => {
                    let start = i;
                    while i < bytes.len() && (bytes[i].is_alphanumeric() || bytes[i] == '_') {
                        i += 1;
                    }
                    let text: String = bytes[start..i].iter().collect();
                    toks.push(Spanned { tok: Tok::Ident(text), line: line_no, col });
                }
                other => {
                    return Err(ParseError::Syntax {
                        line: line_no,
                        col,
                        message: format!("unexpected character `{other}`"),
                    });
                }
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self
            .peek()
            .map(|s| (s.line, s.col))
            .or_else(|| self.toks.last().map(|s| (s.line, s.col)))
            .unwrap_or((1, 1));
        ParseError::Syntax { line, col, message: message.into() }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Spanned, ParseError> {
        match self.peek() {
            Some(s) if s.tok == want => Ok(self.next().unwrap()),
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        match self.peek().cloned() {
            Some(Spanned { tok: Tok::Ident(name), line, col }) => {
                self.pos += 1;
                Ok((name, line, col))
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    // formula := term ('|' term)*
    fn formula(&mut self, alphabet: &Alphabet) -> Result<Formula, ParseError> {
        let mut left = self.term(alphabet)?;
        while matches!(self.peek().map(|s| &s.tok), Some(Tok::Or)) {
            self.next();
            let right = self.term(alphabet)?;
            left = Formula::or(left, right);
        }
        Ok(left)
    }

    // term := factor ('&' factor)*
    fn term(&mut self, alphabet: &Alphabet) -> Result<Formula, ParseError> {
        let mut left = self.factor(alphabet)?;
        while matches!(self.peek().map(|s| &s.tok), Some(Tok::And)) {
            self.next();
            let right = self.factor(alphabet)?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    // factor := '!' factor | '(' formula ')' | 'true' | 'false' | ident
    fn factor(&mut self, alphabet: &Alphabet) -> Result<Formula, ParseError> {
        match self.peek().cloned() {
            Some(Spanned { tok: Tok::Not, .. }) => {
                self.next();
                Ok(Formula::not(self.factor(alphabet)?))
            }
            Some(Spanned { tok: Tok::LParen, .. }) => {
                self.next();
                let inner = self.formula(alphabet)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Spanned { tok: Tok::Ident(name), line, col }) => {
                self.next();
                match name.as_str() {
                    "true" => Ok(Formula::True),
                    "false" => Ok(Formula::False),
                    _ => alphabet
                        .index_of(&name)
                        .map(Formula::lit)
                        .ok_or(ParseError::UnknownProp { line, col, name }),
                }
            }
            _ => Err(self.err_here("expected formula")),
        }
    }
}

struct RawEdge {
    src: String,
    src_line: usize,
    src_col: usize,
    guard: Formula,
    dst: String,
    dst_line: usize,
    dst_col: usize,
    reward: f64,
}

/// Parses DSL text into a validated [`RewardMachine`]. The alphabet is
/// taken from the mandatory `props` header, which fixes proposition indices.
pub fn parse_rm(text: &str) -> Result<RewardMachine, ParseError> {
    let mut p = Parser { toks: tokenize(text)?, pos: 0 };

    let mut alphabet: Option<Alphabet> = None;
    let mut states: Vec<String> = Vec::new();
    let mut terminals: Vec<String> = Vec::new();
    let mut initial: Option<usize> = None;
    let mut raw_edges: Vec<RawEdge> = Vec::new();

    while let Some(head) = p.peek().cloned() {
        let keyword = match &head.tok {
            Tok::Ident(k) => k.clone(),
            _ => return Err(p.err_here("expected statement keyword")),
        };
        p.next();
        match keyword.as_str() {
            "props" => {
                if alphabet.is_some() {
                    return Err(ParseError::DuplicateProps { line: head.line, col: head.col });
                }
                let mut names = Vec::new();
                while !matches!(p.peek().map(|s| &s.tok), Some(Tok::Semi)) {
                    let (name, line, col) = p.expect_ident("proposition name")?;
                    if names.contains(&name) {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            message: format!("duplicate proposition `{name}`"),
                        });
                    }
                    names.push(name);
                }
                p.expect(Tok::Semi, "`;`")?;
                alphabet = Some(Alphabet::new(names).map_err(RmError::from)?);
            }
            "state" => {
                let (name, line, col) = p.expect_ident("state name")?;
                if states.contains(&name) || terminals.contains(&name) {
                    return Err(ParseError::DuplicateState { line, col, name });
                }
                let mut is_init = false;
                if let Some(Spanned { tok: Tok::Ident(marker), line, col }) = p.peek().cloned() {
                    if marker == "init" {
                        p.next();
                        if initial.is_some() {
                            return Err(ParseError::DuplicateInit { line, col });
                        }
                        is_init = true;
                    }
                }
                p.expect(Tok::Semi, "`;`")?;
                if is_init {
                    initial = Some(states.len());
                }
                states.push(name);
            }
            "terminal" => {
                let (name, line, col) = p.expect_ident("terminal name")?;
                if states.contains(&name) || terminals.contains(&name) {
                    return Err(ParseError::DuplicateState { line, col, name });
                }
                p.expect(Tok::Semi, "`;`")?;
                terminals.push(name);
            }
            "edge" => {
                let alphabet = alphabet.as_ref().ok_or(ParseError::MissingProps)?;
                let (src, src_line, src_col) = p.expect_ident("source state")?;
                p.expect(Tok::Colon, "`:`")?;
                let guard = p.formula(alphabet)?;
                p.expect(Tok::Arrow, "`->`")?;
                let (dst, dst_line, dst_col) = p.expect_ident("target state")?;
                p.expect(Tok::At, "`@`")?;
                let reward = match p.peek().cloned() {
                    Some(Spanned { tok: Tok::Number(v), .. }) => {
                        p.next();
                        v
                    }
                    _ => return Err(p.err_here("expected reward number")),
                };
                p.expect(Tok::Semi, "`;`")?;
                raw_edges.push(RawEdge { src, src_line, src_col, guard, dst, dst_line, dst_col, reward });
            }
            other => {
                return Err(ParseError::Syntax {
                    line: head.line,
                    col: head.col,
                    message: format!("unknown statement `{other}`"),
                });
            }
        }
    }

    let alphabet = alphabet.ok_or(ParseError::MissingProps)?;
    let initial = initial.ok_or(ParseError::MissingInit)?;
    let mut edges: Vec<Vec<RmEdge>> = vec![Vec::new(); states.len()];
    let node_index = |name: &str| -> Option<usize> {
        states
            .iter()
            .chain(terminals.iter())
            .position(|n| n == name)
    };
    for raw in raw_edges {
        let src = states.iter().position(|n| *n == raw.src).ok_or(ParseError::UnknownState {
            line: raw.src_line,
            col: raw.src_col,
            name: raw.src.clone(),
        })?;
        let target = node_index(&raw.dst).ok_or(ParseError::UnknownState {
            line: raw.dst_line,
            col: raw.dst_col,
            name: raw.dst.clone(),
        })?;
        edges[src].push(RmEdge { guard: raw.guard, target, reward: raw.reward });
    }
    Ok(RewardMachine::new(alphabet, states, terminals, initial, edges)?)
}
