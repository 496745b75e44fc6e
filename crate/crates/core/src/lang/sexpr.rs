//! Minimal S-expression reader with source positions.

use std::fmt;

use super::LangError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }

    /// Head symbol of a list, e.g. `and` for `(and ...)`.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(Sexp::as_atom)
    }

    pub fn expect_atom(&self, what: &str) -> Result<&str, LangError> {
        self.as_atom()
            .ok_or_else(|| LangError::syntax(self.pos(), format!("expected {what}, found a list")))
    }

    pub fn expect_list(&self, what: &str) -> Result<&[Sexp], LangError> {
        self.as_list()
            .ok_or_else(|| LangError::syntax(self.pos(), format!("expected {what}, found an atom")))
    }
}

/// Reads every top-level form in `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, LangError> {
    let mut reader = Reader {
        chars: text.chars().collect(),
        idx: 0,
        line: 1,
        col: 1,
    };
    let mut forms = Vec::new();
    loop {
        reader.skip_trivia();
        if reader.peek().is_none() {
            return Ok(forms);
        }
        forms.push(reader.read()?);
    }
}

struct Reader {
    chars: Vec<char>,
    idx: usize,
    line: usize,
    col: usize,
}

impl Reader {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).copied()
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.idx += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, LangError> {
        self.skip_trivia();
        let start = self.pos();
        match self.peek() {
            None => Err(LangError::syntax(start, "unexpected end of input")),
            Some(')') => Err(LangError::syntax(start, "unbalanced ')'")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(LangError::syntax(start, "unclosed '('")),
                        Some(')') => {
                            self.bump();
                            return Ok(Sexp::List(items, start));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(_) => {
                let mut text = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    text.push(c);
                    self.bump();
                }
                Ok(Sexp::Atom(text, start))
            }
        }
    }
}
