//! Minimal s-expression reader with source positions.

use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub sexp: Sexp,
    pub line: usize,
    pub col: usize,
}

impl Node {
    pub fn atom(&self) -> Option<&str> {
        match &self.sexp {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Node]> {
        match &self.sexp {
            Sexp::List(l) => Some(l),
            Sexp::Atom(_) => None,
        }
    }

    pub fn error(&self, expected: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.line,
            col: self.col,
            expected: expected.into(),
        }
    }
}

const MAX_DEPTH: usize = 512;

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    col: usize,
}

impl Reader<'_> {
    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|c| c.1)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn err(&self, expected: &str) -> SyntaxError {
        SyntaxError {
            line: self.line,
            col: self.col,
            expected: expected.to_string(),
        }
    }

    fn node(&mut self, depth: usize) -> Result<Node, SyntaxError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        match self.peek() {
            None => Err(self.err("expression")),
            Some(')') => Err(self.err("expression")),
            Some('(') => {
                if depth >= MAX_DEPTH {
                    return Err(self.err("shallower nesting"));
                }
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(self.err("')'")),
                        Some(')') => {
                            self.bump();
                            return Ok(Node {
                                sexp: Sexp::List(items),
                                line,
                                col,
                            });
                        }
                        Some(_) => items.push(self.node(depth + 1)?),
                    }
                }
            }
            Some(_) => {
                let start = self.chars.peek().map(|c| c.0).unwrap();
                let mut end = start;
                while let Some(&(i, c)) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    end = i + c.len_utf8();
                    self.bump();
                }
                Ok(Node {
                    sexp: Sexp::Atom(self.src[start..end].to_string()),
                    line,
                    col,
                })
            }
        }
    }
}

/// Read exactly one expression from `src`.
pub fn read_one(src: &str) -> Result<Node, SyntaxError> {
    let mut r = Reader {
        chars: src.char_indices().peekable(),
        src,
        line: 1,
        col: 1,
    };
    let n = r.node(0)?;
    r.skip_trivia();
    if r.peek().is_some() {
        return Err(r.err("end of input"));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_and_comments() {
        let n = read_one("; plan\n(seq\n  (a 1) b)").unwrap();
        assert_eq!((n.line, n.col), (2, 1));
        let items = n.list().unwrap();
        assert_eq!(items[1].line, 3);
        assert_eq!(items[1].col, 3);
        assert_eq!(items[2].atom(), Some("b"));
    }

    #[test]
    fn errors() {
        assert_eq!(read_one("(a").unwrap_err().expected, "')'");
        assert!(read_one(")").is_err());
        assert!(read_one("a b").is_err());
        assert!(read_one("").is_err());
    }
}
