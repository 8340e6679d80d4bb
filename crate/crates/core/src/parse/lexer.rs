use num_bigint::BigInt;

use crate::error::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

// Longest symbols first so that maximal munch works with a linear scan.
const SYMBOLS: &[&str] = &[
    "->", ":=", "<=", ">=", "==", "!=", "&&", "||", "&", "++", "--", "+=", "-=", "(", ")", "{", "}", "[",
    "]", ";", ",", ":", "+", "-", "*", "/", "^", "<", ">", "=", "!",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommentStyle {
    /// `# ...` to end of line.
    Hash,
    /// `// ...` and `/* ... */`.
    CLike,
}

struct Scanner {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

impl Scanner {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).copied()
    }

    fn starts_with(&self, s: &str) -> bool {
        self.chars[self.i..].iter().take(s.len()).copied().eq(s.chars())
    }

    fn advance(&mut self) -> char {
        let c = self.chars[self.i];
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek().filter(|c| f(*c)) {
            s.push(c);
            self.advance();
        }
        s
    }
}

pub fn tokenize(src: &str, style: CommentStyle) -> Result<Vec<Token>, ParseError> {
    let mut sc = Scanner {
        chars: src.chars().collect(),
        i: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = sc.peek() {
        if c.is_whitespace() {
            sc.advance();
            continue;
        }
        let line_comment = match style {
            CommentStyle::Hash => c == '#',
            CommentStyle::CLike => sc.starts_with("//"),
        };
        if line_comment {
            sc.take_while(|c| c != '\n');
            continue;
        }
        let (line, col) = (sc.line, sc.col);
        if style == CommentStyle::CLike && sc.starts_with("/*") {
            sc.advance();
            sc.advance();
            while !sc.starts_with("*/") {
                if sc.peek().is_none() {
                    return Err(ParseError::syntax(line, col, "unterminated block comment"));
                }
                sc.advance();
            }
            sc.advance();
            sc.advance();
            continue;
        }
        let tok = if c.is_ascii_digit() {
            Tok::Int(sc.take_while(|c| c.is_ascii_digit()).parse().expect("digits"))
        } else if c.is_alphabetic() || c == '_' {
            Tok::Ident(sc.take_while(|c| c.is_alphanumeric() || c == '_'))
        } else {
            match SYMBOLS.iter().find(|s| sc.starts_with(s)) {
                Some(s) => {
                    for _ in 0..s.len() {
                        sc.advance();
                    }
                    Tok::Sym(s)
                }
                None => return Err(ParseError::syntax(line, col, format!("unexpected character `{c}`"))),
            }
        };
        out.push(Token { tok, line, col });
    }
    out.push(Token {
        tok: Tok::Eof,
        line: sc.line,
        col: sc.col,
    });
    Ok(out)
}

/// Cursor over a token vector with small helpers shared by both parsers.
pub struct Cursor {
    toks: Vec<Token>,
    pub pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        let idx = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    pub fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn err(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self.here();
        ParseError::syntax(l, c, msg)
    }

    pub fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`, found {}", self.describe())))
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{kw}`, found {}", self.describe())))
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.err(format!("expected identifier, found {}", self.describe()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximal_munch_and_positions() {
        let toks = tokenize("x := y<=3 # hi\n z->w", CommentStyle::Hash).unwrap();
        let kinds: Vec<Tok> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("x".into()),
                Tok::Sym(":="),
                Tok::Ident("y".into()),
                Tok::Sym("<="),
                Tok::Int(3.into()),
                Tok::Ident("z".into()),
                Tok::Sym("->"),
                Tok::Ident("w".into()),
                Tok::Eof
            ]
        );
        assert_eq!((toks[5].line, toks[5].col), (2, 2));
    }

    #[test]
    fn c_comments() {
        let toks = tokenize("a /* b \n c */ d // e\n f", CommentStyle::CLike).unwrap();
        assert_eq!(toks.len(), 4);
        assert!(tokenize("/* open", CommentStyle::CLike).is_err());
    }
}
