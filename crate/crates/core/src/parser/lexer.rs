use crate::span::{Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Magnitude only; a leading `-` is a separate token.
    Int(u64),
    Float(f64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Pipe,
    DotDot,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Float(x) => format!("`{x:?}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    pub(crate) fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Pipe => "|",
            Tok::DotDot => "..",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Ident(_) | Tok::Int(_) | Tok::Float(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else if c != '\r' {
            self.col += 1;
        }
        Some(c)
    }
}

pub(crate) fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor { chars: text.chars().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '/' && cur.peek2() == Some('/') {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
            } else {
                break;
            }
        }
        let (line, col) = (cur.line, cur.col);
        let Some(c) = cur.bump() else {
            out.push(Token { tok: Tok::Eof, span: Span::new(line, col, line, col) });
            return Ok(out);
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            ';' => Tok::Semi,
            '|' => Tok::Pipe,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '%' => Tok::Percent,
            '=' => Tok::Eq,
            '.' if cur.peek() == Some('.') => {
                cur.bump();
                Tok::DotDot
            }
            '!' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Ne
            }
            '<' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Le
            }
            '<' => Tok::Lt,
            '>' if cur.peek() == Some('=') => {
                cur.bump();
                Tok::Ge
            }
            '>' => Tok::Gt,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::from(c);
                while let Some(c) = cur.peek().filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
                    s.push(c);
                    cur.bump();
                }
                Tok::Ident(s)
            }
            c if c.is_ascii_digit() => lex_number(c, &mut cur, line, col)?,
            other => {
                let span = Span::new(line, col, line, col + 1);
                return Err(Diagnostic::error("lex.unexpected-char", format!("unexpected character `{other}`"), span));
            }
        };
        let span = Span::new(line, col, cur.line, cur.col);
        out.push(Token { tok, span });
    }
}

fn lex_number(first: char, cur: &mut Cursor<'_>, line: u32, col: u32) -> Result<Tok, Diagnostic> {
    let mut s = String::from(first);
    let digits = |cur: &mut Cursor<'_>, s: &mut String| {
        while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
            s.push(c);
            cur.bump();
        }
    };
    digits(cur, &mut s);
    let mut is_float = false;
    // `1..n` is a range, not a float
    if cur.peek() == Some('.') && cur.peek2().is_some_and(|c| c.is_ascii_digit()) {
        is_float = true;
        s.push('.');
        cur.bump();
        digits(cur, &mut s);
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let sign = cur.peek2();
        let mut probe = cur.chars.clone();
        probe.next();
        if matches!(sign, Some('+' | '-')) {
            probe.next();
        }
        if probe.next().is_some_and(|c| c.is_ascii_digit()) {
            is_float = true;
            s.push('e');
            cur.bump();
            if matches!(cur.peek(), Some('+' | '-')) {
                s.push(cur.bump().expect("peeked"));
            }
            digits(cur, &mut s);
        }
    }
    let span = Span::new(line, col, cur.line, cur.col);
    if is_float {
        s.parse::<f64>()
            .map(Tok::Float)
            .map_err(|_| Diagnostic::error("lex.bad-number", format!("malformed number `{s}`"), span))
    } else {
        s.parse::<u64>()
            .map(Tok::Int)
            .map_err(|_| Diagnostic::error("lex.bad-number", format!("integer literal `{s}` out of range"), span))
    }
}
