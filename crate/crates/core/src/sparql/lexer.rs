use super::SparqlError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Iri(String),
    /// `prefix:local`, either part possibly empty.
    PName(String, String),
    /// Bare word: keywords, `a`, `true`, function names.
    Word(String),
    Var(String),
    Blank(String),
    Str(String),
    LangTag(String),
    Number(String),
    DoubleCaret,
    Punct(char),
    /// Two-character operators (`&&`, `||`, `!=`, `<=`, `>=`); only seen
    /// inside opaque expressions.
    Op(&'static str),
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, SparqlError> {
    let mut lx = Lexer {
        chars: src.char_indices().collect(),
        len: src.len(),
        i: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    while let Some(t) = lx.next_token()? {
        out.push(t);
    }
    Ok(out)
}

struct Lexer {
    chars: Vec<(usize, char)>,
    len: usize,
    i: usize,
    line: usize,
    col: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).map(|(_, c)| *c)
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.i + k).map(|(_, c)| *c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.i).map_or(self.len, |(o, _)| *o)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SparqlError> {
        Err(SparqlError::Syntax {
            line: self.line,
            column: self.col,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn name(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if is_name_char(c) || (c == '.' && self.peek_at(1).is_some_and(is_name_char)) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    /// Try to read `<...>` as an IRI; on failure the position is unchanged.
    fn try_iri(&mut self) -> Option<String> {
        let mut k = 1;
        let mut s = String::new();
        loop {
            match self.peek_at(k) {
                Some('>') => break,
                Some(c) if c.is_whitespace() || c == '<' || c == '"' || c == '{' || c == '}' => {
                    return None
                }
                Some(c) => s.push(c),
                None => return None,
            }
            k += 1;
        }
        for _ in 0..=k {
            self.bump();
        }
        Some(s)
    }

    fn next_token(&mut self) -> Result<Option<Token>, SparqlError> {
        self.skip_ws();
        let (start, line, column) = (self.offset(), self.line, self.col);
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let tok = match c {
            '<' => match self.try_iri() {
                Some(iri) => Tok::Iri(iri),
                None => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        Tok::Op("<=")
                    } else {
                        Tok::Punct('<')
                    }
                }
            },
            '?' | '$' if self.peek_at(1).is_some_and(is_name_char) => {
                self.bump();
                Tok::Var(self.name())
            }
            '_' if self.peek_at(1) == Some(':') => {
                self.bump();
                self.bump();
                let label = self.name();
                if label.is_empty() {
                    return self.err("empty blank node label");
                }
                Tok::Blank(label)
            }
            '"' | '\'' => Tok::Str(self.string()?),
            '@' => {
                self.bump();
                let mut tag = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        tag.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                if tag.is_empty() {
                    return self.err("empty language tag");
                }
                Tok::LangTag(tag.to_ascii_lowercase())
            }
            '^' if self.peek_at(1) == Some('^') => {
                self.bump();
                self.bump();
                Tok::DoubleCaret
            }
            c if c.is_ascii_digit()
                || ((c == '+' || c == '-' || c == '.')
                    && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                Tok::Number(self.number())
            }
            c if c.is_alphabetic() || c == ':' => {
                let first = if c == ':' { String::new() } else { self.name() };
                if self.peek() == Some(':') {
                    self.bump();
                    Tok::PName(first, self.local_name()?)
                } else {
                    Tok::Word(first)
                }
            }
            '&' | '|' | '!' | '>' | '=' => {
                self.bump();
                let two = match (c, self.peek()) {
                    ('&', Some('&')) => Some("&&"),
                    ('|', Some('|')) => Some("||"),
                    ('!', Some('=')) => Some("!="),
                    ('>', Some('=')) => Some(">="),
                    _ => None,
                };
                match two {
                    Some(op) => {
                        self.bump();
                        Tok::Op(op)
                    }
                    None => Tok::Punct(c),
                }
            }
            c if "{}()[].;,*/^+-?".contains(c) => {
                self.bump();
                Tok::Punct(c)
            }
            other => return self.err(format!("unexpected character '{other}'")),
        };
        Ok(Some(Token {
            tok,
            start,
            end: self.offset(),
            line,
            column,
        }))
    }

    fn local_name(&mut self) -> Result<String, SparqlError> {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            let inner_dot = c == '.' && self.peek_at(1).is_some_and(|n| is_name_char(n) || n == ':');
            if is_name_char(c) || c == ':' || inner_dot {
                s.push(c);
                self.bump();
            } else if c == '%' {
                s.push(c);
                self.bump();
                for _ in 0..2 {
                    match self.bump() {
                        Some(h) if h.is_ascii_hexdigit() => s.push(h),
                        _ => return self.err("invalid percent escape in local name"),
                    }
                }
            } else if c == '\\' {
                self.bump();
                match self.bump() {
                    Some(e) if "_~.-!$&'()*+,;=/?#@%".contains(e) => s.push(e),
                    _ => return self.err("invalid escape in local name"),
                }
            } else {
                break;
            }
        }
        Ok(s)
    }

    fn number(&mut self) -> String {
        let mut s = String::new();
        if let Some(c @ ('+' | '-')) = self.peek() {
            s.push(c);
            self.bump();
        }
        let mut dot = false;
        let mut exp = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                s.push(c);
            } else if c == '.' && !dot && !exp && self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) {
                dot = true;
                s.push(c);
            } else if (c == 'e' || c == 'E') && !exp {
                exp = true;
                s.push(c);
                self.bump();
                if let Some(sign @ ('+' | '-')) = self.peek() {
                    s.push(sign);
                } else {
                    continue;
                }
            } else {
                break;
            }
            self.bump();
        }
        s
    }

    fn string(&mut self) -> Result<String, SparqlError> {
        let q = self.bump().expect("quote");
        let long = self.peek() == Some(q) && self.peek_at(1) == Some(q);
        if long {
            self.bump();
            self.bump();
        } else if self.peek() == Some(q) {
            self.bump();
            return Ok(String::new());
        }
        let mut s = String::new();
        loop {
            let Some(c) = self.bump() else {
                return self.err("unterminated string");
            };
            if c == q {
                if !long {
                    return Ok(s);
                }
                if self.peek() == Some(q) && self.peek_at(1) == Some(q) {
                    while self.peek_at(2) == Some(q) {
                        s.push(q);
                        self.bump();
                    }
                    self.bump();
                    self.bump();
                    return Ok(s);
                }
                s.push(c);
            } else if c == '\\' {
                let e = match self.bump() {
                    Some('t') => '\t',
                    Some('n') => '\n',
                    Some('r') => '\r',
                    Some('b') => '\u{8}',
                    Some('f') => '\u{c}',
                    Some('"') => '"',
                    Some('\'') => '\'',
                    Some('\\') => '\\',
                    Some(u @ ('u' | 'U')) => {
                        let n = if u == 'u' { 4 } else { 8 };
                        let mut code = 0u32;
                        for _ in 0..n {
                            match self.bump().and_then(|h| h.to_digit(16)) {
                                Some(d) => code = code * 16 + d,
                                None => return self.err("invalid unicode escape"),
                            }
                        }
                        match char::from_u32(code) {
                            Some(ch) => ch,
                            None => return self.err("invalid code point"),
                        }
                    }
                    _ => return self.err("invalid string escape"),
                };
                s.push(e);
            } else if !long && c == '\n' {
                return self.err("line break in string");
            } else {
                s.push(c);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            toks("SELECT ?x WHERE { ?x a :Person . }"),
            vec![
                Tok::Word("SELECT".into()),
                Tok::Var("x".into()),
                Tok::Word("WHERE".into()),
                Tok::Punct('{'),
                Tok::Var("x".into()),
                Tok::Word("a".into()),
                Tok::PName("".into(), "Person".into()),
                Tok::Punct('.'),
                Tok::Punct('}'),
            ]
        );
    }

    #[test]
    fn comparison_is_not_an_iri() {
        let t = toks("FILTER(?a < ?b && ?c <= 3)");
        assert!(t.contains(&Tok::Punct('<')));
        assert!(t.contains(&Tok::Op("<=")));
        assert!(t.contains(&Tok::Op("&&")));
    }

    #[test]
    fn literals() {
        assert_eq!(
            toks(r#""a\"b"@EN 'x'^^xsd:int -2.5 1e3"#),
            vec![
                Tok::Str("a\"b".into()),
                Tok::LangTag("en".into()),
                Tok::Str("x".into()),
                Tok::DoubleCaret,
                Tok::PName("xsd".into(), "int".into()),
                Tok::Number("-2.5".into()),
                Tok::Number("1e3".into()),
            ]
        );
    }

    #[test]
    fn positions_are_tracked() {
        let t = tokenize("ASK {\n  ?x ?p ?o }").unwrap();
        assert_eq!((t[2].line, t[2].column), (2, 3));
    }
}
