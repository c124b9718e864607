use crate::rdf::{vocab, PrefixMap, Term};

use super::lexer::{tokenize, Tok, Token};
use super::{
    GroupElement, GroupPattern, ParsedQuery, Projection, QueryForm, SparqlError, TermPattern,
    TriplePattern,
};

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Prefixes available when the query does not declare them itself.
    pub default_prefixes: PrefixMap,
    /// Drop unsupported constructs (with a warning) instead of failing.
    pub lenient: bool,
}

pub fn parse_query(text: &str) -> Result<ParsedQuery, SparqlError> {
    parse_query_with(text, &ParseOptions::default())
}

pub fn parse_query_with(text: &str, opts: &ParseOptions) -> Result<ParsedQuery, SparqlError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        src: text,
        tokens,
        i: 0,
        declared: PrefixMap::new(),
        defaults: &opts.default_prefixes,
        lenient: opts.lenient,
        warnings: Vec::new(),
        anon: 0,
    };
    p.query()
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    i: usize,
    declared: PrefixMap,
    defaults: &'a PrefixMap,
    lenient: bool,
    warnings: Vec<String>,
    anon: usize,
}

fn kw(tok: &Tok, word: &str) -> bool {
    matches!(tok, Tok::Word(w) if w.eq_ignore_ascii_case(word))
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.i).map(|t| &t.tok)
    }

    fn at_kw(&self, word: &str) -> bool {
        self.peek().is_some_and(|t| kw(t, word))
    }

    fn at_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn pos(&self) -> (usize, usize) {
        match self.tokens.get(self.i).or(self.tokens.last()) {
            Some(t) if self.i < self.tokens.len() => (t.line, t.column),
            Some(t) => (t.line, t.column + (t.end - t.start)),
            None => (1, 1),
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SparqlError> {
        let (line, column) = self.pos();
        Err(SparqlError::Syntax {
            line,
            column,
            message: message.into(),
        })
    }

    fn describe_next(&self) -> String {
        match self.tokens.get(self.i) {
            Some(t) => format!("'{}'", &self.src[t.start..t.end]),
            None => "end of query".to_owned(),
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), SparqlError> {
        if self.at_punct(c) {
            self.i += 1;
            Ok(())
        } else {
            self.err(format!("expected '{c}', found {}", self.describe_next()))
        }
    }

    /// Report an unsupported construct. In lenient mode `skip` consumes it and
    /// parsing continues.
    fn unsupported(
        &mut self,
        feature: &str,
        skip: impl FnOnce(&mut Self) -> Result<(), SparqlError>,
    ) -> Result<(), SparqlError> {
        let (line, column) = self.pos();
        if !self.lenient {
            return Err(SparqlError::Unsupported {
                feature: feature.to_owned(),
                line,
                column,
            });
        }
        self.warnings
            .push(format!("{feature} at line {line}, column {column} ignored"));
        skip(self)
    }

    /// Skip one balanced bracketed block starting at the current token.
    fn skip_balanced(&mut self) -> Result<(), SparqlError> {
        let open = match self.peek() {
            Some(Tok::Punct(c @ ('{' | '(' | '['))) => *c,
            _ => return self.err(format!("expected a bracket, found {}", self.describe_next())),
        };
        let close = match open {
            '{' => '}',
            '(' => ')',
            _ => ']',
        };
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            if *t == Tok::Punct(open) {
                depth += 1;
            } else if *t == Tok::Punct(close) {
                depth -= 1;
                if depth == 0 {
                    self.i += 1;
                    return Ok(());
                }
            }
            self.i += 1;
        }
        self.err(format!("unbalanced '{open}'"))
    }

    /// Skip tokens up to (not including) the next token at bracket depth 0
    /// satisfying `stop`.
    fn skip_until(&mut self, stop: impl Fn(&Tok) -> bool) {
        let mut depth = 0i64;
        while let Some(t) = self.peek() {
            if depth == 0 && stop(t) {
                return;
            }
            match t {
                Tok::Punct('{' | '(' | '[') => depth += 1,
                Tok::Punct('}' | ')' | ']') => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                }
                _ => {}
            }
            self.i += 1;
        }
    }

    fn query(&mut self) -> Result<ParsedQuery, SparqlError> {
        self.prologue()?;
        let (form, distinct, projection) = if self.at_kw("SELECT") {
            self.i += 1;
            let (distinct, projection) = self.select_clause()?;
            (QueryForm::Select, distinct, projection)
        } else if self.at_kw("ASK") {
            self.i += 1;
            (QueryForm::Ask, false, Projection::All)
        } else if self.at_kw("CONSTRUCT") || self.at_kw("DESCRIBE") {
            let feature = if self.at_kw("CONSTRUCT") {
                "CONSTRUCT query form"
            } else {
                "DESCRIBE query form"
            };
            self.unsupported(feature, |p| {
                p.i += 1;
                if p.at_punct('{') {
                    p.skip_balanced()?;
                }
                p.skip_until(|t| kw(t, "WHERE") || *t == Tok::Punct('{') || kw(t, "FROM"));
                Ok(())
            })?;
            (QueryForm::Select, false, Projection::All)
        } else {
            return self.err(format!(
                "expected SELECT or ASK, found {}",
                self.describe_next()
            ));
        };
        while self.at_kw("FROM") {
            self.unsupported("FROM dataset clause", |p| {
                p.i += 1;
                if p.at_kw("NAMED") {
                    p.i += 1;
                }
                p.i += 1;
                Ok(())
            })?;
        }
        if self.at_kw("WHERE") {
            self.i += 1;
        }
        if !self.at_punct('{') {
            return self.err(format!("expected '{{', found {}", self.describe_next()));
        }
        let pattern = self.group()?;
        let mut q = ParsedQuery {
            form,
            prefixes: self.declared.clone(),
            projection,
            distinct,
            pattern,
            order_by: None,
            limit: None,
            offset: None,
            referenced_iris: Default::default(),
            referenced_variables: Default::default(),
            warnings: Vec::new(),
        };
        self.solution_modifiers(&mut q)?;
        if self.peek().is_some() {
            if self.at_kw("VALUES") {
                self.unsupported("VALUES", |p| {
                    p.i = p.tokens.len();
                    Ok(())
                })?;
            } else {
                return self.err(format!("unexpected {} after query", self.describe_next()));
            }
        }
        q.warnings = std::mem::take(&mut self.warnings);
        let q = q.finish();
        if q.form == QueryForm::Select && q.projected_variables().is_empty() {
            return Err(SparqlError::Syntax {
                line: 1,
                column: 1,
                message: "SELECT query projects no variables".to_owned(),
            });
        }
        Ok(q)
    }

    fn prologue(&mut self) -> Result<(), SparqlError> {
        loop {
            if self.at_kw("PREFIX") {
                self.i += 1;
                let Some(Tok::PName(prefix, local)) = self.peek().cloned() else {
                    return self.err(format!(
                        "expected prefix name, found {}",
                        self.describe_next()
                    ));
                };
                if !local.is_empty() {
                    return self.err("prefix declaration must end with ':'");
                }
                self.i += 1;
                let Some(Tok::Iri(iri)) = self.peek().cloned() else {
                    return self.err(format!("expected IRI, found {}", self.describe_next()));
                };
                self.i += 1;
                self.declared.insert(prefix, iri);
            } else if self.at_kw("BASE") {
                self.unsupported("BASE declaration", |p| {
                    p.i += 2;
                    Ok(())
                })?;
            } else {
                return Ok(());
            }
        }
    }

    fn select_clause(&mut self) -> Result<(bool, Projection), SparqlError> {
        let mut distinct = false;
        if self.at_kw("DISTINCT") || self.at_kw("REDUCED") {
            distinct = self.at_kw("DISTINCT");
            self.i += 1;
        }
        if self.at_punct('*') {
            self.i += 1;
            return Ok((distinct, Projection::All));
        }
        let mut vars = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Var(v)) => {
                    let v = v.clone();
                    self.i += 1;
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
                Some(Tok::Punct('(')) => {
                    self.unsupported("expression or aggregate in SELECT", |p| p.skip_balanced())?;
                }
                _ => break,
            }
        }
        if vars.is_empty() {
            if self.warnings.is_empty() {
                return self.err(format!(
                    "expected variables or '*' after SELECT, found {}",
                    self.describe_next()
                ));
            }
            return Ok((distinct, Projection::All));
        }
        Ok((distinct, Projection::Vars(vars)))
    }

    fn solution_modifiers(&mut self, q: &mut ParsedQuery) -> Result<(), SparqlError> {
        if self.at_kw("GROUP") || self.at_kw("HAVING") {
            self.unsupported("GROUP BY / HAVING", |p| {
                p.skip_until(|t| {
                    kw(t, "ORDER") || kw(t, "LIMIT") || kw(t, "OFFSET") || kw(t, "VALUES")
                });
                Ok(())
            })?;
        }
        if self.at_kw("ORDER") {
            self.i += 1;
            if !self.at_kw("BY") {
                return self.err("expected BY after ORDER");
            }
            self.i += 1;
            let start = self.i;
            self.skip_until(|t| kw(t, "LIMIT") || kw(t, "OFFSET") || kw(t, "VALUES"));
            if self.i == start {
                return self.err("empty ORDER BY");
            }
            let (a, b) = (self.tokens[start].start, self.tokens[self.i - 1].end);
            q.order_by = Some(self.src[a..b].to_owned());
        }
        for _ in 0..2 {
            if self.at_kw("LIMIT") {
                self.i += 1;
                q.limit = Some(self.integer()?);
            } else if self.at_kw("OFFSET") {
                self.i += 1;
                q.offset = Some(self.integer()?);
            }
        }
        Ok(())
    }

    fn integer(&mut self) -> Result<usize, SparqlError> {
        match self.peek() {
            Some(Tok::Number(n)) => match n.parse() {
                Ok(v) => {
                    self.i += 1;
                    Ok(v)
                }
                Err(_) => self.err(format!("expected a non-negative integer, found {n}")),
            },
            _ => self.err(format!("expected an integer, found {}", self.describe_next())),
        }
    }

    fn group(&mut self) -> Result<GroupPattern, SparqlError> {
        self.expect_punct('{')?;
        if self.at_kw("SELECT") {
            self.i -= 1;
            self.unsupported("subquery", |p| p.skip_balanced())?;
            return Ok(GroupPattern::default());
        }
        let mut elements = Vec::new();
        let mut triples: Vec<TriplePattern> = Vec::new();
        loop {
            let Some(tok) = self.peek().cloned() else {
                return self.err("expected '}', found end of query");
            };
            let is_other = matches!(tok, Tok::Punct('{') | Tok::Punct('}'))
                || ["OPTIONAL", "FILTER", "MINUS", "BIND", "VALUES", "SERVICE", "GRAPH"]
                    .iter()
                    .any(|w| kw(&tok, w));
            if is_other && !triples.is_empty() {
                elements.push(GroupElement::Triples(std::mem::take(&mut triples)));
            }
            match tok {
                Tok::Punct('}') => {
                    self.i += 1;
                    return Ok(GroupPattern { elements });
                }
                Tok::Punct('.') => self.i += 1,
                Tok::Punct('{') => {
                    let first = self.group()?;
                    let mut alts = vec![first];
                    while self.at_kw("UNION") {
                        self.i += 1;
                        alts.push(self.group()?);
                    }
                    if alts.len() == 1 {
                        elements.push(GroupElement::Group(alts.pop().unwrap()));
                    } else {
                        elements.push(GroupElement::Union(alts));
                    }
                }
                ref t if kw(t, "OPTIONAL") => {
                    self.i += 1;
                    let g = self.group()?;
                    elements.push(GroupElement::Optional(g));
                }
                ref t if kw(t, "FILTER") => {
                    self.i += 1;
                    elements.push(GroupElement::Filter(self.constraint()?));
                }
                ref t if kw(t, "MINUS") => self.unsupported("MINUS", |p| {
                    p.i += 1;
                    p.skip_balanced()
                })?,
                ref t if kw(t, "BIND") => self.unsupported("BIND", |p| {
                    p.i += 1;
                    p.skip_balanced()
                })?,
                ref t if kw(t, "VALUES") => self.unsupported("VALUES", |p| {
                    p.i += 1;
                    p.skip_until(|t| *t == Tok::Punct('{'));
                    p.skip_balanced()
                })?,
                ref t if kw(t, "SERVICE") || kw(t, "GRAPH") => {
                    let feature = if kw(t, "SERVICE") { "SERVICE" } else { "GRAPH" };
                    self.unsupported(feature, |p| {
                        p.i += 1;
                        p.skip_until(|t| *t == Tok::Punct('{'));
                        p.skip_balanced()
                    })?
                }
                _ => self.triples_same_subject(&mut triples)?,
            }
        }
    }

    /// FILTER argument: a bracketted expression or a function call,
    /// returned as source text.
    fn constraint(&mut self) -> Result<String, SparqlError> {
        let start = self.i;
        match self.peek() {
            Some(Tok::Punct('(')) => self.skip_balanced()?,
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("NOT") || w.eq_ignore_ascii_case("EXISTS") => {
                if w.eq_ignore_ascii_case("NOT") {
                    self.i += 1;
                }
                if !self.at_kw("EXISTS") {
                    return self.err("expected EXISTS");
                }
                self.i += 1;
                if !self.at_punct('{') {
                    return self.err("expected '{' after EXISTS");
                }
                self.skip_balanced()?;
            }
            Some(Tok::Word(_)) | Some(Tok::PName(..)) | Some(Tok::Iri(_)) => {
                self.i += 1;
                if !self.at_punct('(') {
                    return self.err(format!(
                        "expected '(' in FILTER call, found {}",
                        self.describe_next()
                    ));
                }
                self.skip_balanced()?;
            }
            _ => {
                return self.err(format!(
                    "expected a constraint after FILTER, found {}",
                    self.describe_next()
                ))
            }
        }
        let (a, b) = (self.tokens[start].start, self.tokens[self.i - 1].end);
        Ok(self.src[a..b].to_owned())
    }

    fn fresh_anon(&mut self) -> TermPattern {
        let v = TermPattern::Var(format!("_:anon{}", self.anon));
        self.anon += 1;
        v
    }

    fn triples_same_subject(&mut self, out: &mut Vec<TriplePattern>) -> Result<(), SparqlError> {
        let subject = if self.at_punct('[') {
            let node = self.blank_property_list(out)?;
            if self.at_punct('.') || self.at_punct('}') {
                return Ok(());
            }
            node
        } else if self.at_punct('(') {
            self.unsupported("RDF collection syntax", |p| {
                p.skip_until(|t| *t == Tok::Punct('.') || *t == Tok::Punct('}'));
                Ok(())
            })?;
            return Ok(());
        } else {
            self.var_or_term()?
        };
        self.property_list(subject, out)
    }

    fn blank_property_list(&mut self, out: &mut Vec<TriplePattern>) -> Result<TermPattern, SparqlError> {
        self.expect_punct('[')?;
        let node = self.fresh_anon();
        if self.at_punct(']') {
            self.i += 1;
            return Ok(node);
        }
        self.property_list(node.clone(), out)?;
        self.expect_punct(']')?;
        Ok(node)
    }

    fn property_list(&mut self, subject: TermPattern, out: &mut Vec<TriplePattern>) -> Result<(), SparqlError> {
        loop {
            let Some(predicate) = self.verb()? else {
                // Path salvaged away: drop the rest of this subject's list.
                self.skip_until(|t| *t == Tok::Punct('.') || *t == Tok::Punct(']'));
                return Ok(());
            };
            loop {
                let object = self.object(out)?;
                out.push(TriplePattern {
                    subject: subject.clone(),
                    predicate: predicate.clone(),
                    object,
                });
                if self.at_punct(',') {
                    self.i += 1;
                } else {
                    break;
                }
            }
            if !self.at_punct(';') {
                return Ok(());
            }
            while self.at_punct(';') {
                self.i += 1;
            }
            if self.at_punct('.') || self.at_punct('}') || self.at_punct(']') {
                return Ok(());
            }
        }
    }

    fn is_path_token(tok: Option<&Tok>) -> bool {
        matches!(
            tok,
            Some(Tok::Punct('/' | '|' | '*' | '+' | '?' | '^'))
        )
    }

    /// Predicate position. `Ok(None)` when a property path was dropped by a
    /// lenient parse.
    fn verb(&mut self) -> Result<Option<TermPattern>, SparqlError> {
        if matches!(self.peek(), Some(Tok::Punct('^' | '!' | '('))) {
            self.unsupported("property path", |_| Ok(()))?;
            return Ok(None);
        }
        let v = match self.peek() {
            Some(t) if kw(t, "a") => {
                self.i += 1;
                TermPattern::Term(Term::iri(vocab::RDF_TYPE))
            }
            Some(Tok::Var(_)) | Some(Tok::Iri(_)) | Some(Tok::PName(..)) => self.var_or_term()?,
            _ => {
                return self.err(format!(
                    "expected a predicate, found {}",
                    self.describe_next()
                ))
            }
        };
        if Self::is_path_token(self.peek()) {
            self.unsupported("property path", |_| Ok(()))?;
            return Ok(None);
        }
        Ok(Some(v))
    }

    fn object(&mut self, out: &mut Vec<TriplePattern>) -> Result<TermPattern, SparqlError> {
        if self.at_punct('[') {
            return self.blank_property_list(out);
        }
        if self.at_punct('(') {
            self.unsupported("RDF collection syntax", |p| p.skip_balanced())?;
            return Ok(self.fresh_anon());
        }
        self.var_or_term()
    }

    fn expand(&self, prefix: &str, local: &str) -> Result<String, SparqlError> {
        match self.declared.get(prefix).or_else(|| self.defaults.get(prefix)) {
            Some(ns) => Ok(format!("{ns}{local}")),
            None => self.err(format!("undeclared prefix '{prefix}:'")),
        }
    }

    fn iri(&mut self) -> Result<String, SparqlError> {
        match self.peek().cloned() {
            Some(Tok::Iri(i)) => {
                self.i += 1;
                Ok(i)
            }
            Some(Tok::PName(p, l)) => {
                let iri = self.expand(&p, &l)?;
                self.i += 1;
                Ok(iri)
            }
            _ => self.err(format!("expected an IRI, found {}", self.describe_next())),
        }
    }

    fn var_or_term(&mut self) -> Result<TermPattern, SparqlError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of query");
        };
        let term = match tok {
            Tok::Var(v) => {
                self.i += 1;
                return Ok(TermPattern::Var(v));
            }
            Tok::Blank(b) => {
                self.i += 1;
                return Ok(TermPattern::Var(format!("_:{b}")));
            }
            Tok::Iri(_) | Tok::PName(..) => Term::iri(self.iri()?),
            Tok::Str(s) => {
                self.i += 1;
                match self.peek().cloned() {
                    Some(Tok::LangTag(l)) => {
                        self.i += 1;
                        Term::lang_string(s, l)
                    }
                    Some(Tok::DoubleCaret) => {
                        self.i += 1;
                        Term::typed(s, self.iri()?)
                    }
                    _ => Term::string(s),
                }
            }
            Tok::Number(n) => {
                self.i += 1;
                let dt = if n.contains(['e', 'E']) {
                    vocab::XSD_DOUBLE
                } else if n.contains('.') {
                    vocab::XSD_DECIMAL
                } else {
                    vocab::XSD_INTEGER
                };
                Term::typed(n, dt)
            }
            ref t if kw(t, "true") || kw(t, "false") => {
                self.i += 1;
                Term::typed(
                    if kw(t, "true") { "true" } else { "false" },
                    vocab::XSD_BOOLEAN,
                )
            }
            _ => {
                return self.err(format!(
                    "expected a variable or term, found {}",
                    self.describe_next()
                ))
            }
        };
        Ok(TermPattern::Term(term))
    }
}
