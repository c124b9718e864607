//! Turtle reader and a compact Turtle writer.
//!
//! The reader covers the full Turtle 1.1 grammar used by ontology files:
//! `@prefix`/`@base` and their SPARQL-style forms, prefixed names, `a`,
//! predicate/object lists, blank node property lists, collections, all four
//! string quoting styles, language tags, datatypes, numbers and booleans.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{
    escape_string, sanitize_blank_label, vocab, Graph, ParsedDocument, PrefixMap, SyntaxError,
    Term, Triple,
};

pub fn parse_turtle(input: &str, base: Option<&str>) -> Result<ParsedDocument, SyntaxError> {
    let mut parser = Parser::new(input, base);
    parser.parse_document()?;
    Ok(ParsedDocument {
        graph: parser.graph,
        prefixes: parser.prefixes,
    })
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    base: Option<String>,
    prefixes: PrefixMap,
    graph: Graph,
    fresh: usize,
    _src: std::marker::PhantomData<&'a str>,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str, base: Option<&str>) -> Self {
        Self {
            chars: input.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            base: base.map(str::to_owned),
            prefixes: PrefixMap::new(),
            graph: Graph::new(),
            fresh: 0,
            _src: std::marker::PhantomData,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            line: self.line,
            column: self.col,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, want: char) -> Result<(), SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => self.err(format!("expected '{want}', found '{c}'")),
            None => self.err(format!("expected '{want}', found end of input")),
        }
    }

    fn starts_with_keyword(&self, kw: &str, case_insensitive: bool) -> bool {
        let n = kw.chars().count();
        let slice: String = self.chars.iter().skip(self.pos).take(n).collect();
        let matches = if case_insensitive {
            slice.eq_ignore_ascii_case(kw)
        } else {
            slice == kw
        };
        matches
            && self
                .chars
                .get(self.pos + n)
                .is_none_or(|c| c.is_whitespace() || *c == '<' || *c == ':')
    }

    fn advance(&mut self, n: usize) {
        for _ in 0..n {
            self.bump();
        }
    }

    fn parse_document(&mut self) -> Result<(), SyntaxError> {
        loop {
            self.skip_ws();
            if self.peek().is_none() {
                return Ok(());
            }
            if self.starts_with_keyword("@prefix", false) {
                self.advance(7);
                self.parse_prefix_decl()?;
                self.expect('.')?;
            } else if self.starts_with_keyword("@base", false) {
                self.advance(5);
                self.parse_base_decl()?;
                self.expect('.')?;
            } else if self.starts_with_keyword("PREFIX", true) {
                self.advance(6);
                self.parse_prefix_decl()?;
            } else if self.starts_with_keyword("BASE", true) {
                self.advance(4);
                self.parse_base_decl()?;
            } else {
                self.parse_triples()?;
                self.expect('.')?;
            }
        }
    }

    fn parse_prefix_decl(&mut self) -> Result<(), SyntaxError> {
        self.skip_ws();
        let mut label = String::new();
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if !(c.is_alphanumeric() || c == '_' || c == '-' || c == '.') {
                return self.err(format!("invalid character '{c}' in prefix label"));
            }
            label.push(c);
            self.bump();
        }
        self.expect(':')?;
        self.skip_ws();
        let iri = self.parse_iriref()?;
        self.prefixes.insert(label, iri);
        Ok(())
    }

    fn parse_base_decl(&mut self) -> Result<(), SyntaxError> {
        self.skip_ws();
        let iri = self.parse_iriref()?;
        self.base = Some(iri);
        Ok(())
    }

    fn parse_triples(&mut self) -> Result<(), SyntaxError> {
        self.skip_ws();
        if self.peek() == Some('[') {
            let subject = self.parse_blank_node_property_list()?;
            self.skip_ws();
            if self.peek() != Some('.') {
                self.parse_predicate_object_list(&subject)?;
            }
            return Ok(());
        }
        let subject = self.parse_subject()?;
        self.parse_predicate_object_list(&subject)
    }

    fn parse_subject(&mut self) -> Result<Term, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some('<') => Ok(Term::iri(self.parse_iriref()?)),
            Some('_') if self.peek_at(1) == Some(':') => self.parse_blank_label(),
            Some('(') => self.parse_collection(),
            Some(c) if c == ':' || c.is_alphabetic() => self.parse_prefixed_name().map(Term::iri),
            Some(c) => self.err(format!("unexpected '{c}' at start of subject")),
            None => self.err("unexpected end of input, expected subject"),
        }
    }

    fn parse_predicate_object_list(&mut self, subject: &Term) -> Result<(), SyntaxError> {
        loop {
            self.skip_ws();
            let predicate = self.parse_verb()?;
            loop {
                let object = self.parse_object()?;
                self.graph
                    .insert(Triple::new(subject.clone(), predicate.clone(), object));
                self.skip_ws();
                if self.peek() == Some(',') {
                    self.bump();
                } else {
                    break;
                }
            }
            self.skip_ws();
            if self.peek() != Some(';') {
                return Ok(());
            }
            while self.peek() == Some(';') {
                self.bump();
                self.skip_ws();
            }
            // A trailing ';' may close the list.
            if matches!(self.peek(), Some('.') | Some(']') | None) {
                return Ok(());
            }
        }
    }

    fn parse_verb(&mut self) -> Result<Term, SyntaxError> {
        self.skip_ws();
        if self.peek() == Some('a')
            && self
                .peek_at(1)
                .is_none_or(|c| c.is_whitespace() || c == '<' || c == '[' || c == '(' || c == '"')
        {
            self.bump();
            return Ok(Term::iri(vocab::RDF_TYPE));
        }
        match self.peek() {
            Some('<') => Ok(Term::iri(self.parse_iriref()?)),
            Some(c) if c == ':' || c.is_alphabetic() => self.parse_prefixed_name().map(Term::iri),
            Some(c) => self.err(format!("unexpected '{c}', expected predicate")),
            None => self.err("unexpected end of input, expected predicate"),
        }
    }

    fn parse_object(&mut self) -> Result<Term, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some('<') => Ok(Term::iri(self.parse_iriref()?)),
            Some('_') if self.peek_at(1) == Some(':') => self.parse_blank_label(),
            Some('[') => self.parse_blank_node_property_list(),
            Some('(') => self.parse_collection(),
            Some('"') | Some('\'') => self.parse_rdf_literal(),
            Some(c) if c.is_ascii_digit() || c == '+' || c == '-' || c == '.' => {
                self.parse_numeric()
            }
            Some(_) if self.starts_with_keyword("true", false) => {
                self.advance(4);
                Ok(Term::typed("true", vocab::XSD_BOOLEAN))
            }
            Some(_) if self.starts_with_keyword("false", false) => {
                self.advance(5);
                Ok(Term::typed("false", vocab::XSD_BOOLEAN))
            }
            Some(c) if c == ':' || c.is_alphabetic() => self.parse_prefixed_name().map(Term::iri),
            Some(c) => self.err(format!("unexpected '{c}', expected object")),
            None => self.err("unexpected end of input, expected object"),
        }
    }

    fn fresh_blank(&mut self) -> Term {
        // '.' cannot start a Turtle blank node label, so generated ids never
        // collide with labels written in the document.
        let t = Term::blank(format!(".g{}", self.fresh));
        self.fresh += 1;
        t
    }

    fn parse_blank_node_property_list(&mut self) -> Result<Term, SyntaxError> {
        self.expect('[')?;
        let node = self.fresh_blank();
        self.skip_ws();
        if self.peek() == Some(']') {
            self.bump();
            return Ok(node);
        }
        self.parse_predicate_object_list(&node)?;
        self.expect(']')?;
        Ok(node)
    }

    fn parse_collection(&mut self) -> Result<Term, SyntaxError> {
        self.expect('(')?;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(')') => {
                    self.bump();
                    break;
                }
                None => return self.err("unterminated collection"),
                _ => items.push(self.parse_object()?),
            }
        }
        let mut head = Term::iri(vocab::RDF_NIL);
        for item in items.into_iter().rev() {
            let cell = self.fresh_blank();
            self.graph.insert(Triple::new(
                cell.clone(),
                Term::iri(vocab::RDF_FIRST),
                item,
            ));
            self.graph
                .insert(Triple::new(cell.clone(), Term::iri(vocab::RDF_REST), head));
            head = cell;
        }
        Ok(head)
    }

    fn parse_blank_label(&mut self) -> Result<Term, SyntaxError> {
        self.advance(2);
        let mut label = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || c == '-' || (c == '.' && self.local_continues()) {
                label.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if label.is_empty() {
            return self.err("empty blank node label");
        }
        Ok(Term::blank(label))
    }

    /// A '.' inside a name only counts when another name character follows.
    fn local_continues(&self) -> bool {
        self.peek_at(1)
            .is_some_and(|n| n.is_alphanumeric() || n == '_' || n == '-' || n == ':' || n == '%')
    }

    fn parse_iriref(&mut self) -> Result<String, SyntaxError> {
        self.skip_ws();
        if self.peek() != Some('<') {
            return self.err("expected '<' to start an IRI");
        }
        self.bump();
        let mut iri = String::new();
        loop {
            match self.bump() {
                Some('>') => break,
                Some('\\') => iri.push(self.parse_unicode_escape()?),
                Some(c) if c == '\n' || c == ' ' || c == '<' || c == '"' => {
                    return self.err(format!("invalid character {c:?} in IRI"));
                }
                Some(c) => iri.push(c),
                None => return self.err("unterminated IRI"),
            }
        }
        Ok(self.resolve(&iri))
    }

    fn resolve(&self, iri: &str) -> String {
        match &self.base {
            Some(base) => match oxiri::Iri::parse(base.as_str()) {
                Ok(base) => base
                    .resolve(iri)
                    .map(|i| i.into_inner())
                    .unwrap_or_else(|_| iri.to_owned()),
                Err(_) => iri.to_owned(),
            },
            None => iri.to_owned(),
        }
    }

    fn parse_unicode_escape(&mut self) -> Result<char, SyntaxError> {
        let len = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return self.err("invalid escape in IRI"),
        };
        self.read_hex(len)
    }

    fn read_hex(&mut self, len: usize) -> Result<char, SyntaxError> {
        let mut code = 0u32;
        for _ in 0..len {
            let Some(d) = self.bump().and_then(|c| c.to_digit(16)) else {
                return self.err("invalid hex digit in escape");
            };
            code = code * 16 + d;
        }
        char::from_u32(code).map_or_else(|| self.err("invalid code point"), Ok)
    }

    fn parse_prefixed_name(&mut self) -> Result<String, SyntaxError> {
        let (line, col) = (self.line, self.col);
        let mut prefix = String::new();
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if c.is_alphanumeric() || c == '_' || c == '-' || (c == '.' && self.local_continues()) {
                prefix.push(c);
                self.bump();
            } else {
                return self.err(format!("unexpected '{c}' in prefixed name"));
            }
        }
        if self.peek() != Some(':') {
            return self.err("expected ':' in prefixed name");
        }
        self.bump();
        let mut local = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || c == '-' || c == ':' || (c == '.' && self.local_continues()) {
                local.push(c);
                self.bump();
            } else if c == '%' {
                local.push(c);
                self.bump();
                for _ in 0..2 {
                    match self.bump() {
                        Some(h) if h.is_ascii_hexdigit() => local.push(h),
                        _ => return self.err("invalid percent escape"),
                    }
                }
            } else if c == '\\' {
                self.bump();
                match self.bump() {
                    Some(e) if "_~.-!$&'()*+,;=/?#@%".contains(e) => local.push(e),
                    _ => return self.err("invalid local name escape"),
                }
            } else {
                break;
            }
        }
        match self.prefixes.get(&prefix) {
            Some(ns) => Ok(format!("{ns}{local}")),
            None => Err(SyntaxError {
                line,
                column: col,
                message: format!("undeclared prefix '{prefix}:'"),
            }),
        }
    }

    fn parse_rdf_literal(&mut self) -> Result<Term, SyntaxError> {
        let value = self.parse_string()?;
        match self.peek() {
            Some('@') => {
                self.bump();
                let mut lang = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        lang.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                if lang.is_empty() {
                    return self.err("empty language tag");
                }
                Ok(Term::lang_string(value, lang.to_ascii_lowercase()))
            }
            Some('^') if self.peek_at(1) == Some('^') => {
                self.advance(2);
                let dt = match self.peek() {
                    Some('<') => self.parse_iriref()?,
                    _ => self.parse_prefixed_name()?,
                };
                Ok(Term::typed(value, dt))
            }
            _ => Ok(Term::string(value)),
        }
    }

    fn parse_string(&mut self) -> Result<String, SyntaxError> {
        let quote = self.bump().expect("caller checked quote");
        let long = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if long {
            self.advance(2);
        } else if self.peek() == Some(quote) {
            self.bump();
            return Ok(String::new());
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return self.err("unterminated string literal");
            };
            if c == quote {
                if !long {
                    return Ok(out);
                }
                if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
                    // Quotes directly before the closing delimiter belong to the content.
                    while self.peek_at(2) == Some(quote) {
                        out.push(quote);
                        self.bump();
                    }
                    self.advance(2);
                    return Ok(out);
                }
                out.push(c);
            } else if c == '\\' {
                let e = match self.bump() {
                    Some('t') => '\t',
                    Some('b') => '\u{8}',
                    Some('n') => '\n',
                    Some('r') => '\r',
                    Some('f') => '\u{c}',
                    Some('"') => '"',
                    Some('\'') => '\'',
                    Some('\\') => '\\',
                    Some('u') => self.read_hex(4)?,
                    Some('U') => self.read_hex(8)?,
                    _ => return self.err("invalid string escape"),
                };
                out.push(e);
            } else if !long && (c == '\n' || c == '\r') {
                return self.err("line break in short string literal");
            } else {
                out.push(c);
            }
        }
    }

    fn parse_numeric(&mut self) -> Result<Term, SyntaxError> {
        let mut text = String::new();
        if let Some(c @ ('+' | '-')) = self.peek() {
            text.push(c);
            self.bump();
        }
        let mut saw_digit = false;
        let mut saw_dot = false;
        let mut saw_exp = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                saw_digit = true;
                text.push(c);
                self.bump();
            } else if c == '.' && !saw_dot && !saw_exp && self.peek_at(1).is_some_and(|n| n.is_ascii_digit()) {
                saw_dot = true;
                text.push(c);
                self.bump();
            } else if (c == 'e' || c == 'E') && !saw_exp && saw_digit {
                saw_exp = true;
                text.push(c);
                self.bump();
                if let Some(s @ ('+' | '-')) = self.peek() {
                    text.push(s);
                    self.bump();
                }
            } else {
                break;
            }
        }
        if !saw_digit {
            return self.err(format!("malformed number '{text}'"));
        }
        let dt = if saw_exp {
            vocab::XSD_DOUBLE
        } else if saw_dot {
            vocab::XSD_DECIMAL
        } else {
            vocab::XSD_INTEGER
        };
        Ok(Term::typed(text, dt))
    }
}

/// Serialize a graph as Turtle, using `prefixes` for compaction.
///
/// Blank nodes referenced exactly once are written inline (`[ ... ]`), and
/// well-formed RDF lists as `( ... )`. Output is deterministic.
pub fn write_turtle(graph: &Graph, prefixes: &PrefixMap) -> String {
    let mut by_subject: BTreeMap<&Term, Vec<&Triple>> = BTreeMap::new();
    let mut object_refs: BTreeMap<&Term, usize> = BTreeMap::new();
    for t in graph {
        by_subject.entry(&t.subject).or_default().push(t);
        if t.object.is_blank() {
            *object_refs.entry(&t.object).or_default() += 1;
        }
    }
    let inlinable: BTreeSet<&Term> = object_refs
        .iter()
        .filter(|(_, n)| **n == 1)
        .map(|(t, _)| *t)
        .collect();

    let writer = Writer {
        prefixes,
        by_subject: &by_subject,
        inlinable: &inlinable,
    };

    let mut out = String::new();
    for (label, ns) in prefixes {
        let _ = writeln!(out, "@prefix {label}: <{ns}> .");
    }
    if !prefixes.is_empty() {
        out.push('\n');
    }
    for (subject, triples) in &by_subject {
        if inlinable.contains(subject) {
            continue;
        }
        let mut visiting = BTreeSet::new();
        let subject_text = if subject.is_blank() {
            format!("_:{}", writer.blank_label(subject))
        } else {
            writer.term(subject, &mut visiting, 0)
        };
        let _ = write!(out, "{subject_text}");
        writer.write_predicates(&mut out, triples, &mut visiting, 1);
        out.push_str(" .\n");
    }
    out
}

struct Writer<'a> {
    prefixes: &'a PrefixMap,
    by_subject: &'a BTreeMap<&'a Term, Vec<&'a Triple>>,
    inlinable: &'a BTreeSet<&'a Term>,
}

impl<'a> Writer<'a> {
    fn blank_label(&self, t: &Term) -> String {
        match t {
            Term::Blank { id } => sanitize_blank_label(id),
            _ => unreachable!(),
        }
    }

    fn write_predicates(
        &self,
        out: &mut String,
        triples: &[&'a Triple],
        visiting: &mut BTreeSet<&'a Term>,
        depth: usize,
    ) {
        let indent = "    ".repeat(depth);
        let mut grouped: Vec<(&Term, Vec<&Term>)> = Vec::new();
        for t in triples {
            match grouped.last_mut() {
                Some((p, objs)) if *p == &t.predicate => objs.push(&t.object),
                _ => grouped.push((&t.predicate, vec![&t.object])),
            }
        }
        for (i, (p, objs)) in grouped.iter().enumerate() {
            if i > 0 {
                out.push_str(" ;");
            }
            let pred = if p.as_iri() == Some(vocab::RDF_TYPE) {
                "a".to_owned()
            } else {
                self.term(p, visiting, depth)
            };
            let objs: Vec<String> = objs.iter().map(|o| self.term(o, visiting, depth)).collect();
            let _ = write!(out, "\n{indent}{pred} {}", objs.join(", "));
        }
    }

    fn term(&self, t: &'a Term, visiting: &mut BTreeSet<&'a Term>, depth: usize) -> String {
        match t {
            Term::Iri { value } => self.compact(value),
            Term::Blank { .. } => {
                if self.inlinable.contains(t) && !visiting.contains(t) {
                    visiting.insert(t);
                    let s = self
                        .list_items(t)
                        .map(|items| {
                            let parts: Vec<String> =
                                items.into_iter().map(|i| self.term(i, visiting, depth)).collect();
                            format!("( {} )", parts.join(" "))
                        })
                        .unwrap_or_else(|| match self.by_subject.get(t) {
                            Some(triples) => {
                                let mut inner = String::from("[");
                                self.write_predicates(&mut inner, triples, visiting, depth + 1);
                                let _ = write!(inner, "\n{}]", "    ".repeat(depth));
                                inner
                            }
                            None => "[]".to_owned(),
                        });
                    visiting.remove(t);
                    s
                } else {
                    format!("_:{}", self.blank_label(t))
                }
            }
            Term::Literal { value, datatype, lang } => {
                let body = format!("\"{}\"", escape_string(value));
                if let Some(lang) = lang {
                    format!("{body}@{lang}")
                } else if datatype == vocab::XSD_STRING {
                    body
                } else {
                    format!("{body}^^{}", self.compact(datatype))
                }
            }
        }
    }

    /// Items of a well-formed list starting at `head`, if every cell is an
    /// inlinable blank node carrying exactly `rdf:first` and `rdf:rest`.
    fn list_items(&self, head: &'a Term) -> Option<Vec<&'a Term>> {
        let mut items = Vec::new();
        let mut cell = head;
        let mut seen = BTreeSet::new();
        loop {
            if cell.as_iri() == Some(vocab::RDF_NIL) {
                return Some(items);
            }
            if !cell.is_blank() || !seen.insert(cell) {
                return None;
            }
            if cell != head && !self.inlinable.contains(cell) {
                return None;
            }
            let triples = self.by_subject.get(cell)?;
            if triples.len() != 2 {
                return None;
            }
            let first = triples
                .iter()
                .find(|t| t.predicate.as_iri() == Some(vocab::RDF_FIRST))?;
            let rest = triples
                .iter()
                .find(|t| t.predicate.as_iri() == Some(vocab::RDF_REST))?;
            items.push(&first.object);
            cell = &rest.object;
        }
    }

    fn compact(&self, iri: &str) -> String {
        let best = self
            .prefixes
            .iter()
            .filter(|(_, ns)| iri.starts_with(ns.as_str()))
            .max_by_key(|(_, ns)| ns.len());
        if let Some((label, ns)) = best {
            let local = &iri[ns.len()..];
            let simple = local
                .chars()
                .all(|c| c.is_alphanumeric() || c == '_' || c == '-')
                && !local.starts_with('-');
            if simple {
                return format!("{label}:{local}");
            }
        }
        format!("<{iri}>")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX: &str = "http://example.org/onto#";

    fn parse(s: &str) -> ParsedDocument {
        parse_turtle(s, None).unwrap()
    }

    #[test]
    fn prefixes_lists_and_literals() {
        let doc = parse(
            r#"@prefix : <http://example.org/onto#> .
PREFIX owl: <http://www.w3.org/2002/07/owl#>
:Organ a owl:Class ;
    :label "Organ"@EN , 'orgel' ;
    :size 12, -3.5, 1e3 ;
    :flag true ;
    :members ( :a :b ) .
[] :p :o .
"#,
        );
        let g = &doc.graph;
        assert!(g.contains(&Triple::new(
            Term::iri(format!("{EX}Organ")),
            Term::iri(vocab::RDF_TYPE),
            Term::iri(vocab::OWL_CLASS)
        )));
        assert!(g.contains(&Triple::new(
            Term::iri(format!("{EX}Organ")),
            Term::iri(format!("{EX}label")),
            Term::lang_string("Organ", "en")
        )));
        assert!(g.contains(&Triple::new(
            Term::iri(format!("{EX}Organ")),
            Term::iri(format!("{EX}size")),
            Term::typed("-3.5", vocab::XSD_DECIMAL)
        )));
        // 1 type + 2 labels + 3 sizes + flag + members + 2 list cells*2 + anon
        assert_eq!(g.len(), 1 + 2 + 3 + 1 + 1 + 4 + 1);
        assert_eq!(doc.prefixes.get("owl").map(String::as_str), Some(vocab::OWL));
    }

    #[test]
    fn long_strings_and_escapes() {
        let doc = parse("@prefix : <http://e/> .\n:s :p \"\"\"a\n\"b\"\"\"\" ; :q \"x\\ty\\u0041\" .");
        let objs: Vec<_> = doc.graph.iter().map(|t| t.object.clone()).collect();
        assert!(objs.contains(&Term::string("a\n\"b\"")));
        assert!(objs.contains(&Term::string("x\tyA")));
    }

    #[test]
    fn base_resolution() {
        let doc = parse("@base <http://e.org/dir/file> .\n<#x> <p> <../y> .");
        let t = doc.graph.iter().next().unwrap();
        assert_eq!(t.subject, Term::iri("http://e.org/dir/file#x"));
        assert_eq!(t.predicate, Term::iri("http://e.org/dir/p"));
        assert_eq!(t.object, Term::iri("http://e.org/y"));
    }

    #[test]
    fn reports_error_line() {
        let src = "@prefix : <http://e/> .\n\n:a :b :c .\n\n\n\n:d :e ;; , .\n";
        let err = parse_turtle(src, None).unwrap_err();
        assert_eq!(err.line, 7, "{err}");
    }

    #[test]
    fn undeclared_prefix_is_an_error() {
        let err = parse_turtle("x:a x:b x:c .", None).unwrap_err();
        assert!(err.message.contains("undeclared prefix"));
        assert_eq!((err.line, err.column), (1, 1));
    }

    #[test]
    fn writer_round_trips_structure() {
        let src = r#"@prefix : <http://example.org/onto#> .
@prefix owl: <http://www.w3.org/2002/07/owl#> .
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
:Organ a owl:Class ;
    rdfs:subClassOf [ a owl:Restriction ; owl:onProperty :builtBy ; owl:someValuesFrom :Person ] .
:Union owl:unionOf ( :A :B ) .
_:shared :p _:x . _:other :q _:x .
"#;
        let doc = parse(src);
        let text = write_turtle(&doc.graph, &doc.prefixes);
        assert!(text.contains("owl:someValuesFrom :Person"), "{text}");
        assert!(text.contains("( :A :B )"), "{text}");
        let again = parse_turtle(&text, None).unwrap();
        assert_eq!(again.graph.len(), doc.graph.len());
        assert_eq!(write_turtle(&again.graph, &again.prefixes), text);
    }
}
