//! A SPARQL 1.1 subset sufficient for checking CQ verification queries:
//! SELECT/ASK over basic graph patterns with UNION, OPTIONAL and opaque
//! FILTERs, plus PREFIX declarations and the usual solution modifiers
//! (DISTINCT, ORDER BY, LIMIT, OFFSET).
//!
//! Anything else (property paths, aggregates, subqueries, BIND, VALUES,
//! MINUS, SERVICE, GRAPH, dataset clauses, CONSTRUCT/DESCRIBE) is rejected
//! with [`SparqlError::Unsupported`]. A lenient parse mode drops those
//! constructs instead and records a warning, so that noisy LLM output can
//! still have its basic graph pattern checked.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rdf::{PrefixMap, Term};

mod exec;
mod ground;
mod lexer;
mod parser;

pub use exec::{execute, QueryResult};
pub use ground::{
    ground_vocabulary, grounded_vocabulary, verify_query, verify_suggestion, GroundingReport,
    GroundingVerdict, VerificationVerdict, VerifyOptions,
};
pub use parser::{parse_query, parse_query_with, ParseOptions};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum SparqlError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported SPARQL feature at line {line}, column {column}: {feature}")]
    Unsupported {
        feature: String,
        line: usize,
        column: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryForm {
    Select,
    Ask,
}

/// A term position in a triple pattern. Query blank nodes behave as
/// variables that are never projected; their names start with `_:`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermPattern {
    Var(String),
    Term(Term),
}

impl TermPattern {
    pub fn is_blank_var(&self) -> bool {
        matches!(self, TermPattern::Var(v) if v.starts_with("_:"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    pub subject: TermPattern,
    pub predicate: TermPattern,
    pub object: TermPattern,
}

impl TriplePattern {
    pub fn positions(&self) -> [&TermPattern; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupElement {
    Triples(Vec<TriplePattern>),
    Optional(GroupPattern),
    /// Two or more alternatives.
    Union(Vec<GroupPattern>),
    Group(GroupPattern),
    /// Constraint text kept verbatim; never evaluated.
    Filter(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupPattern {
    pub elements: Vec<GroupElement>,
}

impl GroupPattern {
    pub fn triple_patterns(&self) -> Vec<&TriplePattern> {
        let mut out = Vec::new();
        self.collect_triples(&mut out);
        out
    }

    fn collect_triples<'a>(&'a self, out: &mut Vec<&'a TriplePattern>) {
        for e in &self.elements {
            match e {
                GroupElement::Triples(ts) => out.extend(ts),
                GroupElement::Optional(g) | GroupElement::Group(g) => g.collect_triples(out),
                GroupElement::Union(gs) => gs.iter().for_each(|g| g.collect_triples(out)),
                GroupElement::Filter(_) => {}
            }
        }
    }

    pub fn has_filters(&self) -> bool {
        self.elements.iter().any(|e| match e {
            GroupElement::Filter(_) => true,
            GroupElement::Optional(g) | GroupElement::Group(g) => g.has_filters(),
            GroupElement::Union(gs) => gs.iter().any(GroupPattern::has_filters),
            GroupElement::Triples(_) => false,
        })
    }

    /// Variables in order of first appearance, blank-node variables excluded.
    pub fn variables_in_order(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for tp in self.triple_patterns() {
            for pos in tp.positions() {
                if let TermPattern::Var(v) = pos {
                    if !v.starts_with("_:") && seen.insert(v.clone()) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Projection {
    All,
    Vars(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuery {
    pub form: QueryForm,
    pub prefixes: PrefixMap,
    pub projection: Projection,
    pub distinct: bool,
    pub pattern: GroupPattern,
    /// ORDER BY conditions, verbatim. Results are always sorted, so these are
    /// kept for display only.
    pub order_by: Option<String>,
    pub limit: Option<usize>,
    pub offset: Option<usize>,
    pub referenced_iris: BTreeSet<String>,
    pub referenced_variables: BTreeSet<String>,
    /// Constructs dropped by a lenient parse.
    pub warnings: Vec<String>,
}

impl ParsedQuery {
    pub(crate) fn finish(mut self) -> Self {
        let mut iris = BTreeSet::new();
        let mut vars = BTreeSet::new();
        for tp in self.pattern.triple_patterns() {
            for pos in tp.positions() {
                match pos {
                    TermPattern::Term(Term::Iri { value }) => {
                        iris.insert(value.clone());
                    }
                    TermPattern::Var(v) if !v.starts_with("_:") => {
                        vars.insert(v.clone());
                    }
                    _ => {}
                }
            }
        }
        self.referenced_iris = iris;
        self.referenced_variables = vars;
        self
    }

    /// Columns of a SELECT result.
    pub fn projected_variables(&self) -> Vec<String> {
        match &self.projection {
            Projection::All => self.pattern.variables_in_order(),
            Projection::Vars(vs) => vs.clone(),
        }
    }

    pub fn is_salvaged(&self) -> bool {
        !self.warnings.is_empty()
    }
}

impl fmt::Display for TermPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermPattern::Var(v) if v.starts_with("_:") => f.write_str(v),
            TermPattern::Var(v) => write!(f, "?{v}"),
            TermPattern::Term(t) => write!(f, "{t}"),
        }
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

fn write_group(f: &mut fmt::Formatter<'_>, g: &GroupPattern, depth: usize) -> fmt::Result {
    let pad = "  ".repeat(depth + 1);
    f.write_str("{\n")?;
    for e in &g.elements {
        match e {
            GroupElement::Triples(ts) => {
                for t in ts {
                    writeln!(f, "{pad}{t} .")?;
                }
            }
            GroupElement::Optional(inner) => {
                write!(f, "{pad}OPTIONAL ")?;
                write_group(f, inner, depth + 1)?;
                f.write_str("\n")?;
            }
            GroupElement::Union(gs) => {
                f.write_str(&pad)?;
                for (i, inner) in gs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" UNION ")?;
                    }
                    write_group(f, inner, depth + 1)?;
                }
                f.write_str("\n")?;
            }
            GroupElement::Group(inner) => {
                f.write_str(&pad)?;
                write_group(f, inner, depth + 1)?;
                f.write_str("\n")?;
            }
            GroupElement::Filter(text) => writeln!(f, "{pad}FILTER {text}")?,
        }
    }
    write!(f, "{}}}", "  ".repeat(depth))
}

impl fmt::Display for ParsedQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.prefixes {
            writeln!(f, "PREFIX {k}: <{v}>")?;
        }
        match self.form {
            QueryForm::Ask => f.write_str("ASK ")?,
            QueryForm::Select => {
                f.write_str("SELECT ")?;
                if self.distinct {
                    f.write_str("DISTINCT ")?;
                }
                match &self.projection {
                    Projection::All => f.write_str("* ")?,
                    Projection::Vars(vs) => {
                        for v in vs {
                            write!(f, "?{v} ")?;
                        }
                    }
                }
                f.write_str("WHERE ")?;
            }
        }
        write_group(f, &self.pattern, 0)?;
        if let Some(o) = &self.order_by {
            write!(f, "\nORDER BY {o}")?;
        }
        if let Some(l) = self.limit {
            write!(f, "\nLIMIT {l}")?;
        }
        if let Some(o) = self.offset {
            write!(f, "\nOFFSET {o}")?;
        }
        Ok(())
    }
}
