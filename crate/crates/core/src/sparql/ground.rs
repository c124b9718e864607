use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Ontology;
use crate::judge::Suggestion;
use crate::rdf::{standard_prefixes, vocab, Term};

use super::{execute, parse_query_with, ParseOptions, ParsedQuery, SparqlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingVerdict {
    FullyGrounded,
    PartiallyGrounded,
    Ungrounded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub grounded: BTreeSet<String>,
    pub ungrounded: BTreeSet<String>,
    pub verdict: GroundingVerdict,
}

/// IRIs a query may use against `o`: anything declared, plus anything that
/// occurs as subject or object of an `rdf:type` triple.
pub fn grounded_vocabulary(o: &Ontology) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = o
        .declared_classes
        .iter()
        .chain(&o.declared_object_properties)
        .chain(&o.declared_data_properties)
        .cloned()
        .collect();
    for t in o.graph.iter() {
        if t.predicate.as_iri() == Some(vocab::RDF_TYPE) {
            for term in [&t.subject, &t.object] {
                if let Term::Iri { value } = term {
                    out.insert(value.clone());
                }
            }
        }
    }
    out
}

/// Classify every non-standard IRI in `q`. A salvaged query (lenient parse
/// with warnings) is never reported as fully grounded.
pub fn ground_vocabulary(q: &ParsedQuery, o: &Ontology) -> GroundingReport {
    let vocab_set = grounded_vocabulary(o);
    let (grounded, ungrounded): (BTreeSet<String>, BTreeSet<String>) = q
        .referenced_iris
        .iter()
        .filter(|i| !vocab::is_standard(i))
        .cloned()
        .partition(|i| vocab_set.contains(i));
    let mut verdict = if ungrounded.is_empty() {
        GroundingVerdict::FullyGrounded
    } else if grounded.is_empty() {
        GroundingVerdict::Ungrounded
    } else {
        GroundingVerdict::PartiallyGrounded
    };
    if q.is_salvaged() && verdict == GroundingVerdict::FullyGrounded {
        verdict = GroundingVerdict::PartiallyGrounded;
    }
    GroundingReport {
        grounded,
        ungrounded,
        verdict,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Run the query against the ontology graph when it is fully grounded.
    pub execute: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    pub parse_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<SparqlError>,
    /// Unsupported constructs dropped while salvaging the query.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub grounding: Option<GroundingReport>,
    pub executed: Option<bool>,
    pub execution_nonempty: Option<bool>,
}

impl VerificationVerdict {
    fn failed(err: SparqlError) -> Self {
        Self {
            parse_ok: false,
            parse_error: Some(err),
            warnings: Vec::new(),
            grounding: None,
            executed: None,
            execution_nonempty: None,
        }
    }
}

/// Parse, ground and optionally execute a query against `o`.
///
/// Prefixes declared by the ontology (and rdf/rdfs/owl/xsd) are available to
/// the query without PREFIX lines. A strict parse is tried first; if it fails
/// only because of unsupported features, the query is salvaged leniently.
pub fn verify_query(text: &str, o: &Ontology, opts: VerifyOptions) -> VerificationVerdict {
    let mut default_prefixes = standard_prefixes();
    default_prefixes.extend(o.prefixes.iter().map(|(k, v)| (k.clone(), v.clone())));
    let mut popts = ParseOptions {
        default_prefixes,
        lenient: false,
    };
    let parsed = match parse_query_with(text, &popts) {
        Ok(q) => q,
        Err(SparqlError::Unsupported { .. }) => {
            popts.lenient = true;
            match parse_query_with(text, &popts) {
                Ok(q) => q,
                Err(e) => return VerificationVerdict::failed(e),
            }
        }
        Err(e) => return VerificationVerdict::failed(e),
    };
    let grounding = ground_vocabulary(&parsed, o);
    let (executed, execution_nonempty) =
        if opts.execute && grounding.verdict == GroundingVerdict::FullyGrounded {
            let result = execute(&parsed, &o.graph);
            (Some(true), Some(!result.is_empty()))
        } else {
            (Some(false), None)
        };
    VerificationVerdict {
        parse_ok: true,
        parse_error: None,
        warnings: parsed.warnings.clone(),
        grounding: Some(grounding),
        executed,
        execution_nonempty,
    }
}

pub fn verify_suggestion(s: &Suggestion, o: &Ontology, opts: VerifyOptions) -> VerificationVerdict {
    if s.sparql.trim().is_empty() {
        return VerificationVerdict::failed(SparqlError::Syntax {
            line: 1,
            column: 1,
            message: "suggestion carries no query".to_owned(),
        });
    }
    verify_query(&s.sparql, o, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_ontology;

    fn tbox() -> Ontology {
        load_ontology(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/ontologies/parthood_tbox.ttl"
        ))
        .unwrap()
    }

    #[test]
    fn declared_terms_are_fully_grounded() {
        let o = tbox();
        let v = verify_query(
            "SELECT ?o ?t WHERE { ?o a :Organ ; :isWholeIncludedIn ?p . ?p :hasTimeInterval ?t }",
            &o,
            VerifyOptions { execute: true },
        );
        assert!(v.parse_ok);
        let g = v.grounding.unwrap();
        assert_eq!(g.verdict, GroundingVerdict::FullyGrounded, "{g:?}");
        assert_eq!(v.executed, Some(true));
        assert_eq!(v.execution_nonempty, Some(false));
    }

    #[test]
    fn one_undeclared_iri() {
        let o = tbox();
        let v = verify_query(
            "SELECT ?o WHERE { ?o a :Organ ; :fooProp ?x }",
            &o,
            VerifyOptions { execute: true },
        );
        let g = v.grounding.unwrap();
        assert_eq!(g.verdict, GroundingVerdict::PartiallyGrounded);
        let ns = o.prefixes[""].clone();
        assert_eq!(g.ungrounded, [format!("{ns}fooProp")].into());
        assert_eq!(v.executed, Some(false));
    }

    #[test]
    fn nothing_declared() {
        let o = tbox();
        let v = verify_query(
            "SELECT ?x WHERE { ?x <http://nowhere/p> <http://nowhere/C> }",
            &o,
            VerifyOptions::default(),
        );
        assert_eq!(v.grounding.unwrap().verdict, GroundingVerdict::Ungrounded);
    }

    #[test]
    fn broken_query_has_no_grounding() {
        let o = tbox();
        let v = verify_query("SELECT ?x WHERE { ?x a :Organ ", &o, VerifyOptions::default());
        assert!(!v.parse_ok);
        assert!(v.grounding.is_none());
        assert!(v.parse_error.is_some());
    }

    #[test]
    fn salvaged_query_is_partial_with_warning() {
        let o = tbox();
        let v = verify_query(
            "SELECT (COUNT(?o) AS ?n) WHERE { ?o a :Organ }",
            &o,
            VerifyOptions { execute: true },
        );
        assert!(v.parse_ok);
        assert_eq!(v.warnings.len(), 1);
        let g = v.grounding.unwrap();
        assert!(g.ungrounded.is_empty());
        assert_eq!(g.verdict, GroundingVerdict::PartiallyGrounded);
        assert_eq!(v.executed, Some(false));
    }
}
