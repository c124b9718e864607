//! RDF/XML reading on top of `oxrdfxml`, converted into the local term model.

use oxrdf::{Subject, Term as OxTerm};
use oxrdfxml::RdfXmlParser;

use super::{Graph, ParsedDocument, PrefixMap, SyntaxError, Term, Triple};

pub fn parse_rdfxml(input: &str, base: Option<&str>) -> Result<ParsedDocument, SyntaxError> {
    let mut parser = RdfXmlParser::new();
    if let Some(base) = base {
        parser = parser.with_base_iri(base).map_err(|e| SyntaxError {
            line: 1,
            column: 1,
            message: format!("invalid base IRI: {e}"),
        })?;
    }
    let mut reader = parser.for_slice(input.as_bytes());
    let mut graph = Graph::new();
    let mut prefixes = PrefixMap::new();
    while let Some(item) = reader.next() {
        match item {
            Ok(t) => {
                // The namespace scope is only visible while its element is open.
                for (k, v) in reader.prefixes() {
                    prefixes.entry(k.to_owned()).or_insert_with(|| v.to_owned());
                }
                graph.insert(Triple::new(
                    convert_subject(t.subject),
                    Term::iri(t.predicate.into_string()),
                    convert_term(t.object),
                ));
            }
            Err(e) => {
                let offset = reader.buffer_position() as usize;
                let (line, column) = line_col(input, offset);
                return Err(SyntaxError {
                    line,
                    column,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(ParsedDocument { graph, prefixes })
}

fn convert_subject(s: Subject) -> Term {
    match s {
        Subject::NamedNode(n) => Term::iri(n.into_string()),
        Subject::BlankNode(b) => Term::blank(b.into_string()),
    }
}

fn convert_term(t: OxTerm) -> Term {
    match t {
        OxTerm::NamedNode(n) => Term::iri(n.into_string()),
        OxTerm::BlankNode(b) => Term::blank(b.into_string()),
        OxTerm::Literal(l) => {
            let (value, datatype, lang) = l.destruct();
            match (lang, datatype) {
                (Some(lang), _) => Term::lang_string(value, lang),
                (None, Some(dt)) => Term::typed(value, dt.into_string()),
                (None, None) => Term::string(value),
            }
        }
    }
}

fn line_col(input: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(input.len());
    let before = &input.as_bytes()[..offset];
    let line = before.iter().filter(|b| **b == b'\n').count() + 1;
    let line_start = before.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
    let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::vocab;

    #[test]
    fn reads_classes_and_literals() {
        let xml = r#"<?xml version="1.0"?>
<rdf:RDF xmlns:rdf="http://www.w3.org/1999/02/22-rdf-syntax-ns#"
         xmlns:owl="http://www.w3.org/2002/07/owl#"
         xmlns:rdfs="http://www.w3.org/2000/01/rdf-schema#">
  <owl:Class rdf:about="http://e.org/o#Organ">
    <rdfs:label xml:lang="en">Organ</rdfs:label>
  </owl:Class>
</rdf:RDF>"#;
        let doc = parse_rdfxml(xml, None).unwrap();
        assert_eq!(doc.graph.len(), 2);
        assert!(doc.graph.contains(&Triple::new(
            Term::iri("http://e.org/o#Organ"),
            Term::iri(vocab::RDF_TYPE),
            Term::iri(vocab::OWL_CLASS),
        )));
        assert_eq!(doc.prefixes.get("owl").map(String::as_str), Some(vocab::OWL));
    }

    #[test]
    fn malformed_xml_reports_a_line() {
        let xml = "<?xml version=\"1.0\"?>\n<rdf:RDF xmlns:rdf=\"http://www.w3.org/1999/02/22-rdf-syntax-ns#\">\n<rdf:Description rdf:about=\"http://e/a\">\n</rdf:RDF>";
        let err = parse_rdfxml(xml, None).unwrap_err();
        assert!(err.line >= 3, "{err}");
    }
}
