use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::rdf::{Graph, Term, Triple};

use super::{GroupElement, GroupPattern, ParsedQuery, QueryForm, TermPattern, TriplePattern};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryResult {
    Boolean { value: bool },
    Bindings {
        variables: Vec<String>,
        rows: Vec<Vec<Option<Term>>>,
    },
}

impl QueryResult {
    pub fn is_empty(&self) -> bool {
        match self {
            QueryResult::Boolean { value } => !value,
            QueryResult::Bindings { rows, .. } => rows.is_empty(),
        }
    }
}

type Solution = BTreeMap<String, Term>;

/// Evaluate `q` over `graph`. FILTERs are not evaluated, so results are a
/// superset of what a full engine would return for filtered queries.
///
/// SELECT rows are sorted by their values taken in variable-name order, then
/// DISTINCT, OFFSET and LIMIT apply.
pub fn execute(q: &ParsedQuery, graph: &Graph) -> QueryResult {
    let solutions = eval_group(&q.pattern, graph);
    match q.form {
        QueryForm::Ask => QueryResult::Boolean {
            value: !solutions.is_empty(),
        },
        QueryForm::Select => {
            let variables = q.projected_variables();
            let mut key_order: Vec<usize> = (0..variables.len()).collect();
            key_order.sort_by(|&a, &b| variables[a].cmp(&variables[b]));
            let mut rows: Vec<Vec<Option<Term>>> = solutions
                .iter()
                .map(|s| variables.iter().map(|v| s.get(v).cloned()).collect())
                .collect();
            rows.sort_by(|a, b| {
                key_order
                    .iter()
                    .map(|&i| a[i].cmp(&b[i]))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            if q.distinct {
                rows.dedup();
            }
            let rows = rows
                .into_iter()
                .skip(q.offset.unwrap_or(0))
                .take(q.limit.unwrap_or(usize::MAX))
                .collect();
            QueryResult::Bindings { variables, rows }
        }
    }
}

fn eval_group(g: &GroupPattern, graph: &Graph) -> Vec<Solution> {
    let mut current = vec![Solution::new()];
    for e in &g.elements {
        current = match e {
            GroupElement::Triples(ts) => {
                let mut sols = current;
                for tp in ts {
                    sols = extend(sols, tp, graph);
                }
                sols
            }
            GroupElement::Group(inner) => join(&current, &eval_group(inner, graph)),
            GroupElement::Union(alts) => {
                let all: Vec<Solution> = alts.iter().flat_map(|a| eval_group(a, graph)).collect();
                join(&current, &all)
            }
            GroupElement::Optional(inner) => left_join(&current, &eval_group(inner, graph)),
            GroupElement::Filter(_) => current,
        };
    }
    current
}

fn compatible(a: &Solution, b: &Solution) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .all(|(k, v)| large.get(k).is_none_or(|w| w == v))
}

fn merge(a: &Solution, b: &Solution) -> Solution {
    let mut m = a.clone();
    m.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
    m
}

fn join(left: &[Solution], right: &[Solution]) -> Vec<Solution> {
    let mut out = Vec::new();
    for a in left {
        for b in right {
            if compatible(a, b) {
                out.push(merge(a, b));
            }
        }
    }
    out
}

fn left_join(left: &[Solution], right: &[Solution]) -> Vec<Solution> {
    let mut out = Vec::new();
    for a in left {
        let before = out.len();
        for b in right {
            if compatible(a, b) {
                out.push(merge(a, b));
            }
        }
        if out.len() == before {
            out.push(a.clone());
        }
    }
    out
}

fn extend(sols: Vec<Solution>, tp: &TriplePattern, graph: &Graph) -> Vec<Solution> {
    let mut out = Vec::new();
    for s in sols {
        for t in graph.iter() {
            if let Some(ext) = match_triple(&s, tp, t) {
                out.push(ext);
            }
        }
    }
    out
}

fn match_triple(s: &Solution, tp: &TriplePattern, t: &Triple) -> Option<Solution> {
    let mut ext = s.clone();
    for (pat, term) in [
        (&tp.subject, &t.subject),
        (&tp.predicate, &t.predicate),
        (&tp.object, &t.object),
    ] {
        match pat {
            TermPattern::Term(c) => {
                if c != term {
                    return None;
                }
            }
            TermPattern::Var(v) => match ext.get(v) {
                Some(bound) if bound != term => return None,
                Some(_) => {}
                None => {
                    ext.insert(v.clone(), term.clone());
                }
            },
        }
    }
    Some(ext)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::parse_turtle;
    use crate::sparql::parse_query;

    fn graph(ttl: &str) -> Graph {
        parse_turtle(ttl, None).unwrap().graph
    }

    const DATA: &str = r#"
@prefix : <http://e/> .
:o1 a :Organ ; :builtBy :p1 .
:o2 a :Organ .
:p1 :name "Ann" .
"#;

    #[test]
    fn ask_present_triple() {
        let g = graph(DATA);
        let q = parse_query("ASK { <http://e/o1> a <http://e/Organ> }").unwrap();
        assert_eq!(execute(&q, &g), QueryResult::Boolean { value: true });
        let q = parse_query("ASK { <http://e/o1> a <http://e/Person> }").unwrap();
        assert_eq!(execute(&q, &g), QueryResult::Boolean { value: false });
    }

    #[test]
    fn select_over_empty_graph() {
        let q = parse_query("SELECT ?s WHERE { ?s ?p ?o }").unwrap();
        assert!(execute(&q, &Graph::new()).is_empty());
    }

    #[test]
    fn optional_keeps_unmatched_rows() {
        let g = graph(DATA);
        let q = parse_query(
            "PREFIX : <http://e/> SELECT ?o ?b WHERE { ?o a :Organ OPTIONAL { ?o :builtBy ?b } }",
        )
        .unwrap();
        let QueryResult::Bindings { rows, .. } = execute(&q, &g) else {
            panic!()
        };
        // Sorted on ?b before ?o; unbound sorts first.
        assert_eq!(
            rows,
            vec![
                vec![Some(Term::iri("http://e/o2")), None],
                vec![Some(Term::iri("http://e/o1")), Some(Term::iri("http://e/p1"))],
            ]
        );
    }

    #[test]
    fn union_distinct_limit() {
        let g = graph(DATA);
        let q = parse_query(
            "PREFIX : <http://e/> SELECT DISTINCT ?x WHERE { { ?x a :Organ } UNION { ?x :builtBy [] } } LIMIT 1",
        )
        .unwrap();
        let QueryResult::Bindings { rows, .. } = execute(&q, &g) else {
            panic!()
        };
        assert_eq!(rows, vec![vec![Some(Term::iri("http://e/o1"))]]);
    }

    #[test]
    fn filters_are_ignored() {
        let g = graph(DATA);
        let q = parse_query("SELECT ?s WHERE { ?s ?p ?o FILTER(false) }").unwrap();
        assert!(!execute(&q, &g).is_empty());
    }
}
