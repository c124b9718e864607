//! Parse, ground and execute SPARQL against an ontology, then break the
//! query with a term the ontology never declares.

use cq_workbench::corpus::load_ontology;
use cq_workbench::sparql::{verify_query, VerifyOptions};

const QUERY: &str = "PREFIX : <http://example.org/organs#>
SELECT ?organ ?builder WHERE {
  ?organ a :Organ ;
         :builtBy ?builder ;
         :locatedIn ?church .
}";

fn main() -> anyhow::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay20/ontologies/organs.ttl");
    let onto = load_ontology(&path)?;
    let opts = VerifyOptions { execute: true };

    let v = verify_query(QUERY, &onto, opts);
    println!("as written:\n{}", serde_json::to_string_pretty(&v)?);

    let broken = QUERY.replace(":locatedIn", ":housedIn");
    let v = verify_query(&broken, &onto, opts);
    println!("with :housedIn:\n{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}
