//! Ontologies, CQ records and corpus manifests.
//!
//! A manifest is a JSON array of records. Each record names its ontology by a
//! path relative to the manifest file; that path string is also the
//! ontology's id inside the loaded [`Corpus`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::difficulty::{classify_difficulty, CqFormalization, DifficultyClass};
use crate::rdf::{self, vocab, Graph, PrefixMap, Term};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: invalid manifest: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("record {record}: ontology file {path} not found")]
    DanglingOntology { record: String, path: PathBuf },
    #[error("duplicate record id {0}")]
    DuplicateId(String),
    #[error("record {0}: `generator` must be present exactly when source is llm")]
    GeneratorMismatch(String),
    #[error("record {record}: {message}")]
    BadFormalization { record: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldLabel {
    Yes,
    No,
    NoMinor,
}

/// Binary verdict: is the CQ modelled by the ontology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Yes,
    No,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Yes, Label::No];

    pub fn flip(self) -> Self {
        match self {
            Label::Yes => Label::No,
            Label::No => Label::Yes,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Yes => "Yes",
            Label::No => "No",
        })
    }
}

/// "No minor" (one property short) counts as not modelled.
pub fn normalize_gold(label: GoldLabel) -> Label {
    match label {
        GoldLabel::Yes => Label::Yes,
        GoldLabel::No | GoldLabel::NoMinor => Label::No,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Simple,
    Complex,
    #[default]
    Unrated,
}

impl From<DifficultyClass> for Difficulty {
    fn from(d: DifficultyClass) -> Self {
        match d {
            DifficultyClass::Simple => Difficulty::Simple,
            DifficultyClass::Complex => Difficulty::Complex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "human")]
    HumanCurated,
    #[serde(rename = "llm")]
    LlmGenerated,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::HumanCurated => "human",
            Source::LlmGenerated => "llm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ontology {
    pub id: String,
    pub path: PathBuf,
    pub graph: Graph,
    pub prefixes: PrefixMap,
    pub declared_classes: BTreeSet<String>,
    pub declared_object_properties: BTreeSet<String>,
    pub declared_data_properties: BTreeSet<String>,
    pub axiom_count: usize,
}

impl Ontology {
    /// Build from an already parsed graph.
    pub fn from_graph(id: impl Into<String>, path: PathBuf, graph: Graph, prefixes: PrefixMap) -> Self {
        let named = |class: &str| -> BTreeSet<String> {
            graph
                .instances_of(class)
                .filter_map(|t| t.as_iri().map(str::to_owned))
                .collect()
        };
        let mut declared_classes = named(vocab::OWL_CLASS);
        declared_classes.extend(named(vocab::RDFS_CLASS));
        let declared_object_properties = named(vocab::OWL_OBJECT_PROPERTY);
        let declared_data_properties = named(vocab::OWL_DATATYPE_PROPERTY);
        let mut ontology = Self {
            id: id.into(),
            path,
            graph,
            prefixes,
            declared_classes,
            declared_object_properties,
            declared_data_properties,
            axiom_count: 0,
        };
        ontology.axiom_count = axiom_breakdown(&ontology).total();
        ontology
    }

    /// The ontology serialized as Turtle (used inside prompts).
    pub fn to_turtle(&self) -> String {
        let mut prefixes = self.prefixes.clone();
        for (k, v) in rdf::standard_prefixes() {
            if !prefixes.values().any(|ns| *ns == v) {
                prefixes.entry(k).or_insert(v);
            }
        }
        rdf::write_turtle(&self.graph, &prefixes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AxiomBreakdown {
    pub declarations: usize,
    pub logical: usize,
}

impl AxiomBreakdown {
    pub fn total(&self) -> usize {
        self.declarations + self.logical
    }
}

const DECLARATION_TYPES: [&str; 8] = [
    vocab::OWL_CLASS,
    vocab::RDFS_CLASS,
    vocab::OWL_OBJECT_PROPERTY,
    vocab::OWL_DATATYPE_PROPERTY,
    vocab::OWL_ANNOTATION_PROPERTY,
    vocab::OWL_NAMED_INDIVIDUAL,
    vocab::OWL_DATATYPE,
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property",
];

const CHARACTERISTIC_TYPES: [&str; 7] = [
    "http://www.w3.org/2002/07/owl#FunctionalProperty",
    "http://www.w3.org/2002/07/owl#InverseFunctionalProperty",
    "http://www.w3.org/2002/07/owl#TransitiveProperty",
    "http://www.w3.org/2002/07/owl#SymmetricProperty",
    "http://www.w3.org/2002/07/owl#AsymmetricProperty",
    "http://www.w3.org/2002/07/owl#ReflexiveProperty",
    "http://www.w3.org/2002/07/owl#IrreflexiveProperty",
];

/// Axioms stated by a blank-node subject (n-ary OWL constructs).
const NARY_AXIOM_TYPES: [&str; 4] = [
    "http://www.w3.org/2002/07/owl#AllDisjointClasses",
    "http://www.w3.org/2002/07/owl#AllDisjointProperties",
    "http://www.w3.org/2002/07/owl#AllDifferent",
    "http://www.w3.org/2002/07/owl#NegativePropertyAssertion",
];

const LOGICAL_PREDICATES: [&str; 18] = [
    "http://www.w3.org/2000/01/rdf-schema#subClassOf",
    "http://www.w3.org/2000/01/rdf-schema#subPropertyOf",
    "http://www.w3.org/2000/01/rdf-schema#domain",
    "http://www.w3.org/2000/01/rdf-schema#range",
    "http://www.w3.org/2002/07/owl#equivalentClass",
    "http://www.w3.org/2002/07/owl#equivalentProperty",
    "http://www.w3.org/2002/07/owl#disjointWith",
    "http://www.w3.org/2002/07/owl#disjointUnionOf",
    "http://www.w3.org/2002/07/owl#inverseOf",
    "http://www.w3.org/2002/07/owl#propertyDisjointWith",
    "http://www.w3.org/2002/07/owl#propertyChainAxiom",
    "http://www.w3.org/2002/07/owl#hasKey",
    "http://www.w3.org/2002/07/owl#sameAs",
    "http://www.w3.org/2002/07/owl#differentFrom",
    "http://www.w3.org/2002/07/owl#unionOf",
    "http://www.w3.org/2002/07/owl#intersectionOf",
    "http://www.w3.org/2002/07/owl#oneOf",
    "http://www.w3.org/2002/07/owl#complementOf",
];

/// Axiom count: entity declarations plus logical axioms. Annotation
/// assertions and the ontology header are excluded, and triples hanging off
/// blank nodes (restrictions, lists) belong to the axiom that references them.
pub fn axiom_count(ontology: &Ontology) -> usize {
    ontology.axiom_count
}

pub fn axiom_breakdown(ontology: &Ontology) -> AxiomBreakdown {
    let graph = &ontology.graph;
    let headers: BTreeSet<&Term> = graph.instances_of(vocab::OWL_ONTOLOGY).collect();
    let is_property = |p: &str| {
        ontology.declared_object_properties.contains(p)
            || ontology.declared_data_properties.contains(p)
    };
    let mut counts = AxiomBreakdown::default();
    for t in graph {
        let Some(predicate) = t.predicate.as_iri() else {
            continue;
        };
        if t.subject.is_blank() {
            if predicate == vocab::RDF_TYPE
                && t.object.as_iri().is_some_and(|o| NARY_AXIOM_TYPES.contains(&o))
            {
                counts.logical += 1;
            }
            continue;
        }
        if headers.contains(&t.subject) {
            continue;
        }
        if predicate == vocab::RDF_TYPE {
            match t.object.as_iri() {
                Some(o) if DECLARATION_TYPES.contains(&o) => counts.declarations += 1,
                Some(o) if CHARACTERISTIC_TYPES.contains(&o) => counts.logical += 1,
                Some(o) if vocab::is_standard(o) => {}
                // Class assertion, either of a named class or an expression.
                _ => counts.logical += 1,
            }
        } else if LOGICAL_PREDICATES.contains(&predicate) || is_property(predicate) {
            counts.logical += 1;
        }
    }
    counts
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Load a Turtle or RDF/XML file. The format is chosen from the extension and
/// falls back to sniffing for an XML prolog.
pub fn load_ontology(path: impl AsRef<Path>) -> Result<Ontology, CorpusError> {
    let path = path.as_ref();
    load_ontology_with_id(path, path.to_string_lossy().into_owned())
}

pub fn load_ontology_with_id(path: &Path, id: String) -> Result<Ontology, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let xml = match ext.as_str() {
        "ttl" | "turtle" | "n3" | "nt" => false,
        "rdf" | "xml" => true,
        _ => {
            let head = text.trim_start();
            head.starts_with("<?xml") || head.starts_with("<rdf:RDF")
        }
    };
    let parsed = if xml {
        rdf::rdfxml::parse_rdfxml(&text, None)
    } else {
        rdf::parse_turtle(&text, None)
    };
    let doc = parsed.map_err(|e| CorpusError::Parse {
        path: path.to_owned(),
        line: e.line,
        column: e.column,
        message: e.message,
    })?;
    Ok(Ontology::from_graph(id, path.to_owned(), doc.graph, doc.prefixes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqRecord {
    pub id: String,
    pub cq_text: String,
    pub story_text: String,
    pub story_oneline: Option<String>,
    pub ontology_ref: String,
    pub gold: GoldLabel,
    pub difficulty: Difficulty,
    pub source: Source,
    pub project: String,
    pub generator_model: Option<String>,
    pub formalization: Option<CqFormalization>,
}

impl CqRecord {
    pub fn normalized_gold(&self) -> Label {
        normalize_gold(self.gold)
    }
}

/// One manifest entry, field names as they appear on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub cq: String,
    pub story: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub story_oneline: Option<String>,
    pub ontology: String,
    pub gold: GoldLabel,
    #[serde(default)]
    pub difficulty: Difficulty,
    pub source: Source,
    pub project: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formalization: Option<CqFormalization>,
}

impl ManifestRecord {
    fn into_record(self) -> Result<CqRecord, ManifestError> {
        if self.generator.is_some() != (self.source == Source::LlmGenerated) {
            return Err(ManifestError::GeneratorMismatch(self.id));
        }
        let mut difficulty = self.difficulty;
        if let Some(f) = &self.formalization {
            f.validate().map_err(|e| ManifestError::BadFormalization {
                record: self.id.clone(),
                message: e.to_string(),
            })?;
            if difficulty == Difficulty::Unrated {
                difficulty = classify_difficulty(f).into();
            }
        }
        Ok(CqRecord {
            id: self.id,
            cq_text: self.cq,
            story_text: self.story,
            story_oneline: self.story_oneline,
            ontology_ref: self.ontology,
            gold: self.gold,
            difficulty,
            source: self.source,
            project: self.project,
            generator_model: self.generator,
            formalization: self.formalization,
        })
    }

    pub fn from_record(r: &CqRecord, ontology_path: String) -> Self {
        Self {
            id: r.id.clone(),
            cq: r.cq_text.clone(),
            story: r.story_text.clone(),
            story_oneline: r.story_oneline.clone(),
            ontology: ontology_path,
            gold: r.gold,
            difficulty: r.difficulty,
            source: r.source,
            project: r.project.clone(),
            generator: r.generator_model.clone(),
            formalization: r.formalization.clone(),
        }
    }
}

/// Records plus the ontologies they reference. Immutable once loaded.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub records: Vec<CqRecord>,
    pub ontologies: BTreeMap<String, Arc<Ontology>>,
}

impl Corpus {
    /// Assemble from parts, checking that ids are unique and refs resolve.
    pub fn new(
        records: Vec<CqRecord>,
        ontologies: BTreeMap<String, Arc<Ontology>>,
    ) -> Result<Self, ManifestError> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(ManifestError::DuplicateId(r.id.clone()));
            }
            if !ontologies.contains_key(&r.ontology_ref) {
                return Err(ManifestError::DanglingOntology {
                    record: r.id.clone(),
                    path: PathBuf::from(&r.ontology_ref),
                });
            }
        }
        Ok(Self {
            records,
            ontologies,
        })
    }

    /// Records whose ontologies are not loaded: each distinct `ontology_ref`
    /// gets an empty placeholder. For label-only work such as scoring.
    pub fn from_records(records: Vec<CqRecord>) -> Result<Self, ManifestError> {
        let ontologies = records
            .iter()
            .map(|r| {
                let o = Ontology::from_graph(
                    r.ontology_ref.clone(),
                    PathBuf::from(&r.ontology_ref),
                    Graph::new(),
                    PrefixMap::new(),
                );
                (r.ontology_ref.clone(), Arc::new(o))
            })
            .collect();
        Self::new(records, ontologies)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: &str) -> Option<&CqRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn ontology_for(&self, record: &CqRecord) -> Option<&Arc<Ontology>> {
        self.ontologies.get(&record.ontology_ref)
    }

    pub fn index(&self) -> BTreeMap<&str, &CqRecord> {
        self.records.iter().map(|r| (r.id.as_str(), r)).collect()
    }

    /// Restrict to the given records, keeping only the ontologies they use.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Corpus {
        let wanted: BTreeSet<&str> = ids.into_iter().collect();
        let records: Vec<CqRecord> = self
            .records
            .iter()
            .filter(|r| wanted.contains(r.id.as_str()))
            .cloned()
            .collect();
        let ontologies = records
            .iter()
            .filter_map(|r| {
                self.ontologies
                    .get(&r.ontology_ref)
                    .map(|o| (r.ontology_ref.clone(), o.clone()))
            })
            .collect();
        Corpus {
            records,
            ontologies,
        }
    }

    /// Manifest entries whose ontology paths are relative to `dir` when
    /// possible, absolute otherwise.
    pub fn to_manifest(&self, dir: &Path) -> Vec<ManifestRecord> {
        let abs_dir = std::path::absolute(dir).unwrap_or_else(|_| dir.to_owned());
        self.records
            .iter()
            .map(|r| {
                let path = self
                    .ontologies
                    .get(&r.ontology_ref)
                    .map(|o| std::path::absolute(&o.path).unwrap_or_else(|_| o.path.clone()))
                    .map(|p| pathdiff::diff_paths(&p, &abs_dir).unwrap_or(p))
                    .map(|p| p.to_string_lossy().replace('\\', "/"))
                    .unwrap_or_else(|| r.ontology_ref.clone());
                ManifestRecord::from_record(r, path)
            })
            .collect()
    }

    pub fn write_manifest(&self, path: &Path) -> Result<(), CorpusError> {
        let dir = path.parent().unwrap_or(Path::new("."));
        let entries = self.to_manifest(dir);
        let json = serde_json::to_string_pretty(&entries).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(io_err(path))
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    serde_json::from_str(&text).map_err(|e| {
        ManifestError::Invalid {
            path: path.to_owned(),
            message: e.to_string(),
        }
        .into()
    })
}

/// Load a manifest and every ontology it references.
pub fn load_corpus(manifest_path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let manifest_path = manifest_path.as_ref();
    let entries = read_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut ontologies: BTreeMap<String, Arc<Ontology>> = BTreeMap::new();
    let mut records = Vec::with_capacity(entries.len());
    let mut seen = BTreeSet::new();
    for entry in entries {
        if !seen.insert(entry.id.clone()) {
            return Err(ManifestError::DuplicateId(entry.id).into());
        }
        if !ontologies.contains_key(&entry.ontology) {
            let path = dir.join(&entry.ontology);
            if !path.is_file() {
                return Err(ManifestError::DanglingOntology {
                    record: entry.id,
                    path,
                }
                .into());
            }
            let ontology = load_ontology_with_id(&path, entry.ontology.clone())?;
            ontologies.insert(entry.ontology.clone(), Arc::new(ontology));
        }
        records.push(entry.into_record()?);
    }
    Ok(Corpus::new(records, ontologies)?)
}

/// min / max / mean / median / sample std of a list of sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub count: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl SizeSummary {
    pub fn from_sizes(sizes: &[usize]) -> Option<Self> {
        if sizes.is_empty() {
            return None;
        }
        let mut sorted = sizes.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let mean = sorted.iter().sum::<usize>() as f64 / n as f64;
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
        };
        let std = if n > 1 {
            let ss: f64 = sorted.iter().map(|&x| (x as f64 - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            count: n,
            min: sorted[0],
            max: sorted[n - 1],
            mean,
            median,
            std,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub total: usize,
    pub modelled: usize,
    pub not_modelled: usize,
    pub no_minor: usize,
    pub simple: usize,
    pub complex: usize,
    pub unrated: usize,
    pub projects: usize,
    pub human_curated: usize,
    pub llm_generated: usize,
    pub generator_models: usize,
    pub ontologies: usize,
    pub axiom_sizes: Option<SizeSummary>,
}

pub fn corpus_stats(corpus: &Corpus) -> StatsSummary {
    let records = &corpus.records;
    let count = |f: &dyn Fn(&CqRecord) -> bool| records.iter().filter(|r| f(r)).count();
    let modelled = count(&|r| r.normalized_gold() == Label::Yes);
    let sizes: Vec<usize> = corpus.ontologies.values().map(|o| o.axiom_count).collect();
    StatsSummary {
        total: records.len(),
        modelled,
        not_modelled: records.len() - modelled,
        no_minor: count(&|r| r.gold == GoldLabel::NoMinor),
        simple: count(&|r| r.difficulty == Difficulty::Simple),
        complex: count(&|r| r.difficulty == Difficulty::Complex),
        unrated: count(&|r| r.difficulty == Difficulty::Unrated),
        projects: records.iter().map(|r| &r.project).collect::<BTreeSet<_>>().len(),
        human_curated: count(&|r| r.source == Source::HumanCurated),
        llm_generated: count(&|r| r.source == Source::LlmGenerated),
        generator_models: records
            .iter()
            .filter_map(|r| r.generator_model.as_ref())
            .collect::<BTreeSet<_>>()
            .len(),
        ontologies: corpus.ontologies.len(),
        axiom_sizes: SizeSummary::from_sizes(&sizes),
    }
}

impl fmt::Display for StatsSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28}{:>8}", "Total CQs", self.total)?;
        writeln!(f, "{:<28}{:>8}", "Modelled CQs", self.modelled)?;
        writeln!(f, "{:<28}{:>8}", "Not modelled CQs", self.not_modelled)?;
        writeln!(f, "{:<28}{:>8}", "  of which No-minor", self.no_minor)?;
        writeln!(f, "{:<28}{:>8}", "Difficulty: Simple", self.simple)?;
        writeln!(f, "{:<28}{:>8}", "Difficulty: Complex", self.complex)?;
        writeln!(f, "{:<28}{:>8}", "Difficulty: unrated", self.unrated)?;
        writeln!(f, "{:<28}{:>8}", "Domains (projects)", self.projects)?;
        writeln!(f, "{:<28}{:>8}", "Human-curated", self.human_curated)?;
        writeln!(f, "{:<28}{:>8}", "LLM-generated", self.llm_generated)?;
        writeln!(f, "{:<28}{:>8}", "Ontologies", self.ontologies)?;
        if let Some(s) = &self.axiom_sizes {
            writeln!(
                f,
                "{:<28}{} to {} (mean {:.0}, median {:.0}, std {:.0})",
                "Axioms", s.min, s.max, s.mean, s.median, s.std
            )?;
        }
        Ok(())
    }
}
