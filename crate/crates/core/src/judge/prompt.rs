use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Label;

use super::extract::render_completion;

pub const DEFAULT_TEMPLATE: &str = include_str!("../../templates/judge_prompt.txt");
pub const DEFAULT_TASK: &str = include_str!("../../templates/task.txt");
const DEFAULT_SHOTS: &str = include_str!("../../templates/shots.json");

/// Placeholders a judge template must contain, in this order.
pub const PLACEHOLDERS: [&str; 5] = ["{task}", "{shots}", "{story}", "{cq}", "{ontology}"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt section '{0}' is missing or empty")]
    MissingSection(&'static str),
    #[error("template does not contain placeholder {0}")]
    MissingPlaceholder(&'static str),
    #[error("template placeholders out of order: {0} appears before {1}")]
    PlaceholderOrder(&'static str, &'static str),
    #[error("invalid shots file: {0}")]
    BadShots(String),
}

/// A worked exemplar placed in the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub story: String,
    pub cq: String,
    pub ontology: String,
    pub label: Label,
    pub query: String,
    /// Corpus record the exemplar was taken from, if any. Such records must
    /// not be evaluated with this prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_record: Option<String>,
}

pub fn default_shots() -> Vec<Shot> {
    serde_json::from_str(DEFAULT_SHOTS).expect("bundled shots are valid")
}

pub fn parse_shots(json: &str) -> Result<Vec<Shot>, PromptError> {
    serde_json::from_str(json).map_err(|e| PromptError::BadShots(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub task_description: String,
    pub shots: Vec<Shot>,
    pub story: String,
    pub cq: String,
    pub ontology_text: String,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.task_description.trim().is_empty() {
            return Err(PromptError::MissingSection("task"));
        }
        for polarity in Label::ALL {
            if !self.shots.iter().any(|s| s.label == polarity) {
                return Err(PromptError::MissingSection(match polarity {
                    Label::Yes => "shots (positive exemplar)",
                    Label::No => "shots (negative exemplar)",
                }));
            }
        }
        if self.story.trim().is_empty() {
            return Err(PromptError::MissingSection("story"));
        }
        if self.cq.trim().is_empty() {
            return Err(PromptError::MissingSection("cq"));
        }
        if self.ontology_text.trim().is_empty() {
            return Err(PromptError::MissingSection("ontology"));
        }
        Ok(())
    }
}

/// A prompt template with the five named placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::new(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, PromptError> {
        let text = text.into();
        let mut last: Option<(usize, &'static str)> = None;
        for p in PLACEHOLDERS {
            let Some(at) = text.find(p) else {
                return Err(PromptError::MissingPlaceholder(p));
            };
            if let Some((prev_at, prev)) = last {
                if at < prev_at {
                    return Err(PromptError::PlaceholderOrder(p, prev));
                }
            }
            last = Some((at, p));
        }
        Ok(Self { text })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn render(&self, spec: &PromptSpec) -> Result<String, PromptError> {
        spec.validate()?;
        let values = [
            spec.task_description.trim().to_owned(),
            render_shots(&spec.shots),
            spec.story.trim().to_owned(),
            spec.cq.trim().to_owned(),
            spec.ontology_text.trim_end().to_owned(),
        ];
        // Single left-to-right pass so substituted text is never rescanned.
        let mut out = String::with_capacity(self.text.len() + values.iter().map(String::len).sum::<usize>());
        let mut rest = self.text.as_str();
        'outer: while !rest.is_empty() {
            for (p, v) in PLACEHOLDERS.iter().zip(&values) {
                if let Some(tail) = rest.strip_prefix(p) {
                    out.push_str(v);
                    rest = tail;
                    continue 'outer;
                }
            }
            let ch = rest.chars().next().unwrap();
            out.push(ch);
            rest = &rest[ch.len_utf8()..];
        }
        Ok(out)
    }
}

fn render_shots(shots: &[Shot]) -> String {
    let mut s = String::new();
    for (i, shot) in shots.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "Example {}", i + 1);
        let _ = writeln!(s, "Story:\n{}", shot.story.trim());
        let _ = writeln!(s, "Competency question:\n{}", shot.cq.trim());
        let _ = writeln!(s, "Ontology (Turtle):\n{}", shot.ontology.trim_end());
        let partial = shot.label == Label::No;
        let _ = writeln!(s, "Response:\n{}", render_completion(shot.label, &shot.query, partial).trim_end());
    }
    s
}

/// Render the prompt with the bundled template.
pub fn build_prompt(spec: &PromptSpec) -> Result<String, PromptError> {
    PromptTemplate::default().render(spec)
}

/// Hex SHA-256 of the prompt text; names replay fixtures and cache entries.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PromptSpec {
        PromptSpec {
            task_description: "TASK-DESCRIPTION".into(),
            shots: default_shots(),
            story: "STORY-TEXT".into(),
            cq: "CQ-TEXT".into(),
            ontology_text: "@prefix : <http://x/> .\n:A a <http://www.w3.org/2002/07/owl#Class> .".into(),
        }
    }

    #[test]
    fn sections_in_order() {
        let p = build_prompt(&spec()).unwrap();
        let pos = |needle: &str| p.find(needle).unwrap_or_else(|| panic!("missing {needle}"));
        let order = [
            pos("TASK-DESCRIPTION"),
            pos("Example 1"),
            pos("STORY-TEXT"),
            pos("CQ-TEXT"),
            pos(":A a <http://www.w3.org/2002/07/owl#Class>"),
            pos("Answer: Yes\" if"),
            pos("partial SPARQL query highlighting the available portions"),
        ];
        assert!(order.windows(2).all(|w| w[0] < w[1]), "{order:?}");
        assert!(!p.contains("{story}"));
    }

    #[test]
    fn needs_both_polarities() {
        let mut s = spec();
        s.shots.retain(|x| x.label == Label::Yes);
        assert!(matches!(build_prompt(&s), Err(PromptError::MissingSection(m)) if m.contains("negative")));
    }

    #[test]
    fn empty_ontology_rejected() {
        let mut s = spec();
        s.ontology_text = "  \n".into();
        assert_eq!(build_prompt(&s), Err(PromptError::MissingSection("ontology")));
    }

    #[test]
    fn placeholder_text_inside_values_is_not_expanded() {
        let mut s = spec();
        s.story = "mentions {cq} literally".into();
        let p = build_prompt(&s).unwrap();
        assert!(p.contains("mentions {cq} literally"));
    }

    #[test]
    fn template_validation() {
        assert_eq!(
            PromptTemplate::new("{task} {shots} {story} {cq}"),
            Err(PromptError::MissingPlaceholder("{ontology}"))
        );
        assert_eq!(
            PromptTemplate::new("{task} {shots} {cq} {story} {ontology}"),
            Err(PromptError::PlaceholderOrder("{cq}", "{story}"))
        );
    }

    #[test]
    fn digest_is_sha256_hex() {
        assert_eq!(
            prompt_digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
