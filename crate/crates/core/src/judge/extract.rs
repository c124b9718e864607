//! Pull the label and SPARQL query out of a free-text completion.
//!
//! Contract: the label comes from the first line of the form
//! `Answer: Yes|No` (case-insensitive, markdown emphasis tolerated). The
//! query is the first ``` fenced block, or failing that the first run of
//! lines starting at a PREFIX/SELECT/ASK keyword. A No answer's query is
//! partial when the completion says so (`Partial: yes`, or the word
//! "partial" outside the query).

use serde::{Deserialize, Serialize};

use crate::corpus::Label;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub label: Label,
    /// Empty when the completion carried no query block.
    pub sparql: String,
    pub partial: bool,
    pub raw_completion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("no answer label found in completion")]
pub struct ExtractionFailure {
    pub raw_completion: String,
}

pub fn extract_answer(completion: &str) -> Result<Suggestion, ExtractionFailure> {
    let Some(label) = completion.lines().find_map(answer_line) else {
        return Err(ExtractionFailure {
            raw_completion: completion.to_owned(),
        });
    };
    let (sparql, outside) = match fenced_block(completion).or_else(|| keyword_block(completion)) {
        Some((start, end, body)) => (
            body.trim().to_owned(),
            format!("{}{}", &completion[..start], &completion[end..]),
        ),
        None => (String::new(), completion.to_owned()),
    };
    let marked = outside.lines().any(|l| partial_line(l) == Some(true))
        || (outside.to_ascii_lowercase().contains("partial")
            && !outside.lines().any(|l| partial_line(l) == Some(false)));
    Ok(Suggestion {
        label,
        partial: label == Label::No && !sparql.is_empty() && marked,
        sparql,
        raw_completion: completion.to_owned(),
    })
}

/// The completion shape the bundled template asks for.
pub fn render_completion(label: Label, sparql: &str, partial: bool) -> String {
    let mut s = format!("Answer: {label}\n");
    if sparql.trim().is_empty() {
        return s;
    }
    if partial && label == Label::No {
        s.push_str("Partial: yes\n");
    }
    s.push_str("```sparql\n");
    s.push_str(sparql.trim());
    s.push_str("\n```\n");
    s
}

fn strip_decoration(line: &str) -> String {
    line.trim()
        .trim_matches(|c: char| c == '*' || c == '#' || c == '_' || c == '>' || c.is_whitespace())
        .to_owned()
}

/// `key: value` with `key` matched case-insensitively; emphasis markers
/// around the key or value are ignored.
fn key_value(line: &str, key: &str) -> Option<String> {
    let l = strip_decoration(line);
    let (k, v) = l.split_once(':')?;
    let k = k.trim_matches(|c: char| c == '*' || c == '_' || c.is_whitespace());
    if !k.eq_ignore_ascii_case(key) {
        return None;
    }
    let v = v.trim_matches(|c: char| c == '*' || c == '_' || c == '.' || c.is_whitespace());
    Some(v.to_ascii_lowercase())
}

fn answer_line(line: &str) -> Option<Label> {
    let v = key_value(line, "answer")?;
    let word: String = v.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    match word.as_str() {
        "yes" => Some(Label::Yes),
        "no" => Some(Label::No),
        _ => None,
    }
}

fn partial_line(line: &str) -> Option<bool> {
    match key_value(line, "partial")?.as_str() {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    }
}

/// (start, end, body) of the first ``` block.
fn fenced_block(text: &str) -> Option<(usize, usize, &str)> {
    let start = text.find("```")?;
    let mut body_start = start + 3;
    let after = &text[body_start..];
    // An info string (```sparql) only counts when the fence line ends there.
    if let Some(nl) = after.find('\n') {
        let info = &after[..nl];
        if info.trim().chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            body_start += nl + 1;
        }
    }
    let close = text[body_start..].find("```")? + body_start;
    Some((start, close + 3, &text[body_start..close]))
}

fn keyword_block(text: &str) -> Option<(usize, usize, &str)> {
    const KEYWORDS: [&str; 3] = ["PREFIX", "SELECT", "ASK"];
    let mut offset = 0;
    let mut start = None;
    let mut depth = 0i64;
    let mut end = text.len();
    for line in text.split_inclusive('\n') {
        let t = line.trim_start();
        match start {
            None => {
                let upper = t.to_ascii_uppercase();
                if KEYWORDS
                    .iter()
                    .any(|k| upper.starts_with(k) && upper[k.len()..].starts_with(|c: char| c.is_whitespace() || c == '{' || c == '?' || c == '*'))
                {
                    start = Some(offset);
                }
            }
            Some(_) => {
                if t.trim().is_empty() && depth <= 0 {
                    end = offset;
                    break;
                }
            }
        }
        if start.is_some() {
            depth += line.matches('{').count() as i64 - line.matches('}').count() as i64;
        }
        offset += line.len();
    }
    let start = start?;
    Some((start, end, &text[start..end]))
}
