use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{SessionPlan, SusResponse, TaskResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StudyEvent {
    SessionCreated { token: String, plan: SessionPlan },
    Response { token: String, response: TaskResponse },
    Survey { token: String, survey: SusResponse },
}

struct Inner {
    lines: Vec<String>,
    file: Option<BufWriter<File>>,
}

/// Append-only event log, kept in memory and optionally mirrored to a
/// JSON Lines file. Appends are serialized; each is flushed before return.
pub struct EventLog {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            inner: Mutex::new(Inner { lines: Vec::new(), file: None }),
        }
    }

    /// Open (or create) `path`, keeping any events already in it.
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_owned();
        let lines = match std::fs::read_to_string(&path) {
            Ok(t) => t.lines().filter(|l| !l.trim().is_empty()).map(str::to_owned).collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path: Some(path),
            inner: Mutex::new(Inner { lines, file: Some(BufWriter::new(file)) }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, event: &StudyEvent) -> std::io::Result<()> {
        let line = serde_json::to_string(event).expect("event serializes");
        let mut inner = self.inner.lock().unwrap();
        if let Some(f) = inner.file.as_mut() {
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        inner.lines.push(line);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The whole log as JSON Lines.
    pub fn export(&self) -> String {
        let inner = self.inner.lock().unwrap();
        let mut s = inner.lines.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }

    pub fn events(&self) -> Vec<StudyEvent> {
        read_events_str(&self.export()).expect("log holds only valid events")
    }
}

pub fn read_events_str(text: &str) -> Result<Vec<StudyEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

pub fn read_events(path: impl AsRef<Path>) -> anyhow::Result<Vec<StudyEvent>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    read_events_str(&text).map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))
}

/// Responses grouped by session token, in log order.
pub fn responses_by_token(events: &[StudyEvent]) -> BTreeMap<String, Vec<TaskResponse>> {
    let mut out: BTreeMap<String, Vec<TaskResponse>> = BTreeMap::new();
    for e in events {
        if let StudyEvent::Response { token, response } = e {
            out.entry(token.clone()).or_default().push(response.clone());
        }
    }
    out
}

pub fn surveys_by_token(events: &[StudyEvent]) -> BTreeMap<String, SusResponse> {
    events
        .iter()
        .filter_map(|e| match e {
            StudyEvent::Survey { token, survey } => Some((token.clone(), survey.clone())),
            _ => None,
        })
        .collect()
}
