//! JSON-lines trace files: one object per agent step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{RawAction, SchemaError};

/// What the user actually saw for a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualKind {
    None,
    Full,
    Partial,
    Genui,
}

impl VisualKind {
    /// Single-letter modality code: F, P or G. `None` has no code.
    pub fn modality_code(self) -> Option<char> {
        match self {
            VisualKind::None => None,
            VisualKind::Full => Some('F'),
            VisualKind::Partial => Some('P'),
            VisualKind::Genui => Some('G'),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    /// The device consumed the event.
    Applied {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new_screen: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        side_effect: Option<String>,
    },
    ConsumedNoOp,
    /// An overlay frame was sent to the user.
    Presented { frame_id: u64, visual: VisualKind },
    UserReplied { text: String },
    /// A forwarded overlay touch, in device coordinates.
    OverlayTouch {
        x: i64,
        y: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new_screen: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        side_effect: Option<String>,
    },
    /// Generated markup was rejected; the full screen was shown instead.
    GenuiFallback { reason: String },
    /// Requested crops did not fit the viewport; the full screen was shown.
    PartialFallback { reason: String },
    Error { reason: String },
    StepLimitExceeded { max_steps: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<RawAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_digest: Option<String>,
    /// Screen the action was decided on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcomes: Vec<Outcome>,
}

impl TraceEntry {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace serialization is infallible")
    }
}

pub fn write_trace<W: Write>(mut out: W, entries: &[TraceEntry]) -> std::io::Result<()> {
    for e in entries {
        writeln!(out, "{}", e.to_line())?;
    }
    Ok(())
}

/// Reads a JSON-lines trace. Blank lines are skipped; errors carry the
/// 1-based line number in `path`.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceEntry>, SchemaError> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| SchemaError::new(format!("line {}", i + 1), e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&line);
        let entry: TraceEntry = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            SchemaError::new(
                format!("line {}: {}", i + 1, e.path()),
                e.into_inner().to_string(),
            )
        })?;
        entries.push(entry);
    }
    Ok(entries)
}
