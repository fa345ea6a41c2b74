//! Modality distribution: how often the user was shown the full screen,
//! a partial crop, or a generated interface.

use std::fmt;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::{Outcome, TraceEntry, VisualKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualCounts {
    pub full: u64,
    pub partial: u64,
    pub genui: u64,
}

impl VisualCounts {
    pub fn total(&self) -> u64 {
        self.full + self.partial + self.genui
    }

    pub fn record(&mut self, kind: VisualKind) {
        match kind {
            VisualKind::Full => self.full += 1,
            VisualKind::Partial => self.partial += 1,
            VisualKind::Genui => self.genui += 1,
            VisualKind::None => {}
        }
    }

    /// Counts the frames actually presented in a trace. Voice-only frames
    /// are not counted.
    pub fn from_trace(trace: &[TraceEntry]) -> Self {
        let mut c = VisualCounts::default();
        for o in trace.iter().flat_map(|e| &e.outcomes) {
            if let Outcome::Presented { visual, .. } = o {
                c.record(*visual);
            }
        }
        c
    }
}

impl AddAssign for VisualCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.full += rhs.full;
        self.partial += rhs.partial;
        self.genui += rhs.genui;
    }
}

/// Whole-number percentages, each rounded half-up independently, so they
/// need not sum to 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    pub counts: VisualCounts,
    pub full_pct: u64,
    pub partial_pct: u64,
    pub genui_pct: u64,
}

fn pct(count: u64, total: u64) -> u64 {
    if total == 0 {
        0
    } else {
        (200 * count + total) / (2 * total)
    }
}

pub fn distribution(counts: VisualCounts) -> Distribution {
    let t = counts.total();
    Distribution {
        counts,
        full_pct: pct(counts.full, t),
        partial_pct: pct(counts.partial, t),
        genui_pct: pct(counts.genui, t),
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "full {}% ({}), partial {}% ({}), genui {}% ({})",
            self.full_pct,
            self.counts.full,
            self.partial_pct,
            self.counts.partial,
            self.genui_pct,
            self.counts.genui
        )
    }
}
