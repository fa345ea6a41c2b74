//! Trace linter for the hard visualization rules of the agent prompt.
//!
//! | rule | fires when |
//! |------|------------|
//! | R1 | an app action carries a visualization |
//! | R2 | `generate_ui` is used on a money or high-stakes task |
//! | R3 | `status: complete` is not directly preceded by a `speak` (waits skipped) |
//! | R4 | an element index list is empty, or names an index absent from that step's tree |
//! | R5 | a `generate_ui` instruction is empty or shorter than [`MIN_INSTRUCTION_WORDS`]; also a warning when generated markup had to be replaced |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ActionKind, GoalStatus, Outcome, RawAction, TraceEntry, VisualizationKind};
use crate::device::TaskTag;

pub const MIN_INSTRUCTION_WORDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub rule_id: RuleId,
    pub step: u64,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for LintFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{} {sev} at step {}: {}", self.rule_id, self.step, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskMeta {
    pub tags: BTreeSet<TaskTag>,
    /// Element indices present on the screen at each step, when known.
    pub visible_indices: BTreeMap<u64, BTreeSet<u32>>,
}

impl TaskMeta {
    pub fn with_tags(tags: impl IntoIterator<Item = TaskTag>) -> Self {
        TaskMeta {
            tags: tags.into_iter().collect(),
            visible_indices: BTreeMap::new(),
        }
    }

    fn is_sensitive(&self) -> bool {
        self.tags.contains(&TaskTag::Money) || self.tags.contains(&TaskTag::HighStakes)
    }
}

pub fn lint_trace(trace: &[TraceEntry], meta: &TaskMeta) -> Vec<LintFinding> {
    let mut findings = Vec::new();
    let mut push = |rule_id, step, severity, message: String| {
        findings.push(LintFinding {
            rule_id,
            step,
            message,
            severity,
        })
    };
    let mut last_action: Option<&RawAction> = None;
    for entry in trace {
        let step = entry.step;
        for outcome in &entry.outcomes {
            if let Outcome::GenuiFallback { reason } = outcome {
                push(
                    RuleId::R5,
                    step,
                    Severity::Warning,
                    format!("generated UI rejected ({reason}); fell back to show_app"),
                );
            }
        }
        let Some(action) = &entry.action else {
            continue;
        };
        let kind = action.action_type;
        let visible = meta.visible_indices.get(&step);

        if !kind.is_communication() && action.visualization.is_some() {
            push(
                RuleId::R1,
                step,
                Severity::Error,
                format!("visualization attached to app action {}", kind.as_str()),
            );
        }

        if let Some(vis) = action.visualization.as_ref().filter(|_| kind.is_communication()) {
            match vis.visualization_type {
                VisualizationKind::GenerateUi => {
                    if meta.is_sensitive() {
                        push(
                            RuleId::R2,
                            step,
                            Severity::Error,
                            "generate_ui used on a money/high-stakes task".into(),
                        );
                    }
                    let words = vis
                        .instruction
                        .as_deref()
                        .map(|s| s.split_whitespace().count())
                        .unwrap_or(0);
                    if words < MIN_INSTRUCTION_WORDS {
                        push(
                            RuleId::R5,
                            step,
                            Severity::Error,
                            format!(
                                "generate_ui instruction has {words} words, need at least {MIN_INSTRUCTION_WORDS}"
                            ),
                        );
                    }
                }
                VisualizationKind::ShowElement => {
                    let indices = vis.index.as_deref().unwrap_or_default();
                    if indices.is_empty() {
                        push(
                            RuleId::R4,
                            step,
                            Severity::Error,
                            "show_element with an empty index list".into(),
                        );
                    }
                    check_visible(indices, visible, step, &mut push);
                }
                _ => {}
            }
        }

        if matches!(
            kind,
            ActionKind::Click | ActionKind::LongPress | ActionKind::InputText | ActionKind::Scroll
        ) {
            if let Some(ix) = action.index {
                check_visible(&[ix], visible, step, &mut push);
            }
        }

        if kind == ActionKind::Status && action.goal_status == Some(GoalStatus::Complete) {
            let preceded_by_speak = last_action.is_some_and(|a| a.action_type == ActionKind::Speak);
            if !preceded_by_speak {
                push(
                    RuleId::R3,
                    step,
                    Severity::Error,
                    "status complete without a preceding speak".into(),
                );
            }
        }

        if kind != ActionKind::Wait {
            last_action = Some(action);
        }
    }
    findings
}

fn check_visible(
    indices: &[u32],
    visible: Option<&BTreeSet<u32>>,
    step: u64,
    push: &mut impl FnMut(RuleId, u64, Severity, String),
) {
    let Some(visible) = visible else {
        return;
    };
    for ix in indices.iter().filter(|ix| !visible.contains(ix)) {
        push(
            RuleId::R4,
            step,
            Severity::Error,
            format!("index {ix} is not on the screen at this step"),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{parse_raw_action, Action};

    fn trace(actions: &[&str]) -> Vec<TraceEntry> {
        actions
            .iter()
            .enumerate()
            .map(|(i, a)| TraceEntry {
                step: i as u64,
                action: Some(parse_raw_action(a).unwrap()),
                tree_digest: None,
                screen: None,
                outcomes: vec![],
            })
            .collect()
    }

    fn rules(f: &[LintFinding]) -> Vec<RuleId> {
        f.iter().map(|x| x.rule_id).collect()
    }

    const SPEAK_DONE: &str = r#"{"action_type":"speak","text":"Done.","visualization":{"visualization_type":"none"}}"#;
    const COMPLETE: &str = r#"{"action_type":"status","goal_status":"complete"}"#;
    const GENUI: &str = r#"{"action_type":"speak","text":"Trending stores.","visualization":{"visualization_type":"generate_ui","instruction":"Generate a list card of the five trending stores with their names and ratings."}}"#;

    #[test]
    fn clean_trace_has_no_findings() {
        let t = trace(&[r#"{"action_type":"click","index":12}"#, GENUI, COMPLETE]);
        assert!(lint_trace(&t, &TaskMeta::with_tags([TaskTag::LowStakes])).is_empty());
    }

    #[test]
    fn r1_visualization_on_app_action() {
        let t = trace(&[
            r#"{"action_type":"click","index":3,"visualization":{"visualization_type":"show_app"}}"#,
        ]);
        assert_eq!(rules(&lint_trace(&t, &TaskMeta::default())), vec![RuleId::R1]);
    }

    #[test]
    fn r2_genui_on_money_task() {
        let t = trace(&[GENUI]);
        let f = lint_trace(&t, &TaskMeta::with_tags([TaskTag::Money]));
        assert_eq!(rules(&f), vec![RuleId::R2]);
        assert_eq!(f[0].severity, Severity::Error);
        assert_eq!(rules(&lint_trace(&t, &TaskMeta::with_tags([TaskTag::HighStakes]))), vec![RuleId::R2]);
    }

    #[test]
    fn r3_complete_needs_speak_first() {
        assert_eq!(
            rules(&lint_trace(&trace(&[COMPLETE]), &TaskMeta::default())),
            vec![RuleId::R3]
        );
        let ask_then_complete = trace(&[
            r#"{"action_type":"ask","text":"Ok?","visualization":{"visualization_type":"none"}}"#,
            COMPLETE,
        ]);
        assert_eq!(
            rules(&lint_trace(&ask_then_complete, &TaskMeta::default())),
            vec![RuleId::R3]
        );
        let with_wait = trace(&[SPEAK_DONE, r#"{"action_type":"wait"}"#, COMPLETE]);
        assert!(lint_trace(&with_wait, &TaskMeta::default()).is_empty());
        let infeasible = trace(&[r#"{"action_type":"status","goal_status":"infeasible"}"#]);
        assert!(lint_trace(&infeasible, &TaskMeta::default()).is_empty());
    }

    #[test]
    fn r4_empty_or_invisible_indices() {
        let empty = trace(&[
            r#"{"action_type":"speak","text":"x","visualization":{"visualization_type":"show_element","index":[]}}"#,
        ]);
        assert_eq!(rules(&lint_trace(&empty, &TaskMeta::default())), vec![RuleId::R4]);

        let t = trace(&[
            r#"{"action_type":"speak","text":"x","visualization":{"visualization_type":"show_element","index":[1,7]}}"#,
            r#"{"action_type":"click","index":9}"#,
        ]);
        let mut meta = TaskMeta::default();
        assert!(lint_trace(&t, &meta).is_empty());
        meta.visible_indices.insert(0, [0, 1, 2].into());
        meta.visible_indices.insert(1, [0, 1, 2].into());
        let f = lint_trace(&t, &meta);
        assert_eq!(rules(&f), vec![RuleId::R4, RuleId::R4]);
        assert!(f[0].message.contains('7'));
    }

    #[test]
    fn r5_vague_instruction_and_fallback_warning() {
        let t = trace(&[
            r#"{"action_type":"speak","text":"x","visualization":{"visualization_type":"generate_ui","instruction":"Make a UI."}}"#,
        ]);
        let f = lint_trace(&t, &TaskMeta::default());
        assert_eq!(rules(&f), vec![RuleId::R5]);
        assert_eq!(f[0].severity, Severity::Error);

        let mut t = trace(&[GENUI]);
        t[0].outcomes.push(Outcome::GenuiFallback {
            reason: "full-document wrapper".into(),
        });
        let f = lint_trace(&t, &TaskMeta::default());
        assert_eq!(rules(&f), vec![RuleId::R5]);
        assert_eq!(f[0].severity, Severity::Warning);
    }

    #[test]
    fn validated_actions_lint_the_same() {
        let a = Action::Status(GoalStatus::Complete);
        let t = vec![TraceEntry {
            step: 0,
            action: Some(a.to_raw()),
            tree_digest: None,
            screen: None,
            outcomes: vec![],
        }];
        assert_eq!(rules(&lint_trace(&t, &TaskMeta::default())), vec![RuleId::R3]);
    }
}
