//! Scripted end-to-end scenarios and their replay.
//!
//! A scenario names an app, a fixed action script and the replies the
//! simulated user gives to each `ask`. Replaying it runs the full agent loop
//! and checks the modalities shown at each intervention point.

mod responder;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use responder::{AutoResponder, FrameRecord, ReplyEvent};

use crate::a11y::assign_indices;
use crate::action::{
    lint_trace, parse_action_value, Action, GoalStatus, LintFinding, Outcome, Severity, TaskMeta,
    TraceEntry, Visualization, VisualKind,
};
use crate::agent::{
    run_task, spawn_session, AgentError, AgentOptions, CannedGenUi, Disconnected, GenUiClient,
    Observation, OverlayPort, Policy, ScriptedPolicy,
};
use crate::device::{AppDefinition, Device, DisplaySize, TaskTag};
use crate::overlay::{OverlayServer, Viewport};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario {path}: {reason}")]
    InvalidScenario { path: PathBuf, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Visualization shown at an intervention point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    F,
    P,
    G,
}

impl Modality {
    pub fn from_visual(kind: VisualKind) -> Option<Modality> {
        match kind {
            VisualKind::Full => Some(Modality::F),
            VisualKind::Partial => Some(Modality::P),
            VisualKind::Genui => Some(Modality::G),
            VisualKind::None => None,
        }
    }

    fn requested(v: &Visualization) -> Option<Modality> {
        match v {
            Visualization::None => None,
            Visualization::ShowApp => Some(Modality::F),
            Visualization::ShowElement(_) => Some(Modality::P),
            Visualization::GenerateUi(_) => Some(Modality::G),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: String,
    app_file: PathBuf,
    goal: String,
    #[serde(default)]
    tags: Option<BTreeSet<TaskTag>>,
    #[serde(default)]
    viewport: Option<Viewport>,
    script: Vec<serde_json::Value>,
    #[serde(default)]
    auto_replies: Vec<Vec<ReplyEvent>>,
    #[serde(default)]
    genui_responses: Vec<String>,
    expected_modalities: Vec<Modality>,
    expected_steps: usize,
    #[serde(default)]
    expected_flow: Option<Vec<String>>,
    expected_final_screen: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub id: String,
    pub app_file: PathBuf,
    pub app: AppDefinition,
    pub goal: String,
    /// Task tags for linting; the app's own tags unless overridden.
    pub tags: BTreeSet<TaskTag>,
    pub viewport: Viewport,
    pub script: Vec<Action>,
    /// One batch of user events per `ask`, in order.
    pub auto_replies: Vec<Vec<ReplyEvent>>,
    /// Markup returned by the UI generator, in order.
    pub genui_responses: Vec<String>,
    pub expected_modalities: Vec<Modality>,
    pub expected_steps: usize,
    pub expected_flow: Option<Vec<String>>,
    pub expected_final_screen: String,
}

impl Scenario {
    pub fn display(&self) -> DisplaySize {
        self.app.display.unwrap_or(DisplaySize::PHONE)
    }
}

/// Reads and validates a scenario. `app_file` is relative to the scenario.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let invalid = |reason: String| ScenarioError::InvalidScenario {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
    let app_file = path.parent().unwrap_or(Path::new(".")).join(&file.app_file);
    let app = AppDefinition::load(&app_file)
        .map_err(|e| invalid(format!("app {}: {e}", app_file.display())))?;
    let script = file
        .script
        .into_iter()
        .enumerate()
        .map(|(i, v)| parse_action_value(v).map_err(|e| invalid(format!("script[{i}]: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;

    let requested: Vec<Modality> = script
        .iter()
        .filter_map(|a| a.visualization().and_then(Modality::requested))
        .collect();
    if requested.len() != file.expected_modalities.len() {
        return Err(invalid(format!(
            "{} expected modalities but the script has {} visual steps",
            file.expected_modalities.len(),
            requested.len()
        )));
    }
    let asks = script.iter().filter(|a| matches!(a, Action::Ask { .. })).count();
    if file.auto_replies.len() > asks {
        return Err(invalid(format!(
            "{} reply batches for {asks} asks",
            file.auto_replies.len()
        )));
    }
    if app.screen(&file.expected_final_screen).is_none() {
        return Err(invalid(format!(
            "unknown final screen {:?}",
            file.expected_final_screen
        )));
    }
    for ev in file.auto_replies.iter().flatten() {
        if let ReplyEvent::Tap { tap } = ev {
            if app.find_node(tap).is_none() {
                return Err(invalid(format!("reply taps unknown node {tap:?}")));
            }
        }
    }
    Ok(Scenario {
        id: file.id,
        app_file,
        tags: file.tags.unwrap_or_else(|| app.task_tags.clone()),
        app,
        goal: file.goal,
        viewport: file.viewport.unwrap_or(Viewport::DEFAULT),
        script,
        auto_replies: file.auto_replies,
        genui_responses: file.genui_responses,
        expected_modalities: file.expected_modalities,
        expected_steps: file.expected_steps,
        expected_flow: file.expected_flow,
        expected_final_screen: file.expected_final_screen,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub scenario_id: String,
    pub pass: bool,
    /// Why `pass` is false; empty when it passed.
    pub failures: Vec<String>,
    pub observed_modalities: Vec<Modality>,
    pub observed_steps: usize,
    pub observed_flow: Vec<String>,
    pub final_screen: String,
    pub status: Option<GoalStatus>,
    pub lint_findings: Vec<LintFinding>,
    /// Wall time of each step, in microseconds.
    pub step_micros: Vec<u64>,
    #[serde(skip)]
    pub trace: Vec<TraceEntry>,
}

impl ReplayReport {
    /// One-line summary.
    pub fn summary(&self) -> String {
        let mods: String = self
            .observed_modalities
            .iter()
            .map(|m| format!("{m:?}"))
            .collect::<Vec<_>>()
            .join(",");
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{verdict} {} modalities=[{mods}] steps={} final={}",
            self.scenario_id, self.observed_steps, self.final_screen
        );
        for f in &self.failures {
            line.push_str("\n    ");
            line.push_str(f);
        }
        line
    }
}

/// Records when each decision is requested.
struct Timed<'a> {
    inner: &'a mut dyn Policy,
    marks: Vec<Instant>,
}

impl Policy for Timed<'_> {
    fn decide(&mut self, obs: &Observation<'_>) -> Result<Action, AgentError> {
        self.marks.push(Instant::now());
        self.inner.decide(obs)
    }
}

/// Modalities actually presented, in order.
pub fn observed_modalities(trace: &[TraceEntry]) -> Vec<Modality> {
    trace
        .iter()
        .flat_map(|e| &e.outcomes)
        .filter_map(|o| match o {
            Outcome::Presented { visual, .. } => Modality::from_visual(*visual),
            _ => None,
        })
        .collect()
}

/// Screens acted on up to and including the last one where the user was
/// shown something visual.
pub fn intervention_flow(trace: &[TraceEntry]) -> Vec<String> {
    let mut flow: Vec<String> = Vec::new();
    let mut cutoff = 0;
    for e in trace.iter().filter(|e| e.action.is_some()) {
        if let Some(s) = &e.screen {
            if flow.last() != Some(s) {
                flow.push(s.clone());
            }
        }
        let visual = e.outcomes.iter().any(|o| {
            matches!(o, Outcome::Presented { visual, .. } if *visual != VisualKind::None)
        });
        if visual {
            cutoff = flow.len();
        }
    }
    flow.truncate(cutoff);
    flow
}

/// Lint context for a trace recorded against `app`: every index on the
/// screen a step was decided on counts as visible.
pub fn task_meta(app: &AppDefinition, tags: BTreeSet<TaskTag>, trace: &[TraceEntry]) -> TaskMeta {
    let mut visible = BTreeMap::new();
    for e in trace {
        if let Some(screen) = e.screen.as_deref().and_then(|s| app.screen(s)) {
            let n = assign_indices(&screen.root).len() as u32;
            visible.insert(e.step, (0..n).collect());
        }
    }
    TaskMeta {
        tags,
        visible_indices: visible,
    }
}

/// Runs a scenario with any policy, UI generator and overlay port.
pub fn replay_with(
    s: &Scenario,
    policy: &mut dyn Policy,
    genui: &mut dyn GenUiClient,
    port: &mut dyn OverlayPort,
    opts: &AgentOptions,
) -> ReplayReport {
    let mut failures = Vec::new();
    let mut device = match Device::launch(s.app.clone(), s.display()) {
        Ok(d) => d,
        Err(e) => {
            return ReplayReport {
                scenario_id: s.id.clone(),
                pass: false,
                failures: vec![format!("device launch failed: {e}")],
                observed_modalities: Vec::new(),
                observed_steps: 0,
                observed_flow: Vec::new(),
                final_screen: String::new(),
                status: None,
                lint_findings: Vec::new(),
                step_micros: Vec::new(),
                trace: Vec::new(),
            }
        }
    };
    let mut policy = Timed {
        inner: policy,
        marks: Vec::new(),
    };
    let out = run_task(&s.goal, &mut device, &mut policy, port, genui, opts);
    let end = Instant::now();
    let step_micros = policy
        .marks
        .iter()
        .zip(policy.marks.iter().skip(1).chain(std::iter::once(&end)))
        .map(|(a, b)| b.duration_since(*a).as_micros() as u64)
        .collect();

    let observed_modalities = observed_modalities(&out.trace);
    let flow = intervention_flow(&out.trace);
    let meta = task_meta(&s.app, s.tags.clone(), &out.trace);
    let lint_findings = lint_trace(&out.trace, &meta);

    if let Some(e) = &out.error {
        failures.push(format!("run aborted: {e}"));
    }
    if out.status != Some(GoalStatus::Complete) {
        failures.push(format!("goal status {:?}, expected complete", out.status));
    }
    if observed_modalities != s.expected_modalities {
        failures.push(format!(
            "modalities {:?}, expected {:?}",
            observed_modalities, s.expected_modalities
        ));
    }
    if flow.len() != s.expected_steps {
        failures.push(format!("{} steps, expected {}", flow.len(), s.expected_steps));
    }
    if let Some(expected) = &s.expected_flow {
        if &flow != expected {
            failures.push(format!("flow {flow:?}, expected {expected:?}"));
        }
    }
    if out.final_screen != s.expected_final_screen {
        failures.push(format!(
            "final screen {:?}, expected {:?}",
            out.final_screen, s.expected_final_screen
        ));
    }
    for f in lint_findings.iter().filter(|f| f.severity == Severity::Error) {
        failures.push(format!("lint: {f}"));
    }
    for (i, e) in out.trace.iter().enumerate() {
        for o in &e.outcomes {
            if let Outcome::Error { reason } = o {
                // the run error is already reported above
                if out.error.is_none() || i + 1 < out.trace.len() {
                    failures.push(format!("step {}: {reason}", e.step));
                }
            }
        }
    }

    ReplayReport {
        scenario_id: s.id.clone(),
        pass: failures.is_empty(),
        failures,
        observed_modalities,
        observed_steps: flow.len(),
        observed_flow: flow,
        final_screen: out.final_screen,
        status: out.status,
        lint_findings,
        step_micros,
        trace: out.trace,
    }
}

/// Step budget for scripted runs: the script plus one spare step.
pub fn scripted_options(s: &Scenario) -> AgentOptions {
    AgentOptions {
        max_steps: s.script.len() as u64 + 1,
        viewport: s.viewport,
        ..AgentOptions::default()
    }
}

/// The scenario's scripted policy and canned UI generator.
pub fn scripted_agent(s: &Scenario) -> (ScriptedPolicy, CannedGenUi) {
    (
        ScriptedPolicy::new(s.script.iter().cloned()),
        CannedGenUi::new(s.genui_responses.iter().cloned()),
    )
}

/// Responder playing the scenario's scripted replies.
pub fn auto_responder(s: &Scenario) -> AutoResponder {
    AutoResponder::new(s.app.clone(), s.auto_replies.iter().cloned())
}

/// Headless replay with the scenario's scripted replies.
pub fn replay_headless(s: &Scenario) -> ReplayReport {
    let (mut policy, mut genui) = scripted_agent(s);
    replay_with(s, &mut policy, &mut genui, &mut auto_responder(s), &scripted_options(s))
}

/// Replay against a real overlay client. Waits up to `accept_timeout` for
/// it to connect and runs without one otherwise.
pub fn replay_live(s: &Scenario, port: u16, accept_timeout: Duration) -> ReplayReport {
    let opts = scripted_options(s);
    let (mut policy, mut genui) = scripted_agent(s);
    let session = OverlayServer::bind(port).and_then(|srv| srv.accept(accept_timeout));
    match session {
        Ok(session) => {
            let mut port = spawn_session(session);
            replay_with(s, &mut policy, &mut genui, &mut port, &opts)
        }
        Err(e) => {
            let mut report = replay_with(s, &mut policy, &mut genui, &mut Disconnected, &opts);
            report.failures.insert(0, format!("no overlay client: {e}"));
            report.pass = false;
            report
        }
    }
}

/// Port used by [`replay`] for live runs.
pub const DEFAULT_OVERLAY_PORT: u16 = 8765;

pub fn replay(s: &Scenario, headless: bool) -> ReplayReport {
    if headless {
        replay_headless(s)
    } else {
        replay_live(s, DEFAULT_OVERLAY_PORT, Duration::from_secs(120))
    }
}

/// Scenario files in `dir`, sorted by name.
pub fn scenario_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, ScenarioError> {
    let dir = dir.as_ref();
    let io = |source| ScenarioError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.extension().is_some_and(|x| x == "json") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every scenario in `dir` and replays them headless in parallel.
/// Reports come back in file-name order.
pub fn replay_all(dir: impl AsRef<Path>) -> Result<Vec<ReplayReport>, ScenarioError> {
    let scenarios = scenario_files(dir)?
        .iter()
        .map(load_scenario)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(move || replay_headless(s)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replay thread panicked"))
            .collect()
    }))
}
