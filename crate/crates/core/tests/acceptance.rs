//! One line per acceptance criterion, each with its own time budget.
//!
//! Run with `cargo test -p vdagent --test acceptance -- --nocapture` to see
//! the report.

use std::cell::Cell;
use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use vdagent::a11y::Rect;
use vdagent::action::{
    distribution, lint_trace, parse_action, read_trace, serialize_action, write_trace, Action,
    Outcome, RuleId, Severity, TaskMeta, TraceEntry, Visualization, VisualKind,
};
use vdagent::agent::AGENT_PROMPT;
use vdagent::device::{Framebuffer, TaskTag};
use vdagent::metrics::{cohen_kappa, read_counts};
use vdagent::overlay::{full_view, genui_html, layout_tiles, OverlayError, Scale, Viewport, DISCLOSURE_BANNER};
use vdagent::scenario::{load_scenario, replay_all, replay_headless, scenario_files, task_meta, Modality};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

type Outcome_ = Result<String, String>;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, name: &str, budget: Duration, f: impl FnOnce() -> Outcome_) {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if took <= budget => (true, d),
            Ok(d) => (false, format!("{d}; took {took:?}, budget {budget:?}")),
            Err(e) => (false, e),
        };
        let line = format!(
            "{} {name}: {detail} [{} ms]",
            if ok { "PASS" } else { "FAIL" },
            took.as_millis()
        );
        emit(&line);
        self.lines.push((ok, line));
    }

    /// A criterion that cannot hold as stated. Printed, never asserted.
    fn unattainable(&self, name: &str, detail: &str) {
        emit(&format!("FAIL {name}: {detail} [unattainable, reported only]"));
    }
}

/// Straight to the stdout handle so the report shows without `--nocapture`.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- grammar

/// Backtick-quoted JSON objects of the given kind in the bundled prompt.
fn prompt_snippets(prefix: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (i, part) in AGENT_PROMPT.split('`').enumerate() {
        if i % 2 == 1 && part.starts_with(prefix) && part.ends_with('}') {
            out.push(part.to_string());
        }
    }
    out
}

fn instantiate(template: &str) -> Vec<String> {
    let base = template
        .replace("<optional_target_index>", "5")
        .replace("<target_index_1>", "1")
        .replace("<target_index_2>", "2")
        .replace("<target_index>", "3")
        .replace("[..]", "[1]")
        .replace("<visualization_option>", r#"{"visualization_type": "none"}"#);
    if base.contains("<up|down|left|right>") {
        ["up", "down", "left", "right"]
            .iter()
            .map(|d| base.replace("<up|down|left|right>", d))
            .collect()
    } else {
        vec![base]
    }
}

fn grammar() -> Outcome_ {
    let mut actions = Vec::new();
    for t in prompt_snippets(r#"{"action_type""#) {
        actions.extend(instantiate(&t));
    }
    for t in prompt_snippets(r#"{"visualization_type""#) {
        for v in instantiate(&t) {
            actions.push(format!(r#"{{"action_type": "speak", "text": "x", "visualization": {v}}}"#));
        }
    }
    let distinct: BTreeSet<_> = actions.iter().collect();
    ensure(distinct.len() >= 24, || format!("only {} prompt actions found", distinct.len()))?;
    for text in &distinct {
        let a = parse_action(text).map_err(|e| format!("{text}: {e}"))?;
        let canon = serialize_action(&a);
        let b = parse_action(&canon).map_err(|e| format!("{canon}: {e}"))?;
        ensure(a == b && serialize_action(&b) == canon, || format!("round trip broke {text}"))?;
    }
    let violations = [
        (r#"{"action_type": "click", "index": 1, "visualization": {"visualization_type": "none"}}"#, "visualization"),
        (r#"{"action_type": "ask", "text": "x", "visualization": {"visualization_type": "generate_ui"}}"#, "visualization.instruction"),
        (r#"{"action_type": "ask", "text": "x", "visualization": {"visualization_type": "show_element", "index": []}}"#, "visualization.index"),
    ];
    for (text, path) in violations {
        match parse_action(text) {
            Err(e) if e.path == path => {}
            other => return Err(format!("{text} gave {other:?}")),
        }
    }
    Ok(format!("{} prompt actions parse and round-trip, 3 violations rejected", distinct.len()))
}

// ---------------------------------------------------------------- replay

fn replay() -> Outcome_ {
    let expected: HashMap<&str, (&[Modality], usize)> = {
        use Modality::*;
        HashMap::from([
            ("delivery-s1", (&[P, P, F][..], 6)),
            ("delivery-s2", (&[G][..], 2)),
            ("banking-s1", (&[P, F, P][..], 6)),
            ("banking-s2", (&[P][..], 2)),
            ("todo-s1", (&[G][..], 2)),
            ("todo-s2", (&[G][..], 9)),
            ("mail-s1", (&[G][..], 5)),
            ("mail-s2", (&[F][..], 2)),
        ])
    };
    let reports = replay_all(fixtures().join("scenarios")).map_err(|e| e.to_string())?;
    ensure(reports.len() == 8, || format!("{} scenarios", reports.len()))?;
    let mut vis = Vec::new();
    for r in &reports {
        ensure(r.pass, || r.summary())?;
        let (mods, steps) = expected
            .get(r.scenario_id.as_str())
            .ok_or_else(|| format!("unexpected scenario {}", r.scenario_id))?;
        ensure(r.observed_modalities == *mods && r.observed_steps == *steps, || r.summary())?;
        vis.push(format!("{}={}", r.scenario_id, r.observed_modalities.len()));
    }
    Ok(format!("8/8 pass; Vis {}", vis.join(" ")))
}

// ---------------------------------------------------------------- geometry

#[derive(Debug, Clone)]
struct GeoCase {
    fb: (u32, u32),
    vp: (u32, u32),
    crops: Vec<(u32, u32, u32, u32)>,
    probes: Vec<(u32, u32)>,
}

fn geo_case() -> impl Strategy<Value = GeoCase> {
    (40u32..MAX_W, 40u32..MAX_H, 120u32..1100, 200u32..1400).prop_flat_map(|(w, h, vw, vh)| {
        let crop = (0..w - 1, 0..h - 1).prop_flat_map(move |(l, t)| {
            (Just(l), Just(t), l + 1..=w, t + 1..=h)
        });
        (
            Just((w, h)),
            Just((vw, vh)),
            prop::collection::vec(crop, 1..4),
            prop::collection::vec((0..w, 0..h), 8),
        )
            .prop_map(|(fb, vp, crops, probes)| GeoCase { fb, vp, crops, probes })
    })
}

const MAX_W: u32 = 2200;
const MAX_H: u32 = 2600;

/// Deterministic pattern where every pixel differs from its neighbours.
/// Built once at full size; smaller buffers copy row prefixes out of it.
fn pattern() -> &'static [u8] {
    static P: OnceLock<Vec<u8>> = OnceLock::new();
    P.get_or_init(|| {
        let mut px = Vec::with_capacity((MAX_W * MAX_H * 3) as usize);
        for y in 0..MAX_H {
            for x in 0..MAX_W {
                px.extend([(x % 251) as u8, (y % 241) as u8, ((x * 7 + y * 13) % 239) as u8]);
            }
        }
        px
    })
}

fn patterned(w: u32, h: u32) -> Framebuffer {
    let src = pattern();
    let mut px = Vec::with_capacity((w * h * 3) as usize);
    for y in 0..h as usize {
        let start = y * MAX_W as usize * 3;
        px.extend_from_slice(&src[start..start + w as usize * 3]);
    }
    Framebuffer::from_pixels(w, h, px).unwrap()
}

/// Device-space error of project-then-map for one point.
fn device_error(map: (i64, i64), x: u32, y: u32) -> i64 {
    (map.0 - x as i64).abs().max((map.1 - y as i64).abs())
}

struct GeoStats {
    cases: u32,
    scale1_tiles: u32,
    coarse_max_err: i64,
    coarse_points: u64,
}

fn geometry(stats: &mut GeoStats) -> Outcome_ {
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let half = Scale::new(1, 2);
    let scale1 = Cell::new(0);
    let coarse_max = Cell::new(0);
    let coarse_points = Cell::new(0u64);
    let cases = Cell::new(0);
    let result = runner.run(&geo_case(), |c| {
        cases.set(cases.get() + 1);
        let fb = patterned(c.fb.0, c.fb.1);
        let vp = Viewport { width: c.vp.0, height: c.vp.1 };

        let full = full_view(&fb, vp);
        let (iw, ih) = (full.image.width(), full.image.height());
        prop_assert!(iw <= vp.width && ih <= vp.height);
        for &(x, y) in &c.probes {
            let (u, v) = full.project(x, y);
            prop_assert!(u < iw && v < ih);
            let back = full.map_touch(u as i64, v as i64);
            prop_assert!(back.0 >= 0 && back.0 < c.fb.0 as i64 && back.1 >= 0 && back.1 < c.fb.1 as i64);
            if full.scale >= half {
                prop_assert!(device_error(back, x, y) <= 1, "full {:?} {x},{y} -> {back:?}", full.scale);
            } else {
                coarse_max.set(coarse_max.get().max(device_error(back, x, y)));
                coarse_points.set(coarse_points.get() + 1);
            }
            // overlay space: a mapped touch projects back onto the touched pixel
            let (u2, v2) = full.project(back.0 as u32, back.1 as u32);
            prop_assert!((u2 as i64 - u as i64).abs() <= 1 && (v2 as i64 - v as i64).abs() <= 1);
        }

        let crops: Vec<Rect> = c.crops.iter().map(|&(l, t, r, b)| Rect::new(l, t, r, b)).collect();
        let tiles = match layout_tiles(&fb, &crops, vp) {
            Ok(t) => t,
            Err(OverlayError::ViewportExhausted { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for t in &tiles {
            prop_assert!(t.scale <= Scale::ONE);
            prop_assert!(t.dest.right <= vp.width && t.dest.bottom <= vp.height);
            prop_assert_eq!((t.image.width(), t.image.height()), (t.dest.width(), t.dest.height()));
            // every tile-local pixel maps inside its crop
            for (u, v) in [(0, 0), (t.image.width() - 1, t.image.height() - 1), (t.image.width() / 2, t.image.height() / 2)] {
                let (x, y) = t.map_touch(u as i64, v as i64);
                prop_assert!(t.crop.contains_point(x, y), "{:?} {u},{v} -> {x},{y}", t.crop);
            }
            for &(x, y) in c.probes.iter().filter(|&&(x, y)| t.crop.contains_point(x as i64, y as i64)) {
                let (u, v) = t.project(x, y);
                let back = t.map_touch(u as i64, v as i64);
                prop_assert!(t.crop.contains_point(back.0, back.1));
                if t.scale >= half {
                    prop_assert!(device_error(back, x, y) <= 1, "tile {:?} {x},{y} -> {back:?}", t.scale);
                } else {
                    coarse_max.set(coarse_max.get().max(device_error(back, x, y)));
                    coarse_points.set(coarse_points.get() + 1);
                }
                let (u2, v2) = t.project(back.0 as u32, back.1 as u32);
                prop_assert!((u2 as i64 - u as i64).abs() <= 1 && (v2 as i64 - v as i64).abs() <= 1);
            }
            if t.scale == Scale::ONE {
                scale1.set(scale1.get() + 1);
                // brute-force oracle: the tile is the crop, byte for byte
                let row = t.image.width() as usize * 3;
                for v in 0..t.image.height() {
                    let start = ((t.crop.top + v) as usize * fb.width() as usize + t.crop.left as usize) * 3;
                    let got = &t.image.pixels()[v as usize * row..][..row];
                    prop_assert!(got == &fb.pixels()[start..start + row], "tile row {v} differs");
                }
            }
        }
        Ok(())
    });
    let (cases, scale1) = (cases.get(), scale1.get());
    stats.cases = cases;
    stats.scale1_tiles = scale1;
    stats.coarse_max_err = coarse_max.get();
    stats.coarse_points = coarse_points.get();
    result.map_err(|e| e.to_string())?;
    ensure(scale1 > 0, || "no scale-1 tiles generated".into())?;
    Ok(format!(
        "{cases} cases; round trip within 1 px (device space at scale >= 1/2, overlay space always); \
         {scale1} scale-1 tiles byte-exact; all mapped touches inside their crop"
    ))
}

// ---------------------------------------------------------------- kappa

/// Kappa straight from the k x k confusion matrix, with exact fractions.
fn kappa_oracle(a: &[u8], b: &[u8], k: u8) -> f64 {
    use num_rational::Ratio;
    let n = a.len() as i128;
    let mut m = vec![vec![0i128; k as usize]; k as usize];
    for (&x, &y) in a.iter().zip(b) {
        m[x as usize][y as usize] += 1;
    }
    let diag: i128 = (0..k as usize).map(|i| m[i][i]).sum();
    let po = Ratio::new(diag, n);
    let pe: Ratio<i128> = (0..k as usize)
        .map(|i| {
            let row: i128 = m[i].iter().sum();
            let col: i128 = m.iter().map(|r| r[i]).sum();
            Ratio::new(row * col, n * n)
        })
        .sum();
    let one = Ratio::from_integer(1);
    if pe == one {
        return if po == one { 1.0 } else { 0.0 };
    }
    let r = (po - pe) / (one - pe);
    *r.numer() as f64 / *r.denom() as f64
}

fn kappa() -> Outcome_ {
    let mut runner = TestRunner::new_with_rng(
        Config { cases: 1000, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let series = (2u8..6).prop_flat_map(|k| {
        (1usize..200).prop_flat_map(move |n| {
            (
                Just(k),
                prop::collection::vec(0..k, n),
                prop::collection::vec(0..k, n),
                prop::collection::vec(0..k, k as usize),
            )
        })
    });
    runner
        .run(&series, |(k, a, b, relabel)| {
            let got = cohen_kappa(&a, &b).unwrap();
            let want = kappa_oracle(&a, &b, k);
            prop_assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
            prop_assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
            // rater order and a consistent relabelling do not matter
            prop_assert!((cohen_kappa(&b, &a).unwrap() - got).abs() <= 1e-12);
            let perm: Vec<u8> = {
                let mut p: Vec<u8> = (0..k).collect();
                p.sort_by_key(|&i| (relabel[i as usize], i));
                p
            };
            let pa: Vec<u8> = a.iter().map(|&x| perm[x as usize]).collect();
            let pb: Vec<u8> = b.iter().map(|&x| perm[x as usize]).collect();
            prop_assert!((cohen_kappa(&pa, &pb).unwrap() - got).abs() <= 1e-12);
            // shuffling items together leaves kappa unchanged
            let mut idx: Vec<usize> = (0..a.len()).collect();
            idx.reverse();
            let ra: Vec<u8> = idx.iter().map(|&i| a[i]).collect();
            let rb: Vec<u8> = idx.iter().map(|&i| b[i]).collect();
            prop_assert!((cohen_kappa(&ra, &rb).unwrap() - got).abs() <= 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let reported: HashMap<&str, [u64; 3]> = HashMap::from([
        ("A1", [27, 43, 30]),
        ("A2", [55, 11, 34]),
        ("A3", [66, 0, 34]),
        ("LLM", [34, 14, 52]),
    ]);
    let counts = read_counts(std::fs::File::open(fixtures().join("metrics/modality_counts.csv")).unwrap())
        .map_err(|e| e.to_string())?;
    ensure(counts.len() == 4, || format!("{} annotators", counts.len()))?;
    let mut off = Vec::new();
    for (who, c) in counts {
        let d = distribution(c);
        let want = reported.get(who.as_str()).ok_or(format!("unknown annotator {who}"))?;
        let got = [d.full_pct, d.partial_pct, d.genui_pct];
        for (g, w) in got.iter().zip(want) {
            ensure(g.abs_diff(*w) <= 1, || format!("{who}: {got:?} vs {want:?}"))?;
            if g != w {
                off.push(format!("{who} {g} vs {w}"));
            }
        }
    }
    Ok(format!(
        "1000 random series match the oracle to 1e-12; identity and permutation hold; \
         distributions within 1 pp (differences: {})",
        off.join(", ")
    ))
}

// ---------------------------------------------------------------- lint

fn read_fixture_trace(name: &str) -> Vec<TraceEntry> {
    let f = std::fs::File::open(fixtures().join("traces").join(name)).unwrap();
    read_trace(std::io::BufReader::new(f)).unwrap()
}

fn clean_traces() -> Vec<(String, Vec<TraceEntry>, TaskMeta)> {
    scenario_files(fixtures().join("scenarios"))
        .unwrap()
        .iter()
        .map(|p| {
            let s = load_scenario(p).unwrap();
            let trace = replay_headless(&s).trace;
            let meta = task_meta(&s.app, s.tags.clone(), &trace);
            (s.id, trace, meta)
        })
        .collect()
}

fn lint() -> Outcome_ {
    let violating = [
        ("r1-visual-on-click.jsonl", RuleId::R1, vec![]),
        ("r2-genui-money.jsonl", RuleId::R2, vec![TaskTag::Money]),
        ("r3-complete-without-speak.jsonl", RuleId::R3, vec![]),
        ("r4-empty-show-element.jsonl", RuleId::R4, vec![]),
        ("r5-short-instruction.jsonl", RuleId::R5, vec![]),
    ];
    for (file, rule, tags) in violating {
        let findings = lint_trace(&read_fixture_trace(file), &TaskMeta::with_tags(tags));
        ensure(
            findings.iter().any(|f| f.rule_id == rule && f.severity == Severity::Error),
            || format!("{rule} did not fire on {file}: {findings:?}"),
        )?;
    }
    for (id, trace, meta) in clean_traces() {
        let findings = lint_trace(&trace, &meta);
        ensure(findings.is_empty(), || format!("{id}: {findings:?}"))?;
    }

    // every communication step of every banking scenario, switched to generate_ui
    let mut variants = 0;
    for p in scenario_files(fixtures().join("scenarios")).unwrap() {
        let s = load_scenario(&p).unwrap();
        if !s.id.starts_with("banking") {
            continue;
        }
        for (i, a) in s.script.iter().enumerate() {
            if a.visualization().is_none() {
                continue;
            }
            let mut v = s.clone();
            let g = Visualization::GenerateUi(
                "Show the account balance and the transfer details in one clear summary card".into(),
            );
            v.script[i] = match a {
                Action::Speak { text, .. } => Action::speak(text.clone(), g),
                Action::Ask { text, .. } => Action::ask(text.clone(), g),
                _ => unreachable!(),
            };
            let r = replay_headless(&v);
            ensure(
                r.lint_findings.iter().any(|f| f.rule_id == RuleId::R2 && f.severity == Severity::Error),
                || format!("{} step {i}: no R2", s.id),
            )?;
            variants += 1;
        }
    }
    let fixture = lint_trace(&read_fixture_trace("r2-genui-money.jsonl"), &TaskMeta::with_tags([TaskTag::Money]));
    ensure(fixture.iter().any(|f| f.rule_id == RuleId::R2), || "banking R2 fixture".into())?;
    Ok(format!(
        "R1-R5 fire on their fixtures; 0 findings on 8 clean traces; R2 on all {variants} banking generate_ui variants"
    ))
}

// ---------------------------------------------------------------- genui

#[derive(serde::Deserialize)]
struct GenUiCase {
    name: String,
    markup: String,
    expect: String,
}

/// Independent check for anything executable: script tags, script URLs,
/// and `on*` attributes inside any tag.
fn executable_bytes(html: &str) -> Option<String> {
    let lower = html.to_ascii_lowercase();
    if lower.contains("<script") || lower.contains("javascript:") {
        return Some("script".into());
    }
    for tag in lower.split('<').skip(1).map(|t| t.split('>').next().unwrap_or("")) {
        let words = tag.split(|c: char| c.is_whitespace() || c == '/' || c == '"' || c == '\'');
        for w in words.skip(1) {
            let name = w.split('=').next().unwrap_or("");
            if name.len() > 2 && name.starts_with("on") && w.contains('=') {
                return Some(format!("handler {name}"));
            }
        }
    }
    None
}

fn genui() -> Outcome_ {
    let text = std::fs::read_to_string(fixtures().join("genui/adversarial.json")).unwrap();
    let cases: Vec<GenUiCase> = serde_json::from_str(&text).unwrap();
    ensure(cases.len() == 50, || format!("{} cases", cases.len()))?;
    let (mut sanitized, mut rejected) = (0, 0);
    for c in &cases {
        match genui_html(&c.markup) {
            Ok(html) => {
                ensure(html.starts_with(DISCLOSURE_BANNER), || format!("{}: no banner", c.name))?;
                ensure(!html.contains("PWNED"), || format!("{}: payload survived: {html}", c.name))?;
                if let Some(what) = executable_bytes(&html) {
                    return Err(format!("{}: {what} survived: {html}", c.name));
                }
                ensure(c.expect == "sanitized", || format!("{}: expected rejection, got {html}", c.name))?;
                sanitized += 1;
            }
            Err(OverlayError::RejectedMarkup(_)) => {
                ensure(c.expect == "rejected", || format!("{}: unexpectedly rejected", c.name))?;
                rejected += 1;
            }
            Err(e) => return Err(format!("{}: {e}", c.name)),
        }
    }

    // rejected markup falls back to the full screen in a real run
    let mut s = load_scenario(fixtures().join("scenarios/todo-s1.json")).unwrap();
    s.genui_responses = vec!["<html><body><p>Today</p></body></html>".into()];
    let r = replay_headless(&s);
    let outcomes: Vec<&Outcome> = r.trace.iter().flat_map(|e| &e.outcomes).collect();
    ensure(
        outcomes.iter().any(|o| matches!(o, Outcome::GenuiFallback { .. }))
            && outcomes.iter().any(|o| matches!(o, Outcome::Presented { visual: VisualKind::Full, .. }))
            && r.observed_modalities == [Modality::F],
        || format!("no show_app fallback: {outcomes:?}"),
    )?;
    ensure(
        r.lint_findings.iter().any(|f| f.rule_id == RuleId::R5 && f.severity == Severity::Warning),
        || "fallback not flagged".into(),
    )?;
    Ok(format!(
        "50 cases: {sanitized} sanitized with banner and no executable bytes, {rejected} rejected; \
         rejection falls back to show_app"
    ))
}

// ---------------------------------------------------------------- determinism

fn determinism() -> Outcome_ {
    let mut n = 0;
    for p in scenario_files(fixtures().join("scenarios")).unwrap() {
        let s = load_scenario(&p).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trace(&mut a, &replay_headless(&s).trace).unwrap();
        write_trace(&mut b, &replay_headless(&s).trace).unwrap();
        ensure(a == b, || format!("{} traces differ", s.id))?;
        n += 1;
    }
    Ok(format!("{n} scenarios replayed twice, traces byte-identical"))
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    report.check("grammar conformance", Duration::from_secs(1), grammar);
    report.check("scenario replay", Duration::from_secs(10), replay);
    let mut geo = GeoStats { cases: 0, scale1_tiles: 0, coarse_max_err: 0, coarse_points: 0 };
    report.check("geometry", Duration::from_secs(30), || geometry(&mut geo));
    report.unattainable(
        "geometry, device-space 1 px round trip below scale 1/2",
        &format!(
            "max error {} px over {} probes; one overlay pixel covers more than two device \
             pixels there, so no inverse can return every device pixel to within 1 px",
            geo.coarse_max_err, geo.coarse_points
        ),
    );
    report.check("kappa correctness", Duration::from_secs(30), kappa);
    report.check("lint rules", Duration::from_secs(30), lint);
    report.check("genui safety", Duration::from_secs(10), genui);
    report.check("determinism", Duration::from_secs(30), determinism);
    let failed: Vec<&String> = report.lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
    assert!(failed.is_empty(), "failed criteria:\n{failed:#?}");
}
