use std::net::TcpStream;
use std::thread;
use std::time::Duration;

use base64::Engine;
use tungstenite::{Message, WebSocket};

use vdagent::action::{Action, GoalStatus, Outcome, VisualKind, Visualization};
use vdagent::agent::{
    run_task, spawn_session, AgentError, AgentOptions, ChatMessage, ChatTransport, Disconnected,
    GenUiClient, LlmPolicy, ScriptedPolicy, TemplateGenUi,
};
use vdagent::device::{AppDefinition, Device, DisplaySize};
use vdagent::overlay::{ClientMessage, OverlayServer, ServerMessage};
use vdagent::scenario::AutoResponder;

const MINI: &str = r#"{"app_name": "mini", "start_screen": "a", "screens": [
  {"id": "a", "root": {"id": "a_root", "role": "container", "bounds": [0, 0, 100, 100],
    "children": [{"id": "go", "role": "button", "text": "Go", "bounds": [10, 10, 50, 30], "clickable": true}]},
   "transitions": [{"on": "click", "node": "go", "goto": "b", "side_effect": "resolves_ask"}]},
  {"id": "b", "root": {"id": "b_root", "role": "container", "bounds": [0, 0, 100, 100]}}]}"#;

fn mini() -> (AppDefinition, Device) {
    let app = AppDefinition::from_json(MINI).unwrap();
    let device = Device::launch(app.clone(), DisplaySize { width: 100, height: 100 }).unwrap();
    (app, device)
}

/// Canned model replies; remembers every conversation it was sent.
struct StubChat {
    replies: Vec<String>,
    seen: Vec<Vec<ChatMessage>>,
}

impl ChatTransport for StubChat {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, AgentError> {
        self.seen.push(messages.to_vec());
        if self.replies.is_empty() {
            return Err(AgentError::ModelUnreachable("stub ran dry".into()));
        }
        Ok(self.replies.remove(0))
    }
}

#[test]
fn invalid_action_is_sent_back_with_the_error() {
    let (_, mut device) = mini();
    let stub = StubChat {
        replies: vec![
            r#"Action: {"action_type": "click", "index": 0, "visualization": {"visualization_type": "none"}}"#.into(),
            r#"Action: {"action_type": "click", "index": 0}"#.into(),
            r#"Action: {"action_type": "status", "goal_status": "complete"}"#.into(),
        ],
        seen: Vec::new(),
    };
    let mut policy = LlmPolicy::new(stub);
    let out = run_task("press go", &mut device, &mut policy, &mut Disconnected, &mut TemplateGenUi, &AgentOptions::default());
    assert_eq!(out.status, Some(GoalStatus::Complete));
    assert_eq!(out.final_screen, "b", "{:#?}", out.trace);

    let seen = &policy.transport().seen;
    assert_eq!(seen.len(), 3);
    let retry = &seen[1];
    assert_eq!(retry.len(), 4);
    assert_eq!(retry[0].role, "system");
    assert_eq!(retry[2].role, "assistant");
    assert!(retry[3].content.contains("schema error at \"visualization\""), "{}", retry[3].content);
    // the next step starts a fresh conversation with the history filled in
    assert_eq!(seen[2].len(), 2);
    assert!(seen[2][1].content.contains("Step 0:"));
}

#[test]
fn three_bad_replies_end_the_run() {
    let (_, mut device) = mini();
    let stub = StubChat {
        replies: vec!["I would click Go.".into(); 5],
        seen: Vec::new(),
    };
    let mut policy = LlmPolicy::new(stub);
    let out = run_task("press go", &mut device, &mut policy, &mut Disconnected, &mut TemplateGenUi, &AgentOptions::default());
    match out.error {
        Some(AgentError::UnparseableAfterRetries { attempts: 3, last_error }) => {
            assert!(last_error.contains("Action:"))
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(policy.transport().seen.len(), 3);
    assert_eq!(out.status, None);
    assert!(matches!(out.trace.last().unwrap().outcomes[..], [Outcome::Error { .. }]));
}

struct SpyGenUi {
    calls: Vec<String>,
}

impl GenUiClient for SpyGenUi {
    fn generate(&mut self, instruction: &str) -> Result<String, AgentError> {
        self.calls.push(instruction.to_string());
        Ok("<div><p>Go is ready</p></div>".into())
    }
}

#[test]
fn ui_generator_gets_only_the_instruction() {
    let (app, mut device) = mini();
    let instruction = "Show a single card saying that the Go button is ready to press";
    let mut policy = ScriptedPolicy::new([
        Action::speak("Ready.", Visualization::GenerateUi(instruction.into())),
        Action::Status(GoalStatus::Complete),
    ]);
    let mut port = AutoResponder::new(app, []);
    let mut spy = SpyGenUi { calls: Vec::new() };
    let out = run_task("secret goal text", &mut device, &mut policy, &mut port, &mut spy, &AgentOptions::default());
    assert_eq!(out.status, Some(GoalStatus::Complete));
    assert_eq!(spy.calls, [instruction]);
    assert!(out.trace[0]
        .outcomes
        .iter()
        .any(|o| matches!(o, Outcome::Presented { visual: VisualKind::Genui, .. })));
}

#[test]
fn step_limit_stops_the_run() {
    let (_, mut device) = mini();
    let mut policy = ScriptedPolicy::new(vec![Action::Wait; 10]);
    let opts = AgentOptions {
        max_steps: 3,
        ..AgentOptions::default()
    };
    let out = run_task("wait", &mut device, &mut policy, &mut Disconnected, &mut TemplateGenUi, &opts);
    assert_eq!(out.status, None);
    assert_eq!(out.error, None);
    let last = out.trace.last().unwrap();
    assert_eq!(last.outcomes, [Outcome::StepLimitExceeded { max_steps: 3 }]);
    assert_eq!(out.trace.iter().filter(|e| e.action.is_some()).count(), 3);
}

#[test]
fn visual_frame_without_client_is_an_error() {
    let (_, mut device) = mini();
    let mut policy = ScriptedPolicy::new([
        Action::speak("Look.", Visualization::ShowApp),
        Action::Status(GoalStatus::Complete),
    ]);
    let out = run_task("look", &mut device, &mut policy, &mut Disconnected, &mut TemplateGenUi, &AgentOptions::default());
    assert_ne!(out.status, Some(GoalStatus::Complete));
    assert!(out.trace[0].outcomes.iter().any(|o| matches!(o, Outcome::Error { .. })));
}

fn read_server(ws: &mut WebSocket<TcpStream>) -> ServerMessage {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            Message::Ping(_) | Message::Pong(_) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}

fn send_client(ws: &mut WebSocket<TcpStream>, msg: &ClientMessage) {
    ws.send(Message::text(serde_json::to_string(msg).unwrap())).unwrap();
}

#[test]
fn overlay_round_trip_over_websocket() {
    let (_, mut device) = mini();
    let server = OverlayServer::bind(0).unwrap();
    let addr = server.local_addr();

    let client = thread::spawn(move || {
        let stream = TcpStream::connect(addr).unwrap();
        let (mut ws, _) = tungstenite::client(format!("ws://{addr}"), stream).unwrap();
        let mut seen = Vec::new();

        // speak: an image of the whole screen, acknowledged
        let ServerMessage::Overlay { frame_id, visual, text, .. } = read_server(&mut ws) else {
            panic!("expected overlay");
        };
        assert_eq!(text, "Here is the app.");
        assert_eq!(visual.kind, VisualKind::Full);
        let full = visual.full.unwrap();
        let png = base64::engine::general_purpose::STANDARD.decode(&full.png_base64).unwrap();
        let decoder = png::Decoder::new(std::io::Cursor::new(png));
        let info = decoder.read_info().unwrap();
        assert_eq!((info.info().width, info.info().height), (full.w, full.h));
        seen.push(frame_id);
        send_client(&mut ws, &ClientMessage::Ack { frame_id });

        // ask: tap the centre of "go" in image pixels
        let frame_id = loop {
            match read_server(&mut ws) {
                ServerMessage::Overlay { frame_id, .. } => break frame_id,
                ServerMessage::Dismiss { .. } => {}
            }
        };
        let u = (30.0 * full.scale).round() as i64;
        let v = (20.0 * full.scale).round() as i64;
        send_client(&mut ws, &ClientMessage::Touch { frame_id, tile_id: None, u, v });
        seen.push(frame_id);
        loop {
            match read_server(&mut ws) {
                ServerMessage::Dismiss { frame_id: f } if f == frame_id => break,
                _ => {}
            }
        }
        seen
    });

    let session = server.accept(Duration::from_secs(10)).unwrap();
    let mut port = spawn_session(session);
    let mut policy = ScriptedPolicy::new([
        Action::speak("Here is the app.", Visualization::ShowApp),
        Action::ask("Tap Go when ready.", Visualization::ShowApp),
        Action::speak("Done.", Visualization::None),
        Action::Status(GoalStatus::Complete),
    ]);
    let opts = AgentOptions {
        reply_timeout: Duration::from_secs(10),
        ..AgentOptions::default()
    };
    let out = run_task("press go", &mut device, &mut policy, &mut port, &mut TemplateGenUi, &opts);
    let frames = client.join().unwrap();
    assert_eq!(frames.len(), 2);
    assert_eq!(out.error, None, "{:?}", out.trace);
    assert_eq!(out.status, Some(GoalStatus::Complete));
    assert_eq!(out.final_screen, "b");
    assert!(out.trace[1].outcomes.iter().any(|o| matches!(
        o,
        Outcome::OverlayTouch { x: 30, y: 20, side_effect: Some(s), .. } if s == "resolves_ask"
    )));
}
