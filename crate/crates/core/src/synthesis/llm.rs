use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::io::Read as _;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::contract::{validate_llm_output, BlueprintContract, ContractViolation, TraceIndex};
use crate::puml::{parse_puml_lenient, with_header, Level};

pub const FEW_SHOT_COMPONENT: &str = include_str!("fewshot/component_v1.puml");
pub const FEW_SHOT_SYSTEM: &str = include_str!("fewshot/system_v1.puml");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SynthesisTarget {
    pub level: Level,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("response has no message content: {0}")]
    BadResponse(String),
    #[error("no recorded response left for {0}")]
    Exhausted(String),
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, target: &SynthesisTarget, request: &ChatRequest) -> Result<String, LlmError>;
}

/// Chat-completion client (`POST {endpoint}` with an OpenAI-style body).
pub struct HttpChatClient {
    endpoint: String,
    token: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Unreachable(e.to_string()))?;
        Ok(HttpChatClient {
            endpoint: endpoint.into(),
            token,
            http,
        })
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: ChatMessage,
}

impl LlmClient for HttpChatClient {
    fn complete(&self, _target: &SynthesisTarget, request: &ChatRequest) -> Result<String, LlmError> {
        let mut req = self.http.post(&self.endpoint).json(request);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let mut resp = req.send().map_err(|e| LlmError::Unreachable(e.to_string()))?;
        let mut body = String::new();
        resp.read_to_string(&mut body)
            .map_err(|e| LlmError::BadResponse(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let parsed: CompletionBody = serde_json::from_str(&body).map_err(|e| LlmError::BadResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::BadResponse("empty choices".into()))
    }
}

/// One request/response round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Deterministic,
    Llm,
    DeterministicFallback,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Deterministic => "deterministic",
            Provenance::Llm => "llm",
            Provenance::DeterministicFallback => "deterministic-fallback",
        }
    }
}

/// Prompt and responses for one target. Also the replay format: a replay
/// client serves `attempts[].response` in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub target: SynthesisTarget,
    #[serde(default)]
    pub prompt: Vec<ChatMessage>,
    pub attempts: Vec<Attempt>,
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
}

fn default_provenance() -> Provenance {
    Provenance::Llm
}

/// Serves canned responses from transcripts.
#[derive(Default)]
pub struct ReplayClient {
    queues: Mutex<BTreeMap<SynthesisTarget, VecDeque<String>>>,
}

impl ReplayClient {
    pub fn new(transcripts: impl IntoIterator<Item = Transcript>) -> Self {
        let mut queues: BTreeMap<SynthesisTarget, VecDeque<String>> = BTreeMap::new();
        for t in transcripts {
            queues
                .entry(t.target)
                .or_default()
                .extend(t.attempts.into_iter().filter_map(|a| a.response));
        }
        ReplayClient {
            queues: Mutex::new(queues),
        }
    }

    /// Loads every `*.json` transcript in `dir`, in file name order.
    pub fn from_dir(dir: &Path) -> Result<Self, String> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| format!("{}: {e}", dir.display()))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut transcripts = Vec::new();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            let t: Transcript = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
            transcripts.push(t);
        }
        Ok(ReplayClient::new(transcripts))
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, target: &SynthesisTarget, _request: &ChatRequest) -> Result<String, LlmError> {
        let mut queues = self.queues.lock().expect("replay queue lock");
        queues
            .get_mut(target)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| LlmError::Exhausted(format!("{} {}", target.level.as_str(), target.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub endpoint: Option<String>,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub max_retries: usize,
    pub max_concurrency: usize,
    pub timeout_secs: u64,
    /// Serve responses from recorded transcripts instead of the endpoint.
    pub replay_dir: Option<String>,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            endpoint: None,
            model: String::new(),
            token_env: "ROSARCH_LLM_TOKEN".into(),
            max_retries: 2,
            max_concurrency: 4,
            timeout_secs: 120,
            replay_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesisOutcome {
    /// Accepted diagram with a `'@provenance` header line.
    pub text: String,
    pub provenance: Provenance,
    pub transcript: Transcript,
    pub warnings: Vec<String>,
}

/// The `@startuml`..`@enduml` block of a chat answer, without code fences
/// or surrounding prose. The whole text when there is no such block.
pub fn extract_puml(content: &str) -> String {
    match (content.find("@startuml"), content.rfind("@enduml")) {
        (Some(a), Some(b)) if a < b => format!("{}\n", &content[a..b + "@enduml".len()]),
        _ => content.to_string(),
    }
}

fn system_prompt(contract: &BlueprintContract, level: Level) -> String {
    let mut s = String::new();
    s.push_str("You write PlantUML component diagrams of ROS 2 software architectures.\n");
    s.push_str("Answer with exactly one @startuml ... @enduml block and no other text.\n\n");
    s.push_str("Rules:\n");
    let _ = writeln!(s, "- Allowed stereotypes: {}.", contract.stereotypes.join(", "));
    let _ = writeln!(s, "- Allowed port kinds: {}.", contract.port_kinds.join(", "));
    for (what, format) in &contract.label_formats {
        let _ = writeln!(s, "- A {what} label reads `{format}`.");
    }
    s.push_str("- Use only names that occur in the input artifacts: node classes, parts, namespaces, topics, services and interface types. Do not invent elements.\n");
    s.push_str("- Keep the `'@` metadata lines of the example format.\n");
    let (what, example) = match level {
        Level::Atomic => ("one node class (AtomicRosNodeClassifier)", FEW_SHOT_COMPONENT),
        Level::Composed => ("one launch file (ComposedRosNodeClassifier)", FEW_SHOT_SYSTEM),
    };
    let _ = write!(s, "\nThe diagram describes {what}. Example of the expected form:\n\n{example}");
    s
}

fn user_prompt(target: &SynthesisTarget, artifacts: &str) -> String {
    format!(
        "Target: {} `{}`\n\nInput artifacts:\n{}\n",
        match target.level {
            Level::Atomic => "node class",
            Level::Composed => "launch file classifier",
        },
        target.name,
        artifacts
    )
}

fn target_violations(text: &str, target: &SynthesisTarget) -> Vec<String> {
    let Ok(parsed) = parse_puml_lenient(text) else { return vec![] };
    let mut out = Vec::new();
    if parsed.level() != target.level {
        out.push(format!("expected a {} diagram", target.level.as_str()));
    }
    if parsed.model.name() != target.name {
        out.push(format!("diagram names `{}`, expected `{}`", parsed.model.name(), target.name));
    }
    out
}

/// Asks `client` for the diagram of `target`. A response is accepted only
/// when it passes the contract and names the target; after `max_retries`
/// further attempts the `fallback` text is used instead.
pub fn llm_synthesize(
    client: &dyn LlmClient,
    settings: &LlmSettings,
    contract: &BlueprintContract,
    trace: &TraceIndex,
    target: &SynthesisTarget,
    artifacts: &str,
    fallback: &str,
) -> SynthesisOutcome {
    let prompt = vec![
        ChatMessage::new("system", system_prompt(contract, target.level)),
        ChatMessage::new("user", user_prompt(target, artifacts)),
    ];
    let mut transcript = Transcript {
        target: target.clone(),
        prompt: prompt.clone(),
        attempts: Vec::new(),
        provenance: Provenance::DeterministicFallback,
    };
    let mut warnings = Vec::new();
    let mut messages = prompt;
    for _ in 0..=settings.max_retries {
        let request = ChatRequest {
            model: settings.model.clone(),
            messages: messages.clone(),
            temperature: 0.0,
        };
        let content = match client.complete(target, &request) {
            Ok(c) => c,
            Err(e) => {
                let unreachable = matches!(e, LlmError::Unreachable(_));
                transcript.attempts.push(Attempt {
                    response: None,
                    error: Some(e.to_string()),
                    violations: vec![],
                });
                if unreachable {
                    warnings.push(format!("{}: {e}; using the deterministic model", target.name));
                    break;
                }
                continue;
            }
        };
        let text = extract_puml(&content);
        let mut violations: Vec<String> = validate_llm_output(&text, contract, trace)
            .iter()
            .map(ContractViolation::to_string)
            .collect();
        violations.extend(target_violations(&text, target));
        let accepted = violations.is_empty();
        transcript.attempts.push(Attempt {
            response: Some(content.clone()),
            error: None,
            violations: violations.clone(),
        });
        if accepted {
            transcript.provenance = Provenance::Llm;
            return SynthesisOutcome {
                text: with_header(&text, &[("provenance".into(), Provenance::Llm.as_str().into())]),
                provenance: Provenance::Llm,
                transcript,
                warnings,
            };
        }
        messages.push(ChatMessage::new("assistant", content));
        messages.push(ChatMessage::new(
            "user",
            format!("The diagram breaks these rules:\n- {}\nAnswer again with a corrected diagram.", violations.join("\n- ")),
        ));
    }
    if !transcript.attempts.iter().any(|a| a.error.as_deref().is_some_and(|e| e.starts_with("endpoint unreachable"))) {
        warnings.push(format!(
            "{}: no contract-valid response after {} attempts; using the deterministic model",
            target.name,
            transcript.attempts.len()
        ));
    }
    SynthesisOutcome {
        text: with_header(
            fallback,
            &[("provenance".into(), Provenance::DeterministicFallback.as_str().into())],
        ),
        provenance: Provenance::DeterministicFallback,
        transcript,
        warnings,
    }
}
