use std::collections::{BTreeMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::{build_prompt, parse_and_correct, PromptSet};
use super::{MockRanker, RankLevel, RankRequest, RankResponse, Ranker};
use crate::error::SemanticsError;

/// One prompt in, raw text out.
pub trait Completion {
    fn complete(&mut self, prompt: &str) -> Result<String, SemanticsError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmEndpoint {
    /// Full chat-completions URL.
    pub url: String,
    pub model: String,
    pub timeout_secs: f64,
}

impl Default for LlmEndpoint {
    fn default() -> Self {
        Self { url: "http://127.0.0.1:11434/v1/chat/completions".into(), model: "qwen2.5:7b".into(), timeout_secs: 60.0 }
    }
}

/// Chat-completions client (OpenAI / Ollama wire format), temperature 0, no streaming.
pub struct HttpCompletion {
    endpoint: LlmEndpoint,
    agent: ureq::Agent,
}

impl HttpCompletion {
    pub fn new(endpoint: LlmEndpoint) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(endpoint.timeout_secs.max(0.001))))
            .build()
            .into();
        Self { endpoint, agent }
    }
}

impl Completion for HttpCompletion {
    fn complete(&mut self, prompt: &str) -> Result<String, SemanticsError> {
        let body = serde_json::json!({
            "model": self.endpoint.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": 0,
            "stream": false,
        });
        let mut resp = self
            .agent
            .post(&self.endpoint.url)
            .send_json(&body)
            .map_err(|e| SemanticsError::Transport(e.to_string()))?;
        let v: serde_json::Value =
            resp.body_mut().read_json().map_err(|e| SemanticsError::Transport(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| SemanticsError::Transport("response lacks choices[0].message.content".into()))
    }
}

/// Fixed replies in order; for tests.
#[derive(Debug, Clone, Default)]
pub struct ScriptedCompletion {
    replies: VecDeque<Result<String, String>>,
    pub prompts: Vec<String>,
}

impl ScriptedCompletion {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self { replies: replies.into_iter().map(|r| Ok(r.into())).collect(), prompts: Vec::new() }
    }

    /// Queues a transport failure.
    pub fn push_error(&mut self, msg: &str) {
        self.replies.push_back(Err(msg.to_string()));
    }

    pub fn push(&mut self, reply: &str) {
        self.replies.push_back(Ok(reply.to_string()));
    }
}

impl Completion for ScriptedCompletion {
    fn complete(&mut self, prompt: &str) -> Result<String, SemanticsError> {
        self.prompts.push(prompt.to_string());
        match self.replies.pop_front() {
            Some(Ok(r)) => Ok(r),
            Some(Err(e)) => Err(SemanticsError::Transport(e)),
            None => Err(SemanticsError::ReplayExhausted),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub timestamp: String,
    pub level: RankLevel,
    pub prompt: String,
    pub raw: String,
    pub validated: Vec<String>,
    pub retries: usize,
}

/// Replays recorded replies keyed by exact prompt text, in recorded order per prompt.
#[derive(Debug, Clone, Default)]
pub struct ReplayCompletion {
    replies: BTreeMap<String, VecDeque<String>>,
}

impl ReplayCompletion {
    pub fn from_records(records: &[TranscriptRecord]) -> Self {
        let mut replies: BTreeMap<String, VecDeque<String>> = BTreeMap::new();
        for r in records {
            replies.entry(r.prompt.clone()).or_default().push_back(r.raw.clone());
        }
        Self { replies }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SemanticsError> {
        Ok(Self::from_records(&TranscriptLog::read(path)?))
    }
}

impl Completion for ReplayCompletion {
    fn complete(&mut self, prompt: &str) -> Result<String, SemanticsError> {
        self.replies.get_mut(prompt).and_then(|q| q.pop_front()).ok_or(SemanticsError::ReplayExhausted)
    }
}

#[derive(Default)]
struct LogInner {
    records: Vec<TranscriptRecord>,
    file: Option<File>,
}

/// Append-only exchange log, optionally mirrored to a JSONL file. Cloning shares it.
#[derive(Clone, Default)]
pub struct TranscriptLog {
    inner: Arc<Mutex<LogInner>>,
}

impl TranscriptLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn to_file(path: impl AsRef<Path>) -> Result<Self, SemanticsError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { inner: Arc::new(Mutex::new(LogInner { records: Vec::new(), file: Some(file) })) })
    }

    pub fn append(&self, record: TranscriptRecord) -> Result<(), SemanticsError> {
        let mut g = self.inner.lock().expect("transcript lock");
        if let Some(f) = g.file.as_mut() {
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(f, "{line}")?;
        }
        g.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.inner.lock().expect("transcript lock").records.clone()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Vec<TranscriptRecord>, SemanticsError> {
        let f = File::open(path)?;
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| SemanticsError::Transport(format!("bad transcript line: {e}")))?);
        }
        Ok(out)
    }
}

/// LLM-backed ranker. Unusable answers (after corrections) and transport failures fall
/// back to the mock ranking and are flagged.
pub struct LlmRanker<C: Completion> {
    client: C,
    prompts: PromptSet,
    mock: MockRanker,
    log: TranscriptLog,
    pub retry_budget: usize,
    /// Extra attempts after a transport error; not counted against `retry_budget`.
    pub transport_retries: usize,
}

impl<C: Completion> LlmRanker<C> {
    pub fn new(client: C, mock: MockRanker, log: TranscriptLog) -> Self {
        Self { client, prompts: PromptSet::shipped(), mock, log, retry_budget: 2, transport_retries: 1 }
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn client(&self) -> &C {
        &self.client
    }

    fn call(client: &mut C, attempts: usize, prompt: &str) -> Result<String, SemanticsError> {
        let mut last = None;
        for _ in 0..=attempts {
            match client.complete(prompt) {
                Ok(r) => return Ok(r),
                Err(e @ SemanticsError::ReplayExhausted) => return Err(e),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn fallback(&mut self, req: &RankRequest, raw: Vec<String>, retries: usize) -> RankResponse {
        let mut r = self.mock.rank(req);
        r.raw = raw;
        r.retries = retries;
        r.valid = false;
        r.fallback = true;
        r
    }

    fn log(&self, level: RankLevel, prompt: &str, raw: &str, validated: &[String], retries: usize) {
        let record = TranscriptRecord {
            timestamp: chrono::Utc::now().to_rfc3339(),
            level,
            prompt: prompt.to_string(),
            raw: raw.to_string(),
            validated: validated.to_vec(),
            retries,
        };
        // A failing log file must not stop the search.
        let _ = self.log.append(record);
    }
}

impl<C: Completion> Ranker for LlmRanker<C> {
    fn name(&self) -> &str {
        "llm"
    }

    fn rank(&mut self, req: &RankRequest) -> RankResponse {
        if req.candidates.is_empty() {
            return RankResponse { valid: true, ..Default::default() };
        }
        let prompt = match build_prompt(req, &self.prompts) {
            Ok(p) => p,
            Err(_) => return self.fallback(req, Vec::new(), 0),
        };
        let first = match Self::call(&mut self.client, self.transport_retries, &prompt) {
            Ok(r) => r,
            Err(_) => return self.fallback(req, Vec::new(), 0),
        };
        let allow_none = req.level == RankLevel::CarrierClassify;
        let correction = self.prompts.correction.clone();
        let mut exchanges: Vec<(String, String)> = vec![(prompt.clone(), first.clone())];
        let client = &mut self.client;
        let transport_retries = self.transport_retries;
        let parsed = parse_and_correct(&first, &req.candidates, allow_none, self.retry_budget, &mut |prev| {
            let p = format!("{prompt}\n\nYour previous reply was: {prev}\n{correction}");
            let r = Self::call(client, transport_retries, &p)?;
            exchanges.push((p, r.clone()));
            Ok(r)
        });
        for (i, (p, r)) in exchanges.iter().enumerate() {
            let (labels, _) = super::prompt::tokenize(r, &req.candidates);
            self.log(req.level, p, r, &labels, i);
        }
        let raws: Vec<String> = exchanges.into_iter().map(|(_, r)| r).collect();
        let parsed = match parsed {
            Ok(p) if p.valid => p,
            Ok(p) => return self.fallback(req, raws, p.retries),
            Err(_) => {
                let retries = raws.len() - 1;
                return self.fallback(req, raws, retries);
            }
        };
        let mut labels = parsed.labels;
        match req.level {
            RankLevel::RoomType => labels.truncate(1),
            RankLevel::Room | RankLevel::CarrierRank => {
                // Rankings must be permutations; omitted candidates keep input order at the end.
                for c in &req.candidates {
                    if !labels.contains(c) {
                        labels.push(c.clone());
                    }
                }
            }
            RankLevel::CarrierClassify | RankLevel::Feature => {}
        }
        RankResponse { labels, raw: raws, valid: true, retries: parsed.retries, fallback: false, defaulted: false }
    }
}
