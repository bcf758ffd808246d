//! Completion interface over chat-style language models with pluggable
//! backends (live HTTP lives in the CLI crate; record and replay live here)
//! plus token and dollar accounting.

pub mod transcript;

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use transcript::{RecordingBackend, ReplayBackend, TranscriptStore};

/// One labeled block of prompt text. Requests carry an ordered list of these;
/// backends flatten them into the provider's message shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_name: String,
    pub temperature: f64,
    pub n_samples: u32,
    pub max_output_tokens: u32,
    pub prompt_sections: Vec<PromptSection>,
}

impl CompletionRequest {
    pub fn greedy(model_name: &str, max_output_tokens: u32) -> Self {
        CompletionRequest {
            model_name: model_name.to_string(),
            temperature: 0.0,
            n_samples: 1,
            max_output_tokens,
            prompt_sections: Vec::new(),
        }
    }

    pub fn sampled(model_name: &str, temperature: f64, n_samples: u32, max_output_tokens: u32) -> Self {
        CompletionRequest {
            model_name: model_name.to_string(),
            temperature,
            n_samples,
            max_output_tokens,
            prompt_sections: Vec::new(),
        }
    }

    pub fn section(mut self, label: &str, text: impl Into<String>) -> Self {
        self.prompt_sections.push(PromptSection {
            label: label.to_string(),
            text: text.into(),
        });
        self
    }

    /// Flat prompt text: sections joined by blank lines, each preceded by a
    /// `### {label}` marker line.
    pub fn prompt_text(&self) -> String {
        let mut out = String::new();
        for s in &self.prompt_sections {
            out.push_str("### ");
            out.push_str(&s.label);
            out.push('\n');
            out.push_str(&s.text);
            if !s.text.ends_with('\n') {
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    /// Content digest keying the transcript store. Serialization of the
    /// request struct is canonical (fixed field and section order), so equal
    /// requests always digest identically.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("request serialization cannot fail");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex(&hasher.finalize())
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.n_samples == 0 {
            return Err(GatewayError::InvalidRequest("n_samples must be at least 1".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_output_tokens must be at least 1".into(),
            ));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.prompt_sections.is_empty() {
            return Err(GatewayError::InvalidRequest("prompt is empty".into()));
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    hex(&hasher.finalize())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub dollar_cost: f64,
}

impl TokenUsage {
    pub fn add(&mut self, other: &TokenUsage) {
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
        self.dollar_cost += other.dollar_cost;
    }

    pub fn total_tokens(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompletionSource {
    Live,
    Replay,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub texts: Vec<String>,
    pub usage: TokenUsage,
    pub source: CompletionSource,
}

/// Raw backend answer before pricing.
#[derive(Debug, Clone)]
pub struct BackendResponse {
    pub texts: Vec<String>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub source: CompletionSource,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("transport failure: {message}")]
    Transport { message: String, transient: bool },
    #[error("missing transcript {digest} sample {sample_index} in {dir}")]
    MissingTranscript {
        digest: String,
        sample_index: u32,
        dir: String,
    },
    #[error("run budget exceeded: cap ${cap:.2}, spent ${spent:.2}")]
    BudgetExceeded { cap: f64, spent: f64 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transcript io: {0}")]
    TranscriptIo(String),
    #[error("backend returned {got} texts for n_samples {want}")]
    SampleCountMismatch { got: usize, want: u32 },
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendResponse, GatewayError>;
    fn name(&self) -> &'static str;
}

/// Backend driven by a closure. Used by tests and corpus generation; usage
/// numbers are a coarse chars/4 estimate.
pub struct FnBackend<F>(pub F);

impl<F> CompletionBackend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<Vec<String>, GatewayError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<BackendResponse, GatewayError> {
        let texts = (self.0)(request)?;
        let input_tokens = (request.prompt_text().len() / 4) as u64;
        let output_tokens = texts.iter().map(|t| (t.len() / 4) as u64).sum();
        Ok(BackendResponse {
            texts,
            input_tokens,
            output_tokens,
            source: CompletionSource::Live,
        })
    }

    fn name(&self) -> &'static str {
        "scripted"
    }
}

/// Per-model price table entry, dollars per million tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelPrices {
    pub input_per_mtok: f64,
    pub output_per_mtok: f64,
}

impl ModelPrices {
    pub fn cost(&self, input_tokens: u64, output_tokens: u64) -> f64 {
        (input_tokens as f64 * self.input_per_mtok + output_tokens as f64 * self.output_per_mtok)
            / 1_000_000.0
    }
}

/// One ledger row: what a single request consumed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestLogEntry {
    pub task_id: String,
    pub request_digest: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub per_task: BTreeMap<String, TokenUsage>,
    pub total: TokenUsage,
    pub requests: Vec<RequestLogEntry>,
}

impl LedgerSnapshot {
    pub fn task_usage(&self, task_id: &str) -> TokenUsage {
        self.per_task.get(task_id).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Shared entry point for all model traffic: prices responses, enforces the
/// optional dollar cap, retries transient transport failures, and keeps the
/// run ledger. Safe to share across worker threads.
pub struct Gateway {
    backend: Box<dyn CompletionBackend>,
    prices: BTreeMap<String, ModelPrices>,
    dollar_cap: Option<f64>,
    retry: RetryPolicy,
    ledger: Mutex<LedgerSnapshot>,
}

impl Gateway {
    pub fn new(backend: Box<dyn CompletionBackend>, prices: BTreeMap<String, ModelPrices>) -> Self {
        Gateway {
            backend,
            prices,
            dollar_cap: None,
            retry: RetryPolicy::default(),
            ledger: Mutex::new(LedgerSnapshot::default()),
        }
    }

    pub fn with_dollar_cap(mut self, cap: Option<f64>) -> Self {
        self.dollar_cap = cap;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn complete(
        &self,
        task_id: &str,
        request: &CompletionRequest,
    ) -> Result<CompletionResult, GatewayError> {
        request.validate()?;
        if let Some(cap) = self.dollar_cap {
            let spent = self.ledger.lock().unwrap().total.dollar_cost;
            if spent >= cap {
                return Err(GatewayError::BudgetExceeded { cap, spent });
            }
        }
        let response = self.call_with_retry(request)?;
        if response.texts.len() != request.n_samples as usize {
            return Err(GatewayError::SampleCountMismatch {
                got: response.texts.len(),
                want: request.n_samples,
            });
        }
        let prices = self.prices.get(&request.model_name).copied().unwrap_or_default();
        let usage = TokenUsage {
            input_tokens: response.input_tokens,
            output_tokens: response.output_tokens,
            dollar_cost: prices.cost(response.input_tokens, response.output_tokens),
        };
        let mut ledger = self.ledger.lock().unwrap();
        ledger.per_task.entry(task_id.to_string()).or_default().add(&usage);
        ledger.total.add(&usage);
        ledger.requests.push(RequestLogEntry {
            task_id: task_id.to_string(),
            request_digest: request.digest(),
            usage,
        });
        Ok(CompletionResult {
            texts: response.texts,
            usage,
            source: response.source,
        })
    }

    fn call_with_retry(&self, request: &CompletionRequest) -> Result<BackendResponse, GatewayError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.backend.complete(request) {
                Ok(r) => return Ok(r),
                Err(GatewayError::Transport { message, transient })
                    if transient && attempt < self.retry.max_attempts =>
                {
                    let delay = self.retry.base_delay * 2u32.pow(attempt - 1);
                    log::warn!(
                        "transient transport failure (attempt {attempt}/{}): {message}; retrying in {delay:?}",
                        self.retry.max_attempts
                    );
                    std::thread::sleep(delay);
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn ledger(&self) -> LedgerSnapshot {
        self.ledger.lock().unwrap().clone()
    }
}
