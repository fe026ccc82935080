//! Templated LLM calls with retries, run budgets and full call records.

mod templates;
mod transport;

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use templates::{
    augment_for_empty_data, empty_data_notes, render_named, render_prompt, PromptError, TemplateId, SLOTS,
};
pub use transport::{
    ChatRequest, ChatResponse, LiveTransport, Message, MockTransport, ReplayTransport, Transport, TransportFailure,
    DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("authentication error: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { message: String, attempts: u32 },
    #[error("call budget of {budget} exhausted")]
    BudgetExceeded { budget: u32 },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("trace error: {0}")]
    Trace(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts per call, including the first.
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    #[serde(with = "millis")]
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_secs(2),
            max_delay: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `n + 1` after `n` failures: exponential, capped.
    pub fn backoff(&self, failures: u32) -> Duration {
        let factor = 2u32.saturating_pow(failures.saturating_sub(1));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub retry: RetryPolicy,
    /// Minimum spacing between requests sent through one gateway.
    #[serde(with = "millis")]
    pub min_interval: Duration,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            model: "gpt-4o".into(),
            temperature: 0.0,
            max_tokens: None,
            seed: Some(0),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            min_interval: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// `ok`, or the failure text.
    pub outcome: String,
    pub wall_seconds: f64,
}

/// One completed LLM call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    /// 1-based position within its strategy run.
    pub sequence: u32,
    pub template: TemplateId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    pub transport: String,
    pub model: String,
    pub prompt: String,
    pub response: String,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
    #[serde(default)]
    pub attempts: Vec<AttemptRecord>,
}

/// Writes records as JSON lines.
pub fn write_trace(path: &Path, records: &[CallRecord]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Call accounting for one strategy run. Shared by reference; the counter is
/// atomic so a run's calls are numbered 1..k without gaps.
#[derive(Debug)]
pub struct RunBudget {
    limit: u32,
    used: AtomicU32,
    instance: Option<String>,
    strategy: Option<String>,
}

impl RunBudget {
    pub fn new(limit: u32) -> Self {
        Self {
            limit,
            used: AtomicU32::new(0),
            instance: None,
            strategy: None,
        }
    }

    pub fn labelled(limit: u32, instance: impl Into<String>, strategy: impl Into<String>) -> Self {
        Self {
            instance: Some(instance.into()),
            strategy: Some(strategy.into()),
            ..Self::new(limit)
        }
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }

    pub fn used(&self) -> u32 {
        self.used.load(Ordering::SeqCst)
    }

    fn reserve(&self) -> Result<u32, GatewayError> {
        self.used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| {
                (u < self.limit).then_some(u + 1)
            })
            .map(|prev| prev + 1)
            .map_err(|_| GatewayError::BudgetExceeded { budget: self.limit })
    }
}

/// Shareable entry point for all LLM traffic.
pub struct Gateway {
    transport: Arc<dyn Transport>,
    config: CompletionConfig,
    next_slot: Mutex<Instant>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("transport", &self.transport.identity())
            .field("config", &self.config)
            .finish()
    }
}

impl Gateway {
    pub fn new(transport: Arc<dyn Transport>, config: CompletionConfig) -> Self {
        Self {
            transport,
            config,
            next_slot: Mutex::new(Instant::now()),
        }
    }

    pub fn config(&self) -> &CompletionConfig {
        &self.config
    }

    pub fn transport_identity(&self) -> String {
        self.transport.identity()
    }

    fn pace(&self) {
        if self.config.min_interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next_slot.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.config.min_interval;
            slot - now
        };
        std::thread::sleep(wait);
    }

    fn request(&self, messages: Vec<Message>) -> ChatRequest {
        ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            seed: self.config.seed,
            timeout: self.config.timeout,
        }
    }

    /// One request with pacing and retries. `label` names the call in logs.
    fn send_with_retry(
        &self,
        request: &ChatRequest,
        label: &str,
    ) -> Result<(ChatResponse, Vec<AttemptRecord>), GatewayError> {
        let mut attempts = Vec::new();
        let max = self.config.retry.max_attempts.max(1);
        loop {
            self.pace();
            let t0 = Instant::now();
            let result = self.transport.send(request);
            let wall_seconds = t0.elapsed().as_secs_f64();
            let n = attempts.len() as u32 + 1;
            match result {
                Ok(resp) => {
                    attempts.push(AttemptRecord {
                        outcome: "ok".into(),
                        wall_seconds,
                    });
                    return Ok((resp, attempts));
                }
                Err(failure) => {
                    log::warn!("{label}, attempt {n}/{max}: {failure}");
                    attempts.push(AttemptRecord {
                        outcome: failure.to_string(),
                        wall_seconds,
                    });
                    if !failure.is_retryable() || n >= max {
                        return Err(match failure {
                            TransportFailure::Auth(m) => GatewayError::Auth(m),
                            TransportFailure::RateLimited { .. } => GatewayError::RateLimited { attempts: n },
                            other => GatewayError::Transport {
                                message: other.to_string(),
                                attempts: n,
                            },
                        });
                    }
                    let delay = match failure {
                        TransportFailure::RateLimited { retry_after: Some(d) } => d.min(self.config.retry.max_delay),
                        _ => self.config.retry.backoff(n),
                    };
                    std::thread::sleep(delay);
                }
            }
        }
    }

    /// Sends `prompt` as a single user message, retrying transient failures
    /// per the retry policy. Consumes one unit of `budget` even if it fails.
    pub fn complete(
        &self,
        budget: &RunBudget,
        template: TemplateId,
        prompt: String,
    ) -> Result<CallRecord, GatewayError> {
        let sequence = budget.reserve()?;
        let request = self.request(vec![Message {
            role: "user".into(),
            content: prompt,
        }]);
        let started = Instant::now();
        let (resp, attempts) = self.send_with_retry(&request, &format!("{template} call {sequence}"))?;
        let ChatRequest {
            model, mut messages, ..
        } = request;
        Ok(CallRecord {
            sequence,
            template,
            instance: budget.instance.clone(),
            strategy: budget.strategy.clone(),
            transport: self.transport.identity(),
            model,
            prompt: messages.pop().map(|m| m.content).unwrap_or_default(),
            response: resp.content,
            wall_seconds: started.elapsed().as_secs_f64(),
            prompt_tokens: resp.prompt_tokens,
            completion_tokens: resp.completion_tokens,
            attempts,
        })
    }

    /// A free-form multi-turn exchange (no template, no budget).
    pub fn chat(&self, messages: Vec<Message>) -> Result<ChatResponse, GatewayError> {
        let request = self.request(messages);
        self.send_with_retry(&request, "chat").map(|(r, _)| r)
    }

    /// Renders `template` and sends it; `empty_data` appends the
    /// empty-data instructions.
    pub fn complete_template<K, V>(
        &self,
        budget: &RunBudget,
        template: TemplateId,
        slots: impl IntoIterator<Item = (K, V)>,
        empty_data: bool,
    ) -> Result<CallRecord, GatewayError>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut prompt = render_prompt(template, slots)?;
        if empty_data {
            prompt = augment_for_empty_data(&prompt);
        }
        self.complete(budget, template, prompt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> CompletionConfig {
        CompletionConfig {
            retry: RetryPolicy {
                max_attempts: 3,
                base_delay: Duration::ZERO,
                max_delay: Duration::ZERO,
            },
            ..CompletionConfig::default()
        }
    }

    #[test]
    fn echo() {
        let gw = Gateway::new(Arc::new(MockTransport::echo()), fast());
        let budget = RunBudget::new(1);
        let r = gw.complete(&budget, TemplateId::Baseline, "hello".into()).unwrap();
        assert_eq!(r.response, "hello");
        assert_eq!(r.sequence, 1);
        assert_eq!(r.transport, "mock:echo");
    }

    #[test]
    fn transient_failures_are_retried() {
        let t = MockTransport::scripted([
            Err(TransportFailure::Transient("502".into())),
            Err(TransportFailure::RateLimited { retry_after: None }),
            Ok("done".into()),
        ]);
        let gw = Gateway::new(Arc::new(t), fast());
        let r = gw.complete(&RunBudget::new(5), TemplateId::Cot, "p".into()).unwrap();
        assert_eq!(r.response, "done");
        assert_eq!(r.attempts.len(), 3);
        assert_eq!(r.attempts[2].outcome, "ok");
    }

    #[test]
    fn retries_exhausted() {
        let t = MockTransport::scripted((0..3).map(|_| Err(TransportFailure::RateLimited { retry_after: None })));
        let gw = Gateway::new(Arc::new(t), fast());
        let err = gw
            .complete(&RunBudget::new(5), TemplateId::Cot, "p".into())
            .unwrap_err();
        assert_eq!(err, GatewayError::RateLimited { attempts: 3 });
    }

    #[test]
    fn auth_is_not_retried() {
        let t = MockTransport::scripted([Err(TransportFailure::Auth("401".into())), Ok("never".into())]);
        let gw = Gateway::new(Arc::new(t), fast());
        let err = gw
            .complete(&RunBudget::new(5), TemplateId::Cot, "p".into())
            .unwrap_err();
        assert!(matches!(err, GatewayError::Auth(_)));
    }

    #[test]
    fn budget_is_enforced_and_sequenced() {
        let gw = Gateway::new(Arc::new(MockTransport::echo()), fast());
        let budget = RunBudget::new(2);
        let seqs: Vec<u32> = (0..2)
            .map(|_| gw.complete(&budget, TemplateId::Baseline, "x".into()).unwrap().sequence)
            .collect();
        assert_eq!(seqs, [1, 2]);
        assert_eq!(
            gw.complete(&budget, TemplateId::Baseline, "x".into()).unwrap_err(),
            GatewayError::BudgetExceeded { budget: 2 }
        );
    }

    #[test]
    fn missing_credential() {
        let err = LiveTransport::from_env(DEFAULT_ENDPOINT, "ZINCPILOT_TEST_UNSET_KEY_VAR").unwrap_err();
        assert!(matches!(err, GatewayError::Auth(_)));
    }

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy {
            max_attempts: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(500),
        };
        let ds: Vec<u128> = (1..=5).map(|n| p.backoff(n).as_millis()).collect();
        assert_eq!(ds, [100, 200, 400, 500, 500]);
    }

    #[test]
    fn pacing_spaces_requests() {
        let cfg = CompletionConfig {
            min_interval: Duration::from_millis(30),
            ..fast()
        };
        let gw = Gateway::new(Arc::new(MockTransport::echo()), cfg);
        let budget = RunBudget::new(3);
        let t0 = Instant::now();
        for _ in 0..3 {
            gw.complete(&budget, TemplateId::Baseline, "x".into()).unwrap();
        }
        assert!(t0.elapsed() >= Duration::from_millis(60));
    }
}
