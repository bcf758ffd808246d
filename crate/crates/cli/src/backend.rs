//! Live chat-completions backend. The API key is read from the environment
//! variable named in the config and is never written to disk or logs.

use repomend_core::gateway::{
    BackendResponse, CompletionBackend, CompletionRequest, CompletionSource, GatewayError,
};
use serde_json::{json, Value};

pub struct HttpBackend {
    api_base: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(api_base: &str, api_key_env: &str) -> Result<Self, GatewayError> {
        let api_key = std::env::var(api_key_env).map_err(|_| GatewayError::Transport {
            message: format!("environment variable {api_key_env} is not set"),
            transient: false,
        })?;
        Ok(HttpBackend {
            api_base: api_base.trim_end_matches('/').to_string(),
            api_key,
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(300))
                .build(),
        })
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendResponse, GatewayError> {
        let url = format!("{}/chat/completions", self.api_base);
        let body = json!({
            "model": request.model_name,
            "messages": [{"role": "user", "content": request.prompt_text()}],
            "temperature": request.temperature,
            "n": request.n_samples,
            "max_tokens": request.max_output_tokens,
        });
        let response = self
            .agent
            .post(&url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .set("Content-Type", "application/json")
            .send_json(body);
        let value: Value = match response {
            Ok(r) => r.into_json().map_err(|e| GatewayError::Transport {
                message: format!("malformed response body: {e}"),
                transient: false,
            })?,
            Err(ureq::Error::Status(code, r)) => {
                let detail = r.into_string().unwrap_or_default();
                return Err(GatewayError::Transport {
                    message: format!("http {code}: {}", detail.chars().take(400).collect::<String>()),
                    transient: code == 429 || code >= 500,
                });
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(GatewayError::Transport {
                    message: t.to_string(),
                    transient: true,
                });
            }
        };
        parse_completion(&value)
    }

    fn name(&self) -> &'static str {
        "live"
    }
}

fn parse_completion(value: &Value) -> Result<BackendResponse, GatewayError> {
    let malformed = |what: &str| GatewayError::Transport {
        message: format!("response missing {what}"),
        transient: false,
    };
    let choices = value["choices"].as_array().ok_or_else(|| malformed("choices"))?;
    let mut texts = Vec::with_capacity(choices.len());
    for choice in choices {
        let text = choice["message"]["content"]
            .as_str()
            .ok_or_else(|| malformed("choices[].message.content"))?;
        texts.push(text.to_string());
    }
    let input_tokens = value["usage"]["prompt_tokens"].as_u64().unwrap_or(0);
    let output_tokens = value["usage"]["completion_tokens"].as_u64().unwrap_or(0);
    Ok(BackendResponse {
        texts,
        input_tokens,
        output_tokens,
        source: CompletionSource::Live,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_multi_choice_completion() {
        let value = json!({
            "choices": [
                {"message": {"content": "first"}},
                {"message": {"content": "second"}},
            ],
            "usage": {"prompt_tokens": 12, "completion_tokens": 7},
        });
        let response = parse_completion(&value).unwrap();
        assert_eq!(response.texts, vec!["first".to_string(), "second".to_string()]);
        assert_eq!(response.input_tokens, 12);
        assert_eq!(response.output_tokens, 7);
    }

    #[test]
    fn missing_content_is_an_error() {
        let value = json!({"choices": [{"message": {}}]});
        assert!(parse_completion(&value).is_err());
    }

    #[test]
    fn missing_key_env_is_reported() {
        let err = HttpBackend::new("https://example.invalid/v1", "REPOMEND_NO_SUCH_KEY_VAR");
        assert!(matches!(err, Err(GatewayError::Transport { transient: false, .. })));
    }
}
