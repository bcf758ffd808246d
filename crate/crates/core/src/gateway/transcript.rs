//! On-disk store of recorded completions, keyed by request digest and sample
//! index, so a run can be replayed byte-identically with no network access.
//!
//! Layout inside the store directory, one file per sample:
//!
//! ```text
//! {request_digest}-{sample_index:03}.json   recorded text + usage share
//! {request_digest}.request.json             the request itself, for inspection
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    BackendResponse, CompletionBackend, CompletionRequest, CompletionSource, GatewayError,
};

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

/// One recorded sample. The request's input tokens are carried on sample 0
/// only; output tokens are split evenly across samples with the remainder on
/// sample 0, so summing shares reproduces the request totals exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptSample {
    pub schema_version: u32,
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RequestSidecar {
    schema_version: u32,
    request: CompletionRequest,
}

#[derive(Debug, Clone)]
pub struct TranscriptStore {
    dir: PathBuf,
}

impl TranscriptStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TranscriptStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn sample_path(&self, digest: &str, index: u32) -> PathBuf {
        self.dir.join(format!("{digest}-{index:03}.json"))
    }

    fn sidecar_path(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.request.json"))
    }

    pub fn contains(&self, request: &CompletionRequest) -> bool {
        let digest = request.digest();
        (0..request.n_samples).all(|i| self.sample_path(&digest, i).exists())
    }

    pub fn read(&self, request: &CompletionRequest) -> Result<BackendResponse, GatewayError> {
        let digest = request.digest();
        let mut texts = Vec::with_capacity(request.n_samples as usize);
        let mut input_tokens = 0;
        let mut output_tokens = 0;
        for index in 0..request.n_samples {
            let path = self.sample_path(&digest, index);
            let raw = fs::read_to_string(&path).map_err(|_| GatewayError::MissingTranscript {
                digest: digest.clone(),
                sample_index: index,
                dir: self.dir.display().to_string(),
            })?;
            let sample: TranscriptSample = serde_json::from_str(&raw).map_err(|e| {
                GatewayError::TranscriptIo(format!("{}: {e}", path.display()))
            })?;
            input_tokens += sample.input_tokens;
            output_tokens += sample.output_tokens;
            texts.push(sample.text);
        }
        Ok(BackendResponse {
            texts,
            input_tokens,
            output_tokens,
            source: CompletionSource::Replay,
        })
    }

    pub fn write(
        &self,
        request: &CompletionRequest,
        response: &BackendResponse,
    ) -> Result<(), GatewayError> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| GatewayError::TranscriptIo(format!("{}: {e}", self.dir.display())))?;
        let digest = request.digest();
        let n = response.texts.len() as u64;
        let share = response.output_tokens.checked_div(n).unwrap_or(0);
        let remainder = response.output_tokens.checked_rem(n).unwrap_or(0);
        for (index, text) in response.texts.iter().enumerate() {
            let sample = TranscriptSample {
                schema_version: TRANSCRIPT_SCHEMA_VERSION,
                text: text.clone(),
                input_tokens: if index == 0 { response.input_tokens } else { 0 },
                output_tokens: share + if index == 0 { remainder } else { 0 },
            };
            let path = self.sample_path(&digest, index as u32);
            let json = serde_json::to_string_pretty(&sample)
                .map_err(|e| GatewayError::TranscriptIo(e.to_string()))?;
            fs::write(&path, json)
                .map_err(|e| GatewayError::TranscriptIo(format!("{}: {e}", path.display())))?;
        }
        let sidecar = RequestSidecar {
            schema_version: TRANSCRIPT_SCHEMA_VERSION,
            request: request.clone(),
        };
        let path = self.sidecar_path(&digest);
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| GatewayError::TranscriptIo(e.to_string()))?;
        fs::write(&path, json)
            .map_err(|e| GatewayError::TranscriptIo(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

/// Serves completions from a transcript store only. A request whose digest is
/// absent is a hard error; it never falls through to the network.
pub struct ReplayBackend {
    store: TranscriptStore,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayBackend {
            store: TranscriptStore::new(dir),
        }
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendResponse, GatewayError> {
        self.store.read(request)
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}

/// Wraps another backend and persists every response it returns, making the
/// run replayable afterwards.
pub struct RecordingBackend {
    inner: Box<dyn CompletionBackend>,
    store: TranscriptStore,
}

impl RecordingBackend {
    pub fn new(inner: Box<dyn CompletionBackend>, dir: impl Into<PathBuf>) -> Self {
        RecordingBackend {
            inner,
            store: TranscriptStore::new(dir),
        }
    }
}

impl CompletionBackend for RecordingBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendResponse, GatewayError> {
        let response = self.inner.complete(request)?;
        self.store.write(request, &response)?;
        Ok(response)
    }

    fn name(&self) -> &'static str {
        "record"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::FnBackend;

    fn sampled_req() -> CompletionRequest {
        CompletionRequest::sampled("m", 0.8, 4, 100).section("issue", "fix the bug")
    }

    #[test]
    fn record_then_replay_round_trips_texts_and_usage() {
        let dir = tempfile::tempdir().unwrap();
        let live = FnBackend(|r: &CompletionRequest| {
            Ok((0..r.n_samples).map(|i| format!("sample {i}")).collect())
        });
        let recorder = RecordingBackend::new(Box::new(live), dir.path());
        let request = sampled_req();
        let recorded = recorder.complete(&request).unwrap();

        let replay = ReplayBackend::new(dir.path());
        let replayed = replay.complete(&request).unwrap();
        assert_eq!(replayed.texts, recorded.texts);
        assert_eq!(replayed.input_tokens, recorded.input_tokens);
        assert_eq!(replayed.output_tokens, recorded.output_tokens);
        assert_eq!(replayed.source, CompletionSource::Replay);
    }

    #[test]
    fn missing_transcript_is_an_error_not_a_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayBackend::new(dir.path());
        let err = replay.complete(&sampled_req()).unwrap_err();
        match err {
            GatewayError::MissingTranscript { sample_index, .. } => assert_eq!(sample_index, 0),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn partial_transcript_reports_the_missing_sample() {
        let dir = tempfile::tempdir().unwrap();
        let live = FnBackend(|r: &CompletionRequest| {
            Ok((0..r.n_samples).map(|i| format!("s{i}")).collect())
        });
        let recorder = RecordingBackend::new(Box::new(live), dir.path());
        let request = sampled_req();
        recorder.complete(&request).unwrap();
        let digest = request.digest();
        std::fs::remove_file(dir.path().join(format!("{digest}-002.json"))).unwrap();
        let replay = ReplayBackend::new(dir.path());
        match replay.complete(&request).unwrap_err() {
            GatewayError::MissingTranscript { sample_index, .. } => assert_eq!(sample_index, 2),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn output_token_split_conserves_totals() {
        let dir = tempfile::tempdir().unwrap();
        let store = TranscriptStore::new(dir.path());
        let request = CompletionRequest::sampled("m", 0.8, 3, 10).section("p", "x");
        let response = BackendResponse {
            texts: vec!["a".into(), "b".into(), "c".into()],
            input_tokens: 1000,
            output_tokens: 101,
            source: CompletionSource::Live,
        };
        store.write(&request, &response).unwrap();
        let back = store.read(&request).unwrap();
        assert_eq!(back.input_tokens, 1000);
        assert_eq!(back.output_tokens, 101);
        let raw = std::fs::read_to_string(
            dir.path().join(format!("{}-001.json", request.digest())),
        )
        .unwrap();
        let sample: TranscriptSample = serde_json::from_str(&raw).unwrap();
        assert_eq!(sample.input_tokens, 0);
        assert_eq!(sample.output_tokens, 33);
    }

    #[test]
    fn sidecar_preserves_the_request() {
        let dir = tempfile::tempdir().unwrap();
        let store = TranscriptStore::new(dir.path());
        let request = sampled_req();
        let response = BackendResponse {
            texts: (0..4).map(|i| i.to_string()).collect(),
            input_tokens: 10,
            output_tokens: 4,
            source: CompletionSource::Live,
        };
        store.write(&request, &response).unwrap();
        let raw = std::fs::read_to_string(
            dir.path().join(format!("{}.request.json", request.digest())),
        )
        .unwrap();
        let value: serde_json::Value = serde_json::from_str(&raw).unwrap();
        assert_eq!(value["request"]["model_name"], "m");
        assert_eq!(value["request"]["n_samples"], 4);
    }
}
