//! Async client for the dtapprox service.

use std::time::Duration;

use dtapprox_core::api::{
    EmitRequest, EmitResponse, ErrorBody, EvaluateRequest, EvaluateResponse, JobCreated, JobState, JobStatus,
    OptimizeRequest, OptimizeResponse, ReportRequest, TrainRequest, TrainResponse,
};
use dtapprox_core::pipeline::Report;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service rejected the request.
    #[error("{}", .body.message)]
    Api { status: u16, body: ErrorBody },

    #[error("cannot reach service at {url}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },

    #[error("unexpected reply from {url}: {message}")]
    Protocol { url: String, message: String },
}

impl ClientError {
    /// True when the service reported a bug or replied with something
    /// unreadable. An unreachable service is treated as bad input.
    pub fn is_internal(&self) -> bool {
        match self {
            ClientError::Api { body, .. } => body.internal,
            ClientError::Transport { .. } => false,
            ClientError::Protocol { .. } => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
    poll_interval: Duration,
}

impl Client {
    /// `base` is e.g. `http://127.0.0.1:8650`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
            poll_interval: Duration::from_millis(50),
        }
    }

    pub fn with_poll_interval(mut self, every: Duration) -> Self {
        self.poll_interval = every;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(&self, url: String, resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|source| ClientError::Transport {
            url: url.clone(),
            source,
        })?;
        if status.is_success() {
            return serde_json::from_slice(&bytes).map_err(|e| ClientError::Protocol {
                url,
                message: e.to_string(),
            });
        }
        match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(body) => Err(ClientError::Api {
                status: status.as_u16(),
                body,
            }),
            Err(_) => Err(ClientError::Protocol {
                url,
                message: format!("status {status}: {}", String::from_utf8_lossy(&bytes)),
            }),
        }
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let resp = self
            .http
            .post(&url)
            .json(body)
            .send()
            .await
            .map_err(|source| ClientError::Transport {
                url: url.clone(),
                source,
            })?;
        self.decode(url, resp).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let resp = self
            .http
            .get(&url)
            .send()
            .await
            .map_err(|source| ClientError::Transport {
                url: url.clone(),
                source,
            })?;
        self.decode(url, resp).await
    }

    pub async fn health(&self) -> Result<()> {
        let url = format!("{}/healthz", self.base);
        let resp = self
            .http
            .get(&url)
            .send()
            .await
            .map_err(|source| ClientError::Transport {
                url: url.clone(),
                source,
            })?;
        if resp.status().is_success() {
            Ok(())
        } else {
            Err(ClientError::Protocol {
                url,
                message: format!("status {}", resp.status()),
            })
        }
    }

    pub async fn train(&self, req: &TrainRequest) -> Result<TrainResponse> {
        self.post("/v1/train", req).await
    }

    pub async fn evaluate(&self, req: &EvaluateRequest) -> Result<EvaluateResponse> {
        self.post("/v1/evaluate", req).await
    }

    /// Blocks on the server until the run finishes.
    pub async fn optimize(&self, req: &OptimizeRequest) -> Result<OptimizeResponse> {
        self.post("/v1/optimize", req).await
    }

    pub async fn submit(&self, req: &OptimizeRequest) -> Result<u64> {
        let created: JobCreated = self.post("/v1/jobs", req).await?;
        Ok(created.id)
    }

    pub async fn job(&self, id: u64) -> Result<JobStatus> {
        self.get(&format!("/v1/jobs/{id}")).await
    }

    pub async fn jobs(&self) -> Result<Vec<JobStatus>> {
        self.get("/v1/jobs").await
    }

    /// Polls job `id` until it settles, calling `progress(generation, total)`
    /// whenever the completed generation count changes.
    pub async fn wait<F>(&self, id: u64, mut progress: F) -> Result<OptimizeResponse>
    where
        F: FnMut(usize, usize),
    {
        let mut last = None;
        loop {
            let status = self.job(id).await?;
            if last != Some(status.generation) {
                progress(status.generation, status.generations);
                last = Some(status.generation);
            }
            match status.state {
                JobState::Running => tokio::time::sleep(self.poll_interval).await,
                JobState::Done => {
                    return status.result.ok_or_else(|| ClientError::Protocol {
                        url: format!("{}/v1/jobs/{id}", self.base),
                        message: "finished job has no result".into(),
                    })
                }
                JobState::Failed => {
                    let body = status.error.unwrap_or(ErrorBody {
                        kind: "internal".into(),
                        message: "job failed without an error report".into(),
                        internal: true,
                    });
                    let code = if body.internal { 500 } else { 400 };
                    return Err(ClientError::Api { status: code, body });
                }
            }
        }
    }

    /// Submits an optimization job and waits for it.
    pub async fn run_job<F>(&self, req: &OptimizeRequest, progress: F) -> Result<OptimizeResponse>
    where
        F: FnMut(usize, usize),
    {
        let id = self.submit(req).await?;
        self.wait(id, progress).await
    }

    pub async fn emit(&self, req: &EmitRequest) -> Result<EmitResponse> {
        self.post("/v1/emit", req).await
    }

    pub async fn report(&self, req: &ReportRequest) -> Result<Report> {
        self.post("/v1/report", req).await
    }
}
