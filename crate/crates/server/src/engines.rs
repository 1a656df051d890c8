use std::sync::Arc;

use async_trait::async_trait;
use futures_util::{SinkExt, StreamExt};
use shine_core::explain::{EngineError, ExplanationEngine, ExternalRequest, ExternalResponse};
use shine_core::scenario::{EngineEndpoint, EngineTransport};
use shine_core::session::EngineProvider;
use tokio_tungstenite::tungstenite::Message;

/// JSON request/response over HTTP POST.
pub struct RestEngine {
    client: reqwest::Client,
    url: String,
}

impl RestEngine {
    pub fn new(client: reqwest::Client, url: impl Into<String>) -> Self {
        RestEngine { client, url: url.into() }
    }
}

#[async_trait]
impl ExplanationEngine for RestEngine {
    async fn explain(&self, request: &ExternalRequest) -> Result<ExternalResponse, EngineError> {
        let response = self
            .client
            .post(&self.url)
            .json(request)
            .send()
            .await
            .map_err(|e| EngineError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(EngineError::Protocol(format!("engine answered HTTP {status}")));
        }
        response.json().await.map_err(|e| EngineError::Protocol(e.to_string()))
    }
}

/// One request frame and one response frame per connection.
pub struct WsEngine {
    url: String,
}

impl WsEngine {
    pub fn new(url: impl Into<String>) -> Self {
        WsEngine { url: url.into() }
    }
}

#[async_trait]
impl ExplanationEngine for WsEngine {
    async fn explain(&self, request: &ExternalRequest) -> Result<ExternalResponse, EngineError> {
        let (mut socket, _) = tokio_tungstenite::connect_async(self.url.as_str())
            .await
            .map_err(|e| EngineError::Transport(e.to_string()))?;
        let body = serde_json::to_string(request).map_err(|e| EngineError::Protocol(e.to_string()))?;
        socket.send(Message::Text(body.into())).await.map_err(|e| EngineError::Transport(e.to_string()))?;
        loop {
            match socket.next().await {
                Some(Ok(Message::Text(text))) => {
                    let _ = socket.close(None).await;
                    return serde_json::from_str(text.as_str()).map_err(|e| EngineError::Protocol(e.to_string()));
                }
                Some(Ok(Message::Close(_))) | None => {
                    return Err(EngineError::Transport("engine closed the connection before answering".into()))
                }
                Some(Ok(_)) => continue,
                Some(Err(e)) => return Err(EngineError::Transport(e.to_string())),
            }
        }
    }
}

/// Engine clients for both transports, sharing one HTTP client.
#[derive(Default)]
pub struct NetworkEngines {
    client: reqwest::Client,
}

impl NetworkEngines {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EngineProvider for NetworkEngines {
    fn engine(&self, endpoint: &EngineEndpoint) -> Option<Arc<dyn ExplanationEngine>> {
        Some(match endpoint.transport {
            EngineTransport::Rest => Arc::new(RestEngine::new(self.client.clone(), endpoint.url.clone())),
            EngineTransport::Websocket => Arc::new(WsEngine::new(endpoint.url.clone())),
        })
    }
}
