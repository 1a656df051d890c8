use std::time::Duration;

use async_trait::async_trait;
use futures_util::{SinkExt, StreamExt};
use serde::de::DeserializeOwned;
use shine_core::bot::{BotDriver, BotError};
use shine_core::session::{CreateSessionRequest, CreatedSession, SessionSummary, SessionView, WireEvent};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

const READ_TIMEOUT: Duration = Duration::from_secs(10);

fn driver_err(e: impl std::fmt::Display) -> BotError {
    BotError::Driver(e.to_string())
}

/// Drives a session over the REST and WebSocket protocol.
///
/// After each client frame a Ping is sent; everything received before the
/// matching Pong is the frame's response.
pub struct NetworkDriver {
    http: reqwest::Client,
    base: String,
    session_id: Option<String>,
    ws_url: Option<String>,
    socket: Option<Socket>,
    barrier: u64,
    /// Every server event received, in arrival order.
    pub received: Vec<WireEvent>,
}

impl NetworkDriver {
    /// `base` is the HTTP origin, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        NetworkDriver {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_string(),
            session_id: None,
            ws_url: None,
            socket: None,
            barrier: 0,
            received: Vec::new(),
        }
    }

    /// Socket URL, with token, of the session this driver created.
    pub fn ws_url(&self) -> Option<&str> {
        self.ws_url.as_deref()
    }

    fn id(&self) -> Result<&str, BotError> {
        self.session_id.as_deref().ok_or_else(|| driver_err("no session"))
    }

    async fn decode<T: DeserializeOwned>(response: reqwest::Response) -> Result<T, BotError> {
        let status = response.status();
        let text = response.text().await.map_err(driver_err)?;
        if !status.is_success() {
            return Err(driver_err(format!("HTTP {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(driver_err)
    }

    async fn next_frame(&mut self) -> Result<Message, BotError> {
        let socket = self.socket.as_mut().ok_or_else(|| driver_err("socket not connected"))?;
        match tokio::time::timeout(READ_TIMEOUT, socket.next()).await {
            Ok(Some(Ok(m))) => Ok(m),
            Ok(Some(Err(e))) => Err(driver_err(e)),
            Ok(None) => Err(driver_err("socket closed")),
            Err(_) => Err(driver_err("timed out waiting for the server")),
        }
    }

    fn push(&mut self, text: &str, into: &mut Vec<WireEvent>) -> Result<(), BotError> {
        let event: WireEvent = serde_json::from_str(text).map_err(driver_err)?;
        self.received.push(event.clone());
        into.push(event);
        Ok(())
    }

    /// Collects server events until the server has answered a fresh Ping.
    async fn barrier(&mut self) -> Result<Vec<WireEvent>, BotError> {
        self.barrier += 1;
        let tag = self.barrier.to_be_bytes().to_vec();
        let socket = self.socket.as_mut().ok_or_else(|| driver_err("socket not connected"))?;
        socket.send(Message::Ping(tag.clone().into())).await.map_err(driver_err)?;
        let mut out = Vec::new();
        loop {
            match self.next_frame().await? {
                Message::Text(text) => self.push(text.as_str(), &mut out)?,
                Message::Pong(p) if p.as_ref() == tag.as_slice() => return Ok(out),
                Message::Close(_) => return Err(driver_err("server closed the socket")),
                _ => {}
            }
        }
    }

    /// Connects the socket and returns the initial snapshot event.
    pub async fn connect(&mut self, ws_url: &str) -> Result<WireEvent, BotError> {
        let (socket, _) = tokio_tungstenite::connect_async(ws_url).await.map_err(driver_err)?;
        self.socket = Some(socket);
        loop {
            if let Message::Text(text) = self.next_frame().await? {
                let mut first = Vec::new();
                self.push(text.as_str(), &mut first)?;
                return Ok(first.remove(0));
            }
        }
    }

    /// Sends a raw text frame and returns the response events.
    pub async fn send_text(&mut self, text: &str) -> Result<Vec<WireEvent>, BotError> {
        let socket = self.socket.as_mut().ok_or_else(|| driver_err("socket not connected"))?;
        socket.send(Message::Text(text.to_string().into())).await.map_err(driver_err)?;
        self.barrier().await
    }
}

#[async_trait]
impl BotDriver for NetworkDriver {
    async fn create(&mut self, request: CreateSessionRequest) -> Result<String, BotError> {
        let response = self.http.post(format!("{}/api/sessions", self.base)).json(&request).send().await.map_err(driver_err)?;
        let created: CreatedSession = Self::decode(response).await?;
        self.session_id = Some(created.session_id.clone());
        self.ws_url = Some(created.ws_url.clone());
        self.connect(&created.ws_url).await?;
        Ok(created.session_id)
    }

    async fn send(&mut self, event: WireEvent) -> Result<Vec<WireEvent>, BotError> {
        let text = serde_json::to_string(&event).map_err(driver_err)?;
        self.send_text(&text).await
    }

    async fn advance(&mut self, to_ms: u64) -> Result<Vec<WireEvent>, BotError> {
        let url = format!("{}/api/sessions/{}/advance", self.base, self.id()?);
        let response = self.http.post(url).json(&serde_json::json!({"toMs": to_ms})).send().await.map_err(driver_err)?;
        let _: Vec<WireEvent> = Self::decode(response).await?;
        self.barrier().await
    }

    async fn state(&mut self) -> Result<SessionView, BotError> {
        let url = format!("{}/api/sessions/{}/state", self.base, self.id()?);
        Self::decode(self.http.get(url).send().await.map_err(driver_err)?).await
    }

    async fn complete(&mut self) -> Result<SessionSummary, BotError> {
        let url = format!("{}/api/sessions/{}/complete", self.base, self.id()?);
        let summary = Self::decode(self.http.post(url).send().await.map_err(driver_err)?).await?;
        self.barrier().await?;
        Ok(summary)
    }
}
