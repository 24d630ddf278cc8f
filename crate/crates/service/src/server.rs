//! HTTP and WebSocket front end.
//!
//! A dedicated thread owns the [`Session`] and ticks it at a fixed rate.
//! Operator messages from every client funnel into one queue that the loop
//! drains between ticks. FRAME and STATUS messages fan out to all clients;
//! replies and ERRORs go only to the client that caused them.

use crate::protocol::{parse_operator_message, OperatorMessage, ServerMessage, StatusPayload};
use crate::session::{Session, SessionConfig, SessionError};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};
use thiserror::Error;
use tokio::sync::{broadcast, mpsc, oneshot, watch};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("cannot open log file {path}: {source}")]
    Log { path: PathBuf, source: std::io::Error },
    #[error("tick rate must be positive, got {0}")]
    Rate(f64),
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Ticks per second.
    pub rate: f64,
    /// JSON-lines session event log.
    pub event_log: Option<PathBuf>,
    /// Raw length-prefixed RCP stream.
    pub rcp_log: Option<PathBuf>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self { rate: 10.0, event_log: None, rcp_log: None }
    }
}

type Reply = mpsc::UnboundedSender<String>;

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<(OperatorMessage, Reply)>,
    frames: broadcast::Sender<String>,
    status: watch::Receiver<StatusPayload>,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    http_stop: Option<oneshot::Sender<()>>,
    http: tokio::task::JoinHandle<()>,
    session: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting clients, stop the tick loop and wait for both.
    pub async fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(tx) = self.http_stop.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.http).await;
        if let Some(t) = self.session.take() {
            let _ = tokio::task::spawn_blocking(move || t.join()).await;
        }
    }
}

/// Bind `addr` and start serving. Returns once the listener is up.
pub async fn serve(addr: &str, cfg: SessionConfig, opts: ServeOptions) -> Result<ServerHandle, ServeError> {
    if !(opts.rate > 0.0 && opts.rate.is_finite()) {
        return Err(ServeError::Rate(opts.rate));
    }
    let mut session = Session::new(cfg)?;
    let open = |p: &PathBuf| File::create(p).map(BufWriter::new).map_err(|source| ServeError::Log { path: p.clone(), source });
    if let Some(p) = &opts.event_log {
        session.set_event_log(Box::new(open(p)?));
    }
    if let Some(p) = &opts.rcp_log {
        session.set_rcp_sink(Box::new(open(p)?));
    }
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr: addr.to_string(), source })?;
    let local = listener.local_addr().map_err(|source| ServeError::Bind { addr: addr.to_string(), source })?;

    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let (frames_tx, _) = broadcast::channel(64);
    let (status_tx, status_rx) = watch::channel(session.status());
    let stop = Arc::new(AtomicBool::new(false));

    let period = Duration::from_secs_f64(1.0 / opts.rate);
    let loop_frames = frames_tx.clone();
    let loop_stop = stop.clone();
    let session_thread = std::thread::Builder::new()
        .name("session".into())
        .spawn(move || run_loop(session, cmd_rx, loop_frames, status_tx, loop_stop, period))
        .expect("spawn session thread");

    let state = AppState { commands: cmd_tx, frames: frames_tx, status: status_rx };
    let app = Router::new().route("/status", get(status)).route("/ws", get(ws)).with_state(state);
    let (http_stop, http_stopped) = oneshot::channel::<()>();
    let http = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = http_stopped.await;
            })
            .await;
    });
    Ok(ServerHandle { addr: local, stop, http_stop: Some(http_stop), http, session: Some(session_thread) })
}

fn run_loop(
    mut session: Session,
    mut commands: mpsc::UnboundedReceiver<(OperatorMessage, Reply)>,
    frames: broadcast::Sender<String>,
    status: watch::Sender<StatusPayload>,
    stop: Arc<AtomicBool>,
    period: Duration,
) {
    let mut next = Instant::now();
    while !stop.load(Ordering::SeqCst) {
        while let Ok((m, reply)) = commands.try_recv() {
            let out = match session.handle_message(m) {
                Ok(Some(r)) => Some(r),
                Ok(None) => None,
                Err(e) => Some(ServerMessage::error(e.to_string())),
            };
            if let Some(out) = out {
                let _ = reply.send(out.to_json());
            }
        }
        let tick = session.tick();
        for m in &tick.messages {
            // no subscribers is fine: the loop runs headless
            let _ = frames.send(m.to_json());
        }
        status.send_replace(session.status());
        next += period;
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        } else {
            next = now;
        }
    }
}

async fn status(State(s): State<AppState>) -> Json<StatusPayload> {
    Json(s.status.borrow().clone())
}

async fn ws(upgrade: WebSocketUpgrade, State(s): State<AppState>) -> impl IntoResponse {
    upgrade.on_upgrade(move |socket| client(socket, s))
}

async fn client(socket: WebSocket, s: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    let mut frames = s.frames.subscribe();
    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                Some(m) = reply_rx.recv() => m,
                r = frames.recv() => match r {
                    Ok(m) => m,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(_) => {
                let _ = reply_tx.send(ServerMessage::error("binary messages are not supported").to_json());
                continue;
            }
            Message::Close(_) => break,
            _ => continue,
        };
        match parse_operator_message(&text) {
            Ok(m) => {
                if s.commands.send((m, reply_tx.clone())).is_err() {
                    break;
                }
            }
            Err(e) => {
                let _ = reply_tx.send(ServerMessage::error(e).to_json());
            }
        }
    }
    writer.abort();
}
