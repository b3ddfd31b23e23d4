//! TCP transport: one reader task and one writer task per connection.

use std::collections::HashMap;
use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tracing::{debug, info, warn};

use crate::protocol::{encode_frame, FrameDecoder, ProtocolError};
use crate::service::{ConnId, Orchestrator, Outgoing};

type Registry = Arc<Mutex<HashMap<ConnId, mpsc::UnboundedSender<Vec<u8>>>>>;

#[derive(Debug, Clone, Copy)]
pub struct ServerOptions {
    pub max_frame_bytes: usize,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            max_frame_bytes: crate::protocol::DEFAULT_MAX_FRAME,
        }
    }
}

fn route(registry: &Registry, out: Vec<Outgoing>) {
    let reg = registry.lock();
    for o in out {
        if let Some(tx) = reg.get(&o.to) {
            let _ = tx.send(encode_frame(&o.message));
        }
    }
}

async fn connection(
    stream: TcpStream,
    conn: ConnId,
    orch: Arc<Orchestrator>,
    registry: Registry,
    options: ServerOptions,
    mut shutdown: watch::Receiver<bool>,
) {
    let _ = stream.set_nodelay(true);
    let (mut rd, mut wr) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Vec<u8>>();
    registry.lock().insert(conn, tx);
    let writer = tokio::spawn(async move {
        while let Some(bytes) = rx.recv().await {
            if wr.write_all(&bytes).await.is_err() {
                break;
            }
        }
        let _ = wr.shutdown().await;
    });

    let mut decoder = FrameDecoder::new(options.max_frame_bytes);
    let mut buf = vec![0u8; 16 * 1024];
    loop {
        let n = tokio::select! {
            r = rd.read(&mut buf) => match r {
                Ok(n) => n,
                Err(e) => {
                    debug!(conn, error = %e, "read failed");
                    0
                }
            },
            _ = shutdown.changed() => 0,
        };
        if n == 0 {
            break;
        }
        decoder.push(&buf[..n]);
        while let Some(frame) = decoder.next_frame() {
            let out = match frame {
                Ok(frame) => orch.handle_frame(conn, &frame),
                Err(e) => vec![orch.protocol_error(conn, &ProtocolError::Frame(e))],
            };
            route(&registry, out);
        }
    }
    if let Err(e) = decoder.finish() {
        route(
            &registry,
            vec![orch.protocol_error(conn, &ProtocolError::Frame(e))],
        );
    }
    orch.disconnect(conn);
    registry.lock().remove(&conn);
    let _ = writer.await;
    debug!(conn, "connection closed");
}

/// Accepts connections until `shutdown` resolves, then closes all of them.
pub async fn serve(
    listener: TcpListener,
    orch: Arc<Orchestrator>,
    options: ServerOptions,
    shutdown: impl Future<Output = ()>,
) -> io::Result<()> {
    let registry: Registry = Arc::default();
    let next_id = AtomicU64::new(1);
    let (stop_tx, stop_rx) = watch::channel(false);
    let mut tasks = Vec::new();
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            accepted = listener.accept() => {
                let (stream, peer) = match accepted {
                    Ok(a) => a,
                    Err(e) => {
                        warn!(error = %e, "accept failed");
                        continue;
                    }
                };
                let conn = next_id.fetch_add(1, Ordering::SeqCst);
                debug!(conn, %peer, "connection opened");
                tasks.push(tokio::spawn(connection(
                    stream,
                    conn,
                    orch.clone(),
                    registry.clone(),
                    options,
                    stop_rx.clone(),
                )));
                tasks.retain(|t: &JoinHandle<()>| !t.is_finished());
            }
            _ = &mut shutdown => break,
        }
    }
    info!("shutting down");
    let _ = stop_tx.send(true);
    for t in tasks {
        let _ = t.await;
    }
    Ok(())
}

/// A server running on a background task.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    task: JoinHandle<io::Result<()>>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) -> io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.task.await.map_err(io::Error::other)?
    }
}

/// Binds `addr` and serves in the background.
pub async fn spawn(
    addr: &str,
    orch: Arc<Orchestrator>,
    options: ServerOptions,
) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let task = tokio::spawn(serve(listener, orch, options, async move {
        let _ = stopped.await;
    }));
    Ok(ServerHandle {
        addr,
        stop: Some(stop),
        task,
    })
}
