//! Tile streaming sessions and the WebSocket server around them.
//!
//! A [`Session`] owns one planet and its quadtree. Each camera update yields a
//! [`Delta`]: addresses to drop, stitch masks, decoration instances and the
//! encoded tiles the client does not hold yet. On the wire a delta is one JSON
//! text frame followed by `tiles` binary frames in the tile format.

use std::collections::{BTreeMap, BTreeSet};
use std::future::Future;
use std::io;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;

use crate::config::{ConfigError, Planet, PlanetConfig};
use crate::lod::{CameraState, LodError, QuadNode, QuadTree};
use crate::mesh::{decode_tile, encode_tile, DecodeError, MeshError, TileMesh};
use crate::scene::{Ephemeris, SceneError, SceneInstance};

pub const CODE_BAD_REQUEST: u16 = 400;
pub const CODE_NO_SESSION: u16 = 404;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("malformed camera: {0}")]
    BadCamera(LodError),
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error("no open session")]
    NoSession,
    #[error("malformed frame: {0}")]
    BadFrame(String),
    #[error(transparent)]
    Lod(LodError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl ServiceError {
    /// Status code carried by the error frame.
    pub fn code(&self) -> u16 {
        match self {
            ServiceError::UnknownSession(_) | ServiceError::NoSession => CODE_NO_SESSION,
            _ => CODE_BAD_REQUEST,
        }
    }
}

/// One encoded tile with the stitch mask it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct TilePayload {
    pub node: QuadNode,
    pub mask: u8,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Delta {
    /// Set only on the delta that opens a session.
    pub session: Option<u64>,
    pub removed: Vec<QuadNode>,
    /// Mask of every tile whose stitch state changed, including all new tiles.
    pub masks: BTreeMap<QuadNode, u8>,
    pub scene: Vec<SceneInstance>,
    pub tiles: Vec<TilePayload>,
}

impl Delta {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.masks.is_empty() && self.tiles.is_empty() && self.scene.is_empty()
    }

    pub fn header(&self) -> DeltaHeader {
        DeltaHeader {
            session: self.session,
            removed: self.removed.clone(),
            masks: self.masks.clone(),
            scene: self.scene.clone(),
            tiles: self.tiles.len(),
        }
    }
}

/// JSON control frame announcing a delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<u64>,
    pub removed: Vec<QuadNode>,
    pub masks: BTreeMap<QuadNode, u8>,
    pub scene: Vec<SceneInstance>,
    /// Number of binary tile frames that follow.
    pub tiles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub session: u64,
    pub leaves: usize,
    pub max_depth: u8,
    pub vertices_resident: usize,
    pub last_update_ms: f64,
    pub updates: u64,
    pub tiles_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientFrame {
    Open {
        /// Falls back to the server's planet when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<Box<PlanetConfig>>,
    },
    Camera {
        pos: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        look: Option<[f64; 3]>,
    },
    Time {
        t: f64,
    },
    Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Delta(DeltaHeader),
    Error { code: u16, message: String },
    Ephemeris(Ephemeris),
    Stats(SessionStats),
}

/// One client's planet, quadtree and view of what the client holds.
#[derive(Debug)]
pub struct Session {
    id: u64,
    planet: Planet,
    tree: QuadTree,
    camera: Option<CameraState>,
    held: BTreeMap<QuadNode, u8>,
    last_update: Duration,
    updates: u64,
    tiles_sent: u64,
}

impl Session {
    /// Validates `config` and returns the session with its initial delta: the
    /// six root tiles, their trees and the planet's cloud spawners.
    pub fn open(id: u64, config: PlanetConfig) -> Result<(Session, Delta), ServiceError> {
        let planet = Planet::new(config)?;
        let tree = planet.quad_tree();
        let mut session = Session {
            id,
            planet,
            tree,
            camera: None,
            held: BTreeMap::new(),
            last_update: Duration::ZERO,
            updates: 0,
            tiles_sent: 0,
        };
        let started = Instant::now();
        let mut delta = session.sync()?;
        delta.scene.extend(session.planet.clouds());
        delta.session = Some(id);
        session.last_update = started.elapsed();
        Ok((session, delta))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn planet(&self) -> &Planet {
        &self.planet
    }

    pub fn tree(&self) -> &QuadTree {
        &self.tree
    }

    pub fn camera(&self) -> Option<&CameraState> {
        self.camera.as_ref()
    }

    /// Tiles the client holds, with their stitch masks.
    pub fn held(&self) -> &BTreeMap<QuadNode, u8> {
        &self.held
    }

    /// Refines the tree for `camera` and returns what the client must change.
    /// A malformed camera is rejected and leaves the session untouched.
    pub fn on_camera(&mut self, camera: CameraState) -> Result<Delta, ServiceError> {
        camera.validate().map_err(ServiceError::BadCamera)?;
        let started = Instant::now();
        self.tree.update(&camera).map_err(ServiceError::Lod)?;
        self.camera = Some(camera);
        let delta = self.sync()?;
        self.last_update = started.elapsed();
        self.updates += 1;
        Ok(delta)
    }

    pub fn stats(&self) -> SessionStats {
        let side = self.planet.config().resolution as usize + 1;
        SessionStats {
            session: self.id,
            leaves: self.tree.leaves().len(),
            max_depth: self.tree.max_leaf_depth(),
            vertices_resident: self.held.len() * side * side,
            last_update_ms: self.last_update.as_secs_f64() * 1e3,
            updates: self.updates,
            tiles_sent: self.tiles_sent,
        }
    }

    pub fn ephemeris(&self, time: f64) -> Result<Ephemeris, ServiceError> {
        Ok(self.planet.ephemeris(time)?)
    }

    /// Diffs the client's tiles against the current leaves. New tiles and
    /// tiles whose mask changed are (re)built; only new tiles carry trees.
    fn sync(&mut self) -> Result<Delta, ServiceError> {
        let leaves = self.tree.leaves();
        let removed: Vec<QuadNode> = self
            .held
            .keys()
            .filter(|n| !leaves.contains(n))
            .copied()
            .collect();
        for node in &removed {
            self.held.remove(node);
        }

        let mut delta = Delta {
            removed,
            ..Delta::default()
        };
        for leaf in leaves {
            let mask = self.tree.stitch_mask(leaf);
            let previous = self.held.get(leaf).copied();
            if previous == Some(mask) {
                continue;
            }
            let tile = self.planet.build_tile(*leaf, mask)?;
            if previous.is_none() {
                delta.scene.extend(self.planet.trees(leaf)?);
            }
            delta.masks.insert(*leaf, mask);
            delta.tiles.push(TilePayload {
                node: *leaf,
                mask,
                bytes: encode_tile(&tile),
            });
        }
        for payload in &delta.tiles {
            self.held.insert(payload.node, payload.mask);
        }
        self.tiles_sent += delta.tiles.len() as u64;
        Ok(delta)
    }
}

/// Sessions by id, for callers that juggle several planets in one process.
#[derive(Debug, Default)]
pub struct SessionRegistry {
    next_id: u64,
    sessions: BTreeMap<u64, Session>,
}

impl SessionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open_session(&mut self, config: PlanetConfig) -> Result<(u64, Delta), ServiceError> {
        self.next_id += 1;
        let (session, delta) = Session::open(self.next_id, config)?;
        self.sessions.insert(self.next_id, session);
        Ok((self.next_id, delta))
    }

    pub fn on_camera(&mut self, id: u64, camera: CameraState) -> Result<Delta, ServiceError> {
        self.get_mut(id)?.on_camera(camera)
    }

    pub fn session_stats(&self, id: u64) -> Result<SessionStats, ServiceError> {
        self.sessions
            .get(&id)
            .map(Session::stats)
            .ok_or(ServiceError::UnknownSession(id))
    }

    pub fn close(&mut self, id: u64) -> Result<(), ServiceError> {
        self.sessions
            .remove(&id)
            .map(|_| ())
            .ok_or(ServiceError::UnknownSession(id))
    }

    pub fn get_mut(&mut self, id: u64) -> Result<&mut Session, ServiceError> {
        self.sessions.get_mut(&id).ok_or(ServiceError::UnknownSession(id))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MirrorError {
    #[error("header announces {announced} tiles but {received} arrived")]
    TileCount { announced: usize, received: usize },
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("tile {0} has no mask in the header")]
    MissingMask(QuadNode),
    #[error("tile {0} sent again with unchanged mask {1}")]
    DuplicatePayload(QuadNode, u8),
    #[error("removal of {0}, which is not held")]
    NotHeld(QuadNode),
}

/// What a client holds after replaying deltas.
#[derive(Debug, Clone, Default)]
pub struct ClientMirror {
    tiles: BTreeMap<QuadNode, (u8, TileMesh)>,
    scene: Vec<SceneInstance>,
}

impl ClientMirror {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn apply(&mut self, header: &DeltaHeader, payloads: &[Vec<u8>]) -> Result<(), MirrorError> {
        if header.tiles != payloads.len() {
            return Err(MirrorError::TileCount {
                announced: header.tiles,
                received: payloads.len(),
            });
        }
        for node in &header.removed {
            self.tiles.remove(node).ok_or(MirrorError::NotHeld(*node))?;
        }
        let removed: BTreeSet<&QuadNode> = header.removed.iter().collect();
        self.scene
            .retain(|s| s.tile.map_or(true, |t| !removed.contains(&t)));
        for bytes in payloads {
            let tile = decode_tile(bytes)?;
            let node = tile.node;
            let mask = *header.masks.get(&node).ok_or(MirrorError::MissingMask(node))?;
            if let Some((held, _)) = self.tiles.get(&node) {
                if *held == mask {
                    return Err(MirrorError::DuplicatePayload(node, mask));
                }
            }
            self.tiles.insert(node, (mask, tile));
        }
        self.scene.extend(header.scene.iter().copied());
        Ok(())
    }

    pub fn nodes(&self) -> BTreeSet<QuadNode> {
        self.tiles.keys().copied().collect()
    }

    pub fn masks(&self) -> BTreeMap<QuadNode, u8> {
        self.tiles.iter().map(|(n, (m, _))| (*n, *m)).collect()
    }

    pub fn tile(&self, node: &QuadNode) -> Option<&TileMesh> {
        self.tiles.get(node).map(|(_, t)| t)
    }

    pub fn scene(&self) -> &[SceneInstance] {
        &self.scene
    }
}

fn text(frame: &ServerFrame) -> Message {
    Message::Text(serde_json::to_string(frame).expect("frame serializes"))
}

fn error_frame(err: &ServiceError) -> Message {
    text(&ServerFrame::Error {
        code: err.code(),
        message: err.to_string(),
    })
}

fn delta_messages(delta: Delta) -> Vec<Message> {
    let mut out = vec![text(&ServerFrame::Delta(delta.header()))];
    out.extend(delta.tiles.into_iter().map(|t| Message::Binary(t.bytes)));
    out
}

enum Incoming {
    Frame(Result<ClientFrame, String>),
    Binary,
}

fn camera_state(pos: [f64; 3], look: Option<[f64; 3]>) -> CameraState {
    let position = DVec3::from_array(pos);
    match look {
        Some(l) => CameraState {
            position,
            look_direction: DVec3::from_array(l),
        },
        None => CameraState::at(position),
    }
}

/// Drops every camera frame that is directly followed by another camera
/// frame, so only the newest pending camera is processed.
fn coalesce(batch: Vec<Incoming>) -> Vec<Incoming> {
    let is_camera = |m: &Incoming| matches!(m, Incoming::Frame(Ok(ClientFrame::Camera { .. })));
    let mut out: Vec<Incoming> = Vec::with_capacity(batch.len());
    for m in batch {
        if is_camera(&m) && out.last().is_some_and(is_camera) {
            out.pop();
        }
        out.push(m);
    }
    out
}

struct Connection {
    default_config: PlanetConfig,
    ids: Arc<AtomicU64>,
    session: Option<Session>,
}

impl Connection {
    fn handle(&mut self, incoming: Incoming) -> Vec<Message> {
        match self.dispatch(incoming) {
            Ok(messages) => messages,
            Err(err) => {
                tracing::debug!(%err, "rejected frame");
                vec![error_frame(&err)]
            }
        }
    }

    fn dispatch(&mut self, incoming: Incoming) -> Result<Vec<Message>, ServiceError> {
        let frame = match incoming {
            Incoming::Binary => return Err(ServiceError::BadFrame("binary frames are not accepted".into())),
            Incoming::Frame(f) => f.map_err(ServiceError::BadFrame)?,
        };
        match frame {
            ClientFrame::Open { config } => {
                let config = config.map(|c| *c).unwrap_or_else(|| self.default_config.clone());
                let id = self.ids.fetch_add(1, Ordering::Relaxed) + 1;
                let (session, delta) = Session::open(id, config)?;
                tracing::info!(session = id, "session opened");
                if let Some(old) = self.session.replace(session) {
                    tracing::info!(session = old.id(), "session replaced");
                }
                Ok(delta_messages(delta))
            }
            ClientFrame::Camera { pos, look } => {
                let session = self.session.as_mut().ok_or(ServiceError::NoSession)?;
                let delta = session.on_camera(camera_state(pos, look))?;
                Ok(delta_messages(delta))
            }
            ClientFrame::Time { t } => {
                let session = self.session.as_ref().ok_or(ServiceError::NoSession)?;
                Ok(vec![text(&ServerFrame::Ephemeris(session.ephemeris(t)?))])
            }
            ClientFrame::Stats => {
                let session = self.session.as_ref().ok_or(ServiceError::NoSession)?;
                Ok(vec![text(&ServerFrame::Stats(session.stats()))])
            }
        }
    }
}

async fn handle_connection(
    stream: TcpStream,
    default_config: PlanetConfig,
    ids: Arc<AtomicU64>,
) -> Result<(), tokio_tungstenite::tungstenite::Error> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = mpsc::unbounded_channel();

    let reader = tokio::spawn(async move {
        while let Some(msg) = source.next().await {
            let incoming = match msg {
                Ok(Message::Text(t)) => Incoming::Frame(
                    serde_json::from_str::<ClientFrame>(&t).map_err(|e| e.to_string()),
                ),
                Ok(Message::Binary(_)) => Incoming::Binary,
                Ok(Message::Close(_)) | Err(_) => break,
                Ok(_) => continue,
            };
            if tx.send(incoming).is_err() {
                break;
            }
        }
    });

    let mut conn = Connection {
        default_config,
        ids,
        session: None,
    };
    while let Some(first) = rx.recv().await {
        let mut batch = vec![first];
        while let Ok(more) = rx.try_recv() {
            batch.push(more);
        }
        for incoming in coalesce(batch) {
            for message in conn.handle(incoming) {
                sink.send(message).await?;
            }
        }
    }
    if let Some(session) = &conn.session {
        tracing::info!(session = session.id(), "session closed");
    }
    reader.abort();
    Ok(())
}

/// Accepts WebSocket clients on `listener` until `shutdown` resolves. Each
/// connection gets its own session loop; `default_config` serves "open"
/// frames that carry no config.
pub async fn serve_until(
    listener: TcpListener,
    default_config: PlanetConfig,
    shutdown: impl Future<Output = ()>,
) -> io::Result<()> {
    let ids = Arc::new(AtomicU64::new(0));
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            _ = &mut shutdown => {
                tracing::info!("shutting down");
                return Ok(());
            }
            accepted = listener.accept() => {
                let (stream, peer) = accepted?;
                tracing::info!(%peer, "client connected");
                let config = default_config.clone();
                let ids = ids.clone();
                tokio::spawn(async move {
                    if let Err(err) = handle_connection(stream, config, ids).await {
                        tracing::warn!(%peer, %err, "connection ended with error");
                    }
                });
            }
        }
    }
}

type ClientStream = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<TcpStream>>;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Socket(#[from] tokio_tungstenite::tungstenite::Error),
    #[error("server error {code}: {message}")]
    Server { code: u16, message: String },
    #[error("unexpected frame: {0}")]
    Unexpected(String),
    #[error("connection closed")]
    Closed,
}

/// Scripted protocol client that mirrors the server's tile set.
pub struct HeadlessClient {
    stream: ClientStream,
    pub mirror: ClientMirror,
    pub session: Option<u64>,
}

impl HeadlessClient {
    pub async fn connect(url: &str) -> Result<HeadlessClient, ClientError> {
        let (stream, _) = tokio_tungstenite::connect_async(url).await?;
        Ok(HeadlessClient {
            stream,
            mirror: ClientMirror::new(),
            session: None,
        })
    }

    pub async fn send(&mut self, frame: &ClientFrame) -> Result<(), ClientError> {
        let json = serde_json::to_string(frame).expect("frame serializes");
        self.stream.send(Message::Text(json)).await?;
        Ok(())
    }

    pub async fn send_raw(&mut self, message: Message) -> Result<(), ClientError> {
        self.stream.send(message).await?;
        Ok(())
    }

    /// Next JSON frame from the server.
    pub async fn recv_frame(&mut self) -> Result<ServerFrame, ClientError> {
        loop {
            match self.stream.next().await {
                Some(Ok(Message::Text(t))) => {
                    return serde_json::from_str(&t).map_err(|e| ClientError::Unexpected(e.to_string()))
                }
                Some(Ok(Message::Binary(_))) => {
                    return Err(ClientError::Unexpected("binary frame without a delta header".into()))
                }
                Some(Ok(Message::Close(_))) | None => return Err(ClientError::Closed),
                Some(Ok(_)) => continue,
                Some(Err(e)) => return Err(e.into()),
            }
        }
    }

    /// Reads a delta header and its tile frames and applies them to the mirror.
    pub async fn recv_delta(&mut self) -> Result<DeltaHeader, ClientError> {
        let header = match self.recv_frame().await? {
            ServerFrame::Delta(h) => h,
            ServerFrame::Error { code, message } => return Err(ClientError::Server { code, message }),
            other => return Err(ClientError::Unexpected(format!("{other:?}"))),
        };
        let mut payloads = Vec::with_capacity(header.tiles);
        while payloads.len() < header.tiles {
            match self.stream.next().await {
                Some(Ok(Message::Binary(b))) => payloads.push(b),
                Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                Some(Ok(other)) => return Err(ClientError::Unexpected(format!("{other:?}"))),
                Some(Err(e)) => return Err(e.into()),
                None => return Err(ClientError::Closed),
            }
        }
        self.mirror
            .apply(&header, &payloads)
            .map_err(|e| ClientError::Unexpected(e.to_string()))?;
        if header.session.is_some() {
            self.session = header.session;
        }
        Ok(header)
    }

    pub async fn open(&mut self, config: Option<PlanetConfig>) -> Result<DeltaHeader, ClientError> {
        self.send(&ClientFrame::Open {
            config: config.map(Box::new),
        })
        .await?;
        self.recv_delta().await
    }

    pub async fn camera(&mut self, position: DVec3) -> Result<DeltaHeader, ClientError> {
        self.send(&ClientFrame::Camera {
            pos: position.to_array(),
            look: Some((-position).normalize_or_zero().to_array()),
        })
        .await?;
        self.recv_delta().await
    }

    pub async fn close(mut self) -> Result<(), ClientError> {
        self.stream.close(None).await?;
        Ok(())
    }
}
