//! Live leader sessions: a client supplies the leader's handle forces over a
//! WebSocket and receives state snapshots.
//!
//! [`LiveSession`] holds all session logic and advances in simulated time
//! only, so it is deterministic and testable without sockets. [`spawn_server`]
//! wraps it in two threads: one paces the simulation in real time, the other
//! owns the client connection. They exchange messages over channels.

use std::collections::VecDeque;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use crate::controllers::{ControllerKind, Mode};
use crate::dynamics::{HandleWrench, Planar};
use crate::error::{Error, Result};
use crate::harness::{BenchConfig, Dyad, LeaderSource, SettleMonitor};
use crate::intent::RecurrentModel;
use crate::leader::TaskSpec;
use crate::metrics::{evaluate, MetricsReport, StepRecord, TrialHeader, TrialLog};

/// Every message on the wire. Client messages are `force`, `reset` and
/// `select_task`; the server sends `state`, `config` and `trial_result`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionMessage {
    Force {
        seq: u64,
        /// Left and right handle forces, table frame, N.
        left: [f64; 3],
        right: [f64; 3],
        /// Simulated time at which to apply the force; immediately if absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    Reset {
        seq: u64,
    },
    SelectTask {
        seq: u64,
        task: TaskSpec,
    },
    State {
        seq: u64,
        t: f64,
        pose: Planar,
        twist: Planar,
        /// Filtered handle torque about the board centre, N·m.
        sensed_torque: [f64; 3],
        mode: Mode,
        command: Planar,
        /// Signed progress along the task axis, m or rad.
        progress: f64,
        paused: bool,
    },
    Config {
        seq: u64,
        controller: ControllerKind,
        task: TaskSpec,
        config: Box<BenchConfig>,
    },
    TrialResult {
        seq: u64,
        report: Box<MetricsReport>,
    },
}

impl SessionMessage {
    pub fn seq(&self) -> u64 {
        match self {
            SessionMessage::Force { seq, .. }
            | SessionMessage::Reset { seq }
            | SessionMessage::SelectTask { seq, .. }
            | SessionMessage::State { seq, .. }
            | SessionMessage::Config { seq, .. }
            | SessionMessage::TrialResult { seq, .. } => *seq,
        }
    }

    pub fn is_client_message(&self) -> bool {
        matches!(
            self,
            SessionMessage::Force { .. } | SessionMessage::Reset { .. } | SessionMessage::SelectTask { .. }
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Zero-order hold of the last client force, then exponential decay.
#[derive(Clone, Debug, PartialEq)]
pub struct InputHold {
    wrench: HandleWrench,
    age: f64,
    hold: f64,
    decay: f64,
}

impl InputHold {
    pub fn new(hold: f64, decay: f64) -> Self {
        InputHold {
            wrench: HandleWrench::ZERO,
            age: f64::INFINITY,
            hold,
            decay,
        }
    }

    pub fn set(&mut self, wrench: HandleWrench) {
        self.wrench = wrench;
        self.age = 0.0;
    }

    /// Wrench at the current age.
    pub fn current(&self) -> HandleWrench {
        let k = if self.age <= self.hold {
            1.0
        } else if self.decay > 0.0 {
            (-(self.age - self.hold) / self.decay).exp()
        } else {
            0.0
        };
        let scale = |f: [f64; 3]| f.map(|v| v * k);
        HandleWrench {
            left: scale(self.wrench.left),
            right: scale(self.wrench.right),
        }
    }

    pub fn advance(&mut self, dt: f64) {
        self.age += dt;
    }
}

/// One live trial: follower, input handling, logging and settle detection.
#[derive(Clone, Debug)]
pub struct LiveSession {
    config: BenchConfig,
    kind: ControllerKind,
    model: Option<Arc<RecurrentModel>>,
    task: TaskSpec,
    dyad: Dyad,
    settle: SettleMonitor,
    input: InputHold,
    pending: VecDeque<(f64, HandleWrench)>,
    steps: Vec<StepRecord>,
    last: Option<StepRecord>,
    finished: bool,
    connected: bool,
    silent_for: f64,
    out_seq: u64,
    in_seq: Option<u64>,
}

impl LiveSession {
    pub fn new(
        config: &BenchConfig,
        kind: ControllerKind,
        task: TaskSpec,
        model: Option<Arc<RecurrentModel>>,
    ) -> Result<Self> {
        config.validate()?;
        task.validate()?;
        let seed = config.seed.unwrap_or(0);
        Ok(LiveSession {
            dyad: Dyad::new(config, kind, task.start, seed, model.clone())?,
            settle: SettleMonitor::new(&task, config.settle_hold),
            input: InputHold::new(config.service.input_hold, config.service.input_decay),
            config: config.clone(),
            kind,
            model,
            task,
            pending: VecDeque::new(),
            steps: Vec::new(),
            last: None,
            finished: false,
            connected: true,
            silent_for: 0.0,
            out_seq: 0,
            in_seq: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.dyad.board().t
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    /// True once the client has been gone for the configured pause delay.
    pub fn paused(&self) -> bool {
        !self.connected && self.silent_for + 1e-9 >= self.config.service.pause_after
    }

    pub fn set_connected(&mut self, connected: bool) {
        self.connected = connected;
        self.silent_for = 0.0;
    }

    fn next_seq(&mut self) -> u64 {
        let s = self.out_seq;
        self.out_seq += 1;
        s
    }

    /// Restarts the trial at the task start; sequence numbers continue.
    pub fn reset(&mut self) -> Result<()> {
        let seed = self.config.seed.unwrap_or(0);
        self.dyad = Dyad::new(&self.config, self.kind, self.task.start, seed, self.model.clone())?;
        self.settle = SettleMonitor::new(&self.task, self.config.settle_hold);
        self.input = InputHold::new(self.config.service.input_hold, self.config.service.input_decay);
        self.pending.clear();
        self.steps.clear();
        self.last = None;
        self.finished = false;
        Ok(())
    }

    pub fn config_message(&mut self) -> SessionMessage {
        SessionMessage::Config {
            seq: self.next_seq(),
            controller: self.kind,
            task: self.task.clone(),
            config: Box::new(self.config.clone()),
        }
    }

    /// Applies a client message and returns the replies. Server messages,
    /// stale sequence numbers and non-finite forces are rejected.
    pub fn handle(&mut self, msg: SessionMessage) -> Result<Vec<SessionMessage>> {
        if !msg.is_client_message() {
            return Err(Error::Session(format!("unexpected message {msg:?} from the client")));
        }
        let seq = msg.seq();
        if self.in_seq.is_some_and(|last| seq <= last) {
            return Err(Error::Session(format!(
                "sequence number {seq} does not increase (last {})",
                self.in_seq.unwrap_or(0)
            )));
        }
        self.in_seq = Some(seq);
        match msg {
            SessionMessage::Force { left, right, t, .. } => {
                if !left.iter().chain(&right).all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("client force"));
                }
                let w = HandleWrench { left, right };
                match t {
                    Some(t) if t > self.time() => {
                        let at = self.pending.partition_point(|(p, _)| *p <= t);
                        self.pending.insert(at, (t, w));
                    }
                    _ => self.input.set(w),
                }
                Ok(Vec::new())
            }
            SessionMessage::Reset { .. } => {
                self.reset()?;
                Ok(vec![self.config_message()])
            }
            SessionMessage::SelectTask { task, .. } => {
                task.validate()?;
                self.task = task;
                self.reset()?;
                Ok(vec![self.config_message()])
            }
            _ => unreachable!(),
        }
    }

    /// Leader wrench the next step will apply.
    pub fn input(&self) -> HandleWrench {
        self.input.current()
    }

    /// Advances one tick. Returns the trial result once, when the board has
    /// settled or the trial times out. Does nothing while paused.
    pub fn step(&mut self) -> Result<Option<SessionMessage>> {
        let dt = self.config.dt();
        if !self.connected {
            self.silent_for += dt;
        }
        if self.paused() {
            return Ok(None);
        }
        let next_t = self.time() + dt;
        while self.pending.front().is_some_and(|(t, _)| *t <= next_t + 1e-12) {
            let (_, w) = self.pending.pop_front().unwrap();
            self.input.set(w);
        }
        let wrench = self.input.current();
        let rec = self.dyad.step(&wrench, false)?;
        self.input.advance(dt);
        let (pose, t) = (rec.pose, rec.t);
        self.last = Some(rec.clone());
        if self.finished {
            return Ok(None);
        }
        self.steps.push(rec);
        let settled = self.settle.update(&pose, dt);
        let timed_out = t + 1e-9 >= self.config.timeout;
        if !(settled || timed_out) {
            return Ok(None);
        }
        self.finished = true;
        let log = self.log();
        let mut report = evaluate(&log, &self.config.metrics)?;
        if !settled {
            report.completed = false;
            report.notes.push(format!("timed out after {} s", self.config.timeout));
        }
        Ok(Some(SessionMessage::TrialResult {
            seq: self.next_seq(),
            report: Box::new(report),
        }))
    }

    /// Log of the current trial so far.
    pub fn log(&self) -> TrialLog {
        TrialLog {
            header: TrialHeader {
                task: self.task.clone(),
                controller: self.kind,
                seed: self.config.seed.unwrap_or(0),
                dt: self.config.dt(),
                geometry: self.config.geometry,
            },
            steps: self.steps.clone(),
        }
    }

    /// Snapshot of the latest step.
    pub fn state(&mut self) -> SessionMessage {
        let board = *self.dyad.board();
        let (torque, mode, command) = match &self.last {
            Some(r) => (r.sensed_torque, r.mode, r.command),
            None => ([0.0; 3], self.dyad.command().mode, self.dyad.command().twist),
        };
        SessionMessage::State {
            seq: self.next_seq(),
            t: board.t,
            pose: board.pose,
            twist: board.twist,
            sensed_torque: torque,
            mode,
            command,
            progress: self.task.progress(&board.pose),
            paused: self.paused(),
        }
    }
}

// ---------------------------------------------------------------------------
// Server

enum Inbound {
    Connected,
    Disconnected,
    Message(SessionMessage),
}

/// Running server; dropping it without [`ServerHandle::shutdown`] leaves the
/// threads running until the process exits.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops both threads and waits for them.
    pub fn shutdown(self) -> Result<()> {
        self.stop.store(true, Ordering::SeqCst);
        self.wait()
    }

    /// Blocks until the threads exit.
    pub fn wait(self) -> Result<()> {
        for t in self.threads {
            t.join()
                .map_err(|_| Error::Session("server thread panicked".into()))??;
        }
        Ok(())
    }
}

/// Starts a live session server on `addr` (port 0 picks a free port).
pub fn spawn_server(
    config: &BenchConfig,
    kind: ControllerKind,
    task: TaskSpec,
    model: Option<Arc<RecurrentModel>>,
    addr: impl ToSocketAddrs,
) -> Result<ServerHandle> {
    if config.leader != LeaderSource::Live {
        return Err(Error::Config("serve needs leader source \"live\"".into()));
    }
    if config.service.broadcast_hz == 0 {
        return Err(Error::Config("broadcast_hz must be positive".into()));
    }
    let mut session = LiveSession::new(config, kind, task, model)?;
    session.set_connected(false);
    let listener = TcpListener::bind(addr).map_err(|e| Error::Session(format!("bind: {e}")))?;
    let local = listener
        .local_addr()
        .map_err(|e| Error::Session(format!("bind: {e}")))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| Error::Session(e.to_string()))?;
    let stop = Arc::new(AtomicBool::new(false));
    let (in_tx, in_rx) = mpsc::channel();
    let (out_tx, out_rx) = mpsc::channel();
    let period = Duration::from_secs_f64(1.0 / config.service.broadcast_hz as f64);
    let sim = {
        let stop = stop.clone();
        thread::Builder::new()
            .name("dyad-sim".into())
            .spawn(move || sim_loop(session, in_rx, out_tx, period, stop))
            .map_err(|e| Error::Session(e.to_string()))?
    };
    let io = {
        let stop = stop.clone();
        thread::Builder::new()
            .name("dyad-io".into())
            .spawn(move || io_loop(listener, in_tx, out_rx, stop))
            .map_err(|e| Error::Session(e.to_string()))?
    };
    log::info!("live session listening on ws://{local}");
    Ok(ServerHandle {
        addr: local,
        stop,
        threads: vec![sim, io],
    })
}

/// Serves on the configured port until the process is stopped.
pub fn serve(
    config: &BenchConfig,
    kind: ControllerKind,
    task: TaskSpec,
    model: Option<Arc<RecurrentModel>>,
) -> Result<()> {
    spawn_server(config, kind, task, model, ("0.0.0.0", config.service.port))?.wait()
}

fn sim_loop(
    mut session: LiveSession,
    rx: Receiver<Inbound>,
    tx: Sender<SessionMessage>,
    period: Duration,
    stop: Arc<AtomicBool>,
) -> Result<()> {
    let dt = session.config.dt();
    let mut clock = Instant::now();
    let mut sim_elapsed = 0.0;
    let mut next_broadcast = Instant::now();
    let mut connected = false;
    while !stop.load(Ordering::SeqCst) {
        loop {
            match rx.try_recv() {
                Ok(Inbound::Connected) => {
                    connected = true;
                    session.set_connected(true);
                    let _ = tx.send(session.config_message());
                    next_broadcast = Instant::now();
                }
                Ok(Inbound::Disconnected) => {
                    connected = false;
                    session.set_connected(false);
                }
                Ok(Inbound::Message(m)) => match session.handle(m) {
                    Ok(replies) => {
                        for r in replies {
                            let _ = tx.send(r);
                        }
                    }
                    Err(e) => log::warn!("dropped client message: {e}"),
                },
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
        if session.paused() {
            // keep the clock from running ahead while nothing advances
            clock = Instant::now();
            sim_elapsed = 0.0;
        } else {
            let wall = clock.elapsed().as_secs_f64();
            while sim_elapsed + dt <= wall && !session.paused() {
                if let Some(result) = session.step()? {
                    if connected {
                        let _ = tx.send(result);
                    }
                }
                sim_elapsed += dt;
            }
        }
        let now = Instant::now();
        if now >= next_broadcast {
            if connected {
                let _ = tx.send(session.state());
            }
            next_broadcast += period;
            if next_broadcast < now {
                next_broadcast = now + period;
            }
        }
        thread::sleep(Duration::from_micros(500));
    }
    Ok(())
}

fn io_loop(
    listener: TcpListener,
    tx: Sender<Inbound>,
    rx: Receiver<SessionMessage>,
    stop: Arc<AtomicBool>,
) -> Result<()> {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("client {peer} connected");
                if let Err(e) = client_loop(stream, &tx, &rx, &stop) {
                    log::warn!("client {peer}: {e}");
                }
                log::info!("client {peer} disconnected");
                let _ = tx.send(Inbound::Disconnected);
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                // drop snapshots nobody is listening to
                while rx.try_recv().is_ok() {}
                thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(Error::Session(format!("accept: {e}"))),
        }
    }
    Ok(())
}

fn client_loop(
    stream: TcpStream,
    tx: &Sender<Inbound>,
    rx: &Receiver<SessionMessage>,
    stop: &AtomicBool,
) -> Result<()> {
    let err = |e: &dyn std::fmt::Display| Error::Session(e.to_string());
    stream.set_nonblocking(false).map_err(|e| err(&e))?;
    stream.set_nodelay(true).map_err(|e| err(&e))?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| err(&e))?;
    ws.get_ref()
        .set_read_timeout(Some(Duration::from_millis(1)))
        .map_err(|e| err(&e))?;
    let _ = tx.send(Inbound::Connected);
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => match SessionMessage::from_json(&text) {
                Ok(m) => {
                    let _ = tx.send(Inbound::Message(m));
                }
                Err(e) => log::warn!("unparseable client message: {e}"),
            },
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(err(&e)),
        }
        loop {
            match rx.try_recv() {
                Ok(m) => {
                    let text = m.to_json()?;
                    ws.send(Message::Text(text.into())).map_err(|e| err(&e))?;
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
    }
    let _ = ws.close(None);
    Ok(())
}
