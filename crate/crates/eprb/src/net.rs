//! Multi-process mode: each protocol role as its own network participant.
//!
//! Every connection follows an edge of [`crate::topology::EDGES`]. The sender
//! connects, writes `HELLO` naming its role, and from then on only writes.
//! The receiver shuts down its write half as soon as it accepts, and the
//! sender runs a watchdog that aborts if a single byte ever comes back.
//! Receivers refuse any `HELLO` from a role that has no edge to them.
//!
//! Trials are self-paced: nothing is acknowledged, and a station buffers
//! whichever of its two inbound streams runs ahead.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use eprb_core::model::{ConfigError, ExperimentConfig, SettingLabel, Side, TrialRecord};
use eprb_core::protocol::{
    referee_verify, Collector, MalusPoisson, ProtocolError, Randomizer, RefereeReport, Source, Station, Verdict,
};

use crate::io::{write_log, LogError};
use crate::topology::{Endpoints, NetRole, TopologyError};
use crate::wire::{self, Randomizer as Discloser, WireMessage};

#[derive(Clone, Copy, Debug)]
pub struct NetOptions {
    /// How long a sender keeps retrying to reach a receiver that is not up yet.
    pub connect_timeout: Duration,
    /// How long a receiver waits for all its inbound peers to connect.
    pub accept_timeout: Duration,
    /// Longest silence tolerated on an inbound connection.
    pub idle_timeout: Duration,
}

impl Default for NetOptions {
    fn default() -> Self {
        NetOptions {
            connect_timeout: Duration::from_secs(30),
            accept_timeout: Duration::from_secs(60),
            idle_timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("{role}: could not reach {peer} at {addr} within the connect timeout")]
    ConnectTimeout {
        role: NetRole,
        peer: NetRole,
        addr: SocketAddr,
    },
    #[error("{role}: timed out waiting for {missing:?} to connect")]
    AcceptTimeout { role: NetRole, missing: Vec<NetRole> },
    #[error("{role}: protocol violation on the connection from {peer}: {message}")]
    Protocol {
        role: NetRole,
        peer: NetRole,
        message: String,
    },
    #[error("{role}: received data on the write-only connection to {peer}")]
    OneWayViolation { role: NetRole, peer: NetRole },
    #[error("{role}: {peer} closed its connection before END")]
    PrematureEnd { role: NetRole, peer: NetRole },
    #[error("{role}: no message for {idle:?}")]
    Idle { role: NetRole, idle: Duration },
    #[error(transparent)]
    Log(#[from] LogError),
}

fn io_context(context: impl Into<String>) -> impl FnOnce(io::Error) -> NetError {
    move |source| NetError::Io {
        context: context.into(),
        source,
    }
}

/// Sending end of one edge.
struct Outbound {
    role: NetRole,
    peer: NetRole,
    writer: BufWriter<TcpStream>,
    violated: Arc<AtomicBool>,
    stop: Arc<AtomicBool>,
    watchdog: Option<JoinHandle<()>>,
}

impl Outbound {
    fn connect(role: NetRole, peer: NetRole, addr: SocketAddr, opts: &NetOptions) -> Result<Self, NetError> {
        let deadline = Instant::now() + opts.connect_timeout;
        let stream = loop {
            match TcpStream::connect(addr) {
                Ok(s) => break s,
                Err(_) if Instant::now() < deadline => thread::sleep(Duration::from_millis(20)),
                Err(_) => return Err(NetError::ConnectTimeout { role, peer, addr }),
            }
        };
        stream.set_nodelay(true).ok();
        let violated = Arc::new(AtomicBool::new(false));
        let stop = Arc::new(AtomicBool::new(false));
        let watchdog = {
            let mut probe = stream.try_clone().map_err(io_context("cloning socket"))?;
            probe
                .set_read_timeout(Some(Duration::from_millis(50)))
                .map_err(io_context("setting watchdog timeout"))?;
            let (violated, stop) = (violated.clone(), stop.clone());
            thread::spawn(move || {
                let mut byte = [0u8; 1];
                while !stop.load(Ordering::Relaxed) {
                    match probe.read(&mut byte) {
                        Ok(0) => break,
                        Ok(_) => {
                            violated.store(true, Ordering::SeqCst);
                            break;
                        }
                        Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
                        Err(_) => break,
                    }
                }
            })
        };
        let mut out = Outbound {
            role,
            peer,
            writer: BufWriter::new(stream),
            violated,
            stop,
            watchdog: Some(watchdog),
        };
        out.send(&WireMessage::Hello { role })?;
        Ok(out)
    }

    fn check(&self) -> Result<(), NetError> {
        if self.violated.load(Ordering::SeqCst) {
            return Err(NetError::OneWayViolation {
                role: self.role,
                peer: self.peer,
            });
        }
        Ok(())
    }

    fn send(&mut self, msg: &WireMessage) -> Result<(), NetError> {
        self.check()?;
        writeln!(self.writer, "{}", wire::encode(msg))
            .map_err(io_context(format!("{}: sending to {}", self.role, self.peer)))
    }

    /// Sends END, closes the write half and stops the watchdog.
    fn finish(mut self) -> Result<(), NetError> {
        self.send(&WireMessage::End)?;
        let context = format!("{}: closing connection to {}", self.role, self.peer);
        self.writer.flush().map_err(io_context(context.clone()))?;
        self.writer
            .get_ref()
            .shutdown(std::net::Shutdown::Write)
            .map_err(io_context(context))?;
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.watchdog.take() {
            h.join().ok();
        }
        self.check()
    }
}

impl Drop for Outbound {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

fn connect_all(role: NetRole, endpoints: &Endpoints, opts: &NetOptions) -> Result<Vec<Outbound>, NetError> {
    role.outbound()
        .into_iter()
        .map(|peer| Outbound::connect(role, peer, endpoints.connect[&peer], opts))
        .collect()
}

/// What an inbound reader thread reports.
#[derive(Debug)]
enum Event {
    Message(WireMessage),
    /// Clean EOF after END.
    Closed,
    /// EOF before END.
    Premature,
    Failed(String),
}

/// Accepts exactly one connection from each expected peer, refusing others,
/// and starts a reader thread per connection.
fn accept_peers(
    role: NetRole,
    listener: &TcpListener,
    opts: &NetOptions,
) -> Result<Receiver<(NetRole, Event)>, NetError> {
    let expected = role.inbound();
    let mut connected = BTreeSet::new();
    let (tx, rx) = mpsc::channel();
    listener
        .set_nonblocking(true)
        .map_err(io_context("configuring listener"))?;
    let deadline = Instant::now() + opts.accept_timeout;
    while connected.len() < expected.len() {
        let stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    let missing = expected.iter().filter(|p| !connected.contains(*p)).copied().collect();
                    return Err(NetError::AcceptTimeout { role, missing });
                }
                thread::sleep(Duration::from_millis(10));
                continue;
            }
            Err(e) => return Err(io_context(format!("{role}: accepting"))(e)),
        };
        match admit(role, stream, &expected, &connected, opts) {
            Ok((peer, reader)) => {
                connected.insert(peer);
                spawn_reader(peer, reader, tx.clone());
            }
            Err(reason) => log::warn!("{role}: refused inbound connection: {reason}"),
        }
    }
    Ok(rx)
}

/// Reads the HELLO and decides whether the connection is an edge into `role`.
fn admit(
    role: NetRole,
    stream: TcpStream,
    expected: &[NetRole],
    connected: &BTreeSet<NetRole>,
    opts: &NetOptions,
) -> Result<(NetRole, BufReader<TcpStream>), String> {
    stream.set_nonblocking(false).map_err(|e| e.to_string())?;
    stream
        .set_read_timeout(Some(opts.idle_timeout))
        .map_err(|e| e.to_string())?;
    // Receivers never write.
    stream.shutdown(std::net::Shutdown::Write).map_err(|e| e.to_string())?;
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| e.to_string())?;
    match wire::decode(line.trim_end()) {
        Ok(WireMessage::Hello { role: peer }) if !expected.contains(&peer) => {
            Err(format!("{peer} has no edge to {role}"))
        }
        Ok(WireMessage::Hello { role: peer }) if connected.contains(&peer) => {
            Err(format!("{peer} is already connected"))
        }
        Ok(WireMessage::Hello { role: peer }) => Ok((peer, reader)),
        Ok(other) => Err(format!("expected HELLO, got {}", other.kind())),
        Err(e) => Err(format!("bad HELLO line: {e}")),
    }
}

fn spawn_reader(peer: NetRole, mut reader: BufReader<TcpStream>, tx: Sender<(NetRole, Event)>) {
    thread::spawn(move || {
        let mut line = String::new();
        let mut ended = false;
        let mut line_no = 1;
        loop {
            line.clear();
            line_no += 1;
            let event = match reader.read_line(&mut line) {
                Ok(0) if ended => Event::Closed,
                Ok(0) => Event::Premature,
                Ok(_) if ended => Event::Failed("data after END".into()),
                Ok(_) if !line.ends_with('\n') => Event::Premature,
                Ok(_) => match wire::decode(line.trim_end_matches(['\n', '\r'])) {
                    Ok(msg) => {
                        ended = msg == WireMessage::End;
                        Event::Message(msg)
                    }
                    Err(e) => Event::Failed(format!("line {line_no}: {e}")),
                },
                Err(e) => Event::Failed(e.to_string()),
            };
            let last = !matches!(event, Event::Message(_));
            if tx.send((peer, event)).is_err() || last {
                return;
            }
        }
    });
}

/// Pulls messages from all inbound peers until each has sent END.
struct Inbox {
    role: NetRole,
    rx: Receiver<(NetRole, Event)>,
    open: BTreeSet<NetRole>,
    idle: Duration,
}

impl Inbox {
    fn new(role: NetRole, rx: Receiver<(NetRole, Event)>, opts: &NetOptions) -> Self {
        Inbox {
            role,
            rx,
            open: role.inbound().into_iter().collect(),
            idle: opts.idle_timeout,
        }
    }

    /// Next non-END message; `None` once every peer has ended.
    fn next(&mut self) -> Result<Option<(NetRole, WireMessage)>, NetError> {
        let role = self.role;
        while !self.open.is_empty() {
            let (peer, event) = match self.rx.recv_timeout(self.idle + Duration::from_secs(1)) {
                Ok(ev) => ev,
                Err(RecvTimeoutError::Timeout) => return Err(NetError::Idle { role, idle: self.idle }),
                Err(RecvTimeoutError::Disconnected) => {
                    let peer = *self.open.iter().next().expect("open is non-empty");
                    return Err(NetError::PrematureEnd { role, peer });
                }
            };
            match event {
                Event::Message(WireMessage::End) => {
                    self.open.remove(&peer);
                }
                Event::Message(msg) => return Ok(Some((peer, msg))),
                Event::Closed => {}
                Event::Premature => return Err(NetError::PrematureEnd { role, peer }),
                Event::Failed(message) => return Err(NetError::Protocol { role, peer, message }),
            }
        }
        Ok(None)
    }
}

fn violation(role: NetRole, peer: NetRole, message: impl Into<String>) -> NetError {
    NetError::Protocol {
        role,
        peer,
        message: message.into(),
    }
}

fn unexpected(role: NetRole, peer: NetRole, msg: &WireMessage) -> NetError {
    violation(role, peer, format!("unexpected {} message", msg.kind()))
}

fn protocol_err(role: NetRole, peer: NetRole) -> impl FnOnce(ProtocolError) -> NetError {
    move |e| violation(role, peer, e.to_string())
}

fn check_trial(role: NetRole, peer: NetRole, trial: u64, config: &ExperimentConfig) -> Result<(), NetError> {
    if trial >= config.trials {
        return Err(violation(
            role,
            peer,
            format!("trial {trial} beyond the configured {}", config.trials),
        ));
    }
    Ok(())
}

/// How a finished role ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RoleOutcome {
    /// O, A, B, X or Y: number of trials sent downstream.
    Sent {
        trials: u64,
    },
    Collected(Vec<TrialRecord>),
    Refereed(RefereeOutcome),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefereeOutcome {
    pub report: RefereeReport,
    /// Why the verdict is FAIL when a stream ended early.
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct RoleOptions {
    pub net: NetOptions,
    /// Collector only: where to write the assembled trial log.
    pub log_out: Option<PathBuf>,
}

/// Runs one role to completion. Endpoints are validated against the topology
/// before any socket is opened.
pub fn serve_role(
    role: NetRole,
    config: &ExperimentConfig,
    endpoints: &Endpoints,
    opts: &RoleOptions,
) -> Result<RoleOutcome, NetError> {
    endpoints.validate(role)?;
    config.validate()?;
    let listener = match endpoints.listen {
        Some(addr) => Some(TcpListener::bind(addr).map_err(io_context(format!("{role}: binding {addr}")))?),
        None => None,
    };
    serve_bound(role, config, listener, endpoints, opts)
}

fn serve_bound(
    role: NetRole,
    config: &ExperimentConfig,
    listener: Option<TcpListener>,
    endpoints: &Endpoints,
    opts: &RoleOptions,
) -> Result<RoleOutcome, NetError> {
    let inbox = |listener: Option<TcpListener>| -> Result<Inbox, NetError> {
        let listener = listener.expect("validated: receiving roles listen");
        Ok(Inbox::new(role, accept_peers(role, &listener, &opts.net)?, &opts.net))
    };
    match role {
        NetRole::O => run_source(config, endpoints, &opts.net),
        NetRole::A => run_randomizer(Side::Left, config, endpoints, &opts.net),
        NetRole::B => run_randomizer(Side::Right, config, endpoints, &opts.net),
        NetRole::X => run_station(Side::Left, config, inbox(listener)?, endpoints, &opts.net),
        NetRole::Y => run_station(Side::Right, config, inbox(listener)?, endpoints, &opts.net),
        NetRole::Collector => run_collector(config, inbox(listener)?, endpoints, opts),
        NetRole::Referee => {
            let mut inbox = inbox(listener)?;
            referee_service(config.trials, || inbox.next()).map(RoleOutcome::Refereed)
        }
    }
}

fn run_source(config: &ExperimentConfig, endpoints: &Endpoints, opts: &NetOptions) -> Result<RoleOutcome, NetError> {
    let [mut to_x, mut to_y]: [Outbound; 2] = connect_all(NetRole::O, endpoints, opts)?
        .try_into()
        .unwrap_or_else(|_| unreachable!("O has two outbound edges"));
    let mut source = Source::new(config.master_seed);
    for _ in 0..config.trials {
        let e = source.emit();
        to_x.send(&WireMessage::SourcePulse {
            trial: e.to_x.trial,
            axis: e.to_x.axis,
        })?;
        to_y.send(&WireMessage::SourcePulse {
            trial: e.to_y.trial,
            axis: e.to_y.axis,
        })?;
    }
    to_x.finish()?;
    to_y.finish()?;
    Ok(RoleOutcome::Sent { trials: config.trials })
}

fn run_randomizer(
    side: Side,
    config: &ExperimentConfig,
    endpoints: &Endpoints,
    opts: &NetOptions,
) -> Result<RoleOutcome, NetError> {
    let (role, discloser) = match side {
        Side::Left => (NetRole::A, Discloser::A),
        Side::Right => (NetRole::B, Discloser::B),
    };
    let [mut station, mut referee]: [Outbound; 2] = connect_all(role, endpoints, opts)?
        .try_into()
        .unwrap_or_else(|_| unreachable!("randomizers have two outbound edges"));
    let mut randomizer = Randomizer::new(config.master_seed, side);
    for _ in 0..config.trials {
        let msg = randomizer.emit();
        station.send(&WireMessage::Setting {
            trial: msg.trial,
            label: msg.label,
        })?;
        referee.send(&WireMessage::LabelDisclosure {
            trial: msg.trial,
            side: discloser,
            label: msg.label,
        })?;
    }
    station.finish()?;
    referee.finish()?;
    Ok(RoleOutcome::Sent { trials: config.trials })
}

fn run_station(
    side: Side,
    config: &ExperimentConfig,
    mut inbox: Inbox,
    endpoints: &Endpoints,
    opts: &NetOptions,
) -> Result<RoleOutcome, NetError> {
    let role = inbox.role;
    let randomizer = match side {
        Side::Left => NetRole::A,
        Side::Right => NetRole::B,
    };
    let [mut collector]: [Outbound; 1] = connect_all(role, endpoints, opts)?
        .try_into()
        .unwrap_or_else(|_| unreachable!("stations have one outbound edge"));
    let mut station = Station::new(
        config,
        side,
        MalusPoisson {
            rule: config.detector_rule,
        },
    );
    while let Some((peer, msg)) = inbox.next()? {
        let outcome = match msg {
            WireMessage::SourcePulse { trial, axis } if peer == NetRole::O => {
                check_trial(role, peer, trial, config)?;
                station
                    .on_pulse(eprb_core::protocol::SourcePulseMsg { trial, axis })
                    .map_err(protocol_err(role, peer))?
            }
            WireMessage::Setting { trial, label } if peer == randomizer => {
                check_trial(role, peer, trial, config)?;
                station
                    .on_setting(eprb_core::protocol::SettingMsg { trial, label })
                    .map_err(protocol_err(role, peer))?
            }
            other => return Err(unexpected(role, peer, &other)),
        };
        if let Some(o) = outcome {
            collector.send(&WireMessage::Outcome {
                trial: o.trial,
                label: o.label,
                axis: o.axis,
                detected: o.detected,
            })?;
        }
    }
    if station.completed() != config.trials {
        return Err(violation(
            role,
            NetRole::O,
            format!("inputs ended after {} of {} trials", station.completed(), config.trials),
        ));
    }
    collector.finish()?;
    Ok(RoleOutcome::Sent { trials: config.trials })
}

fn run_collector(
    config: &ExperimentConfig,
    mut inbox: Inbox,
    endpoints: &Endpoints,
    opts: &RoleOptions,
) -> Result<RoleOutcome, NetError> {
    let role = NetRole::Collector;
    let [mut referee]: [Outbound; 1] = connect_all(role, endpoints, &opts.net)?
        .try_into()
        .unwrap_or_else(|_| unreachable!("collector has one outbound edge"));
    let mut collector = Collector::new();
    let mut log = Vec::with_capacity(config.trials as usize);
    while let Some((peer, msg)) = inbox.next()? {
        let side = match peer {
            NetRole::X => Side::Left,
            _ => Side::Right,
        };
        let WireMessage::Outcome {
            trial,
            label,
            axis,
            detected,
        } = msg
        else {
            return Err(unexpected(role, peer, &msg));
        };
        check_trial(role, peer, trial, config)?;
        let outcome = eprb_core::protocol::OutcomeMsg {
            trial,
            label,
            axis,
            detected,
        };
        if let Some(rec) = collector.on_outcome(side, outcome).map_err(protocol_err(role, peer))? {
            referee.send(&WireMessage::Record(rec))?;
            log.push(rec);
        }
    }
    if log.len() as u64 != config.trials {
        return Err(violation(
            role,
            NetRole::X,
            format!("outcomes ended after {} of {} trials", log.len(), config.trials),
        ));
    }
    if let Some(path) = &opts.log_out {
        let file = File::create(path).map_err(io_context(format!("creating {}", path.display())))?;
        write_log(&log, config, BufWriter::new(file))?;
    }
    referee.finish()?;
    Ok(RoleOutcome::Collected(log))
}

/// Referee over streamed input. `next` yields `(sender, message)` pairs and
/// `None` once every sender has sent END.
///
/// Disclosures must come from A and B and records from the collector, each
/// in trial order; anything else is a protocol violation. A stream that ends
/// early gives a FAIL verdict with a diagnostic.
pub fn referee_service(
    expected_trials: u64,
    mut next: impl FnMut() -> Result<Option<(NetRole, WireMessage)>, NetError>,
) -> Result<RefereeOutcome, NetError> {
    let role = NetRole::Referee;
    let mut a: Vec<SettingLabel> = Vec::new();
    let mut b: Vec<SettingLabel> = Vec::new();
    let mut log: Vec<TrialRecord> = Vec::new();
    let diagnostic = loop {
        let (peer, msg) = match next() {
            Ok(Some(item)) => item,
            Ok(None) => break None,
            Err(NetError::PrematureEnd { peer, .. }) => break Some(format!("{peer} ended before END")),
            Err(e) => return Err(e),
        };
        let got = msg.trial();
        let (seq_len, ok) = match (&msg, peer) {
            (
                WireMessage::LabelDisclosure {
                    side: Discloser::A,
                    label,
                    ..
                },
                NetRole::A,
            ) => {
                a.push(*label);
                (a.len(), true)
            }
            (
                WireMessage::LabelDisclosure {
                    side: Discloser::B,
                    label,
                    ..
                },
                NetRole::B,
            ) => {
                b.push(*label);
                (b.len(), true)
            }
            (WireMessage::Record(rec), NetRole::Collector) => {
                log.push(*rec);
                (log.len(), true)
            }
            _ => (0, false),
        };
        if !ok {
            return Err(unexpected(role, peer, &msg));
        }
        if got != Some(seq_len as u64 - 1) {
            return Err(violation(role, peer, format!("trial {got:?} out of order")));
        }
    };
    let report = referee_verify(expected_trials, &a, &b, &log);
    let diagnostic = diagnostic.or_else(|| {
        (report.verdict == Verdict::Fail && report.mismatches == 0).then(|| {
            format!(
                "expected {expected_trials} trials, got A={} B={} records={}",
                a.len(),
                b.len(),
                log.len()
            )
        })
    });
    Ok(RefereeOutcome { report, diagnostic })
}

/// Result of a complete local session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub log: Vec<TrialRecord>,
    pub referee: RefereeOutcome,
}

/// Runs all seven roles on loopback sockets, one thread per role.
pub fn run_local_session(config: &ExperimentConfig, opts: &RoleOptions) -> Result<SessionOutput, NetError> {
    config.validate()?;
    let mut listeners = Vec::new();
    let mut addrs = std::collections::BTreeMap::new();
    for role in NetRole::ALL.into_iter().filter(|r| r.listens()) {
        let l = TcpListener::bind("127.0.0.1:0").map_err(io_context("binding loopback"))?;
        addrs.insert(role, l.local_addr().map_err(io_context("reading local address"))?);
        listeners.push((role, l));
    }
    let endpoints_for = |role: NetRole| Endpoints {
        listen: addrs.get(&role).copied(),
        connect: role.outbound().into_iter().map(|p| (p, addrs[&p])).collect(),
    };
    let mut handles = Vec::new();
    for role in NetRole::ALL {
        let listener = listeners
            .iter()
            .position(|(r, _)| *r == role)
            .map(|i| listeners.swap_remove(i).1);
        let endpoints = endpoints_for(role);
        endpoints.validate(role)?;
        let (config, opts) = (*config, opts.clone());
        handles.push(thread::spawn(move || {
            serve_bound(role, &config, listener, &endpoints, &opts)
        }));
    }
    let mut log = None;
    let mut referee = None;
    let mut first_err = None;
    for h in handles {
        match h.join().expect("role thread panicked") {
            Ok(RoleOutcome::Collected(l)) => log = Some(l),
            Ok(RoleOutcome::Refereed(r)) => referee = Some(r),
            Ok(RoleOutcome::Sent { .. }) => {}
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(SessionOutput {
        log: log.expect("collector finished"),
        referee: referee.expect("referee finished"),
    })
}
