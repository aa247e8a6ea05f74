//! Discrete-event execution of a scenario.
//!
//! Each frame is fragmented at its capture time and every fragment is
//! mapped against the live VI queue length and enqueued at once. The medium
//! is modelled lazily: after each event every station reports when its next
//! transmission would start, and the earliest start is taken only if it is
//! strictly earlier than the next pending event.
//!
//! Station 0 carries the video and is the only one whose frames cross the
//! lossy channel. Other stations only load the medium; when two stations
//! start on the same microsecond both frames collide.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::mac::{EnqueueOutcome, MacState};
use crate::mapping::{AccessCategoryId, Mapper};
use crate::result::{Fate, PacketRecord, RunResult};
use crate::rng::{stream, SimRng, StreamLabel};
use crate::scenario::Scenario;
use crate::time::{airtime_us, SimTime};
use crate::traffic::{TrafficPattern, TrafficSource};
use crate::video::{fragment, Packet, Payload, StreamTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    /// Frame at this position of the stream is captured.
    FrameCaptured(usize),
    SourceArrival(u32),
    TxEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

/// Time-ordered queue; ties pop in insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event { time, seq, kind }));
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

struct Sim<'a> {
    scenario: &'a Scenario,
    horizon: SimTime,
    deadline_us: u64,
    events: EventQueue,
    stations: Vec<MacState>,
    station_rngs: Vec<SimRng>,
    /// Stations whose transmissions currently occupy the medium.
    on_air: Vec<usize>,
    channel: ChannelState,
    mapper: Mapper<SimRng>,
    channel_rng: SimRng,
    source_rngs: Vec<SimRng>,
    stream: Option<StreamTrace>,
    capture: Vec<SimTime>,
    records: Vec<PacketRecord>,
    result: RunResult,
    now: SimTime,
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario, stream_trace: Option<StreamTrace>) -> Result<Self> {
        let seed = scenario.seed;
        let deadline_us = SimTime::from_secs_f64(scenario.playout_deadline_s).as_micros();
        let name = if scenario.name.is_empty() { "scenario".to_string() } else { scenario.name.clone() };
        let mut result = RunResult::empty(name, scenario.mapping.algorithm, seed, deadline_us);
        result.structure = stream_trace.as_ref().map(|s| s.structure);
        let capture = stream_trace
            .as_ref()
            .map(|s| s.frames.iter().map(|f| SimTime::from_secs_f64(f.capture_time)).collect())
            .unwrap_or_default();
        let n_stations = scenario.background.iter().map(|b| b.station as usize + 1).max().unwrap_or(1).max(1);
        Ok(Sim {
            scenario,
            horizon: SimTime::from_secs_f64(scenario.duration_s),
            deadline_us,
            events: EventQueue::default(),
            stations: (0..n_stations).map(|_| MacState::new(&scenario.mac)).collect(),
            station_rngs: (0..n_stations as u32)
                .map(|i| stream(seed, if i == 0 { StreamLabel::Mac } else { StreamLabel::Station(i) }))
                .collect(),
            on_air: Vec::new(),
            channel: ChannelState::new(scenario.channel.clone())?,
            mapper: Mapper::new(scenario.mapping.algorithm, scenario.mapping.params(), stream(seed, StreamLabel::Mapping)),
            channel_rng: stream(seed, StreamLabel::Channel),
            source_rngs: (0..scenario.background.len() as u32).map(|i| stream(seed, StreamLabel::Source(i))).collect(),
            stream: stream_trace,
            capture,
            records: Vec::new(),
            result,
            now: SimTime::ZERO,
        })
    }

    fn schedule_initial(&mut self) {
        if let Some(s) = &self.stream {
            for pos in s.coding_order() {
                self.events.push(self.capture[pos], EventKind::FrameCaptured(pos));
            }
        }
        for (i, src) in self.scenario.background.iter().enumerate() {
            let stop = src.stop(self.horizon);
            match src.pattern {
                TrafficPattern::Saturating { backlog, .. } => {
                    if src.start() < stop {
                        for _ in 0..backlog {
                            self.events.push(src.start(), EventKind::SourceArrival(i as u32));
                        }
                    }
                }
                _ => {
                    if let Some(t) = src.first_arrival(stop, &mut self.source_rngs[i]) {
                        self.events.push(t, EventKind::SourceArrival(i as u32));
                    }
                }
            }
        }
    }

    fn run(mut self) -> Result<RunResult> {
        self.schedule_initial();
        loop {
            let next_tx = self.stations.iter().filter_map(|m| m.next_transmission_event().map(|(t, _)| t)).min();
            let next_ev = self.events.peek_time();
            match (next_tx, next_ev) {
                (Some(t), ev) if ev.is_none_or(|e| t < e) => self.start_transmissions(t),
                (_, Some(_)) => {
                    let ev = self.events.pop().expect("peeked event");
                    debug_assert!(ev.time >= self.now, "event out of order");
                    self.now = ev.time;
                    match ev.kind {
                        EventKind::FrameCaptured(pos) => self.on_frame(pos),
                        EventKind::SourceArrival(i) => self.on_source(i),
                        EventKind::TxEnd => self.on_tx_end()?,
                    }
                }
                (None, None) => break,
                (Some(_), None) => unreachable!(),
            }
        }
        self.result.end_time = self.now;
        for (summary, counters) in self.result.per_ac.iter_mut().zip(self.stations[0].counters()) {
            summary.mac = counters;
        }
        self.result.packets = self.records;
        self.result.stream = self.stream;
        self.result.tally();
        Ok(self.result)
    }

    fn new_record(&mut self, packet: &Packet, ac: AccessCategoryId) {
        debug_assert_eq!(packet.packet_id as usize, self.records.len());
        self.records.push(PacketRecord {
            packet_id: packet.packet_id,
            payload: packet.payload,
            size_bytes: packet.size_bytes,
            ac,
            created: packet.creation_time,
            sent_at: None,
            delivered_at: None,
            fate: Fate::QueueDrop,
        });
    }

    fn start_transmissions(&mut self, t: SimTime) {
        self.now = t;
        let starters: Vec<usize> = (0..self.stations.len())
            .filter(|&i| self.stations[i].next_transmission_event().is_some_and(|(at, _)| at == t))
            .collect();
        let mut end = t;
        for &i in &starters {
            let tx = self.stations[i].begin_transmission(t, &mut self.station_rngs[i]);
            self.records[tx.packet.packet_id as usize].sent_at = Some(t);
            end = end.max(tx.end);
        }
        for (i, m) in self.stations.iter_mut().enumerate() {
            if starters.contains(&i) {
                m.extend_busy(end);
            } else {
                m.observe_busy(t, end);
            }
        }
        self.on_air = starters;
        self.events.push(end, EventKind::TxEnd);
    }

    fn enqueue(&mut self, station: usize, packet: Packet, ac: AccessCategoryId) -> EnqueueOutcome {
        self.new_record(&packet, ac);
        let outcome = self.stations[station].enqueue(ac, packet, self.now, &mut self.station_rngs[station]);
        if outcome == EnqueueOutcome::Dropped {
            self.records[packet.packet_id as usize].fate = Fate::QueueDrop;
        }
        outcome
    }

    fn on_frame(&mut self, pos: usize) {
        let v = self.scenario.video.as_ref().expect("frames imply a video config");
        let frame = &self.stream.as_ref().expect("stream present").frames[pos];
        let packets = fragment(frame, v.mtu, self.now, self.records.len() as u64);
        for p in packets {
            let decision = self.mapper.decide(&p, self.stations[0].queue_len(AccessCategoryId::Vi));
            self.result.decisions.push(decision);
            self.enqueue(0, p, decision.chosen_ac);
        }
    }

    fn on_source(&mut self, i: u32) {
        let src: TrafficSource = self.scenario.background[i as usize];
        let stop = src.stop(self.horizon);
        let packet = Packet {
            packet_id: self.records.len() as u64,
            size_bytes: src.pattern.packet_bytes(),
            creation_time: self.now,
            payload: Payload::Background { source: i },
        };
        let outcome = self.enqueue(src.station as usize, packet, src.target_ac);
        match src.pattern {
            TrafficPattern::Saturating { packet_bytes, .. } => {
                // a full queue is retried after one packet's airtime
                if outcome == EnqueueOutcome::Dropped {
                    let retry = self.now + airtime_us(packet_bytes, self.stations[0].constants.data_rate_bps);
                    if retry < stop {
                        self.events.push(retry, EventKind::SourceArrival(i));
                    }
                }
            }
            _ => {
                if let Some(t) = src.next_arrival(self.now, stop, &mut self.source_rngs[i as usize]) {
                    self.events.push(t, EventKind::SourceArrival(i));
                }
            }
        }
    }

    fn on_tx_end(&mut self) -> Result<()> {
        let on_air = std::mem::take(&mut self.on_air);
        for (i, m) in self.stations.iter_mut().enumerate() {
            if !on_air.contains(&i) {
                m.observe_idle(self.now);
            }
        }
        if on_air.len() > 1 {
            for &i in &on_air {
                self.stations[i].end_collided_transmission(&mut self.station_rngs[i]);
            }
            return Ok(());
        }
        let Some(&station) = on_air.first() else {
            return Err(Error::config("transmission end without transmission"));
        };
        let lost = station == 0 && self.channel.sample_loss(&mut self.channel_rng)?;
        let (tx, left) = self.stations[station]
            .end_transmission(lost, &mut self.station_rngs[station])
            .ok_or_else(|| Error::config("transmission end without transmission"))?;
        let Some(packet) = left else { return Ok(()) };
        let extra = if station == 0 && !lost { self.channel.sample_delay(&mut self.channel_rng) } else { 0 };
        let rec = &mut self.records[packet.packet_id as usize];
        if lost {
            rec.fate = Fate::ChannelLoss;
        } else {
            let at = tx.end + extra;
            rec.delivered_at = Some(at);
            rec.fate = if packet.is_video() && at - packet.creation_time > self.deadline_us { Fate::DeadlineMiss } else { Fate::Delivered };
        }
        if let Payload::Background { source } = packet.payload {
            let src = &self.scenario.background[source as usize];
            if matches!(src.pattern, TrafficPattern::Saturating { .. }) && self.now < src.stop(self.horizon) {
                self.events.push(self.now, EventKind::SourceArrival(source));
            }
        }
        Ok(())
    }
}

/// Executes one scenario. Deterministic for a given seed.
pub fn run(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let stream_trace = scenario.build_stream()?;
    Sim::new(scenario, stream_trace)?.run()
}

/// Builds the scenarios of a sweep: value `i` runs with `seed + i` and the
/// axis set to that value.
pub fn sweep_scenarios<S: AsRef<str>>(base: &Scenario, axis: &str, values: &[S]) -> Result<Vec<Scenario>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut s = base.clone();
            s.seed = base.seed.wrapping_add(i as u64);
            let s = s.with_override(axis, v.as_ref())?;
            s.validate()?;
            Ok(s)
        })
        .collect()
}

/// Runs one independent simulation per value on up to `jobs` threads.
/// Results come back in input order regardless of `jobs`.
pub fn sweep<S: AsRef<str>>(base: &Scenario, axis: &str, values: &[S], jobs: usize) -> Result<Vec<RunResult>> {
    let scenarios = sweep_scenarios(base, axis, values)?;
    run_many(&scenarios, jobs)
}

/// Runs independent scenarios in parallel, preserving order.
pub fn run_many(scenarios: &[Scenario], jobs: usize) -> Result<Vec<RunResult>> {
    if jobs <= 1 || scenarios.len() <= 1 {
        return scenarios.iter().map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| scenarios.par_iter().map(run).collect())
}
