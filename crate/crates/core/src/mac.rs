//! EDCA access-category queues and single-station CSMA/CA contention.
//!
//! Time is kept in integer microseconds. Each non-empty queue counts down
//! `AIFS + backoff * slot` from the moment the medium last went idle (or from
//! its own activation, if later). The earliest queue transmits; queues that
//! finish counting on the same microsecond collide internally and only the
//! highest priority one proceeds. Losers of an internal collision behave as
//! after an external collision. Counters of the other queues freeze while the
//! medium is busy.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::AccessCategoryId;
use crate::time::{airtime_us, Micros, SimTime};
use crate::video::Packet;

/// DSRC channel whose EDCA parameter set applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Cch,
    #[default]
    Sch,
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cch" => Ok(Channel::Cch),
            "sch" => Ok(Channel::Sch),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Cch => "CCH",
            Channel::Sch => "SCH",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCategoryParams {
    pub cw_min: u32,
    pub cw_max: u32,
    pub aifsn: u32,
}

impl AccessCategoryParams {
    /// 802.11p defaults for one (category, channel) pair.
    pub fn standard(ac: AccessCategoryId, channel: Channel) -> Self {
        use AccessCategoryId::*;
        let (cw_min, cw_max, aifsn) = match (channel, ac) {
            (Channel::Cch, Bk) => (15, 1023, 9),
            (Channel::Cch, Be) => (7, 15, 6),
            (Channel::Cch, Vi) => (3, 7, 3),
            (Channel::Cch, Vo) => (3, 7, 2),
            (Channel::Sch, Bk) => (31, 1023, 7),
            (Channel::Sch, Be) => (31, 1023, 3),
            (Channel::Sch, Vi) => (15, 31, 2),
            (Channel::Sch, Vo) => (7, 15, 2),
        };
        AccessCategoryParams { cw_min, cw_max, aifsn }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cw_min > self.cw_max {
            return Err(Error::config(format!("cw_min {} exceeds cw_max {}", self.cw_min, self.cw_max)));
        }
        if self.aifsn < 2 {
            return Err(Error::config(format!("aifsn must be at least 2, got {}", self.aifsn)));
        }
        Ok(())
    }
}

/// Partial override of one category's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AcOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cw_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cw_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aifsn: Option<u32>,
}

impl AcOverride {
    pub fn apply(&self, mut p: AccessCategoryParams) -> AccessCategoryParams {
        p.cw_min = self.cw_min.unwrap_or(p.cw_min);
        p.cw_max = self.cw_max.unwrap_or(p.cw_max);
        p.aifsn = self.aifsn.unwrap_or(p.aifsn);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacConstants {
    pub sifs_us: Micros,
    pub slot_us: Micros,
    pub data_rate_bps: u64,
}

impl Default for MacConstants {
    fn default() -> Self {
        MacConstants { sifs_us: 32, slot_us: 13, data_rate_bps: 6_000_000 }
    }
}

/// `AIFSN * slot + SIFS` for explicit parameters.
pub fn aifs_for(params: &AccessCategoryParams, constants: &MacConstants) -> Micros {
    u64::from(params.aifsn) * constants.slot_us + constants.sifs_us
}

/// Arbitration inter-frame space of a category on a channel.
pub fn aifs_duration(ac: AccessCategoryId, channel: Channel, constants: &MacConstants) -> Micros {
    aifs_for(&AccessCategoryParams::standard(ac, channel), constants)
}

/// Uniform backoff in `[0, cw]` slots.
pub fn draw_backoff<R: Rng + ?Sized>(cw: u32, rng: &mut R) -> u32 {
    rng.random_range(0..=cw)
}

/// Highest-priority category among those ready on the same instant.
pub fn resolve_internal_collision(ready: &[AccessCategoryId]) -> AccessCategoryId {
    *ready.iter().max().expect("at least one ready category")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxOutcome {
    Success,
    /// Lost the internal contention to a higher-priority queue.
    Collision,
    /// Overlapped with another station's transmission.
    ExternalCollision,
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted,
    Dropped,
}

/// Per-category counters exported with run results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AcCounters {
    pub enqueued: u64,
    pub dropped: u64,
    pub attempts: u64,
    pub delivered: u64,
    pub channel_lost: u64,
    pub internal_collisions: u64,
    pub external_collisions: u64,
    pub retries: u64,
    pub max_len: u32,
}

#[derive(Debug, Clone)]
pub struct AcQueue {
    pub ac: AccessCategoryId,
    pub params: AccessCategoryParams,
    pub capacity: u32,
    pub fifo: VecDeque<Packet>,
    pub current_cw: u32,
    pub backoff_counter: u32,
    /// Instant from which the AIFS countdown runs.
    pub contend_from: SimTime,
    /// Channel-loss retries already spent on the head packet.
    pub head_retries: u32,
    pub counters: AcCounters,
}

impl AcQueue {
    pub fn new(ac: AccessCategoryId, params: AccessCategoryParams, capacity: u32) -> Self {
        AcQueue {
            ac,
            params,
            capacity,
            fifo: VecDeque::with_capacity(capacity as usize),
            current_cw: params.cw_min,
            backoff_counter: 0,
            contend_from: SimTime::ZERO,
            head_retries: 0,
            counters: AcCounters::default(),
        }
    }

    pub fn len(&self) -> u32 {
        self.fifo.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn drops(&self) -> u64 {
        self.counters.dropped
    }

    /// Drop-tail admission. An empty queue that accepts a packet draws a fresh
    /// backoff and starts contending at `contend_from`.
    pub fn enqueue<R: Rng + ?Sized>(&mut self, packet: Packet, contend_from: SimTime, rng: &mut R) -> EnqueueOutcome {
        if self.len() >= self.capacity {
            self.counters.dropped += 1;
            return EnqueueOutcome::Dropped;
        }
        if self.fifo.is_empty() {
            self.backoff_counter = draw_backoff(self.current_cw, rng);
            self.contend_from = contend_from;
        }
        self.fifo.push_back(packet);
        self.counters.enqueued += 1;
        self.counters.max_len = self.counters.max_len.max(self.len());
        EnqueueOutcome::Accepted
    }

    /// Applies the contention-window rules after an attempt and returns the
    /// packet that left the queue, if any.
    pub fn on_tx_outcome<R: Rng + ?Sized>(&mut self, outcome: TxOutcome, retry_limit: u32, rng: &mut R) -> Option<Packet> {
        match outcome {
            TxOutcome::Success => {
                self.counters.delivered += 1;
                self.finish_head(rng)
            }
            TxOutcome::Collision => {
                self.counters.internal_collisions += 1;
                self.grow_window(rng);
                None
            }
            TxOutcome::ExternalCollision => {
                self.counters.external_collisions += 1;
                self.grow_window(rng);
                None
            }
            TxOutcome::Loss if self.head_retries < retry_limit => {
                self.head_retries += 1;
                self.counters.retries += 1;
                self.grow_window(rng);
                None
            }
            TxOutcome::Loss => {
                self.counters.channel_lost += 1;
                self.finish_head(rng)
            }
        }
    }

    fn grow_window<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.current_cw = (2 * (self.current_cw + 1) - 1).min(self.params.cw_max);
        self.backoff_counter = draw_backoff(self.current_cw, rng);
    }

    fn finish_head<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Packet> {
        self.current_cw = self.params.cw_min;
        self.head_retries = 0;
        let out = self.fifo.pop_front();
        if !self.fifo.is_empty() {
            self.backoff_counter = draw_backoff(self.current_cw, rng);
        }
        out
    }
}

/// A transmission that has been granted the medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transmission {
    pub ac: AccessCategoryId,
    pub packet: Packet,
    pub start: SimTime,
    pub end: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacConfig {
    #[serde(default)]
    pub channel: Channel,
    #[serde(default = "default_rate")]
    pub data_rate_bps: u64,
    #[serde(default = "default_capacity")]
    pub queue_capacity: u32,
    /// MAC retransmissions after a channel loss; 0 means lost is lost.
    #[serde(default)]
    pub retry_limit: u32,
    #[serde(default)]
    pub overrides: MacOverrides,
}

fn default_rate() -> u64 {
    6_000_000
}

fn default_capacity() -> u32 {
    50
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            channel: Channel::Sch,
            data_rate_bps: default_rate(),
            queue_capacity: default_capacity(),
            retry_limit: 0,
            overrides: MacOverrides::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MacOverrides {
    #[serde(default)]
    pub bk: AcOverride,
    #[serde(default)]
    pub be: AcOverride,
    #[serde(default)]
    pub vi: AcOverride,
    #[serde(default)]
    pub vo: AcOverride,
}

impl MacOverrides {
    pub fn get(&self, ac: AccessCategoryId) -> &AcOverride {
        match ac {
            AccessCategoryId::Bk => &self.bk,
            AccessCategoryId::Be => &self.be,
            AccessCategoryId::Vi => &self.vi,
            AccessCategoryId::Vo => &self.vo,
        }
    }
}

impl MacConfig {
    pub fn params(&self, ac: AccessCategoryId) -> AccessCategoryParams {
        self.overrides.get(ac).apply(AccessCategoryParams::standard(ac, self.channel))
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_rate_bps == 0 {
            return Err(Error::config("data_rate_bps must be positive"));
        }
        if self.queue_capacity == 0 {
            return Err(Error::config("queue_capacity must be positive"));
        }
        for ac in AccessCategoryId::ALL {
            self.params(ac).validate().map_err(|e| Error::config(format!("{ac}: {e}")))?;
        }
        Ok(())
    }
}

/// The four queues of one station plus the medium state.
#[derive(Debug, Clone)]
pub struct MacState {
    pub queues: [AcQueue; 4],
    pub medium_busy_until: SimTime,
    pub constants: MacConstants,
    pub retry_limit: u32,
    in_flight: Option<Transmission>,
}

impl MacState {
    pub fn new(config: &MacConfig) -> Self {
        let q = |ac| AcQueue::new(ac, config.params(ac), config.queue_capacity);
        MacState {
            queues: AccessCategoryId::ALL.map(q),
            medium_busy_until: SimTime::ZERO,
            constants: MacConstants { data_rate_bps: config.data_rate_bps, ..MacConstants::default() },
            retry_limit: config.retry_limit,
            in_flight: None,
        }
    }

    pub fn queue(&self, ac: AccessCategoryId) -> &AcQueue {
        &self.queues[ac.index()]
    }

    pub fn queue_len(&self, ac: AccessCategoryId) -> u32 {
        self.queue(ac).len()
    }

    pub fn is_busy(&self) -> bool {
        self.in_flight.is_some()
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight.is_none() && self.queues.iter().all(AcQueue::is_empty)
    }

    pub fn enqueue<R: Rng + ?Sized>(&mut self, ac: AccessCategoryId, packet: Packet, now: SimTime, rng: &mut R) -> EnqueueOutcome {
        let from = now.max(self.medium_busy_until);
        self.queues[ac.index()].enqueue(packet, from, rng)
    }

    pub fn aifs(&self, ac: AccessCategoryId) -> Micros {
        aifs_for(&self.queue(ac).params, &self.constants)
    }

    fn ready_time(&self, q: &AcQueue) -> SimTime {
        let from = q.contend_from.max(self.medium_busy_until);
        from + aifs_for(&q.params, &self.constants) + u64::from(q.backoff_counter) * self.constants.slot_us
    }

    /// Earliest instant some queue wins the medium, with the winning category,
    /// or `None` when every queue is empty or a transmission is in progress.
    pub fn next_transmission_event(&self) -> Option<(SimTime, AccessCategoryId)> {
        if self.in_flight.is_some() {
            return None;
        }
        let mut best: Option<(SimTime, AccessCategoryId)> = None;
        for q in self.queues.iter().filter(|q| !q.is_empty()) {
            let t = self.ready_time(q);
            best = match best {
                Some((bt, bac)) if bt < t || (bt == t && bac > q.ac) => Some((bt, bac)),
                _ => Some((t, q.ac)),
            };
        }
        best
    }

    /// Grants the medium at `at`, which must be the instant reported by
    /// [`MacState::next_transmission_event`]. Resolves internal collisions and
    /// freezes the other counters.
    pub fn begin_transmission<R: Rng + ?Sized>(&mut self, at: SimTime, rng: &mut R) -> Transmission {
        let ready: Vec<AccessCategoryId> = self
            .queues
            .iter()
            .filter(|q| !q.is_empty() && self.ready_time(q) == at)
            .map(|q| q.ac)
            .collect();
        assert!(!ready.is_empty(), "begin_transmission at {at} with no ready queue");
        let winner = resolve_internal_collision(&ready);
        for ac in ready.iter().copied().filter(|&ac| ac != winner) {
            self.queues[ac.index()].on_tx_outcome(TxOutcome::Collision, 0, rng);
        }
        self.freeze(at, &ready);
        let q = &mut self.queues[winner.index()];
        q.counters.attempts += 1;
        let packet = *q.fifo.front().expect("winner has a packet");
        let end = at + airtime_us(packet.size_bytes, self.constants.data_rate_bps);
        self.medium_busy_until = end;
        let tx = Transmission { ac: winner, packet, start: at, end };
        self.in_flight = Some(tx);
        tx
    }

    /// Stops the countdown of every nonempty queue not in `skip` at `at`,
    /// keeping the whole slots already counted.
    fn freeze(&mut self, at: SimTime, skip: &[AccessCategoryId]) {
        let slot = self.constants.slot_us;
        let busy = self.medium_busy_until;
        for ac in AccessCategoryId::ALL {
            let aifs = self.aifs(ac);
            let q = &mut self.queues[ac.index()];
            if q.is_empty() || skip.contains(&ac) {
                continue;
            }
            let counting_from = q.contend_from.max(busy) + aifs;
            if at > counting_from {
                let elapsed = ((at - counting_from) / slot) as u32;
                q.backoff_counter -= elapsed.min(q.backoff_counter);
            }
        }
    }

    /// Another station holds the medium from `at` to `end`.
    pub fn observe_busy(&mut self, at: SimTime, end: SimTime) {
        debug_assert!(self.in_flight.is_none());
        self.freeze(at, &[]);
        self.medium_busy_until = self.medium_busy_until.max(end);
    }

    /// The medium went idle at `end` after another station's transmission.
    pub fn observe_idle(&mut self, end: SimTime) {
        for q in self.queues.iter_mut().filter(|q| !q.is_empty()) {
            q.contend_from = q.contend_from.max(end);
        }
    }

    /// Completes the in-flight transmission with the channel's verdict and
    /// returns the packet if it left its queue.
    pub fn end_transmission<R: Rng + ?Sized>(&mut self, lost: bool, rng: &mut R) -> Option<(Transmission, Option<Packet>)> {
        let outcome = if lost { TxOutcome::Loss } else { TxOutcome::Success };
        self.finish(outcome, rng)
    }

    /// Completes the in-flight transmission after it overlapped with another
    /// station's; the packet stays queued.
    pub fn end_collided_transmission<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Transmission> {
        self.finish(TxOutcome::ExternalCollision, rng).map(|(tx, _)| tx)
    }

    fn finish<R: Rng + ?Sized>(&mut self, outcome: TxOutcome, rng: &mut R) -> Option<(Transmission, Option<Packet>)> {
        let tx = self.in_flight.take()?;
        let retry_limit = self.retry_limit;
        let left = self.queues[tx.ac.index()].on_tx_outcome(outcome, retry_limit, rng);
        let idle = self.medium_busy_until.max(tx.end);
        for q in self.queues.iter_mut().filter(|q| !q.is_empty()) {
            q.contend_from = idle;
        }
        Some((tx, left))
    }

    /// Pushes the end of the busy period out to `until`, used when an
    /// overlapping transmission lasts longer than this station's own.
    pub fn extend_busy(&mut self, until: SimTime) {
        self.medium_busy_until = self.medium_busy_until.max(until);
    }

    pub fn counters(&self) -> [AcCounters; 4] {
        self.queues.clone().map(|q| q.counters)
    }
}
