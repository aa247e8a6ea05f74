//! Per-run output records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use crate::mac::AcCounters;
use crate::mapping::{AccessCategoryId, MappingAlgorithm, MappingDecision};
use crate::time::{Micros, SimTime};
use crate::video::{LayerId, Payload, StreamTrace, Structure};

/// Final fate of a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Delivered,
    QueueDrop,
    ChannelLoss,
    DeadlineMiss,
}

impl Fate {
    pub fn as_str(self) -> &'static str {
        match self {
            Fate::Delivered => "delivered",
            Fate::QueueDrop => "queue_drop",
            Fate::ChannelLoss => "channel_loss",
            Fate::DeadlineMiss => "deadline_miss",
        }
    }

    pub fn is_lost(self) -> bool {
        self != Fate::Delivered
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub packet_id: u64,
    pub payload: Payload,
    pub size_bytes: u32,
    pub ac: AccessCategoryId,
    pub created: SimTime,
    /// Start of the last transmission attempt.
    pub sent_at: Option<SimTime>,
    /// Arrival at the receiver, also kept for late packets.
    pub delivered_at: Option<SimTime>,
    pub fate: Fate,
}

impl PacketRecord {
    pub fn latency(&self) -> Option<Micros> {
        self.delivered_at.map(|d| d - self.created)
    }

    pub fn layer(&self) -> Option<LayerId> {
        match self.payload {
            Payload::Video { layer, .. } => Some(layer),
            Payload::Background { .. } => None,
        }
    }

    pub fn frame(&self) -> Option<u32> {
        match self.payload {
            Payload::Video { frame_display_index, .. } => Some(frame_display_index),
            Payload::Background { .. } => None,
        }
    }
}

/// Delivery accounting for a group of packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LayerCounters {
    pub sent: u64,
    pub delivered: u64,
    pub lost_queue: u64,
    pub lost_channel: u64,
    pub lost_deadline: u64,
}

impl LayerCounters {
    pub fn add(&mut self, fate: Fate) {
        self.sent += 1;
        match fate {
            Fate::Delivered => self.delivered += 1,
            Fate::QueueDrop => self.lost_queue += 1,
            Fate::ChannelLoss => self.lost_channel += 1,
            Fate::DeadlineMiss => self.lost_deadline += 1,
        }
    }

    pub fn lost(&self) -> u64 {
        self.lost_queue + self.lost_channel + self.lost_deadline
    }

    pub fn merged(mut self, other: &LayerCounters) -> Self {
        self.sent += other.sent;
        self.delivered += other.delivered;
        self.lost_queue += other.lost_queue;
        self.lost_channel += other.lost_channel;
        self.lost_deadline += other.lost_deadline;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcSummary {
    pub ac: AccessCategoryId,
    #[serde(flatten)]
    pub mac: AcCounters,
    /// Fates of the packets that were mapped to this category.
    pub packets: LayerCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub algorithm: MappingAlgorithm,
    pub structure: Option<Structure>,
    pub seed: u64,
    pub playout_deadline_us: Micros,
    pub end_time: SimTime,
    pub per_ac: Vec<AcSummary>,
    pub per_layer: [LayerCounters; 3],
    pub video_total: LayerCounters,
    pub background_total: LayerCounters,
    pub decisions: Vec<MappingDecision>,
    pub packets: Vec<PacketRecord>,
    pub stream: Option<StreamTrace>,
}

impl RunResult {
    pub fn empty(scenario: String, algorithm: MappingAlgorithm, seed: u64, playout_deadline_us: Micros) -> Self {
        RunResult {
            scenario,
            algorithm,
            structure: None,
            seed,
            playout_deadline_us,
            end_time: SimTime::ZERO,
            per_ac: AccessCategoryId::ALL
                .iter()
                .map(|&ac| AcSummary { ac, mac: AcCounters::default(), packets: LayerCounters::default() })
                .collect(),
            per_layer: [LayerCounters::default(); 3],
            video_total: LayerCounters::default(),
            background_total: LayerCounters::default(),
            decisions: Vec::new(),
            packets: Vec::new(),
            stream: None,
        }
    }

    pub fn video_packets(&self) -> impl Iterator<Item = &PacketRecord> {
        self.packets.iter().filter(|p| p.layer().is_some())
    }

    /// Total video packets delivered within the playout deadline.
    pub fn video_delivered(&self) -> u64 {
        self.video_total.delivered
    }

    /// Rebuilds the counters from the packet records.
    pub(crate) fn tally(&mut self) {
        self.per_layer = [LayerCounters::default(); 3];
        self.video_total = LayerCounters::default();
        self.background_total = LayerCounters::default();
        for s in &mut self.per_ac {
            s.packets = LayerCounters::default();
        }
        for p in &self.packets {
            self.per_ac[p.ac.index()].packets.add(p.fate);
            match p.layer() {
                Some(l) => {
                    self.per_layer[l.index()].add(p.fate);
                    self.video_total.add(p.fate);
                }
                None => self.background_total.add(p.fate),
            }
        }
    }
}

#[derive(Serialize)]
struct PacketRow {
    packet_id: u64,
    frame: Option<u32>,
    fragment: Option<u32>,
    layer: Option<u8>,
    source: Option<u32>,
    size_bytes: u32,
    ac: &'static str,
    created_us: u64,
    sent_us: Option<u64>,
    delivered_us: Option<u64>,
    latency_us: Option<u64>,
    fate: &'static str,
}

/// One CSV row per packet record; times in microseconds.
pub fn packets_csv(result: &RunResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &result.packets {
        let (frame, fragment, layer, source) = match p.payload {
            Payload::Video { frame_display_index, fragment_index, layer } => {
                (Some(frame_display_index), Some(fragment_index), Some(layer as u8), None)
            }
            Payload::Background { source } => (None, None, None, Some(source)),
        };
        w.serialize(PacketRow {
            packet_id: p.packet_id,
            frame,
            fragment,
            layer,
            source,
            size_bytes: p.size_bytes,
            ac: p.ac.name(),
            created_us: p.created.as_micros(),
            sent_us: p.sent_at.map(SimTime::as_micros),
            delivered_us: p.delivered_at.map(SimTime::as_micros),
            latency_us: p.latency(),
            fate: p.fate.as_str(),
        })
        .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}
