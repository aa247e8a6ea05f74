use serde::{Deserialize, Serialize};

use super::decode::{decodability, DecodeState};
use crate::error::{Error, Result};
use crate::mapping::MappingAlgorithm;
use crate::result::{AcSummary, LayerCounters, RunResult};
use crate::video::{LayerId, StreamTrace, Structure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: LayerId,
    #[serde(flatten)]
    pub counters: LayerCounters,
}

/// Latency of video packets that reached the receiver, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DelaySummary {
    pub count: u64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl DelaySummary {
    pub fn from_micros(mut samples: Vec<u64>) -> Self {
        if samples.is_empty() {
            return DelaySummary::default();
        }
        samples.sort_unstable();
        let n = samples.len();
        let ms = |us: u64| us as f64 / 1e3;
        let pick = |q: f64| ms(samples[((q * n as f64).ceil() as usize).clamp(1, n) - 1]);
        DelaySummary {
            count: n as u64,
            mean_ms: samples.iter().map(|&s| s as f64).sum::<f64>() / n as f64 / 1e3,
            p50_ms: pick(0.5),
            p95_ms: pick(0.95),
            max_ms: ms(samples[n - 1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub algorithm: MappingAlgorithm,
    pub structure: Option<Structure>,
    pub seed: u64,
    pub per_layer: [LayerReport; 3],
    pub total: LayerCounters,
    pub background: LayerCounters,
    pub per_ac: Vec<AcSummary>,
    pub frames: usize,
    pub decodable_frames: usize,
    pub decodable_frame_ratio: f64,
    pub average_psnr_db: Option<f64>,
    pub video_delay: DelaySummary,
}

impl Report {
    pub fn lost_per_layer(&self) -> [u64; 3] {
        self.per_layer.map(|l| l.counters.lost())
    }
}

/// Summarizes a run. PSNR is averaged only when the trace carries quality
/// columns; a frame that cannot be decoded contributes its own concealed
/// PSNR.
pub fn aggregate(trace: Option<&StreamTrace>, result: &RunResult, decode: Option<&DecodeState>) -> Report {
    let (frames, decodable_frames, ratio) = match decode {
        Some(d) => (d.frames.len(), d.decodable_count(), d.ratio()),
        None => (0, 0, 1.0),
    };
    let average_psnr_db = match (trace, decode) {
        (Some(t), Some(d)) if t.has_quality() && !t.is_empty() => {
            let sum: f64 = t
                .frames
                .iter()
                .zip(&d.frames)
                .map(|(f, s)| {
                    let q = f.quality.expect("quality present");
                    if s.decodable {
                        q.psnr_decoded_db
                    } else {
                        q.psnr_concealed_db
                    }
                })
                .sum();
            Some(sum / t.len() as f64)
        }
        _ => None,
    };
    let latencies = result.video_packets().filter_map(|p| p.latency()).collect();
    Report {
        scenario: result.scenario.clone(),
        algorithm: result.algorithm,
        structure: result.structure,
        seed: result.seed,
        per_layer: LayerId::ALL.map(|layer| LayerReport { layer, counters: result.per_layer[layer.index()] }),
        total: result.video_total,
        background: result.background_total,
        per_ac: result.per_ac.clone(),
        frames,
        decodable_frames,
        decodable_frame_ratio: ratio,
        average_psnr_db,
        video_delay: DelaySummary::from_micros(latencies),
    }
}

/// Report of a run against its own stream and playout deadline.
pub fn report(result: &RunResult) -> Result<Report> {
    let deadline_s = result.playout_deadline_us as f64 / 1e6;
    let decode = match &result.stream {
        Some(t) => Some(decodability(t, result, deadline_s)?),
        None => None,
    };
    Ok(aggregate(result.stream.as_ref(), result, decode.as_ref()))
}

/// Relative change in delivered video packets against a baseline run.
pub fn received_gain(baseline: &Report, candidate: &Report) -> f64 {
    let base = baseline.total.delivered as f64;
    if base == 0.0 {
        return 0.0;
    }
    (candidate.total.delivered as f64 - base) / base
}

/// Unweighted mean of per-pair gains.
pub fn mean_received_gain(pairs: &[(&Report, &Report)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    Some(pairs.iter().map(|(b, c)| received_gain(b, c)).sum::<f64>() / pairs.len() as f64)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    algorithm: &'a str,
    structure: &'a str,
    sent: u64,
    delivered: u64,
    lost_l1: u64,
    lost_l2: u64,
    lost_l3: u64,
    ratio: f64,
    avg_psnr_db: Option<f64>,
}

/// CSV with one row per report.
pub fn summary_csv(reports: &[Report]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if reports.is_empty() {
        w.write_record(["algorithm", "structure", "sent", "delivered", "lost_l1", "lost_l2", "lost_l3", "ratio", "avg_psnr_db"])
            .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    for r in reports {
        let [l1, l2, l3] = r.lost_per_layer();
        w.serialize(SummaryRow {
            algorithm: r.algorithm.name(),
            structure: r.structure.map_or("none", Structure::short_name),
            sent: r.total.sent,
            delivered: r.total.delivered,
            lost_l1: l1,
            lost_l2: l2,
            lost_l3: l3,
            ratio: r.decodable_frame_ratio,
            avg_psnr_db: r.average_psnr_db,
        })
        .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}
