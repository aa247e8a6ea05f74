use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::result::{Fate, RunResult};
use crate::time::SimTime;
use crate::video::StreamTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDecode {
    pub display_index: u32,
    pub all_packets_on_time: bool,
    pub decodable: bool,
    /// Frame shown in place of this one when it cannot be decoded.
    pub concealed_by: Option<u32>,
}

/// Per-frame decode flags, in display order (same positions as the trace).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecodeState {
    pub frames: Vec<FrameDecode>,
}

impl DecodeState {
    pub fn decodable_count(&self) -> usize {
        self.frames.iter().filter(|f| f.decodable).count()
    }

    pub fn ratio(&self) -> f64 {
        if self.frames.is_empty() {
            1.0
        } else {
            self.decodable_count() as f64 / self.frames.len() as f64
        }
    }

    pub fn non_decodable(&self) -> Vec<u32> {
        self.frames.iter().filter(|f| !f.decodable).map(|f| f.display_index).collect()
    }
}

/// Decode flags given which frames (by position) arrived complete and on time.
pub fn propagate(trace: &StreamTrace, on_time: &[bool]) -> Result<DecodeState> {
    assert_eq!(on_time.len(), trace.len(), "one flag per frame");
    let mut decodable = vec![false; trace.len()];
    for pos in trace.coding_order() {
        let f = &trace.frames[pos];
        let mut ok = on_time[pos];
        for &r in &f.reference_indices {
            let rp = trace.position(r).ok_or(Error::DanglingReference { frame: f.display_index, reference: r })?;
            if trace.frames[rp].coding_index >= f.coding_index {
                return Err(Error::TraceInvariant { frame: f.display_index, message: format!("reference {r} is not decoded earlier") });
            }
            ok &= decodable[rp];
        }
        decodable[pos] = ok;
    }
    let mut last_good = None;
    let frames = trace
        .frames
        .iter()
        .enumerate()
        .map(|(pos, f)| {
            let concealed_by = if decodable[pos] { None } else { last_good };
            if decodable[pos] {
                last_good = Some(f.display_index);
            }
            FrameDecode { display_index: f.display_index, all_packets_on_time: on_time[pos], decodable: decodable[pos], concealed_by }
        })
        .collect();
    Ok(DecodeState { frames })
}

/// A frame is decodable when every one of its packets reached the receiver
/// within `deadline_s` of creation and all its references are decodable.
pub fn decodability(trace: &StreamTrace, result: &RunResult, deadline_s: f64) -> Result<DecodeState> {
    let deadline = SimTime::from_secs_f64(deadline_s).as_micros();
    let mut on_time: HashMap<u32, bool> = HashMap::with_capacity(trace.len());
    for p in result.video_packets() {
        let frame = p.frame().expect("video packet");
        let good = p.fate != Fate::ChannelLoss && p.fate != Fate::QueueDrop && p.latency().is_some_and(|l| l <= deadline);
        *on_time.entry(frame).or_insert(true) &= good;
    }
    let flags = trace
        .frames
        .iter()
        .map(|f| on_time.get(&f.display_index).copied().ok_or(Error::MissingFrame { frame: f.display_index }))
        .collect::<Result<Vec<bool>>>()?;
    propagate(trace, &flags)
}
