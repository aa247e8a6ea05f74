//! Video stream model: prediction structures, layer classification,
//! reference bookkeeping and MTU packetization.

mod classify;
mod generate;
mod packetize;
mod references;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use classify::{classify_layer, deepest_level};
pub use generate::{generate_stream, SizeJitter, SizeModel};
pub use packetize::{fragment, packetize, Packet, Payload};
pub use references::assign_references;
pub use trace::{load_trace, parse_trace, TraceFormat};

/// Coded picture type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameType {
    #[serde(rename = "IDR")]
    Idr,
    #[serde(rename = "CRA")]
    Cra,
    I,
    P,
    #[serde(rename = "GPB")]
    Gpb,
}

impl FrameType {
    pub fn is_intra(self) -> bool {
        matches!(self, FrameType::Idr | FrameType::Cra | FrameType::I)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameType::Idr => "IDR",
            FrameType::Cra => "CRA",
            FrameType::I => "I",
            FrameType::P => "P",
            FrameType::Gpb => "GPB",
        }
    }
}

impl FromStr for FrameType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "IDR" => Ok(FrameType::Idr),
            "CRA" => Ok(FrameType::Cra),
            "I" => Ok(FrameType::I),
            "P" => Ok(FrameType::P),
            "GPB" => Ok(FrameType::Gpb),
            other => Err(format!("unknown frame type `{other}`")),
        }
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Importance tier of a frame; Layer-1 is the most important.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum LayerId {
    L1 = 1,
    L2 = 2,
    L3 = 3,
}

impl LayerId {
    pub const ALL: [LayerId; 3] = [LayerId::L1, LayerId::L2, LayerId::L3];

    /// Zero-based position, handy for per-layer arrays.
    pub fn index(self) -> usize {
        self as usize - 1
    }
}

impl TryFrom<u8> for LayerId {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(LayerId::L1),
            2 => Ok(LayerId::L2),
            3 => Ok(LayerId::L3),
            _ => Err(format!("layer must be 1, 2 or 3, got {v}")),
        }
    }
}

impl From<LayerId> for u8 {
    fn from(l: LayerId) -> u8 {
        l as u8
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Layer-{}", *self as u8)
    }
}

/// Temporal prediction structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    #[serde(alias = "ai")]
    AllIntra,
    #[serde(alias = "ld")]
    LowDelay,
    #[serde(alias = "ra")]
    RandomAccess,
}

impl Structure {
    pub fn short_name(self) -> &'static str {
        match self {
            Structure::AllIntra => "AI",
            Structure::LowDelay => "LD",
            Structure::RandomAccess => "RA",
        }
    }
}

impl FromStr for Structure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ai" | "all-intra" => Ok(Structure::AllIntra),
            "ld" | "low-delay" => Ok(Structure::LowDelay),
            "ra" | "random-access" => Ok(Structure::RandomAccess),
            other => Err(format!("unknown structure `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GopConfig {
    pub structure: Structure,
    #[serde(default = "default_gop")]
    pub gop_size: u32,
    /// IDR insertion interval in frames.
    #[serde(default = "default_gop")]
    pub intra_period: u32,
    pub frame_rate_fps: f64,
}

fn default_gop() -> u32 {
    32
}

impl GopConfig {
    pub fn new(structure: Structure, frame_rate_fps: f64) -> Self {
        GopConfig { structure, gop_size: 32, intra_period: 32, frame_rate_fps }
    }

    pub fn with_gop(mut self, gop_size: u32, intra_period: u32) -> Self {
        self.gop_size = gop_size;
        self.intra_period = intra_period;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.gop_size == 0 {
            return Err(Error::config("gop_size must be positive"));
        }
        if self.intra_period == 0 {
            return Err(Error::config("intra_period must be positive"));
        }
        if !(self.frame_rate_fps.is_finite() && self.frame_rate_fps > 0.0) {
            return Err(Error::config("frame_rate_fps must be positive"));
        }
        if self.structure != Structure::AllIntra && !self.intra_period.is_multiple_of(self.gop_size) {
            return Err(Error::config(format!(
                "intra_period {} is not a multiple of gop_size {}",
                self.intra_period, self.gop_size
            )));
        }
        Ok(())
    }
}

/// Per-frame quality figures carried by externally produced traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameQuality {
    pub psnr_decoded_db: f64,
    pub psnr_concealed_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoFrame {
    pub display_index: u32,
    pub coding_index: u32,
    pub frame_type: FrameType,
    pub temporal_level: u8,
    pub layer: LayerId,
    pub size_bytes: u32,
    /// Seconds from stream start.
    pub capture_time: f64,
    /// Display indices of the frames this one predicts from.
    pub reference_indices: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<FrameQuality>,
}

/// A coded stream in display order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTrace {
    pub structure: Structure,
    pub gop_size: u32,
    pub frame_rate_fps: f64,
    pub frames: Vec<VideoFrame>,
}

impl StreamTrace {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Position in `frames` of the frame with the given display index.
    pub fn position(&self, display_index: u32) -> Option<usize> {
        self.frames.binary_search_by_key(&display_index, |f| f.display_index).ok()
    }

    pub fn frame(&self, display_index: u32) -> Option<&VideoFrame> {
        self.position(display_index).map(|i| &self.frames[i])
    }

    /// Positions into `frames` sorted by coding order.
    pub fn coding_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.frames.len()).collect();
        order.sort_by_key(|&i| self.frames[i].coding_index);
        order
    }

    pub fn total_bytes(&self) -> u64 {
        self.frames.iter().map(|f| u64::from(f.size_bytes)).sum()
    }

    pub fn has_quality(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.quality.is_some())
    }

    /// Checks the structural invariants of a trace.
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let mut seen_coding = std::collections::BTreeSet::new();
        for (i, f) in self.frames.iter().enumerate() {
            if i > 0 && f.display_index <= self.frames[i - 1].display_index {
                return Err(Error::TraceInvariant {
                    frame: f.display_index,
                    message: "display_index not strictly increasing".into(),
                });
            }
            if f.size_bytes == 0 {
                return Err(Error::TraceInvariant { frame: f.display_index, message: "size_bytes must be positive".into() });
            }
            if !seen_coding.insert(f.coding_index) {
                return Err(Error::TraceInvariant { frame: f.display_index, message: "duplicate coding_index".into() });
            }
            let expected = classify_layer(f.frame_type, f.temporal_level, self.structure, self.gop_size)
                .map_err(|e| Error::TraceInvariant { frame: f.display_index, message: e.to_string() })?;
            if expected != f.layer {
                return Err(Error::TraceInvariant {
                    frame: f.display_index,
                    message: format!("layer {} disagrees with classification {}", f.layer, expected),
                });
            }
            for &r in &f.reference_indices {
                let Some(rf) = self.frame(r) else {
                    return Err(Error::DanglingReference { frame: f.display_index, reference: r });
                };
                if rf.coding_index >= f.coding_index {
                    return Err(Error::TraceInvariant {
                        frame: f.display_index,
                        message: format!("references frame {r} which is not earlier in coding order"),
                    });
                }
            }
        }
        if self.structure == Structure::LowDelay && self.frames.iter().any(|f| f.coding_index != f.display_index) {
            return Err(Error::TraceInvariant {
                frame: self.frames.iter().find(|f| f.coding_index != f.display_index).unwrap().display_index,
                message: "low-delay streams must be coded in display order".into(),
            });
        }
        Ok(())
    }
}
