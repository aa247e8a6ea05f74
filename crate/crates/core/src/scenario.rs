//! Scenario configuration (TOML), bundled presets and dotted-path overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::mac::MacConfig;
use crate::mapping::{MappingAlgorithm, MappingParams};
use crate::rng::{stream, StreamLabel};
use crate::traffic::TrafficSource;
use crate::video::{generate_stream, load_trace, GopConfig, SizeJitter, SizeModel, StreamTrace, Structure, TraceFormat};

/// Bundled presets: (name, TOML source).
pub const PRESETS: [(&str, &str); 2] = [
    ("suburban-video-only", include_str!("../presets/suburban-video-only.toml")),
    ("highway-multistream", include_str!("../presets/highway-multistream.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default = "default_deadline")]
    pub playout_deadline_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<VideoConfig>,
    #[serde(default)]
    pub mapping: MappingConfig,
    #[serde(default)]
    pub mac: MacConfig,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub background: Vec<TrafficSource>,
}

fn default_deadline() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoConfig {
    pub structure: Structure,
    #[serde(default = "default_gop")]
    pub gop_size: u32,
    #[serde(default = "default_gop")]
    pub intra_period: u32,
    pub frame_rate_fps: f64,
    /// Target mean bit rate of generated streams.
    #[serde(default = "default_bitrate")]
    pub bitrate_bps: f64,
    #[serde(default = "default_mtu")]
    pub mtu: u32,
    /// Frames to generate; defaults to `duration_s * frame_rate_fps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_frames: Option<u32>,
    #[serde(default)]
    pub sizes: SizeSpec,
    /// CSV trace to replay instead of generating a stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

fn default_gop() -> u32 {
    32
}

fn default_bitrate() -> f64 {
    1.5e6
}

fn default_mtu() -> u32 {
    1024
}

/// Relative frame-size model for generated streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeSpec {
    #[serde(default = "default_intra_ratio")]
    pub intra_ratio: f64,
    #[serde(default = "default_level_decay")]
    pub level_decay: f64,
    #[serde(default)]
    pub jitter: SizeJitter,
}

fn default_intra_ratio() -> f64 {
    8.0
}

fn default_level_decay() -> f64 {
    0.75
}

impl Default for SizeSpec {
    fn default() -> Self {
        SizeSpec { intra_ratio: default_intra_ratio(), level_decay: default_level_decay(), jitter: SizeJitter::Constant }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    #[serde(default)]
    pub algorithm: MappingAlgorithm,
    #[serde(default = "default_p_layer")]
    pub p_layer: [f64; 3],
    #[serde(default = "default_qth_low")]
    pub qth_low: u32,
    #[serde(default = "default_qth_high")]
    pub qth_high: u32,
}

fn default_p_layer() -> [f64; 3] {
    MappingParams::<f64>::standard().p_layer
}

fn default_qth_low() -> u32 {
    20
}

fn default_qth_high() -> u32 {
    45
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            algorithm: MappingAlgorithm::Edca,
            p_layer: default_p_layer(),
            qth_low: default_qth_low(),
            qth_high: default_qth_high(),
        }
    }
}

impl MappingConfig {
    pub fn params(&self) -> MappingParams<f64> {
        MappingParams { p_layer: self.p_layer, qth_low: self.qth_low, qth_high: self.qth_high }
    }
}

impl VideoConfig {
    pub fn gop(&self) -> GopConfig {
        GopConfig {
            structure: self.structure,
            gop_size: self.gop_size,
            intra_period: self.intra_period,
            frame_rate_fps: self.frame_rate_fps,
        }
    }

    pub fn frame_count(&self, duration_s: f64) -> u32 {
        self.n_frames.unwrap_or_else(|| (duration_s * self.frame_rate_fps).round().max(1.0) as u32)
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::from_toml_str(&text)?;
        s.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(s)
    }

    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, src)| Self::from_toml_str(src))
            .unwrap_or_else(|| Err(Error::config(format!("unknown preset `{name}`"))))
    }

    /// Loads `preset:NAME` or a TOML file path.
    pub fn load(spec: &str) -> Result<Self> {
        match spec.strip_prefix("preset:") {
            Some(name) => Self::preset(name),
            None => Self::from_path(spec),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Makes relative trace paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(v) = &mut self.video {
            if let Some(t) = &mut v.trace {
                fix(t);
            }
        }
        if let crate::channel::LossModel::Trace { path: Some(p), .. } = &mut self.channel.loss {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::config("duration_s must be positive"));
        }
        if !(self.playout_deadline_s.is_finite() && self.playout_deadline_s > 0.0) {
            return Err(Error::config("playout_deadline_s must be positive"));
        }
        self.mac.validate()?;
        self.mapping.params().validate(Some(self.mac.queue_capacity))?;
        self.channel.validate()?;
        if let Some(v) = &self.video {
            v.gop().validate()?;
            if v.mtu == 0 {
                return Err(Error::config("mtu must be positive"));
            }
            if v.trace.is_none() && !(v.bitrate_bps.is_finite() && v.bitrate_bps > 0.0) {
                return Err(Error::config("bitrate_bps must be positive"));
            }
            if v.n_frames == Some(0) {
                return Err(Error::config("n_frames must be positive"));
            }
        }
        for (i, s) in self.background.iter().enumerate() {
            s.validate().map_err(|e| Error::config(format!("background[{i}]: {e}")))?;
        }
        Ok(())
    }

    /// Builds or loads the video stream described by the scenario.
    pub fn build_stream(&self) -> Result<Option<StreamTrace>> {
        let Some(v) = &self.video else { return Ok(None) };
        if let Some(path) = &v.trace {
            let format = TraceFormat { structure: v.structure, gop_size: v.gop_size, frame_rate_fps: v.frame_rate_fps };
            return load_trace(path, &format).map(Some);
        }
        let gop = v.gop();
        let sizes = SizeModel::for_bitrate(&gop, v.bitrate_bps, v.sizes.intra_ratio, v.sizes.level_decay, v.sizes.jitter)?;
        let mut rng = stream(self.seed, StreamLabel::FrameSizes);
        generate_stream(&gop, v.frame_count(self.duration_s) as usize, &sizes, &mut rng).map(Some)
    }

    /// Replaces the value at a dotted path such as `mapping.algorithm` or
    /// `background.0.pattern.rate_bps`. `value` is read as a TOML literal
    /// and falls back to a bare string.
    pub fn with_override(&self, path: &str, value: &str) -> Result<Scenario> {
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Serialization(e.to_string()))?;
        let parsed = parse_value(value);
        let segments: Vec<&str> = path.split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidPath(path.to_string()));
        }
        let (last, parents) = segments.split_last().expect("nonempty path");
        let mut cursor = &mut root;
        for seg in parents {
            cursor = match cursor {
                toml::Value::Table(t) => t.get_mut(*seg),
                toml::Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| Error::InvalidPath(path.to_string()))?;
        }
        let existed = match cursor {
            toml::Value::Table(t) => t.insert((*last).to_string(), parsed).is_some(),
            toml::Value::Array(a) => {
                let slot = last.parse::<usize>().ok().and_then(|i| a.get_mut(i)).ok_or_else(|| Error::InvalidPath(path.to_string()))?;
                *slot = parsed;
                true
            }
            _ => return Err(Error::InvalidPath(path.to_string())),
        };
        let mut out: Scenario = root.try_into().map_err(|e: toml::de::Error| {
            if existed {
                Error::config(format!("{path} = {value}: {e}"))
            } else {
                Error::InvalidPath(path.to_string())
            }
        })?;
        if path == "seed" {
            // keep the textual value exact for large seeds
            out.seed = value.trim().parse().map_err(|_| Error::config(format!("bad seed `{value}`")))?;
        }
        Ok(out)
    }
}

fn parse_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.to_string())),
        Err(_) => toml::Value::String(text.to_string()),
    }
}
