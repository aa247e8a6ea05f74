//! Simulator for layered video over 802.11p EDCA with cross-layer mapping
//! of video packets onto access categories.
//!
//! The analytic pieces (mapping probability, delay models) are generic over
//! [`Scalar`]; the type aliases below fix the common choices.

pub mod channel;
pub mod engine;
pub mod error;
pub mod mac;
pub mod mapping;
pub mod metrics;
pub mod result;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod time;
pub mod traffic;
pub mod video;

pub use channel::{ChannelModel, ChannelState, ExtraDelay, LossModel};
pub use engine::{run, run_many, sweep, sweep_scenarios};
pub use error::{Error, Result};
pub use mac::{aifs_duration, AccessCategoryParams, Channel, MacConfig, MacState};
pub use mapping::{compute_p_new, AccessCategoryId, Mapper, MappingAlgorithm, MappingDecision, MappingParams};
pub use metrics::{aggregate, decodability, report, DecodeState, DelayModelParams, Report};
pub use result::{packets_csv, Fate, LayerCounters, PacketRecord, RunResult};
pub use scalar::Scalar;
pub use scenario::Scenario;
pub use time::{Micros, SimTime};
pub use traffic::{TrafficPattern, TrafficSource};
pub use video::{FrameType, GopConfig, LayerId, Packet, StreamTrace, Structure, VideoFrame};

/// Exact rational scalar.
pub type Rational = num_rational::Ratio<i64>;

pub type MappingParamsF64 = MappingParams<f64>;
pub type MappingParamsF32 = MappingParams<f32>;
pub type MappingParamsExact = MappingParams<Rational>;

pub type DelayModelParamsF64 = DelayModelParams<f64>;
pub type DelayModelParamsF32 = DelayModelParams<f32>;
pub type DelayModelParamsExact = DelayModelParams<Rational>;
