//! Packet-to-access-category assignment: baseline EDCA, static layering and
//! the adaptive queue-driven scheme.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::video::{LayerId, Packet};

/// EDCA access category, ordered by increasing priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessCategoryId {
    Bk = 0,
    Be = 1,
    Vi = 2,
    Vo = 3,
}

impl AccessCategoryId {
    pub const ALL: [AccessCategoryId; 4] = [AccessCategoryId::Bk, AccessCategoryId::Be, AccessCategoryId::Vi, AccessCategoryId::Vo];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AccessCategoryId::Bk => "BK",
            AccessCategoryId::Be => "BE",
            AccessCategoryId::Vi => "VI",
            AccessCategoryId::Vo => "VO",
        }
    }
}

impl fmt::Display for AccessCategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AccessCategoryId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bk" => Ok(AccessCategoryId::Bk),
            "be" => Ok(AccessCategoryId::Be),
            "vi" => Ok(AccessCategoryId::Vi),
            "vo" => Ok(AccessCategoryId::Vo),
            other => Err(format!("unknown access category `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingAlgorithm {
    #[default]
    Edca,
    Static,
    Adaptive,
}

impl MappingAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            MappingAlgorithm::Edca => "edca",
            MappingAlgorithm::Static => "static",
            MappingAlgorithm::Adaptive => "adaptive",
        }
    }
}

impl FromStr for MappingAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edca" => Ok(MappingAlgorithm::Edca),
            "static" => Ok(MappingAlgorithm::Static),
            "adaptive" => Ok(MappingAlgorithm::Adaptive),
            other => Err(format!("unknown mapping algorithm `{other}` (expected edca|static|adaptive)")),
        }
    }
}

/// Per-layer base demotion probabilities and the two video-queue thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingParams<T> {
    pub p_layer: [T; 3],
    pub qth_low: u32,
    pub qth_high: u32,
}

impl<T: Scalar> MappingParams<T> {
    /// Probabilities 0 / 0.6 / 0.8 with thresholds 20 and 45 packets.
    pub fn standard() -> Self {
        let p = |num: u64| T::from_count(num) / T::from_count(10);
        MappingParams { p_layer: [T::zero(), p(6), p(8)], qth_low: 20, qth_high: 45 }
    }

    pub fn p_for(&self, layer: LayerId) -> T {
        self.p_layer[layer.index()]
    }

    /// Checks ordering of the probabilities and thresholds; `capacity`
    /// bounds `qth_high` when known.
    pub fn validate(&self, capacity: Option<u32>) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        let [p1, p2, p3] = self.p_layer;
        if !(zero <= p1 && p1 <= p2 && p2 <= p3 && p3 <= one) {
            return Err(Error::config(format!("p_layer must satisfy 0 <= p1 <= p2 <= p3 <= 1, got {:?}", self.p_layer)));
        }
        if self.qth_low >= self.qth_high {
            return Err(Error::config(format!("qth_low ({}) must be below qth_high ({})", self.qth_low, self.qth_high)));
        }
        if let Some(cap) = capacity {
            if self.qth_high > cap {
                return Err(Error::config(format!("qth_high ({}) exceeds queue capacity ({cap})", self.qth_high)));
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Default for MappingParams<T> {
    fn default() -> Self {
        Self::standard()
    }
}

/// Audit record of one mapping decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingDecision {
    pub packet_id: u64,
    pub chosen_ac: AccessCategoryId,
    pub p_new_used: f64,
    pub qlen_vi_observed: u32,
}

pub fn map_edca(_packet: &Packet) -> AccessCategoryId {
    AccessCategoryId::Vi
}

pub fn map_static(layer: LayerId) -> AccessCategoryId {
    match layer {
        LayerId::L1 => AccessCategoryId::Vi,
        LayerId::L2 => AccessCategoryId::Be,
        LayerId::L3 => AccessCategoryId::Bk,
    }
}

/// Demotion probability scaled by how far the video queue sits between the
/// thresholds, clamped to `[0, 1]`.
pub fn compute_p_new<T: Scalar>(p_layer: T, qlen_vi: u32, params: &MappingParams<T>) -> T {
    let low = T::from_count(u64::from(params.qth_low));
    let high = T::from_count(u64::from(params.qth_high));
    let q = T::from_count(u64::from(qlen_vi));
    (p_layer * (q - low) / (high - low)).clamp_to(T::zero(), T::one())
}

/// Which branch of the adaptive scheme a queue length falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptiveRegime {
    /// Below the low threshold: stay on VI.
    Light,
    /// Between the thresholds: VI, or BE with probability `p_new`.
    Moderate,
    /// Above the high threshold: BE, or BK with probability `p_new`.
    Heavy,
}

pub fn adaptive_regime<T>(qlen_vi: u32, params: &MappingParams<T>) -> AdaptiveRegime {
    if qlen_vi < params.qth_low {
        AdaptiveRegime::Light
    } else if qlen_vi <= params.qth_high {
        AdaptiveRegime::Moderate
    } else {
        AdaptiveRegime::Heavy
    }
}

/// Adaptive decision for a given uniform draw `u` in `[0, 1)`.
pub fn map_adaptive_with_draw<T: Scalar>(layer: LayerId, qlen_vi: u32, params: &MappingParams<T>, u: f64) -> (AccessCategoryId, T) {
    let p_new = compute_p_new(params.p_for(layer), qlen_vi, params);
    let demote = u < p_new.as_f64();
    let ac = match adaptive_regime(qlen_vi, params) {
        AdaptiveRegime::Light => AccessCategoryId::Vi,
        AdaptiveRegime::Moderate if demote => AccessCategoryId::Be,
        AdaptiveRegime::Moderate => AccessCategoryId::Vi,
        AdaptiveRegime::Heavy if demote => AccessCategoryId::Bk,
        AdaptiveRegime::Heavy => AccessCategoryId::Be,
    };
    (ac, p_new)
}

/// Adaptive decision; draws one uniform value only when the queue is at or
/// above the low threshold.
pub fn map_adaptive<T: Scalar, R: Rng + ?Sized>(layer: LayerId, qlen_vi: u32, params: &MappingParams<T>, rng: &mut R) -> (AccessCategoryId, T) {
    match adaptive_regime(qlen_vi, params) {
        AdaptiveRegime::Light => (AccessCategoryId::Vi, compute_p_new(params.p_for(layer), qlen_vi, params)),
        _ => {
            let u: f64 = rng.random();
            map_adaptive_with_draw(layer, qlen_vi, params, u)
        }
    }
}

/// Stateful mapper used by the simulation loop.
#[derive(Debug, Clone)]
pub struct Mapper<R> {
    pub algorithm: MappingAlgorithm,
    pub params: MappingParams<f64>,
    rng: R,
}

impl<R: Rng> Mapper<R> {
    pub fn new(algorithm: MappingAlgorithm, params: MappingParams<f64>, rng: R) -> Self {
        Mapper { algorithm, params, rng }
    }

    /// Chooses the queue for a video packet given the live VI queue length.
    pub fn decide(&mut self, packet: &Packet, qlen_vi: u32) -> MappingDecision {
        let layer = packet.layer().unwrap_or(LayerId::L1);
        let (chosen_ac, p_new_used) = match self.algorithm {
            MappingAlgorithm::Edca => (map_edca(packet), 0.0),
            MappingAlgorithm::Static => (map_static(layer), 0.0),
            MappingAlgorithm::Adaptive => map_adaptive(layer, qlen_vi, &self.params, &mut self.rng),
        };
        MappingDecision { packet_id: packet.packet_id, chosen_ac, p_new_used, qlen_vi_observed: qlen_vi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamLabel};
    use crate::time::SimTime;
    use crate::video::Payload;
    use crate::Rational;
    use proptest::prelude::*;
    use rand::Rng;

    fn params() -> MappingParams<f64> {
        MappingParams::standard()
    }

    fn video(layer: LayerId) -> Packet {
        Packet {
            packet_id: 9,
            size_bytes: 1024,
            creation_time: SimTime::ZERO,
            payload: Payload::Video { frame_display_index: 0, fragment_index: 0, layer },
        }
    }

    #[test]
    fn edca_always_video() {
        for l in LayerId::ALL {
            assert_eq!(map_edca(&video(l)), AccessCategoryId::Vi);
        }
    }

    #[test]
    fn static_layering() {
        assert_eq!(map_static(LayerId::L1), AccessCategoryId::Vi);
        assert_eq!(map_static(LayerId::L2), AccessCategoryId::Be);
        assert_eq!(map_static(LayerId::L3), AccessCategoryId::Bk);
    }

    #[test]
    fn p_new_reference_points() {
        let p = params();
        assert!((compute_p_new(0.6, 45, &p) - 0.6).abs() < 1e-12);
        assert_eq!(compute_p_new(0.8, 20, &p), 0.0);
        // 0.8 * 12 / 25
        assert!((compute_p_new(0.8, 32, &p) - 0.384).abs() < 1e-12);
        assert_eq!(compute_p_new(0.8, 70, &p), 1.0);
        assert_eq!(compute_p_new(0.8, 5, &p), 0.0);
    }

    #[test]
    fn p_new_exact_in_rationals() {
        let p: MappingParams<Rational> = MappingParams::standard();
        assert_eq!(compute_p_new(Rational::new(4, 5), 32, &p), Rational::new(48, 125));
        assert_eq!(compute_p_new(Rational::new(4, 5), 50, &p), Rational::new(24, 25));
        let f: MappingParams<f32> = MappingParams::standard();
        assert!((compute_p_new(0.8f32, 32, &f) - 0.384).abs() < 1e-6);
    }

    #[test]
    fn adaptive_light_load_stays_on_video_without_drawing() {
        let p = params();
        let mut rng = stream(1, StreamLabel::Mapping);
        let mut twin = rng.clone();
        assert_eq!(map_adaptive(LayerId::L3, 10, &p, &mut rng).0, AccessCategoryId::Vi);
        assert_eq!(rng.random::<u64>(), twin.random::<u64>());
    }

    #[test]
    fn layer_one_never_demoted_between_thresholds() {
        let p = params();
        let mut rng = stream(2, StreamLabel::Mapping);
        for q in 20..=45 {
            for _ in 0..50 {
                assert_eq!(map_adaptive(LayerId::L1, q, &p, &mut rng).0, AccessCategoryId::Vi);
            }
        }
    }

    #[test]
    fn heavy_regime_goes_to_be_or_bk() {
        let p = params();
        let mut rng = stream(3, StreamLabel::Mapping);
        for _ in 0..200 {
            let ac = map_adaptive(LayerId::L1, 50, &p, &mut rng).0;
            assert_eq!(ac, AccessCategoryId::Be);
            let ac = map_adaptive(LayerId::L3, 50, &p, &mut rng).0;
            assert!(ac == AccessCategoryId::Be || ac == AccessCategoryId::Bk);
        }
    }

    #[test]
    fn heavy_regime_frequency() {
        // 0.8 * 30 / 25 = 0.96
        let p = params();
        let mut rng = stream(4, StreamLabel::Mapping);
        let n = 100_000;
        let bk = (0..n).filter(|_| map_adaptive(LayerId::L3, 50, &p, &mut rng).0 == AccessCategoryId::Bk).count();
        assert!((bk as f64 / n as f64 - 0.96).abs() < 0.02);
    }

    #[test]
    fn mapper_records_decision() {
        let mut m = Mapper::new(MappingAlgorithm::Static, params(), stream(0, StreamLabel::Mapping));
        let d = m.decide(&video(LayerId::L3), 7);
        assert_eq!(d.chosen_ac, AccessCategoryId::Bk);
        assert_eq!(d.qlen_vi_observed, 7);
        assert_eq!(d.packet_id, 9);
    }

    #[test]
    fn params_validation() {
        assert!(params().validate(Some(50)).is_ok());
        let mut bad = params();
        bad.p_layer = [0.5, 0.4, 0.8];
        assert!(bad.validate(None).is_err());
        let mut bad = params();
        bad.qth_high = bad.qth_low;
        assert!(bad.validate(None).is_err());
        assert!(params().validate(Some(40)).is_err());
    }

    fn valid_params() -> impl Strategy<Value = MappingParams<f64>> {
        (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0u32..49, 1u32..=50).prop_filter_map("ordered", |(a, b, c, lo, span)| {
            let mut p = [a, b, c];
            p.sort_by(f64::total_cmp);
            let hi = lo + span;
            (hi <= 50).then_some(MappingParams { p_layer: p, qth_low: lo, qth_high: hi })
        })
    }

    proptest! {
        #[test]
        fn p_new_bounded_and_monotone(params in valid_params(), q in 0u32..=50, dq in 0u32..=10, p in 0.0f64..=1.0, dp in 0.0f64..=0.5) {
            let a = compute_p_new(p, q, &params);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(compute_p_new(p, q + dq, &params) >= a);
            prop_assert!(compute_p_new((p + dp).min(1.0), q, &params) >= a);
        }

        #[test]
        fn below_low_threshold_matches_edca(params in valid_params(), q in 0u32..50, u in 0.0f64..1.0) {
            prop_assume!(q < params.qth_low);
            for l in LayerId::ALL {
                prop_assert_eq!(map_adaptive_with_draw(l, q, &params, u).0, map_edca(&video(l)));
            }
        }

        #[test]
        fn demotion_is_monotone_across_layers(params in valid_params(), q in 0u32..=50, u in 0.0f64..1.0) {
            let rank = |ac: AccessCategoryId| 3 - ac.index();
            let decisions: Vec<usize> = LayerId::ALL.iter().map(|&l| rank(map_adaptive_with_draw(l, q, &params, u).0)).collect();
            // higher p_layer never keeps a packet on a higher-priority queue
            prop_assert!(decisions[0] <= decisions[1] && decisions[1] <= decisions[2]);
        }
    }
}
