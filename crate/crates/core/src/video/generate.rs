use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{assign_references, classify_layer, FrameType, GopConfig, LayerId, StreamTrace, Structure, VideoFrame};
use crate::error::{Error, Result};

/// Temporal levels of low-delay frames by position inside each 4-frame sub-group.
const LOW_DELAY_LEVELS: [u8; 4] = [0, 2, 1, 2];

/// Mean coded size per frame class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeModel {
    /// Mean size of intra frames in bytes.
    pub intra_bytes: f64,
    /// Mean size of inter frames by temporal level; the last entry covers deeper levels.
    pub inter_bytes_by_level: Vec<f64>,
    #[serde(default)]
    pub jitter: SizeJitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SizeJitter {
    #[default]
    Constant,
    /// Mean-preserving lognormal spread.
    LogNormal { sigma: f64 },
}

impl SizeModel {
    pub fn constant(intra_bytes: f64, inter_bytes_by_level: Vec<f64>) -> Self {
        SizeModel { intra_bytes, inter_bytes_by_level, jitter: SizeJitter::Constant }
    }

    /// Derives per-class means hitting `bitrate_bps` on average.
    ///
    /// An intra frame weighs `intra_ratio` times a level-0 inter frame, and
    /// each deeper level shrinks by `level_decay`.
    pub fn for_bitrate(config: &GopConfig, bitrate_bps: f64, intra_ratio: f64, level_decay: f64, jitter: SizeJitter) -> Result<Self> {
        config.validate()?;
        if !(bitrate_bps > 0.0 && intra_ratio > 0.0 && level_decay > 0.0) {
            return Err(Error::config("bitrate, intra_ratio and level_decay must be positive"));
        }
        let depth = super::deepest_level(config.structure, config.gop_size) as i32;
        let weights: Vec<f64> = (0..=depth).map(|l| level_decay.powi(l)).collect();
        let period = match config.structure {
            Structure::AllIntra => 1,
            _ => config.intra_period as usize,
        };
        // one extra frame closes the last GoP of the period
        let skeleton = skeleton(config, period + 1);
        let total: f64 = skeleton[..period]
            .iter()
            .map(|s| if s.frame_type.is_intra() { intra_ratio } else { weights[s.level as usize] })
            .sum();
        let mean_weight = total / period as f64;
        let base = bitrate_bps / 8.0 / config.frame_rate_fps / mean_weight;
        Ok(SizeModel {
            intra_bytes: base * intra_ratio,
            inter_bytes_by_level: weights.iter().map(|w| base * w).collect(),
            jitter,
        })
    }

    pub fn mean_for(&self, frame_type: FrameType, level: u8) -> f64 {
        if frame_type.is_intra() {
            return self.intra_bytes;
        }
        let idx = (level as usize).min(self.inter_bytes_by_level.len().saturating_sub(1));
        self.inter_bytes_by_level.get(idx).copied().unwrap_or(self.intra_bytes)
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.intra_bytes) || self.inter_bytes_by_level.iter().any(|&v| !ok(v)) {
            return Err(Error::config("frame sizes must be positive"));
        }
        if let SizeJitter::LogNormal { sigma } = self.jitter {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::config("lognormal sigma must be nonnegative"));
            }
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, frame_type: FrameType, level: u8, rng: &mut R) -> u32 {
        let mean = self.mean_for(frame_type, level);
        let v = match self.jitter {
            SizeJitter::Constant => mean,
            SizeJitter::LogNormal { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                mean * (sigma * z - 0.5 * sigma * sigma).exp()
            }
        };
        v.round().max(1.0) as u32
    }
}

#[derive(Debug, Clone, Copy)]
struct Skeleton {
    display: u32,
    coding: u32,
    frame_type: FrameType,
    level: u8,
}

/// Frame types, levels and coding order, without sizes or references.
fn skeleton(config: &GopConfig, n_frames: usize) -> Vec<Skeleton> {
    let n = n_frames as u32;
    match config.structure {
        Structure::AllIntra => (0..n)
            .map(|d| Skeleton { display: d, coding: d, frame_type: FrameType::Idr, level: 0 })
            .collect(),
        Structure::LowDelay => (0..n)
            .map(|d| {
                let idr = d % config.intra_period == 0;
                let level = if idr { 0 } else { LOW_DELAY_LEVELS[((d % config.gop_size) % 4) as usize] };
                let frame_type = if idr { FrameType::Idr } else { FrameType::Gpb };
                Skeleton { display: d, coding: d, frame_type, level }
            })
            .collect(),
        Structure::RandomAccess => {
            let mut out: Vec<Skeleton> = Vec::with_capacity(n_frames);
            let mut coding = 0u32;
            let mut push = |display: u32, level: u8, out: &mut Vec<Skeleton>| {
                let idr = display.is_multiple_of(config.intra_period);
                let frame_type = if idr { FrameType::Idr } else { FrameType::Gpb };
                out.push(Skeleton { display, coding, frame_type, level: if idr { 0 } else { level } });
                coding += 1;
            };
            if n == 0 {
                return out;
            }
            push(0, 0, &mut out);
            let mut lo = 0u32;
            while lo < n - 1 {
                let hi = (lo + config.gop_size).min(n - 1);
                push(hi, 0, &mut out);
                bisect(lo, hi, 1, &mut |d, l| push(d, l, &mut out));
                lo = hi;
            }
            out.sort_by_key(|s| s.display);
            out
        }
    }
}

/// Pre-order dyadic bisection of the open interval `(lo, hi)`.
fn bisect(lo: u32, hi: u32, level: u8, emit: &mut dyn FnMut(u32, u8)) {
    if hi - lo < 2 {
        return;
    }
    let mid = lo + (hi - lo) / 2;
    emit(mid, level);
    bisect(lo, mid, level + 1, emit);
    bisect(mid, hi, level + 1, emit);
}

/// Synthesises a coded stream with the requested prediction structure.
pub fn generate_stream<R: Rng + ?Sized>(config: &GopConfig, n_frames: usize, sizes: &SizeModel, rng: &mut R) -> Result<StreamTrace> {
    if n_frames == 0 {
        return Err(Error::config("n_frames must be at least 1"));
    }
    config.validate()?;
    sizes.validate()?;
    let mut frames = Vec::with_capacity(n_frames);
    // sizes are drawn in coding order so a trace prefix is stable
    let mut sk = skeleton(config, n_frames);
    sk.sort_by_key(|s| s.coding);
    let mut drawn: Vec<(Skeleton, u32)> = sk.iter().map(|s| (*s, sizes.sample(s.frame_type, s.level, rng))).collect();
    drawn.sort_by_key(|(s, _)| s.display);
    for (s, size) in drawn {
        let layer: LayerId = classify_layer(s.frame_type, s.level, config.structure, config.gop_size)?;
        frames.push(VideoFrame {
            display_index: s.display,
            coding_index: s.coding,
            frame_type: s.frame_type,
            temporal_level: s.level,
            layer,
            size_bytes: size,
            capture_time: f64::from(s.display) / config.frame_rate_fps,
            reference_indices: Vec::new(),
            quality: None,
        });
    }
    assign_references(&mut frames, config.structure);
    Ok(StreamTrace { structure: config.structure, gop_size: config.gop_size, frame_rate_fps: config.frame_rate_fps, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamLabel};

    fn flat() -> SizeModel {
        SizeModel::constant(8000.0, vec![1000.0])
    }

    fn gen(cfg: GopConfig, n: usize) -> StreamTrace {
        let mut rng = stream(1, StreamLabel::FrameSizes);
        generate_stream(&cfg, n, &flat(), &mut rng).unwrap()
    }

    /// Independent construction of a dyadic coding order by recursive
    /// bisection over explicit intervals.
    fn dyadic_order_oracle(gop: u32) -> Vec<u32> {
        fn rec(lo: u32, hi: u32, out: &mut Vec<u32>) {
            if hi <= lo + 1 {
                return;
            }
            let m = (lo + hi) / 2;
            out.push(m);
            rec(lo, m, out);
            rec(m, hi, out);
        }
        let mut out = vec![0, gop];
        rec(0, gop, &mut out);
        out
    }

    #[test]
    fn all_intra_frames_are_idr_level_zero() {
        let t = gen(GopConfig::new(Structure::AllIntra, 30.0), 4);
        assert_eq!(t.len(), 4);
        assert!(t.frames.iter().all(|f| f.frame_type == FrameType::Idr && f.temporal_level == 0));
        assert!(t.frames.iter().all(|f| f.reference_indices.is_empty()));
    }

    #[test]
    fn low_delay_inserts_idr_every_intra_period() {
        let t = gen(GopConfig::new(Structure::LowDelay, 30.0), 64);
        for f in &t.frames {
            let expect_idr = f.display_index == 0 || f.display_index == 32;
            assert_eq!(f.frame_type == FrameType::Idr, expect_idr, "frame {}", f.display_index);
            if !expect_idr {
                assert_eq!(f.frame_type, FrameType::Gpb);
            }
            assert_eq!(f.coding_index, f.display_index);
        }
    }

    #[test]
    fn low_delay_level_pattern() {
        let t = gen(GopConfig::new(Structure::LowDelay, 30.0), 12);
        let levels: Vec<u8> = t.frames.iter().map(|f| f.temporal_level).collect();
        assert_eq!(levels, vec![0, 2, 1, 2, 0, 2, 1, 2, 0, 2, 1, 2]);
        // deepest level is never referenced
        for f in &t.frames {
            for r in &f.reference_indices {
                assert!(t.frame(*r).unwrap().temporal_level < 2);
                assert!(*r < f.display_index);
            }
        }
    }

    #[test]
    fn random_access_gop8_coding_order_matches_bisection() {
        let t = gen(GopConfig::new(Structure::RandomAccess, 30.0).with_gop(8, 8), 9);
        let mut by_coding: Vec<&VideoFrame> = t.frames.iter().collect();
        by_coding.sort_by_key(|f| f.coding_index);
        let order: Vec<u32> = by_coding.iter().map(|f| f.display_index).collect();
        assert_eq!(order, vec![0, 8, 4, 2, 1, 3, 6, 5, 7]);
        assert_eq!(order, dyadic_order_oracle(8));
        let levels: Vec<u8> = t.frames.iter().map(|f| f.temporal_level).collect();
        assert_eq!(levels, vec![0, 3, 2, 3, 1, 3, 2, 3, 0]);
    }

    #[test]
    fn random_access_references_do_not_cross_idr() {
        let t = gen(GopConfig::new(Structure::RandomAccess, 30.0).with_gop(8, 8), 17);
        let idr8 = t.frame(8).unwrap();
        assert_eq!(idr8.frame_type, FrameType::Idr);
        for f in &t.frames {
            if f.coding_index > idr8.coding_index {
                for r in &f.reference_indices {
                    assert!(t.frame(*r).unwrap().coding_index >= idr8.coding_index);
                }
            }
        }
        // frame 4 can only lean on the IDR that closes its GoP
        assert_eq!(t.frame(4).unwrap().reference_indices, vec![8]);
        t.validate().unwrap();
    }

    #[test]
    fn random_access_open_gop_references_both_anchors() {
        let t = gen(GopConfig::new(Structure::RandomAccess, 30.0).with_gop(8, 16), 17);
        assert_eq!(t.frame(8).unwrap().frame_type, FrameType::Gpb);
        assert_eq!(t.frame(8).unwrap().reference_indices, vec![0]);
        assert_eq!(t.frame(4).unwrap().reference_indices, vec![0, 8]);
        // leading frames of the IDR at 16 cannot reach back past it
        assert_eq!(t.frame(12).unwrap().reference_indices, vec![16]);
    }

    #[test]
    fn partial_last_gop_is_covered() {
        let t = gen(GopConfig::new(Structure::RandomAccess, 30.0), 300);
        assert_eq!(t.len(), 300);
        t.validate().unwrap();
        let mut codes: Vec<u32> = t.frames.iter().map(|f| f.coding_index).collect();
        codes.sort();
        assert_eq!(codes, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn zero_frames_and_bad_sizes_rejected() {
        let mut rng = stream(1, StreamLabel::FrameSizes);
        let cfg = GopConfig::new(Structure::LowDelay, 30.0);
        assert!(generate_stream(&cfg, 0, &flat(), &mut rng).is_err());
        let bad = SizeModel::constant(0.0, vec![10.0]);
        assert!(generate_stream(&cfg, 4, &bad, &mut rng).is_err());
    }

    #[test]
    fn bitrate_model_hits_target_on_average() {
        for s in [Structure::AllIntra, Structure::LowDelay, Structure::RandomAccess] {
            let cfg = GopConfig::new(s, 60.0);
            let m = SizeModel::for_bitrate(&cfg, 2.5e6, 8.0, 0.75, SizeJitter::Constant).unwrap();
            let mut rng = stream(3, StreamLabel::FrameSizes);
            let t = generate_stream(&cfg, 640, &m, &mut rng).unwrap();
            let rate = t.total_bytes() as f64 * 8.0 / (640.0 / 60.0);
            assert!((rate / 2.5e6 - 1.0).abs() < 0.005, "{s:?}: {rate}");
        }
    }

    #[test]
    fn capture_time_follows_frame_rate() {
        let t = gen(GopConfig::new(Structure::LowDelay, 30.0), 300);
        assert!((t.frames[299].capture_time - 299.0 / 30.0).abs() < 1e-12);
    }
}
