use serde::{Deserialize, Serialize};

use super::{LayerId, VideoFrame};
use crate::time::SimTime;

/// What a packet carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    Video { frame_display_index: u32, fragment_index: u32, layer: LayerId },
    Background { source: u32 },
}

/// One MTU-bounded unit handed to the MAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub packet_id: u64,
    pub size_bytes: u32,
    pub creation_time: SimTime,
    pub payload: Payload,
}

impl Packet {
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

    pub fn is_video(&self) -> bool {
        matches!(self.payload, Payload::Video { .. })
    }
}

/// Splits a frame into `ceil(size / mtu)` packets stamped with the frame's capture time.
/// Packet ids are numbered from zero.
pub fn packetize(frame: &VideoFrame, mtu: u32) -> Vec<Packet> {
    fragment(frame, mtu, SimTime::from_secs_f64(frame.capture_time), 0)
}

/// Splits a frame into MTU fragments created at `created`, numbering packets from `first_id`.
pub fn fragment(frame: &VideoFrame, mtu: u32, created: SimTime, first_id: u64) -> Vec<Packet> {
    assert!(mtu >= 1, "mtu must be positive");
    let n = frame.size_bytes.div_ceil(mtu).max(1);
    (0..n)
        .map(|i| {
            let size = if i + 1 < n { mtu } else { frame.size_bytes - mtu * (n - 1) };
            Packet {
                packet_id: first_id + u64::from(i),
                size_bytes: size,
                creation_time: created,
                payload: Payload::Video { frame_display_index: frame.display_index, fragment_index: i, layer: frame.layer },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::FrameType;
    use proptest::prelude::*;

    fn frame(size: u32) -> VideoFrame {
        VideoFrame {
            display_index: 5,
            coding_index: 5,
            frame_type: FrameType::Gpb,
            temporal_level: 1,
            layer: LayerId::L2,
            size_bytes: size,
            capture_time: 5.0 / 30.0,
            reference_indices: vec![4],
            quality: None,
        }
    }

    fn sizes(p: &[Packet]) -> Vec<u32> {
        p.iter().map(|p| p.size_bytes).collect()
    }

    #[test]
    fn splits_at_mtu() {
        assert_eq!(sizes(&packetize(&frame(2500), 1024)), vec![1024, 1024, 452]);
        assert_eq!(sizes(&packetize(&frame(1024), 1024)), vec![1024]);
        assert_eq!(sizes(&packetize(&frame(1), 1024)), vec![1]);
    }

    #[test]
    fn packets_inherit_frame_metadata() {
        let ps = packetize(&frame(2500), 1024);
        for (i, p) in ps.iter().enumerate() {
            assert_eq!(p.layer(), Some(LayerId::L2));
            assert_eq!(p.frame(), Some(5));
            assert_eq!(p.creation_time, SimTime::from_secs_f64(5.0 / 30.0));
            assert_eq!(p.packet_id, i as u64);
        }
    }

    proptest! {
        #[test]
        fn fragments_reconstruct_frame(size in 1u32..200_000, mtu in 1u32..4096) {
            let ps = packetize(&frame(size), mtu);
            prop_assert_eq!(ps.len() as u32, size.div_ceil(mtu));
            prop_assert_eq!(ps.iter().map(|p| p.size_bytes).sum::<u32>(), size);
            for p in &ps[..ps.len() - 1] {
                prop_assert_eq!(p.size_bytes, mtu);
            }
            let last = ps.last().unwrap().size_bytes;
            prop_assert!(last >= 1 && last <= mtu);
        }
    }
}
