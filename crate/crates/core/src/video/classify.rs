use super::{FrameType, LayerId, Structure};
use crate::error::{Error, Result};

/// Deepest temporal level a structure can produce.
///
/// Low delay uses a fixed three-level pattern; random access bisects each GoP
/// dyadically, so its depth is `ceil(log2(gop_size))`.
pub fn deepest_level(structure: Structure, gop_size: u32) -> u8 {
    match structure {
        Structure::AllIntra => 0,
        Structure::LowDelay => 2,
        Structure::RandomAccess => {
            let g = gop_size.max(1);
            (u32::BITS - (g - 1).leading_zeros()) as u8
        }
    }
}

/// Assigns the importance tier of a frame.
///
/// * all intra: everything is Layer-1;
/// * low delay: intra and level 0 → 1, level 1 → 2, level 2 → 3;
/// * random access: intra and levels 0–1 → 1, the deepest level → 3,
///   anything in between → 2.
pub fn classify_layer(frame_type: FrameType, temporal_level: u8, structure: Structure, gop_size: u32) -> Result<LayerId> {
    let deepest = deepest_level(structure, gop_size);
    if temporal_level > deepest {
        return Err(Error::InvalidLevel { structure, level: temporal_level, gop_size });
    }
    if frame_type.is_intra() {
        return Ok(LayerId::L1);
    }
    let layer = match structure {
        Structure::AllIntra => LayerId::L1,
        Structure::LowDelay => match temporal_level {
            0 => LayerId::L1,
            1 => LayerId::L2,
            _ => LayerId::L3,
        },
        Structure::RandomAccess => {
            if temporal_level <= 1 {
                LayerId::L1
            } else if temporal_level == deepest {
                LayerId::L3
            } else {
                LayerId::L2
            }
        }
    };
    Ok(layer)
}
