use super::{FrameType, Structure, VideoFrame};

/// Fills `reference_indices` for frames given in display order.
///
/// Low delay frames predict from the two most recent earlier frames of a
/// strictly lower temporal level (level 0 from the two most recent level-0
/// frames), so the deepest level is never referenced. Random access frames
/// predict from the nearest lower-level frame on each side in display order,
/// which reproduces dyadic bisection; level-0 anchors predict from the
/// previous anchor. No frame may reference across the most recent IDR in
/// coding order.
pub fn assign_references(frames: &mut [VideoFrame], structure: Structure) {
    let coding: Vec<u32> = frames.iter().map(|f| f.coding_index).collect();
    let cvs_start = cvs_starts(frames);
    let allowed = |f: usize, r: usize| coding[r] < coding[f] && coding[r] >= cvs_start[f];

    let mut all_refs = Vec::with_capacity(frames.len());
    for f in 0..frames.len() {
        let frame = &frames[f];
        let mut refs = Vec::new();
        if !frame.frame_type.is_intra() {
            let level = frame.temporal_level;
            let below = |r: usize| {
                let l = frames[r].temporal_level;
                if level == 0 {
                    l == 0
                } else {
                    l < level
                }
            };
            match structure {
                Structure::RandomAccess => {
                    if let Some(r) = (0..f).rev().find(|&r| below(r)) {
                        if allowed(f, r) {
                            refs.push(frames[r].display_index);
                        }
                    }
                    if level > 0 {
                        if let Some(r) = (f + 1..frames.len()).find(|&r| below(r)) {
                            if allowed(f, r) {
                                refs.push(frames[r].display_index);
                            }
                        }
                    }
                }
                Structure::LowDelay | Structure::AllIntra => {
                    refs.extend(
                        (0..f)
                            .rev()
                            .take_while(|&r| coding[r] >= cvs_start[f])
                            .filter(|&r| below(r) && allowed(f, r))
                            .take(2)
                            .map(|r| frames[r].display_index),
                    );
                }
            }
        }
        all_refs.push(refs);
    }
    for (frame, refs) in frames.iter_mut().zip(all_refs) {
        frame.reference_indices = refs;
    }
}

/// For each frame, the coding index of the latest IDR at or before it in coding order.
fn cvs_starts(frames: &[VideoFrame]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.sort_by_key(|&i| frames[i].coding_index);
    let mut out = vec![0; frames.len()];
    let mut current = frames.iter().map(|f| f.coding_index).min().unwrap_or(0);
    for i in order {
        if frames[i].frame_type == FrameType::Idr {
            current = frames[i].coding_index;
        }
        out[i] = current;
    }
    out
}
