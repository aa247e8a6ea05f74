//! CSV frame traces.
//!
//! Header: `display_index,coding_index,frame_type,temporal_level,size_bytes`
//! optionally followed by `layer`, `psnr_decoded_db` and `psnr_concealed_db`.
//! Column order is free; names are matched exactly. `psnr_concealed_db` is the
//! quality of showing the last decoded frame in place of this one.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{assign_references, classify_layer, FrameQuality, LayerId, StreamTrace, Structure, VideoFrame};
use crate::error::{Error, Result};

/// Context a CSV trace does not carry itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceFormat {
    pub structure: Structure,
    pub gop_size: u32,
    pub frame_rate_fps: f64,
}

const REQUIRED: [&str; 5] = ["display_index", "coding_index", "frame_type", "temporal_level", "size_bytes"];

pub fn load_trace(path: impl AsRef<Path>, format: &TraceFormat) -> Result<StreamTrace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(file, format)
}

pub fn parse_trace<R: Read>(reader: R, format: &TraceFormat) -> Result<StreamTrace> {
    if !(format.frame_rate_fps.is_finite() && format.frame_rate_fps > 0.0) || format.gop_size == 0 {
        return Err(Error::config("trace format needs positive frame rate and gop size"));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::TraceParse { line: 1, message: e.to_string() })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = col(name).ok_or_else(|| Error::TraceParse { line: 1, message: format!("missing column `{name}`") })?;
    }
    let layer_col = col("layer");
    let psnr_cols = match (col("psnr_decoded_db"), col("psnr_concealed_db")) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(Error::TraceParse { line: 1, message: "psnr columns must come as a pair".into() }),
    };

    let mut frames = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::TraceParse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str, v: &str| Error::TraceParse { line, message: format!("bad {what} `{v}`") };
        let num = |i: usize, what: &str| field(i).parse::<u64>().map_err(|_| bad(what, field(i)));

        let display_index = num(idx[0], "display_index")? as u32;
        let coding_index = num(idx[1], "coding_index")? as u32;
        let frame_type = field(idx[2]).parse().map_err(|m: String| Error::TraceParse { line, message: m })?;
        let temporal_level = u8::try_from(num(idx[3], "temporal_level")?).map_err(|_| bad("temporal_level", field(idx[3])))?;
        let size_bytes = num(idx[4], "size_bytes")? as u32;
        if size_bytes == 0 {
            return Err(Error::TraceParse { line, message: "size_bytes must be positive".into() });
        }

        let classified = classify_layer(frame_type, temporal_level, format.structure, format.gop_size)
            .map_err(|e| Error::TraceParse { line, message: e.to_string() })?;
        let layer = match layer_col.map(field).filter(|s| !s.is_empty()) {
            Some(s) => {
                let v: u8 = s.parse().map_err(|_| bad("layer", s))?;
                LayerId::try_from(v).map_err(|m| Error::TraceParse { line, message: m })?
            }
            None => classified,
        };
        let quality = match psnr_cols {
            Some((a, b)) => {
                let d: f64 = field(a).parse().map_err(|_| bad("psnr_decoded_db", field(a)))?;
                let c: f64 = field(b).parse().map_err(|_| bad("psnr_concealed_db", field(b)))?;
                Some(FrameQuality { psnr_decoded_db: d, psnr_concealed_db: c })
            }
            None => None,
        };
        frames.push(VideoFrame {
            display_index,
            coding_index,
            frame_type,
            temporal_level,
            layer,
            size_bytes,
            capture_time: f64::from(display_index) / format.frame_rate_fps,
            reference_indices: Vec::new(),
            quality,
        });
    }
    if frames.is_empty() {
        return Err(Error::EmptyTrace);
    }
    assign_references(&mut frames, format.structure);
    let trace = StreamTrace {
        structure: format.structure,
        gop_size: format.gop_size,
        frame_rate_fps: format.frame_rate_fps,
        frames,
    };
    trace.validate()?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::FrameType;

    fn ld(fps: f64) -> TraceFormat {
        TraceFormat { structure: Structure::LowDelay, gop_size: 32, frame_rate_fps: fps }
    }

    const HEADER: &str = "display_index,coding_index,frame_type,temporal_level,size_bytes\n";

    #[test]
    fn empty_trace_is_an_error() {
        let err = parse_trace(HEADER.as_bytes(), &ld(30.0)).unwrap_err();
        assert!(matches!(err, Error::EmptyTrace));
        assert_eq!(err.to_string(), "empty trace");
    }

    #[test]
    fn invalid_level_reports_line() {
        let csv = format!("{HEADER}0,0,IDR,0,9000\n1,1,GPB,7,1200\n");
        match parse_trace(csv.as_bytes(), &ld(30.0)).unwrap_err() {
            Error::TraceParse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn capture_time_of_last_frame() {
        let mut csv = String::from(HEADER);
        for d in 0..300 {
            let (t, l) = if d % 32 == 0 { ("IDR", 0) } else { ("GPB", [0, 2, 1, 2][d % 4]) };
            csv.push_str(&format!("{d},{d},{t},{l},1000\n"));
        }
        let trace = parse_trace(csv.as_bytes(), &ld(30.0)).unwrap();
        assert_eq!(trace.len(), 300);
        assert!((trace.frames[299].capture_time - 299.0 / 30.0).abs() < 1e-12);
        assert_eq!(trace.frames[2].layer, LayerId::L2);
        assert_eq!(trace.frames[0].frame_type, FrameType::Idr);
    }

    #[test]
    fn psnr_columns_are_read() {
        let csv = "display_index,coding_index,frame_type,temporal_level,size_bytes,psnr_decoded_db,psnr_concealed_db\n\
                   0,0,IDR,0,9000,35.5,20.0\n1,1,GPB,2,900,34.0,30.5\n";
        let t = parse_trace(csv.as_bytes(), &ld(50.0)).unwrap();
        assert!(t.has_quality());
        assert_eq!(t.frames[1].quality.unwrap().psnr_concealed_db, 30.5);
        assert_eq!(t.frames[1].reference_indices, vec![0]);
    }

    #[test]
    fn inconsistent_layer_column_rejected() {
        let csv = "display_index,coding_index,frame_type,temporal_level,size_bytes,layer\n0,0,IDR,0,9000,3\n";
        assert!(matches!(parse_trace(csv.as_bytes(), &ld(30.0)), Err(Error::TraceInvariant { frame: 0, .. })));
    }

    #[test]
    fn low_delay_out_of_order_rejected() {
        let csv = format!("{HEADER}0,0,IDR,0,9000\n1,2,GPB,2,100\n2,1,GPB,1,100\n");
        assert!(parse_trace(csv.as_bytes(), &ld(30.0)).is_err());
    }

    #[test]
    fn garbage_field_reports_line() {
        let csv = format!("{HEADER}0,0,IDR,0,9000\n1,1,XYZ,0,100\n");
        assert!(matches!(parse_trace(csv.as_bytes(), &ld(30.0)), Err(Error::TraceParse { line: 3, .. })));
    }
}
