use std::collections::HashMap;

use xlayer_core::metrics::{mean_received_gain, received_gain, summary_csv};
use xlayer_core::*;

fn suburban(alg: &str) -> RunResult {
    let s = Scenario::preset("suburban-video-only").unwrap().with_override("mapping.algorithm", alg).unwrap();
    run(&s).unwrap()
}

#[test]
fn decodable_frames_had_every_packet_delivered() {
    let r = suburban("static");
    let trace = r.stream.as_ref().unwrap();
    let d = decodability(trace, &r, 0.2).unwrap();
    let mut ok: HashMap<u32, bool> = HashMap::new();
    for p in r.video_packets() {
        *ok.entry(p.frame().unwrap()).or_insert(true) &= p.fate == Fate::Delivered;
    }
    for (f, st) in trace.frames.iter().zip(&d.frames) {
        assert_eq!(st.display_index, f.display_index);
        assert_eq!(st.all_packets_on_time, ok[&f.display_index]);
        if st.decodable {
            assert!(st.all_packets_on_time);
            for r in &f.reference_indices {
                assert!(d.frames[trace.position(*r).unwrap()].decodable);
            }
        } else {
            assert!(st.concealed_by.is_none_or(|c| c < f.display_index));
        }
    }
}

#[test]
fn report_mirrors_run_counters() {
    let r = suburban("adaptive");
    let rep = report(&r).unwrap();
    assert_eq!(rep.total, r.video_total);
    assert_eq!(rep.lost_per_layer(), r.per_layer.map(|l| l.lost()));
    assert_eq!(rep.frames, r.stream.as_ref().unwrap().len());
    assert!(rep.decodable_frames <= rep.frames);
    assert!(rep.average_psnr_db.is_none());
    assert_eq!(rep.video_delay.count as u64, r.video_packets().filter(|p| p.delivered_at.is_some()).count() as u64);
    assert!(rep.video_delay.p50_ms <= rep.video_delay.p95_ms && rep.video_delay.p95_ms <= rep.video_delay.max_ms);
}

#[test]
fn lossless_run_reports_everything_delivered() {
    let mut s = Scenario::preset("suburban-video-only").unwrap();
    s.background.clear();
    s.channel = ChannelModel::default();
    s.video.as_mut().unwrap().bitrate_bps = 500_000.0;
    let rep = report(&run(&s).unwrap()).unwrap();
    for l in &rep.per_layer {
        assert_eq!(l.counters.sent, l.counters.delivered);
    }
    assert_eq!(rep.decodable_frame_ratio, 1.0);
}

#[test]
fn summary_csv_has_one_row_per_report() {
    let reps: Vec<Report> = ["edca", "static", "adaptive"].iter().map(|a| report(&suburban(a)).unwrap()).collect();
    let csv = summary_csv(&reps).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "algorithm,structure,sent,delivered,lost_l1,lost_l2,lost_l3,ratio,avg_psnr_db");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("edca,LD,"));
}

#[test]
fn gain_against_self_is_zero() {
    let rep = report(&suburban("edca")).unwrap();
    assert_eq!(received_gain(&rep, &rep), 0.0);
    assert_eq!(mean_received_gain(&[(&rep, &rep)]), Some(0.0));
    assert_eq!(mean_received_gain(&[]), None);
}
