use std::collections::HashSet;

use proptest::prelude::*;
use xlayer_core::time::airtime_us;
use xlayer_core::*;

fn single_frame(extra_s: f64) -> Scenario {
    Scenario::from_toml_str(&format!(
        r#"
        seed = 4
        duration_s = 1.0

        [video]
        structure = "all-intra"
        frame_rate_fps = 60.0
        bitrate_bps = 240000.0
        n_frames = 1
        sizes = {{ jitter = {{ kind = "constant" }} }}

        [mac.overrides.vi]
        cw_min = 0
        cw_max = 0

        [channel.extra_delay]
        kind = "constant"
        secs = {extra_s}
        "#
    ))
    .unwrap()
}

#[test]
fn single_packet_delay_is_aifs_plus_airtime_plus_extra() {
    let s = single_frame(0.002);
    let r = run(&s).unwrap();
    assert_eq!(r.packets.len(), 1);
    let p = &r.packets[0];
    assert_eq!(p.fate, Fate::Delivered);
    assert_eq!(p.size_bytes, 500);
    let aifs = aifs_duration(AccessCategoryId::Vi, Channel::Sch, &Default::default());
    assert_eq!(aifs, 58);
    // 500 B at 6 Mb/s is 666.7 us, rounded up
    assert_eq!(airtime_us(500, 6_000_000), 667);
    assert_eq!(p.latency(), Some(58 + 667 + 2000));
}

#[test]
fn empty_scenario_is_all_zeros() {
    let s = Scenario::from_toml_str("seed = 1\nduration_s = 2.0").unwrap();
    let r = run(&s).unwrap();
    assert!(r.packets.is_empty());
    assert_eq!(r.video_total, LayerCounters::default());
    assert_eq!(r.background_total, LayerCounters::default());
    assert!(r.per_ac.iter().all(|a| a.packets == LayerCounters::default()));
}

#[test]
fn trace_loss_on_second_packet_is_counted_once() {
    let mut s = single_frame(0.0);
    s.video.as_mut().unwrap().n_frames = Some(3);
    s.channel.loss = LossModel::Trace { outcomes: vec![false, true, false], path: None, cycle: false };
    let r = run(&s).unwrap();
    let fates: Vec<Fate> = r.packets.iter().map(|p| p.fate).collect();
    assert_eq!(fates, vec![Fate::Delivered, Fate::ChannelLoss, Fate::Delivered]);
    let l1 = r.per_layer[0];
    assert_eq!((l1.sent, l1.delivered, l1.lost_channel, l1.lost()), (3, 2, 1, 1));
    assert_eq!(r.video_total, l1);
}

fn check_conservation(r: &RunResult) {
    let ids: HashSet<u64> = r.packets.iter().map(|p| p.packet_id).collect();
    assert_eq!(ids.len(), r.packets.len());
    for (i, p) in r.packets.iter().enumerate() {
        assert_eq!(p.packet_id, i as u64);
        if p.fate == Fate::Delivered || p.fate == Fate::DeadlineMiss {
            assert!(p.delivered_at.is_some());
        }
    }
    let total = r.video_total.merged(&r.background_total);
    assert_eq!(total.sent, r.packets.len() as u64);
    assert_eq!(total.sent, total.delivered + total.lost());
    let by_layer = r.per_layer.iter().fold(LayerCounters::default(), |acc, l| acc.merged(l));
    assert_eq!(by_layer, r.video_total);
    let by_ac = r.per_ac.iter().fold(LayerCounters::default(), |acc, a| acc.merged(&a.packets));
    assert_eq!(by_ac, total);
    let frames: HashSet<u32> = r.video_packets().filter_map(|p| p.frame()).collect();
    assert_eq!(frames.len(), r.stream.as_ref().map_or(0, |s| s.len()));
}

#[test]
fn presets_conserve_packets() {
    for (name, _) in scenario::PRESETS {
        for alg in ["edca", "static", "adaptive"] {
            let s = Scenario::preset(name).unwrap().with_override("mapping.algorithm", alg).unwrap();
            check_conservation(&run(&s).unwrap());
        }
    }
}

#[test]
fn same_seed_same_result() {
    let s = Scenario::preset("suburban-video-only").unwrap().with_override("mapping.algorithm", "adaptive").unwrap();
    assert_eq!(run(&s).unwrap(), run(&s).unwrap());
    let other = Scenario { seed: s.seed + 1, ..s.clone() };
    assert_ne!(run(&s).unwrap().packets, run(&other).unwrap().packets);
}

#[test]
fn late_background_does_not_shift_mapping_draws() {
    let base = Scenario::preset("suburban-video-only")
        .unwrap()
        .with_override("mapping.algorithm", "adaptive")
        .unwrap()
        .with_override("video.n_frames", "300")
        .unwrap();
    let with_late = |pattern: TrafficPattern| {
        let mut s = base.clone();
        s.background.push(TrafficSource { station: 5, target_ac: AccessCategoryId::Be, pattern, start_s: 9.0, stop_s: None });
        run(&s).unwrap()
    };
    let a = with_late(TrafficPattern::Poisson { rate_pps: 500.0, packet_bytes: 100 });
    let b = with_late(TrafficPattern::Cbr { rate_bps: 10_000.0, packet_bytes: 1000 });
    assert!(a.decisions.iter().any(|d| d.qlen_vi_observed >= 20), "scenario should exercise the adaptive draws");
    assert_eq!(a.decisions, b.decisions);
}

#[test]
fn deadline_only_applies_to_video() {
    let mut s = Scenario::preset("highway-multistream").unwrap();
    s.playout_deadline_s = 1e-6;
    let r = run(&s).unwrap();
    assert_eq!(r.background_total.lost_deadline, 0);
    assert_eq!(r.video_total.delivered, 0);
}

#[test]
fn sweep_over_algorithms_and_empty_values() {
    let base = Scenario::preset("suburban-video-only").unwrap();
    let rs = sweep(&base, "mapping.algorithm", &["edca", "static", "adaptive"], 2).unwrap();
    let algs: Vec<MappingAlgorithm> = rs.iter().map(|r| r.algorithm).collect();
    assert_eq!(algs, vec![MappingAlgorithm::Edca, MappingAlgorithm::Static, MappingAlgorithm::Adaptive]);
    let seeds: Vec<u64> = rs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![base.seed, base.seed + 1, base.seed + 2]);
    assert!(sweep::<&str>(&base, "mapping.algorithm", &[], 2).unwrap().is_empty());
    assert!(matches!(sweep(&base, "mapping.nonsense", &["1"], 1), Err(Error::InvalidPath(_))));
}

#[test]
fn bernoulli_loss_sweep_is_monotone() {
    let mut base = Scenario::preset("suburban-video-only").unwrap();
    base.background.clear();
    let mean_delivered = |p: &str| {
        let scenarios: Vec<Scenario> = (0..20)
            .map(|i| {
                let mut s = base.with_override("channel.loss", &format!("{{ model = \"bernoulli\", loss_prob = {p} }}")).unwrap();
                s.seed = 100 + i;
                s
            })
            .collect();
        let rs = run_many(&scenarios, 4).unwrap();
        rs.iter().map(|r| r.video_total.delivered as f64).sum::<f64>() / rs.len() as f64
    };
    let d: Vec<f64> = ["0.0", "0.05", "0.1"].iter().map(|p| mean_delivered(p)).collect();
    assert!(d[0] >= d[1] && d[1] >= d[2], "{d:?}");
}

#[test]
fn invalid_scenario_is_rejected_before_running() {
    let s = Scenario::from_toml_str("seed = 1\nduration_s = 0.0").unwrap();
    assert!(matches!(run(&s), Err(Error::Config(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conservation_holds_for_random_loads(
        seed in 0u64..1000,
        alg in prop_oneof![Just("edca"), Just("static"), Just("adaptive")],
        loss in 0.0f64..0.3,
        bitrate in 2e5f64..4e6,
        be_pps in 1.0f64..400.0,
    ) {
        let mut s = Scenario::preset("highway-multistream").unwrap()
            .with_override("mapping.algorithm", alg).unwrap()
            .with_override("video.bitrate_bps", &bitrate.to_string()).unwrap()
            .with_override("background.1.pattern.rate_pps", &be_pps.to_string()).unwrap();
        s.seed = seed;
        s.duration_s = 2.0;
        s.channel.loss = LossModel::Bernoulli { loss_prob: loss };
        check_conservation(&run(&s).unwrap());
    }
}
