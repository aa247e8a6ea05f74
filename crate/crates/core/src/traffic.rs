//! Background traffic sources that load the non-video access categories.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::AccessCategoryId;
use crate::time::{Micros, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrafficPattern {
    Cbr { rate_bps: f64, packet_bytes: u32 },
    Poisson { rate_pps: f64, packet_bytes: u32 },
    /// Constant bit rate during `on_s`, silent during `off_s`, repeating.
    OnOff { on_s: f64, off_s: f64, rate_bps: f64, packet_bytes: u32 },
    /// Greedy sender that keeps `backlog` of its packets queued at all times.
    Saturating { packet_bytes: u32, backlog: u32 },
}

impl TrafficPattern {
    pub fn packet_bytes(&self) -> u32 {
        match *self {
            TrafficPattern::Cbr { packet_bytes, .. }
            | TrafficPattern::Poisson { packet_bytes, .. }
            | TrafficPattern::OnOff { packet_bytes, .. }
            | TrafficPattern::Saturating { packet_bytes, .. } => packet_bytes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficSource {
    /// Sending station; 0 is the video sender, higher numbers are other
    /// vehicles sharing the medium.
    #[serde(default)]
    pub station: u32,
    pub target_ac: AccessCategoryId,
    pub pattern: TrafficPattern,
    #[serde(default)]
    pub start_s: f64,
    /// Defaults to the scenario duration when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_s: Option<f64>,
}

fn cbr_interval(rate_bps: f64, packet_bytes: u32) -> Micros {
    ((f64::from(packet_bytes) * 8.0 / rate_bps) * 1e6).round().max(1.0) as Micros
}

impl TrafficSource {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if self.station > 255 {
            return Err(Error::config("station index must be at most 255"));
        }
        if self.pattern.packet_bytes() == 0 {
            return Err(Error::config("background packet size must be positive"));
        }
        let ok = match self.pattern {
            TrafficPattern::Cbr { rate_bps, .. } => pos(rate_bps),
            TrafficPattern::Poisson { rate_pps, .. } => pos(rate_pps),
            TrafficPattern::OnOff { on_s, off_s, rate_bps, .. } => pos(on_s) && off_s >= 0.0 && pos(rate_bps),
            TrafficPattern::Saturating { backlog, .. } => backlog > 0,
        };
        if !ok {
            return Err(Error::config("background source rates must be positive"));
        }
        if !(self.start_s.is_finite() && self.start_s >= 0.0) || self.stop_s.is_some_and(|s| s < self.start_s) {
            return Err(Error::config("background source needs 0 <= start_s <= stop_s"));
        }
        Ok(())
    }

    pub fn start(&self) -> SimTime {
        SimTime::from_secs_f64(self.start_s)
    }

    pub fn stop(&self, horizon: SimTime) -> SimTime {
        self.stop_s.map_or(horizon, SimTime::from_secs_f64).min(horizon)
    }

    /// First arrival at or after the start time, if any before `stop`.
    pub fn first_arrival<R: Rng + ?Sized>(&self, stop: SimTime, rng: &mut R) -> Option<SimTime> {
        let t = match self.pattern {
            TrafficPattern::Poisson { rate_pps, .. } => self.start() + exp_gap(rate_pps, rng),
            _ => self.start(),
        };
        (t < stop).then_some(t)
    }

    /// Next arrival strictly after an arrival at `now`; `None` once the source
    /// has stopped. Saturating sources are driven by departures instead.
    pub fn next_arrival<R: Rng + ?Sized>(&self, now: SimTime, stop: SimTime, rng: &mut R) -> Option<SimTime> {
        let t = match self.pattern {
            TrafficPattern::Cbr { rate_bps, packet_bytes } => now + cbr_interval(rate_bps, packet_bytes),
            TrafficPattern::Poisson { rate_pps, .. } => now + exp_gap(rate_pps, rng).max(1),
            TrafficPattern::OnOff { on_s, off_s, rate_bps, packet_bytes } => {
                let next = now + cbr_interval(rate_bps, packet_bytes);
                let period = SimTime::from_secs_f64(on_s + off_s).as_micros().max(1);
                let on = SimTime::from_secs_f64(on_s).as_micros();
                let phase = (next - self.start()) % period;
                if phase < on {
                    next
                } else {
                    next + (period - phase)
                }
            }
            TrafficPattern::Saturating { .. } => return None,
        };
        (t < stop).then_some(t)
    }
}

fn exp_gap<R: Rng + ?Sized>(rate_pps: f64, rng: &mut R) -> Micros {
    let secs: f64 = Exp::new(rate_pps).expect("positive rate").sample(rng);
    (secs * 1e6).round() as Micros
}
