//! Per-packet loss and extra-delay models applied after a transmission.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Micros;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum LossModel {
    #[default]
    Perfect,
    Bernoulli { loss_prob: f64 },
    GilbertElliott { p_good_to_bad: f64, p_bad_to_good: f64, loss_good: f64, loss_bad: f64 },
    /// Replays recorded outcomes (`true` = lost). `path` is read when the
    /// channel is built and appended to `outcomes`.
    Trace {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        outcomes: Vec<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default = "yes")]
        cycle: bool,
    },
}

fn yes() -> bool {
    true
}

impl LossModel {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be a probability, got {p}")))
            }
        };
        match self {
            LossModel::Perfect => Ok(()),
            LossModel::Bernoulli { loss_prob } => prob("loss_prob", *loss_prob),
            LossModel::GilbertElliott { p_good_to_bad, p_bad_to_good, loss_good, loss_bad } => {
                prob("p_good_to_bad", *p_good_to_bad)?;
                prob("p_bad_to_good", *p_bad_to_good)?;
                prob("loss_good", *loss_good)?;
                prob("loss_bad", *loss_bad)
            }
            LossModel::Trace { outcomes, path, .. } => {
                if outcomes.is_empty() && path.is_none() {
                    Err(Error::config("trace loss model needs outcomes or a path"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Long-run loss probability, when it has a closed form.
    pub fn stationary_loss(&self) -> Option<f64> {
        match *self {
            LossModel::Perfect => Some(0.0),
            LossModel::Bernoulli { loss_prob } => Some(loss_prob),
            LossModel::GilbertElliott { p_good_to_bad, p_bad_to_good, loss_good, loss_bad } => {
                let denom = p_good_to_bad + p_bad_to_good;
                if denom == 0.0 {
                    return Some(loss_good);
                }
                let bad = p_good_to_bad / denom;
                Some(bad * loss_bad + (1.0 - bad) * loss_good)
            }
            LossModel::Trace { .. } => None,
        }
    }
}

/// Delay added between the end of a successful transmission and delivery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExtraDelay {
    Constant { secs: f64 },
    Uniform { min_s: f64, max_s: f64 },
}

impl Default for ExtraDelay {
    fn default() -> Self {
        ExtraDelay::Constant { secs: 0.0 }
    }
}

impl ExtraDelay {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ExtraDelay::Constant { secs } => secs.is_finite() && secs >= 0.0,
            ExtraDelay::Uniform { min_s, max_s } => min_s.is_finite() && max_s.is_finite() && 0.0 <= min_s && min_s <= max_s,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("extra delay must be nonnegative with min <= max"))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Micros {
        let secs = match *self {
            ExtraDelay::Constant { secs } => secs,
            ExtraDelay::Uniform { min_s, max_s } if max_s > min_s => rng.random_range(min_s..max_s),
            ExtraDelay::Uniform { min_s, .. } => min_s,
        };
        (secs * 1e6).round() as Micros
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelModel {
    #[serde(default)]
    pub loss: LossModel,
    #[serde(default)]
    pub extra_delay: ExtraDelay,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.extra_delay.validate()
    }
}

/// Reads a loss trace: one `0` or `1` per line, blank lines ignored.
pub fn load_loss_trace(path: impl AsRef<Path>) -> Result<Vec<bool>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_loss_trace(&text)
}

pub fn parse_loss_trace(text: &str) -> Result<Vec<bool>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::TraceParse { line: i as u64 + 1, message: format!("expected 0 or 1, got `{other}`") }),
        })
        .collect()
}

/// Mutable channel state of one run.
#[derive(Debug, Clone)]
pub struct ChannelState {
    model: ChannelModel,
    bad: bool,
    trace: Vec<bool>,
    cursor: usize,
}

impl ChannelState {
    pub fn new(model: ChannelModel) -> Result<Self> {
        model.validate()?;
        let mut trace = Vec::new();
        if let LossModel::Trace { outcomes, path, .. } = &model.loss {
            trace.extend_from_slice(outcomes);
            if let Some(p) = path {
                trace.extend(load_loss_trace(p)?);
            }
            if trace.is_empty() {
                return Err(Error::config("loss trace is empty"));
            }
        }
        Ok(ChannelState { model, bad: false, trace, cursor: 0 })
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn in_bad_state(&self) -> bool {
        self.bad
    }

    /// Decides whether the next transmitted packet is lost.
    pub fn sample_loss<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        match self.model.loss {
            LossModel::Perfect => Ok(false),
            LossModel::Bernoulli { loss_prob } => Ok(rng.random_bool(loss_prob)),
            LossModel::GilbertElliott { p_good_to_bad, p_bad_to_good, loss_good, loss_bad } => {
                let flip = if self.bad { p_bad_to_good } else { p_good_to_bad };
                if rng.random_bool(flip) {
                    self.bad = !self.bad;
                }
                Ok(rng.random_bool(if self.bad { loss_bad } else { loss_good }))
            }
            LossModel::Trace { cycle, .. } => {
                if self.cursor >= self.trace.len() {
                    if !cycle {
                        return Err(Error::TraceExhausted(self.trace.len()));
                    }
                    self.cursor = 0;
                }
                let lost = self.trace[self.cursor];
                self.cursor += 1;
                Ok(lost)
            }
        }
    }

    pub fn sample_delay<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Micros {
        self.model.extra_delay.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamLabel};

    fn state(loss: LossModel) -> ChannelState {
        ChannelState::new(ChannelModel { loss, extra_delay: ExtraDelay::default() }).unwrap()
    }

    #[test]
    fn bernoulli_extremes() {
        let mut rng = stream(1, StreamLabel::Channel);
        let mut never = state(LossModel::Bernoulli { loss_prob: 0.0 });
        let mut always = state(LossModel::Bernoulli { loss_prob: 1.0 });
        for _ in 0..1000 {
            assert!(!never.sample_loss(&mut rng).unwrap());
            assert!(always.sample_loss(&mut rng).unwrap());
        }
    }

    #[test]
    fn gilbert_elliott_stationary_rate() {
        let ge = LossModel::GilbertElliott { p_good_to_bad: 0.1, p_bad_to_good: 0.3, loss_good: 0.0, loss_bad: 0.5 };
        // pi_bad = 0.1 / 0.4 = 0.25, loss = 0.25 * 0.5
        assert!((ge.stationary_loss().unwrap() - 0.125).abs() < 1e-12);
        let mut ch = state(ge);
        let mut rng = stream(2, StreamLabel::Channel);
        let n = 1_000_000;
        let lost = (0..n).filter(|_| ch.sample_loss(&mut rng).unwrap()).count();
        assert!((lost as f64 / n as f64 - 0.125).abs() < 0.005);
    }

    #[test]
    fn trace_replays_and_cycles() {
        let mut rng = stream(3, StreamLabel::Channel);
        let mut ch = state(LossModel::Trace { outcomes: vec![true, false, false], path: None, cycle: true });
        let got: Vec<bool> = (0..6).map(|_| ch.sample_loss(&mut rng).unwrap()).collect();
        assert_eq!(got, vec![true, false, false, true, false, false]);

        let mut ch = state(LossModel::Trace { outcomes: vec![false], path: None, cycle: false });
        assert!(!ch.sample_loss(&mut rng).unwrap());
        assert!(matches!(ch.sample_loss(&mut rng), Err(Error::TraceExhausted(1))));
    }

    #[test]
    fn loss_trace_file_format() {
        assert_eq!(parse_loss_trace("0\n1\n\n1\n").unwrap(), vec![false, true, true]);
        assert!(matches!(parse_loss_trace("0\n2\n"), Err(Error::TraceParse { line: 2, .. })));
    }

    #[test]
    fn invalid_probabilities_rejected() {
        assert!(LossModel::Bernoulli { loss_prob: 1.5 }.validate().is_err());
        assert!(ChannelState::new(ChannelModel {
            loss: LossModel::Trace { outcomes: vec![], path: None, cycle: true },
            extra_delay: ExtraDelay::default()
        })
        .is_err());
    }

    #[test]
    fn extra_delay_sampling() {
        let mut rng = stream(4, StreamLabel::Channel);
        assert_eq!(ExtraDelay::Constant { secs: 0.002 }.sample(&mut rng), 2000);
        for _ in 0..100 {
            let d = ExtraDelay::Uniform { min_s: 0.001, max_s: 0.003 }.sample(&mut rng);
            assert!((1000..=3000).contains(&d));
        }
    }

    #[test]
    fn same_seed_same_losses() {
        let ge = LossModel::GilbertElliott { p_good_to_bad: 0.2, p_bad_to_good: 0.2, loss_good: 0.05, loss_bad: 0.7 };
        let run = || {
            let mut ch = state(ge.clone());
            let mut rng = stream(99, StreamLabel::Channel);
            (0..500).map(|_| ch.sample_loss(&mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
