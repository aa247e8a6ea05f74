use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::video::Structure;

/// Inputs of the end-to-end delay models. Times are in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModelParams<T> {
    /// Encoder time per frame for the low-delay configuration.
    pub t_en: T,
    pub t_dec: T,
    pub t_net: T,
    pub gop: u32,
    /// Frame interval, `1 / fps`.
    pub t_fr: T,
    /// Encoder speed of random access relative to low delay.
    pub speed_ratio_ra: T,
    /// Encoder speed of all intra relative to low delay.
    pub speed_ratio_ai: T,
}

impl<T: Scalar> DelayModelParams<T> {
    /// Parameters with the default encoder speed ratios 0.77 (RA) and 0.28 (AI).
    pub fn new(t_en: T, t_dec: T, t_net: T, gop: u32, t_fr: T) -> Self {
        let hundredths = |n| T::from_count(n) / T::from_count(100);
        DelayModelParams { t_en, t_dec, t_net, gop, t_fr, speed_ratio_ra: hundredths(77), speed_ratio_ai: hundredths(28) }
    }

    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let all_pos = [self.t_en, self.t_dec, self.t_net, self.t_fr, self.speed_ratio_ra, self.speed_ratio_ai].iter().all(|&v| v > zero);
        if !all_pos || self.gop == 0 {
            return Err(Error::config("delay model parameters must be positive"));
        }
        if self.t_en >= self.t_fr {
            return Err(Error::config("encoding time must be below the frame interval for real-time operation"));
        }
        Ok(())
    }
}

/// `t_en + t_net + t_dec`.
pub fn delay_low_delay<T: Scalar>(p: &DelayModelParams<T>) -> T {
    p.t_en + p.t_net + p.t_dec
}

/// Low-delay form with the encoder time scaled by the all-intra speed ratio.
pub fn delay_all_intra<T: Scalar>(p: &DelayModelParams<T>) -> T {
    p.t_en * p.speed_ratio_ai + p.t_net + p.t_dec
}

/// `(gop - 1) t_fr + (log2 gop + 1) t_en ratio + t_net + t_dec`; the GoP
/// size must be a power of two.
pub fn delay_random_access<T: Scalar>(p: &DelayModelParams<T>) -> Result<T> {
    if !p.gop.is_power_of_two() {
        return Err(Error::NonPowerOfTwoGop(p.gop));
    }
    let log2 = u64::from(p.gop.trailing_zeros());
    let buffering = T::from_count(u64::from(p.gop - 1)) * p.t_fr;
    let encoding = T::from_count(log2 + 1) * p.t_en * p.speed_ratio_ra;
    Ok(buffering + encoding + p.t_net + p.t_dec)
}

pub fn delay_for<T: Scalar>(structure: Structure, p: &DelayModelParams<T>) -> Result<T> {
    match structure {
        Structure::AllIntra => Ok(delay_all_intra(p)),
        Structure::LowDelay => Ok(delay_low_delay(p)),
        Structure::RandomAccess => delay_random_access(p),
    }
}
