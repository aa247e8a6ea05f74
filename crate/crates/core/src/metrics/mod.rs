//! Post-run analysis: decodability under frame-copy concealment, report
//! aggregation and the analytic end-to-end delay models.

mod decode;
mod delay;
mod report;

pub use decode::{decodability, propagate, DecodeState, FrameDecode};
pub use delay::{delay_all_intra, delay_for, delay_low_delay, delay_random_access, DelayModelParams};
pub use report::{aggregate, mean_received_gain, received_gain, report, summary_csv, DelaySummary, LayerReport, Report};
