//! Kinematic decoders: the cascaded classification-based regressor, the
//! Wiener filter and Wiener cascade baselines, and the R² metric.

mod ccbr;
mod metrics;
mod quantizer;
mod wiener;

pub use ccbr::{
    ccbr_fit, ccbr_fit_rows_with, ccbr_fit_with, ccbr_predict, CcbrConfig, CcbrModel, CcbrStage,
    Frontend, SpecTrainer, StageTrainer, StopReason,
};
pub use metrics::{r_squared, RSquared};
pub use quantizer::{quantizer_decode_expect, quantizer_encode, quantizer_fit, Binning, QuantizerModel};
pub use wiener::{
    wiener_cascade_fit, wiener_fit, wiener_predict, OutputPolynomial, WienerModel, SINGULAR_RETRY_RIDGE,
};
