//! Conformal prediction intervals from a mixture-of-experts regressor.
//!
//! A mixture-density network with K Gaussian experts gives a predictive
//! mean plus two difficulty signals per input: spread of the expert means
//! (epistemic) and the mixed expert variance (aleatoric). Either signal can
//! scale a split-conformal interval, which keeps finite-sample marginal
//! coverage while letting widths vary with the input.
//!
//! Modules:
//! - [`numerics`]: matrices, dense MLPs with backprop, Adam, seeded RNG
//! - [`moe`]: the mixture model, its NLL and gradients, training
//! - [`conformal`]: scores, the conformal quantile, interval construction
//! - [`mcdropout`]: Monte Carlo dropout baseline
//! - [`metrics`]: interval, point, ranking and distribution statistics
//! - [`data`]: synthetic generators, splits, CSV I/O
//! - [`experiment`]: config, staged runs on disk, multi-seed reports
//!
//! ```
//! use tessera::conformal::{build_intervals, calibrate, ScaleKind};
//!
//! // residuals 1..=9 against unit scales; alpha = 0.2 picks the 8th smallest
//! let y: Vec<f64> = (1..=9).map(f64::from).collect();
//! let mean = vec![0.0; 9];
//! let scale = vec![1.0; 9];
//! let cal = calibrate(&y, &mean, &scale, ScaleKind::Constant, 0.2, 0.0).unwrap();
//! assert_eq!(cal.q_hat, 8.0);
//! let iv = build_intervals(&cal, &[0.5], &[1.0]).unwrap();
//! assert_eq!((iv[0].lower, iv[0].upper), (-7.5, 8.5));
//! ```

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod numerics;
pub mod moe;
pub mod conformal;
pub mod serde_f64;
pub mod mcdropout;
pub mod metrics;
pub mod data;
pub mod experiment;
