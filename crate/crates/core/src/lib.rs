//! Online-learning sequence prediction and streaming anomaly detection.
//!
//! The pipeline encodes scalar inputs into SDRs, pools them into
//! fixed-sparsity column activations, and predicts the next activation with
//! two cooperating memories: a multi-order sequence memory and a fast
//! first-order reflex memory. A control unit arbitrates between them per
//! step from windowed anomaly scores. The reflex memory can run either as a
//! plain software table or mapped onto a simulated CAM array that charges
//! per-operation latency and energy.

pub mod cam;
pub mod config;
pub mod cu;
pub mod encoder;
pub mod metrics;
pub mod pipeline;
pub mod rm;
pub mod sdr;
pub mod sm;
pub mod sp;
pub mod synth;

pub use sdr::{Fingerprint, Sdr, SdrError};
