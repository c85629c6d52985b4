//! The dilated-convolution classifier: layers, forward and reverse passes,
//! cross-entropy loss, Adam, and checkpoints.

mod adam;
mod checkpoint;
mod config;
mod layers;
mod loss;
mod model;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use layers::{
    concat_embedding, conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout,
    dropout_mask, temporal_downsample, temporal_downsample_backward, Activation, Downsample,
};
pub use loss::{cross_entropy, softmax};
pub use model::{argmax, GradientSet, Mode, ParamSpec, WavenetClassifier};

/// Floating-point type the network is generic over (f32 for training, f64
/// for gradient checks).
pub trait Scalar:
    num_traits::Float
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Inverse hyperbolic sine; may trade the last ulps for speed.
    fn asinh_fast(self) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn asinh_fast(self) -> Self {
        let ax = self.abs();
        let y = if ax < 0.25 {
            // Taylor series; the first omitted term is below 1e-7 relative
            let x2 = ax * ax;
            let tail = 5.0 / 112.0 - x2 * (35.0 / 1152.0);
            ax * (1.0 + x2 * (-1.0 / 6.0 + x2 * (3.0 / 40.0 - x2 * tail)))
        } else {
            (ax + (ax * ax + 1.0).sqrt()).ln()
        };
        y.copysign(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn asinh_fast(self) -> Self {
        self.asinh()
    }
}
