//! From-scratch 1D neural-network kernels with exact hand-derived backward
//! passes: convolution, max-pooling with index capture, max-unpooling,
//! transposed convolution, ReLU, MSE loss, and Adam.
//!
//! All kernels are pure functions in double precision. Convolutions are
//! stride 1 with zero padding `(K-1)/2`, so every op preserves the spatial
//! length except pooling (factor 2, floor semantics).

mod adam;
mod conv;
mod pool;

pub use adam::{adam_step, AdamState};
pub use conv::{conv1d_backward, conv1d_forward, tconv1d_backward, tconv1d_forward, ConvGrads};
pub use pool::{
    maxpool1d_backward, maxpool1d_forward, maxunpool1d_backward, maxunpool1d_forward, PoolRecord,
};

use crate::error::{Error, Result};

/// A C×L feature map stored row-major by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub length: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    /// Wraps raw data, checking that `data.len() = channels·length`.
    pub fn new(channels: usize, length: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::Invalid(format!(
                "feature map dimensions must be positive, got {channels}x{length}"
            )));
        }
        if data.len() != channels * length {
            return Err(Error::Mismatch {
                what: "feature map data size",
                expected: channels * length,
                actual: data.len(),
            });
        }
        Ok(FeatureMap { channels, length, data })
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        FeatureMap { channels, length, data: vec![0.0; channels * length] }
    }

    /// Single-channel map over a raw signal.
    pub fn from_signal(signal: &[f64]) -> Result<Self> {
        FeatureMap::new(1, signal.len(), signal.to_vec())
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.data[c * self.length..(c + 1) * self.length]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.length..(c + 1) * self.length]
    }

    fn same_shape(&self, other: &FeatureMap) -> bool {
        self.channels == other.channels && self.length == other.length
    }
}

/// Weights of one convolution layer: O×I×K row-major plus a bias vector.
///
/// The same storage serves both orientations. Used as a forward convolution
/// the kernel maps `in_channels → out_channels` and `bias` has one entry per
/// out-channel. Used as a transposed convolution ([`tconv1d_forward`]) it maps
/// `out_channels → in_channels` (the adjoint direction) and carries its own
/// bias with one entry per in-channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::Invalid("kernel channel counts must be positive".into()));
        }
        if kernel_size == 0 || kernel_size % 2 == 0 {
            return Err(Error::Invalid(format!("kernel size must be odd, got {kernel_size}")));
        }
        if weights.len() != out_channels * in_channels * kernel_size {
            return Err(Error::Mismatch {
                what: "kernel weight count",
                expected: out_channels * in_channels * kernel_size,
                actual: weights.len(),
            });
        }
        Ok(ConvKernel { out_channels, in_channels, kernel_size, weights, bias })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize) -> Self {
        ConvKernel {
            out_channels,
            in_channels,
            kernel_size,
            weights: vec![0.0; out_channels * in_channels * kernel_size],
            bias: Vec::new(),
        }
    }

    /// Weight taps for the (out-channel, in-channel) pair.
    pub fn taps(&self, o: usize, i: usize) -> &[f64] {
        let start = (o * self.in_channels + i) * self.kernel_size;
        &self.taps_all()[start..start + self.kernel_size]
    }

    fn taps_all(&self) -> &[f64] {
        &self.weights
    }
}

/// Elementwise `max(0, x)`.
pub fn relu_forward(x: &FeatureMap) -> FeatureMap {
    FeatureMap {
        channels: x.channels,
        length: x.length,
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// Backward of ReLU: passes gradient where the forward input was strictly
/// positive; the kink at 0 takes gradient 0.
pub fn relu_backward(pre: &FeatureMap, grad_out: &FeatureMap) -> Result<FeatureMap> {
    if !pre.same_shape(grad_out) {
        return Err(Error::Mismatch {
            what: "relu gradient size",
            expected: pre.data.len(),
            actual: grad_out.data.len(),
        });
    }
    let data = pre
        .data
        .iter()
        .zip(&grad_out.data)
        .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
        .collect();
    Ok(FeatureMap { channels: pre.channels, length: pre.length, data })
}

/// Mean squared error over all `M` elements and its gradient `(2/M)(pred−target)`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Mismatch {
            what: "mse operand length",
            expected: target.len(),
            actual: pred.len(),
        });
    }
    let m = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let d = p - t;
        loss += d * d;
        grad.push(2.0 * d / m);
    }
    Ok((loss / m, grad))
}
