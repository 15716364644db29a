//! The eight-layer symmetric denoising autoencoder.
//!
//! Encoder: four blocks of `conv → ReLU → maxpool`, widening channels
//! 1→8→16→32→64 while halving the length. Decoder: four blocks of
//! `maxunpool → tconv → ReLU`, consuming the encoder's pool records in
//! reverse order; the final tconv is linear so signed parameters survive.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{
    conv1d_backward, conv1d_forward, maxpool1d_backward, maxpool1d_forward, maxunpool1d_backward,
    maxunpool1d_forward, relu_backward, relu_forward, tconv1d_backward, tconv1d_forward,
    ConvKernel, FeatureMap, PoolRecord,
};
use crate::rng::stream;

const WEIGHTS_MAGIC: &[u8; 4] = b"FWT1";
const LAYER_COUNT: usize = 8;

/// Channel widths entering/leaving the four encoder layers; the decoder
/// traverses the same plan in reverse.
pub const CHANNEL_PLAN: [usize; 5] = [1, 8, 16, 32, 64];
pub const KERNEL_SIZE: usize = 3;
pub const POOL_SIZE: usize = 2;

/// Static shape of one network: input length and the feature-map length
/// entering each encoder layer (`lengths[0] = L`, …, `lengths[4]` = bottleneck).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AutoencoderSpec {
    pub input_length: usize,
    pub lengths: [usize; 5],
}

/// Minimum input length: four halvings must leave at least one slot.
pub const MIN_INPUT_LENGTH: usize = 16;

/// Compute per-layer lengths for a given input length.
pub fn build(input_length: usize) -> Result<AutoencoderSpec> {
    if input_length < MIN_INPUT_LENGTH {
        return Err(Error::Invalid(format!(
            "input length must be at least {MIN_INPUT_LENGTH}, got {input_length}"
        )));
    }
    let mut lengths = [input_length; 5];
    for i in 1..5 {
        lengths[i] = lengths[i - 1] / POOL_SIZE;
    }
    Ok(AutoencoderSpec { input_length, lengths })
}

impl AutoencoderSpec {
    pub fn bottleneck_channels(&self) -> usize {
        CHANNEL_PLAN[4]
    }

    pub fn bottleneck_length(&self) -> usize {
        self.lengths[4]
    }
}

/// All trainable parameters. Decoder kernel `j` mirrors encoder kernel `3−j`
/// (same stored channel shape) and is applied as a transposed convolution, so
/// its bias has `in_channels` entries — one per produced channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderWeights {
    pub spec: AutoencoderSpec,
    pub encoder: Vec<ConvKernel>,
    pub decoder: Vec<ConvKernel>,
}

impl AutoencoderWeights {
    pub fn validate(&self) -> Result<()> {
        if self.encoder.len() != 4 || self.decoder.len() != 4 {
            return Err(Error::Invalid("expected 4 encoder and 4 decoder kernels".into()));
        }
        for i in 0..4 {
            let k = &self.encoder[i];
            let (want_in, want_out) = (CHANNEL_PLAN[i], CHANNEL_PLAN[i + 1]);
            if k.in_channels != want_in || k.out_channels != want_out || k.kernel_size != KERNEL_SIZE
            {
                return Err(Error::Invalid(format!(
                    "encoder layer {i} has shape {}→{} (kernel {}), expected {want_in}→{want_out} (kernel {KERNEL_SIZE})",
                    k.in_channels, k.out_channels, k.kernel_size
                )));
            }
            if k.bias.len() != k.out_channels {
                return Err(Error::Mismatch {
                    what: "encoder bias length",
                    expected: k.out_channels,
                    actual: k.bias.len(),
                });
            }
        }
        for j in 0..4 {
            let k = &self.decoder[j];
            let (want_out, want_in) = (CHANNEL_PLAN[4 - j], CHANNEL_PLAN[3 - j]);
            if k.in_channels != want_in || k.out_channels != want_out || k.kernel_size != KERNEL_SIZE
            {
                return Err(Error::Invalid(format!(
                    "decoder layer {j} has stored shape {}→{} (kernel {}), expected {want_in}→{want_out} (kernel {KERNEL_SIZE})",
                    k.in_channels, k.out_channels, k.kernel_size
                )));
            }
            if k.bias.len() != k.in_channels {
                return Err(Error::Mismatch {
                    what: "decoder bias length",
                    expected: k.in_channels,
                    actual: k.bias.len(),
                });
            }
        }
        let finite = self
            .encoder
            .iter()
            .chain(&self.decoder)
            .all(|k| k.weights.iter().chain(&k.bias).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Invalid("weights contain non-finite entries".into()));
        }
        Ok(())
    }

    /// Kernels in layer order (encoder 0..4, then decoder 0..4).
    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvKernel> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }
}

/// Glorot-uniform initial weights (`b = sqrt(6/(fan_in+fan_out))`, fans
/// counted as channels × kernel taps), zero biases, one derived RNG stream
/// per layer.
pub fn init_weights(spec: &AutoencoderSpec, seed: u64) -> AutoencoderWeights {
    let glorot = |out_ch: usize, in_ch: usize, layer: u64| -> Vec<f64> {
        let fan_in = in_ch * KERNEL_SIZE;
        let fan_out = out_ch * KERNEL_SIZE;
        let b = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut rng = stream(seed, "init", &[layer]);
        (0..out_ch * in_ch * KERNEL_SIZE)
            .map(|_| rng.random_range(-b..b))
            .collect()
    };
    let encoder = (0..4)
        .map(|i| {
            let (in_ch, out_ch) = (CHANNEL_PLAN[i], CHANNEL_PLAN[i + 1]);
            ConvKernel::new(out_ch, in_ch, KERNEL_SIZE, glorot(out_ch, in_ch, i as u64), vec![
                0.0;
                out_ch
            ])
            .unwrap()
        })
        .collect();
    let decoder = (0..4)
        .map(|j| {
            let (out_ch, in_ch) = (CHANNEL_PLAN[4 - j], CHANNEL_PLAN[3 - j]);
            ConvKernel::new(out_ch, in_ch, KERNEL_SIZE, glorot(out_ch, in_ch, (4 + j) as u64), vec![
                0.0;
                in_ch
            ])
            .unwrap()
        })
        .collect();
    AutoencoderWeights { spec: *spec, encoder, decoder }
}

/// Everything the backward pass needs, captured during one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub encoder_inputs: Vec<FeatureMap>,
    pub encoder_preacts: Vec<FeatureMap>,
    pub pool_records: Vec<PoolRecord>,
    pub bottleneck: FeatureMap,
    pub decoder_unpooled: Vec<FeatureMap>,
    pub decoder_preacts: Vec<FeatureMap>,
}

fn encode(
    weights: &AutoencoderWeights,
    input: FeatureMap,
) -> Result<(FeatureMap, Vec<FeatureMap>, Vec<FeatureMap>, Vec<PoolRecord>)> {
    let mut x = input;
    let mut inputs = Vec::with_capacity(4);
    let mut preacts = Vec::with_capacity(4);
    let mut records = Vec::with_capacity(4);
    for kernel in &weights.encoder {
        let pre = conv1d_forward(&x, kernel)?;
        inputs.push(x);
        let act = relu_forward(&pre);
        preacts.push(pre);
        let (pooled, record) = maxpool1d_forward(&act)?;
        records.push(record);
        x = pooled;
    }
    Ok((x, inputs, preacts, records))
}

/// Decoder layer `j` consumes pool record `3−j`; the last tconv is linear.
fn decode(
    weights: &AutoencoderWeights,
    bottleneck: &FeatureMap,
    records: &[PoolRecord],
) -> Result<(FeatureMap, Vec<FeatureMap>, Vec<FeatureMap>)> {
    let mut x = bottleneck.clone();
    let mut unpooled_maps = Vec::with_capacity(4);
    let mut preacts = Vec::with_capacity(4);
    for (j, kernel) in weights.decoder.iter().enumerate() {
        let unpooled = maxunpool1d_forward(&x, &records[3 - j])?;
        let pre = tconv1d_forward(&unpooled, kernel)?;
        unpooled_maps.push(unpooled);
        x = if j < 3 { relu_forward(&pre) } else { pre.clone() };
        preacts.push(pre);
    }
    Ok((x, unpooled_maps, preacts))
}

/// Run the full network on one parameter vector.
pub fn forward(weights: &AutoencoderWeights, input: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
    weights.validate()?;
    if input.len() != weights.spec.input_length {
        return Err(Error::Mismatch {
            what: "input length",
            expected: weights.spec.input_length,
            actual: input.len(),
        });
    }
    let x = FeatureMap::from_signal(input)?;
    let (bottleneck, encoder_inputs, encoder_preacts, pool_records) = encode(weights, x)?;
    let (output, decoder_unpooled, decoder_preacts) = decode(weights, &bottleneck, &pool_records)?;
    debug_assert_eq!(output.channels, 1);
    debug_assert_eq!(output.length, weights.spec.input_length);
    let trace = ForwardTrace {
        encoder_inputs,
        encoder_preacts,
        pool_records,
        bottleneck,
        decoder_unpooled,
        decoder_preacts,
    };
    Ok((output.data, trace))
}

/// Per-kernel gradient tensors, in the same layout as [`AutoencoderWeights`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightGradients {
    pub encoder: Vec<KernelGrads>,
    pub decoder: Vec<KernelGrads>,
}

impl WeightGradients {
    pub fn zeros_like(weights: &AutoencoderWeights) -> Self {
        let zero = |k: &ConvKernel| KernelGrads {
            weights: vec![0.0; k.weights.len()],
            bias: vec![0.0; k.bias.len()],
        };
        WeightGradients {
            encoder: weights.encoder.iter().map(zero).collect(),
            decoder: weights.decoder.iter().map(zero).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &WeightGradients) {
        let add = |dst: &mut Vec<KernelGrads>, src: &[KernelGrads]| {
            for (d, s) in dst.iter_mut().zip(src) {
                for (x, y) in d.weights.iter_mut().zip(&s.weights) {
                    *x += y;
                }
                for (x, y) in d.bias.iter_mut().zip(&s.bias) {
                    *x += y;
                }
            }
        };
        add(&mut self.encoder, &other.encoder);
        add(&mut self.decoder, &other.decoder);
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            for x in g.weights.iter_mut().chain(g.bias.iter_mut()) {
                *x *= c;
            }
        }
    }
}

/// Exact gradients of the forward composition with respect to every kernel's
/// weights and biases, given the loss gradient at the network output.
pub fn backward(
    weights: &AutoencoderWeights,
    trace: &ForwardTrace,
    grad_output: &[f64],
) -> Result<WeightGradients> {
    if grad_output.len() != weights.spec.input_length {
        return Err(Error::Mismatch {
            what: "output gradient length",
            expected: weights.spec.input_length,
            actual: grad_output.len(),
        });
    }
    let mut grads = WeightGradients::zeros_like(weights);
    let mut g = FeatureMap::from_signal(grad_output)?;

    for j in (0..4).rev() {
        if j < 3 {
            g = relu_backward(&trace.decoder_preacts[j], &g)?;
        }
        let cg = tconv1d_backward(&trace.decoder_unpooled[j], &weights.decoder[j], &g)?;
        grads.decoder[j] = KernelGrads { weights: cg.weights, bias: cg.bias };
        g = maxunpool1d_backward(&trace.pool_records[3 - j], &cg.input)?;
    }
    for i in (0..4).rev() {
        g = maxpool1d_backward(&trace.pool_records[i], &g)?;
        g = relu_backward(&trace.encoder_preacts[i], &g)?;
        let cg = conv1d_backward(&trace.encoder_inputs[i], &weights.encoder[i], &g)?;
        grads.encoder[i] = KernelGrads { weights: cg.weights, bias: cg.bias };
        g = cg.input;
    }
    Ok(grads)
}

/// Forward every input through the network (no training). Output order
/// matches input order regardless of parallelism.
pub fn denoise_batch(weights: &AutoencoderWeights, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    weights.validate()?;
    for v in inputs {
        if v.len() != weights.spec.input_length {
            return Err(Error::Mismatch {
                what: "input length",
                expected: weights.spec.input_length,
                actual: v.len(),
            });
        }
    }
    inputs
        .par_iter()
        .map(|v| forward(weights, v).map(|(out, _)| out))
        .collect()
}

const LAYER_TYPE_CONV: u8 = 0;
const LAYER_TYPE_TCONV: u8 = 1;

/// Write weights in the `.fwt` binary format (little-endian).
pub fn save_weights(weights: &AutoencoderWeights, path: &Path) -> Result<()> {
    weights.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_u32::<LittleEndian>(weights.spec.input_length as u32)?;
    w.write_u32::<LittleEndian>(LAYER_COUNT as u32)?;
    for (kernel, ty) in weights
        .encoder
        .iter()
        .map(|k| (k, LAYER_TYPE_CONV))
        .chain(weights.decoder.iter().map(|k| (k, LAYER_TYPE_TCONV)))
    {
        w.write_u32::<LittleEndian>(kernel.out_channels as u32)?;
        w.write_u32::<LittleEndian>(kernel.in_channels as u32)?;
        w.write_u32::<LittleEndian>(kernel.kernel_size as u32)?;
        w.write_u8(ty)?;
        for &v in kernel.weights.iter().chain(&kernel.bias) {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load and validate a `.fwt` weights file.
pub fn load_weights(path: &Path) -> Result<AutoencoderWeights> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Truncated { section: "magic" })?;
    if &magic != WEIGHTS_MAGIC {
        return Err(Error::BadMagic { expected: "FWT1", found: magic });
    }
    let input_length = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Truncated { section: "header" })? as usize;
    let layer_count = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Truncated { section: "header" })? as usize;
    if layer_count != LAYER_COUNT {
        return Err(Error::Header(format!(
            "expected {LAYER_COUNT} layers, file declares {layer_count}"
        )));
    }
    let spec = build(input_length)?;

    let mut encoder = Vec::with_capacity(4);
    let mut decoder = Vec::with_capacity(4);
    for layer in 0..LAYER_COUNT {
        let out_ch = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::Truncated { section: "layer header" })? as usize;
        let in_ch = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::Truncated { section: "layer header" })? as usize;
        let k = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::Truncated { section: "layer header" })? as usize;
        let ty = r.read_u8().map_err(|_| Error::Truncated { section: "layer header" })?;
        let expected_ty = if layer < 4 { LAYER_TYPE_CONV } else { LAYER_TYPE_TCONV };
        if ty != expected_ty {
            return Err(Error::Header(format!("layer {layer} has unexpected type byte {ty}")));
        }
        if k != KERNEL_SIZE {
            return Err(Error::Header(format!("layer {layer} kernel size {k} unsupported")));
        }
        let weight_count = out_ch
            .checked_mul(in_ch)
            .and_then(|n| n.checked_mul(k))
            .filter(|&n| n > 0 && n < (1 << 30))
            .ok_or_else(|| Error::Header(format!("layer {layer} has invalid channel counts")))?;
        let bias_count = if ty == LAYER_TYPE_CONV { out_ch } else { in_ch };
        let mut weights = vec![0.0; weight_count];
        r.read_f64_into::<LittleEndian>(&mut weights)
            .map_err(|_| Error::Truncated { section: "weights" })?;
        let mut bias = vec![0.0; bias_count];
        r.read_f64_into::<LittleEndian>(&mut bias)
            .map_err(|_| Error::Truncated { section: "biases" })?;
        let kernel = ConvKernel::new(out_ch, in_ch, k, weights, bias)?;
        if layer < 4 {
            encoder.push(kernel);
        } else {
            decoder.push(kernel);
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Header("trailing bytes after layer sections".into()));
    }

    let weights = AutoencoderWeights { spec, encoder, decoder };
    weights.validate()?;
    Ok(weights)
}
