//! 1D convolution and its adjoint (transposed convolution), forward and backward.
//!
//! Both directions are stride 1 with zero padding `(K-1)/2`, so spatial length
//! is preserved. The transposed convolution is exactly the adjoint of the
//! convolution's linear map: `⟨conv(x), y⟩ = ⟨x, tconv(y)⟩` for zero biases.

use super::{ConvKernel, FeatureMap};
use crate::error::{Error, Result};

/// Gradients of one convolution (or transposed convolution) application.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: FeatureMap,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// `dst[t] += w · src[t + shift]` over the in-range span of `t`.
#[inline]
fn shifted_axpy(dst: &mut [f64], src: &[f64], w: f64, shift: isize) {
    let len = dst.len() as isize;
    let lo = 0.max(-shift).min(len) as usize;
    let hi = len.min(len - shift).max(0) as usize;
    for t in lo..hi {
        dst[t] += w * src[(t as isize + shift) as usize];
    }
}

/// `Σ_t a[t] · b[t + shift]` over the in-range span of `t`.
#[inline]
fn shifted_dot(a: &[f64], b: &[f64], shift: isize) -> f64 {
    let len = a.len() as isize;
    let lo = 0.max(-shift).min(len) as usize;
    let hi = len.min(len - shift).max(0) as usize;
    let mut acc = 0.0;
    for t in lo..hi {
        acc += a[t] * b[(t as isize + shift) as usize];
    }
    acc
}

fn check_conv_shapes(x: &FeatureMap, k: &ConvKernel) -> Result<()> {
    if x.channels != k.in_channels {
        return Err(Error::Mismatch {
            what: "conv input channels",
            expected: k.in_channels,
            actual: x.channels,
        });
    }
    if k.bias.len() != k.out_channels {
        return Err(Error::Mismatch {
            what: "conv bias length",
            expected: k.out_channels,
            actual: k.bias.len(),
        });
    }
    Ok(())
}

fn check_tconv_shapes(x: &FeatureMap, k: &ConvKernel) -> Result<()> {
    if x.channels != k.out_channels {
        return Err(Error::Mismatch {
            what: "tconv input channels",
            expected: k.out_channels,
            actual: x.channels,
        });
    }
    if k.bias.len() != k.in_channels {
        return Err(Error::Mismatch {
            what: "tconv bias length",
            expected: k.in_channels,
            actual: k.bias.len(),
        });
    }
    Ok(())
}

/// Forward convolution: `out[o][t] = bias[o] + Σ_{i,κ} w[o][i][κ] · x̂[i][t+κ-p]`
/// with `x̂` zero-padded by `p = (K-1)/2`.
pub fn conv1d_forward(x: &FeatureMap, k: &ConvKernel) -> Result<FeatureMap> {
    check_conv_shapes(x, k)?;
    let pad = (k.kernel_size / 2) as isize;
    let mut out = FeatureMap::zeros(k.out_channels, x.length);
    for o in 0..k.out_channels {
        let dst = out.row_mut(o);
        dst.fill(k.bias[o]);
        for i in 0..k.in_channels {
            let taps = k.taps(o, i);
            let src = x.row(i);
            for (kk, &w) in taps.iter().enumerate() {
                if w != 0.0 {
                    shifted_axpy(dst, src, w, kk as isize - pad);
                }
            }
        }
    }
    Ok(out)
}

/// Transposed convolution: the adjoint map, `out_channels → in_channels`.
///
/// `out[i][s] = bias[i] + Σ_{o,κ} w[o][i][κ] · x̂[o][s-κ+p]`. Note the bias has
/// one entry per kernel *in*-channel, which is this op's output channel.
pub fn tconv1d_forward(x: &FeatureMap, k: &ConvKernel) -> Result<FeatureMap> {
    check_tconv_shapes(x, k)?;
    let pad = (k.kernel_size / 2) as isize;
    let mut out = FeatureMap::zeros(k.in_channels, x.length);
    for i in 0..k.in_channels {
        let dst = out.row_mut(i);
        dst.fill(k.bias[i]);
        for o in 0..k.out_channels {
            let taps = k.taps(o, i);
            let src = x.row(o);
            for (kk, &w) in taps.iter().enumerate() {
                if w != 0.0 {
                    shifted_axpy(dst, src, w, pad - kk as isize);
                }
            }
        }
    }
    Ok(out)
}

/// Exact gradients of `Σ out ⊙ grad_out` for a forward convolution.
pub fn conv1d_backward(x: &FeatureMap, k: &ConvKernel, grad_out: &FeatureMap) -> Result<ConvGrads> {
    check_conv_shapes(x, k)?;
    if grad_out.channels != k.out_channels || grad_out.length != x.length {
        return Err(Error::Mismatch {
            what: "conv grad_out size",
            expected: k.out_channels * x.length,
            actual: grad_out.data.len(),
        });
    }
    let pad = (k.kernel_size / 2) as isize;

    let mut grad_bias = vec![0.0; k.out_channels];
    for o in 0..k.out_channels {
        grad_bias[o] = grad_out.row(o).iter().sum();
    }

    let mut grad_weights = vec![0.0; k.weights.len()];
    for o in 0..k.out_channels {
        for i in 0..k.in_channels {
            let base = (o * k.in_channels + i) * k.kernel_size;
            for kk in 0..k.kernel_size {
                grad_weights[base + kk] =
                    shifted_dot(grad_out.row(o), x.row(i), kk as isize - pad);
            }
        }
    }

    // grad wrt input is the adjoint map applied to grad_out
    let mut grad_input = FeatureMap::zeros(k.in_channels, x.length);
    for i in 0..k.in_channels {
        let dst = grad_input.row_mut(i);
        for o in 0..k.out_channels {
            let taps = k.taps(o, i);
            let src = grad_out.row(o);
            for (kk, &w) in taps.iter().enumerate() {
                if w != 0.0 {
                    shifted_axpy(dst, src, w, pad - kk as isize);
                }
            }
        }
    }

    Ok(ConvGrads { input: grad_input, weights: grad_weights, bias: grad_bias })
}

/// Exact gradients of `Σ out ⊙ grad_out` for a transposed convolution.
pub fn tconv1d_backward(
    x: &FeatureMap,
    k: &ConvKernel,
    grad_out: &FeatureMap,
) -> Result<ConvGrads> {
    check_tconv_shapes(x, k)?;
    if grad_out.channels != k.in_channels || grad_out.length != x.length {
        return Err(Error::Mismatch {
            what: "tconv grad_out size",
            expected: k.in_channels * x.length,
            actual: grad_out.data.len(),
        });
    }
    let pad = (k.kernel_size / 2) as isize;

    let mut grad_bias = vec![0.0; k.in_channels];
    for i in 0..k.in_channels {
        grad_bias[i] = grad_out.row(i).iter().sum();
    }

    let mut grad_weights = vec![0.0; k.weights.len()];
    for o in 0..k.out_channels {
        for i in 0..k.in_channels {
            let base = (o * k.in_channels + i) * k.kernel_size;
            for kk in 0..k.kernel_size {
                grad_weights[base + kk] =
                    shifted_dot(grad_out.row(i), x.row(o), pad - kk as isize);
            }
        }
    }

    // grad wrt input is the forward-convolution map applied to grad_out
    let mut grad_input = FeatureMap::zeros(k.out_channels, x.length);
    for o in 0..k.out_channels {
        let dst = grad_input.row_mut(o);
        for i in 0..k.in_channels {
            let taps = k.taps(o, i);
            let src = grad_out.row(i);
            for (kk, &w) in taps.iter().enumerate() {
                if w != 0.0 {
                    shifted_axpy(dst, src, w, kk as isize - pad);
                }
            }
        }
    }

    Ok(ConvGrads { input: grad_input, weights: grad_weights, bias: grad_bias })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn rand_map(rng: &mut ChaCha8Rng, c: usize, l: usize) -> FeatureMap {
        let data = (0..c * l).map(|_| rng.random_range(-2.0..2.0)).collect();
        FeatureMap::new(c, l, data).unwrap()
    }

    fn rand_kernel(
        rng: &mut ChaCha8Rng,
        o: usize,
        i: usize,
        k: usize,
        bias_len: usize,
    ) -> ConvKernel {
        let weights = (0..o * i * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias = (0..bias_len).map(|_| rng.random_range(-1.0..1.0)).collect();
        ConvKernel::new(o, i, k, weights, bias).unwrap()
    }

    /// Direct-summation convolution oracle over an explicitly padded input.
    fn conv_brute(x: &FeatureMap, k: &ConvKernel) -> FeatureMap {
        let pad = k.kernel_size / 2;
        let mut out = FeatureMap::zeros(k.out_channels, x.length);
        for o in 0..k.out_channels {
            for t in 0..x.length {
                let mut acc = k.bias[o];
                for i in 0..k.in_channels {
                    let mut padded = vec![0.0; x.length + 2 * pad];
                    padded[pad..pad + x.length].copy_from_slice(x.row(i));
                    for kk in 0..k.kernel_size {
                        acc += k.taps(o, i)[kk] * padded[t + kk];
                    }
                }
                out.row_mut(o)[t] = acc;
            }
        }
        out
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = stream(1, "test-conv", &[0]);
        let x = rand_map(&mut rng, 1, 29);
        let k = ConvKernel::new(1, 1, 3, vec![0.0, 1.0, 0.0], vec![0.0]).unwrap();
        let y = conv1d_forward(&x, &k).unwrap();
        assert_eq!(y.data, x.data);
        // same delta kernel through the adjoint direction
        let z = tconv1d_forward(&x, &k).unwrap();
        assert_eq!(z.data, x.data);
    }

    #[test]
    fn length_is_preserved() {
        let mut rng = stream(1, "test-conv", &[1]);
        for l in [1usize, 2, 29, 199] {
            let x = rand_map(&mut rng, 2, l);
            let k = rand_kernel(&mut rng, 3, 2, 3, 3);
            assert_eq!(conv1d_forward(&x, &k).unwrap().length, l);
        }
    }

    #[test]
    fn matches_brute_force_on_random_case() {
        let mut rng = stream(2, "test-conv", &[0]);
        let x = rand_map(&mut rng, 2, 7);
        let k = rand_kernel(&mut rng, 3, 2, 3, 3);
        let fast = conv1d_forward(&x, &k).unwrap();
        let slow = conv_brute(&x, &k);
        for (a, b) in fast.data.iter().zip(&slow.data) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn matches_brute_force_exhaustively_small() {
        let mut rng = stream(3, "test-conv", &[0]);
        for ci in 1..=4 {
            for co in 1..=4 {
                for l in 1..=16 {
                    for ks in [1usize, 3, 5] {
                        let x = rand_map(&mut rng, ci, l);
                        let k = rand_kernel(&mut rng, co, ci, ks, co);
                        let fast = conv1d_forward(&x, &k).unwrap();
                        let slow = conv_brute(&x, &k);
                        for (a, b) in fast.data.iter().zip(&slow.data) {
                            assert!((a - b).abs() <= 1e-12, "C {ci}->{co} L {l} K {ks}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn adjoint_identity_holds_with_zero_bias() {
        let mut rng = stream(4, "test-conv", &[0]);
        for case in 0..20u64 {
            let mut r = stream(4, "test-conv-case", &[case]);
            let (ci, co, l) = (
                r.random_range(1..4usize),
                r.random_range(1..4usize),
                r.random_range(2..12usize),
            );
            let x = rand_map(&mut r, ci, l);
            let y = rand_map(&mut r, co, l);
            let mut k = rand_kernel(&mut rng, co, ci, 3, co);
            k.bias = vec![0.0; co];
            let cx = conv1d_forward(&x, &k).unwrap();
            let mut kt = k.clone();
            kt.bias = vec![0.0; ci];
            let ty = tconv1d_forward(&y, &kt).unwrap();
            let lhs = dot(&cx.data, &y.data);
            let rhs = dot(&x.data, &ty.data);
            let denom = lhs.abs().max(rhs.abs()).max(1e-12);
            assert!((lhs - rhs).abs() / denom < 1e-12, "case {case}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn tconv_matches_dense_transpose_oracle() {
        let mut rng = stream(5, "test-conv", &[0]);
        let (ci, co, l) = (3usize, 2usize, 9usize);
        let mut k = rand_kernel(&mut rng, co, ci, 3, co);
        k.bias = vec![0.0; co];

        // materialize the conv linear map as a (co·l) × (ci·l) matrix
        let rows = co * l;
        let cols = ci * l;
        let mut matrix = vec![0.0; rows * cols];
        for col in 0..cols {
            let mut basis = FeatureMap::zeros(ci, l);
            basis.data[col] = 1.0;
            let out = conv1d_forward(&basis, &k).unwrap();
            for row in 0..rows {
                matrix[row * cols + col] = out.data[row];
            }
        }

        let y = rand_map(&mut rng, co, l);
        let tbias: Vec<f64> = (0..ci).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut kt = k.clone();
        kt.bias = tbias.clone();
        let got = tconv1d_forward(&y, &kt).unwrap();

        for col in 0..cols {
            let mut acc = tbias[col / l];
            for row in 0..rows {
                acc += matrix[row * cols + col] * y.data[row];
            }
            assert!((got.data[col] - acc).abs() <= 1e-12, "col {col}");
        }
    }

    #[test]
    fn backward_zero_grad_gives_zero() {
        let mut rng = stream(6, "test-conv", &[0]);
        let x = rand_map(&mut rng, 2, 8);
        let k = rand_kernel(&mut rng, 3, 2, 3, 3);
        let g = FeatureMap::zeros(3, 8);
        let grads = conv1d_backward(&x, &k, &g).unwrap();
        assert!(grads.input.data.iter().all(|&v| v == 0.0));
        assert!(grads.weights.iter().all(|&v| v == 0.0));
        assert!(grads.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_bias_is_row_sum_of_grad_out() {
        let mut rng = stream(7, "test-conv", &[0]);
        let x = rand_map(&mut rng, 2, 8);
        let k = rand_kernel(&mut rng, 3, 2, 3, 3);
        let g = rand_map(&mut rng, 3, 8);
        let grads = conv1d_backward(&x, &k, &g).unwrap();
        for o in 0..3 {
            let expected: f64 = g.row(o).iter().sum();
            assert!((grads.bias[o] - expected).abs() < 1e-14);
        }
    }

    /// Central finite differences of `Σ conv(x,k) ⊙ g` over every input,
    /// weight, and bias slot. The objective is linear in each slot, so the
    /// check is exact up to rounding.
    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = stream(8, "test-conv", &[0]);
        let x = rand_map(&mut rng, 2, 6);
        let k = rand_kernel(&mut rng, 3, 2, 3, 3);
        let g = rand_map(&mut rng, 3, 6);
        let grads = conv1d_backward(&x, &k, &g).unwrap();
        let h = 1e-6;
        let objective = |x: &FeatureMap, k: &ConvKernel| -> f64 {
            dot(&conv1d_forward(x, k).unwrap().data, &g.data)
        };

        for slot in 0..x.data.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data[slot] += h;
            xm.data[slot] -= h;
            let fd = (objective(&xp, &k) - objective(&xm, &k)) / (2.0 * h);
            assert!(rel_err(grads.input.data[slot], fd) < 1e-6, "input slot {slot}");
        }
        for slot in 0..k.weights.len() {
            let mut kp = k.clone();
            let mut km = k.clone();
            kp.weights[slot] += h;
            km.weights[slot] -= h;
            let fd = (objective(&x, &kp) - objective(&x, &km)) / (2.0 * h);
            assert!(rel_err(grads.weights[slot], fd) < 1e-6, "weight slot {slot}");
        }
        for slot in 0..k.bias.len() {
            let mut kp = k.clone();
            let mut km = k.clone();
            kp.bias[slot] += h;
            km.bias[slot] -= h;
            let fd = (objective(&x, &kp) - objective(&x, &km)) / (2.0 * h);
            assert!(rel_err(grads.bias[slot], fd) < 1e-6, "bias slot {slot}");
        }
    }

    #[test]
    fn tconv_backward_matches_finite_differences() {
        let mut rng = stream(9, "test-conv", &[0]);
        let x = rand_map(&mut rng, 3, 6); // tconv input has out_channels rows
        let k = rand_kernel(&mut rng, 3, 2, 3, 2);
        let g = rand_map(&mut rng, 2, 6);
        let grads = tconv1d_backward(&x, &k, &g).unwrap();
        let h = 1e-6;
        let objective = |x: &FeatureMap, k: &ConvKernel| -> f64 {
            dot(&tconv1d_forward(x, k).unwrap().data, &g.data)
        };

        for slot in 0..x.data.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data[slot] += h;
            xm.data[slot] -= h;
            let fd = (objective(&xp, &k) - objective(&xm, &k)) / (2.0 * h);
            assert!(rel_err(grads.input.data[slot], fd) < 1e-6, "input slot {slot}");
        }
        for slot in 0..k.weights.len() {
            let mut kp = k.clone();
            let mut km = k.clone();
            kp.weights[slot] += h;
            km.weights[slot] -= h;
            let fd = (objective(&x, &kp) - objective(&x, &km)) / (2.0 * h);
            assert!(rel_err(grads.weights[slot], fd) < 1e-6, "weight slot {slot}");
        }
        for slot in 0..k.bias.len() {
            let mut kp = k.clone();
            let mut km = k.clone();
            kp.bias[slot] += h;
            km.bias[slot] -= h;
            let fd = (objective(&x, &kp) - objective(&x, &km)) / (2.0 * h);
            assert!(rel_err(grads.bias[slot], fd) < 1e-6, "bias slot {slot}");
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let mut rng = stream(10, "test-conv", &[0]);
        let x = rand_map(&mut rng, 2, 8);
        let k = rand_kernel(&mut rng, 3, 4, 3, 3);
        assert!(conv1d_forward(&x, &k).is_err());
        let kt = rand_kernel(&mut rng, 4, 2, 3, 2);
        assert!(tconv1d_forward(&x, &kt).is_err());
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-9)
    }
}
