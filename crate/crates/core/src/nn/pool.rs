//! Max-pooling (kernel 2, stride 2) with argmax capture, and the matching
//! max-unpooling that routes values back through the stored indices.
//!
//! Odd input lengths drop the trailing element (floor semantics): it is never
//! pooled, receives zero gradient, and unpooling leaves it zero.

use super::FeatureMap;
use crate::error::{Error, Result};

/// Where each pooled value came from: absolute argmax positions per channel,
/// plus the pre-pooling length needed to invert the operation.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRecord {
    pub channels: usize,
    pub pre_length: usize,
    /// C×L_out row-major; each entry is an index into the pre-pool row.
    pub indices: Vec<usize>,
}

impl PoolRecord {
    pub fn out_length(&self) -> usize {
        self.indices.len() / self.channels
    }
}

/// Pool pairs `(2t, 2t+1)` per channel, keeping the max; ties go to the lower
/// index. Output length is `floor(L/2)`.
pub fn maxpool1d_forward(x: &FeatureMap) -> Result<(FeatureMap, PoolRecord)> {
    if x.length < 2 {
        return Err(Error::Invalid(format!(
            "maxpool requires input length >= 2, got {}",
            x.length
        )));
    }
    let l_out = x.length / 2;
    let mut out = FeatureMap::zeros(x.channels, l_out);
    let mut indices = vec![0usize; x.channels * l_out];
    for c in 0..x.channels {
        let src = x.row(c);
        let dst = out.row_mut(c);
        let idx = &mut indices[c * l_out..(c + 1) * l_out];
        for t in 0..l_out {
            let (a, b) = (src[2 * t], src[2 * t + 1]);
            if b > a {
                dst[t] = b;
                idx[t] = 2 * t + 1;
            } else {
                dst[t] = a;
                idx[t] = 2 * t;
            }
        }
    }
    let record = PoolRecord { channels: x.channels, pre_length: x.length, indices };
    Ok((out, record))
}

fn check_pooled_shape(record: &PoolRecord, map: &FeatureMap, what: &'static str) -> Result<()> {
    if map.channels != record.channels || map.length != record.out_length() {
        return Err(Error::Mismatch {
            what,
            expected: record.channels * record.out_length(),
            actual: map.data.len(),
        });
    }
    Ok(())
}

/// Route the pooled gradient back to each window's argmax; every other input
/// position (including a dropped odd tail) gets zero.
pub fn maxpool1d_backward(record: &PoolRecord, grad_out: &FeatureMap) -> Result<FeatureMap> {
    check_pooled_shape(record, grad_out, "maxpool grad_out size")?;
    let l_out = record.out_length();
    let mut grad_x = FeatureMap::zeros(record.channels, record.pre_length);
    for c in 0..record.channels {
        let idx = &record.indices[c * l_out..(c + 1) * l_out];
        let src = grad_out.row(c);
        let dst = grad_x.row_mut(c);
        for t in 0..l_out {
            dst[idx[t]] = src[t];
        }
    }
    Ok(grad_x)
}

/// Place each value at its recorded argmax position; all other cells are 0.
pub fn maxunpool1d_forward(x: &FeatureMap, record: &PoolRecord) -> Result<FeatureMap> {
    check_pooled_shape(record, x, "maxunpool input size")?;
    let l_out = record.out_length();
    let mut out = FeatureMap::zeros(record.channels, record.pre_length);
    for c in 0..record.channels {
        let idx = &record.indices[c * l_out..(c + 1) * l_out];
        let src = x.row(c);
        let dst = out.row_mut(c);
        for t in 0..l_out {
            let p = idx[t];
            if p >= record.pre_length {
                return Err(Error::Invalid(format!(
                    "pool record index {p} out of range for pre_length {}",
                    record.pre_length
                )));
            }
            dst[p] = src[t];
        }
    }
    Ok(out)
}

/// Backward of unpooling: gather the gradient at each recorded position.
pub fn maxunpool1d_backward(record: &PoolRecord, grad_out: &FeatureMap) -> Result<FeatureMap> {
    if grad_out.channels != record.channels || grad_out.length != record.pre_length {
        return Err(Error::Mismatch {
            what: "maxunpool grad_out size",
            expected: record.channels * record.pre_length,
            actual: grad_out.data.len(),
        });
    }
    let l_out = record.out_length();
    let mut grad_x = FeatureMap::zeros(record.channels, l_out);
    for c in 0..record.channels {
        let idx = &record.indices[c * l_out..(c + 1) * l_out];
        let src = grad_out.row(c);
        let dst = grad_x.row_mut(c);
        for t in 0..l_out {
            dst[t] = src[idx[t]];
        }
    }
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn rand_map(seed: u64, c: usize, l: usize) -> FeatureMap {
        let mut rng = stream(seed, "test-pool", &[]);
        let data = (0..c * l).map(|_| rng.random_range(-2.0..2.0)).collect();
        FeatureMap::new(c, l, data).unwrap()
    }

    #[test]
    fn chained_lengths_match_the_two_paths() {
        // shape path 199 → 99 → 49 → 24 → 12; expression path 29 → 14 → 7 → 3 → 1
        for (start, expected) in [(199usize, [99usize, 49, 24, 12]), (29, [14, 7, 3, 1])] {
            let mut x = rand_map(start as u64, 1, start);
            for want in expected {
                let (out, _) = maxpool1d_forward(&x).unwrap();
                assert_eq!(out.length, want);
                x = out;
            }
        }
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let x = FeatureMap::new(1, 2, vec![5.0, 5.0]).unwrap();
        let (out, rec) = maxpool1d_forward(&x).unwrap();
        assert_eq!(out.data, vec![5.0]);
        assert_eq!(rec.indices, vec![0]);
    }

    #[test]
    fn odd_tail_is_never_selected() {
        // position 6 holds the global max but lies outside every window
        let x = FeatureMap::new(1, 7, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 100.0]).unwrap();
        let (out, rec) = maxpool1d_forward(&x).unwrap();
        assert_eq!(out.length, 3);
        assert_eq!(out.data, vec![2.0, 4.0, 6.0]);
        assert!(rec.indices.iter().all(|&i| i != 6));
    }

    #[test]
    fn indices_strictly_increase_within_each_channel() {
        let x = rand_map(3, 4, 20);
        let (_, rec) = maxpool1d_forward(&x).unwrap();
        let l_out = rec.out_length();
        for c in 0..4 {
            let idx = &rec.indices[c * l_out..(c + 1) * l_out];
            for w in idx.windows(2) {
                assert!(w[1] > w[0]);
            }
        }
    }

    #[test]
    fn length_below_two_is_rejected() {
        let x = FeatureMap::new(1, 1, vec![1.0]).unwrap();
        assert!(maxpool1d_forward(&x).is_err());
    }

    #[test]
    fn backward_routes_ones_to_exactly_the_argmaxes() {
        let x = FeatureMap::new(1, 4, vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        let (_, rec) = maxpool1d_forward(&x).unwrap();
        let g = FeatureMap::new(1, 2, vec![1.0, 1.0]).unwrap();
        let grad = maxpool1d_backward(&rec, &g).unwrap();
        assert_eq!(grad.data.iter().filter(|&&v| v == 1.0).count(), 2);
        assert_eq!(grad.data, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn backward_gives_zero_to_the_dropped_tail() {
        let x = rand_map(5, 1, 5);
        let (out, rec) = maxpool1d_forward(&x).unwrap();
        let g = FeatureMap::new(1, out.length, vec![1.0; out.length]).unwrap();
        let grad = maxpool1d_backward(&rec, &g).unwrap();
        assert_eq!(grad.data[4], 0.0);
    }

    #[test]
    fn pool_backward_matches_finite_differences_away_from_ties() {
        let x = rand_map(6, 2, 10);
        let (out, rec) = maxpool1d_forward(&x).unwrap();
        let mut rng = stream(6, "test-pool-g", &[]);
        let g_data: Vec<f64> = (0..out.data.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = FeatureMap::new(out.channels, out.length, g_data).unwrap();
        let grads = maxpool1d_backward(&rec, &g).unwrap();

        let h = 1e-6;
        for slot in 0..x.data.len() {
            // skip slots whose window margin is too small for a clean FD step
            let c = slot / x.length;
            let t = slot % x.length;
            if t / 2 < out.length {
                let a = x.row(c)[(t / 2) * 2];
                let b = x.row(c)[(t / 2) * 2 + 1];
                if (a - b).abs() < 1e-3 {
                    continue;
                }
            }
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data[slot] += h;
            xm.data[slot] -= h;
            let f = |x: &FeatureMap| -> f64 {
                let (o, _) = maxpool1d_forward(x).unwrap();
                o.data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
            };
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            let analytic = grads.data[slot];
            let denom = analytic.abs().max(fd.abs()).max(1e-9);
            assert!((analytic - fd).abs() / denom < 1e-6, "slot {slot}");
        }
    }

    #[test]
    fn unpool_restores_pre_length_and_zero_fills() {
        let x = rand_map(7, 2, 199);
        let (pooled, rec) = maxpool1d_forward(&x).unwrap();
        let restored = maxunpool1d_forward(&pooled, &rec).unwrap();
        assert_eq!(restored.length, 199);
        // placed cells carry the pooled values; every other cell is exactly 0
        let l_out = rec.out_length();
        for c in 0..2 {
            let idx = &rec.indices[c * l_out..(c + 1) * l_out];
            for t in 0..199 {
                let v = restored.row(c)[t];
                match idx.iter().position(|&p| p == t) {
                    Some(w) => assert_eq!(v, pooled.row(c)[w]),
                    None => assert_eq!(v, 0.0),
                }
            }
        }
    }

    #[test]
    fn pool_unpool_pool_is_idempotent_on_relu_outputs() {
        // pooling always consumes post-ReLU maps; with negative entries the
        // unpooled zeros could outrank a negative max and break this
        let mut x = rand_map(8, 3, 17);
        for v in x.data.iter_mut() {
            *v = v.max(0.0);
        }
        let (p1, rec) = maxpool1d_forward(&x).unwrap();
        let up = maxunpool1d_forward(&p1, &rec).unwrap();
        let (p2, _) = maxpool1d_forward(&up).unwrap();
        assert_eq!(p1.data, p2.data);
    }

    #[test]
    fn unpool_rejects_out_of_range_record_index() {
        let x = FeatureMap::new(1, 2, vec![1.0, 2.0]).unwrap();
        let rec = PoolRecord { channels: 1, pre_length: 4, indices: vec![9, 1] };
        let pooled = FeatureMap::new(1, 2, vec![3.0, 4.0]).unwrap();
        let _ = x;
        assert!(maxunpool1d_forward(&pooled, &rec).is_err());
    }

    #[test]
    fn unpool_backward_gathers_at_indices() {
        let x = rand_map(9, 2, 12);
        let (pooled, rec) = maxpool1d_forward(&x).unwrap();
        let mut rng = stream(9, "test-pool-g", &[]);
        let g_data: Vec<f64> = (0..2 * 12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = FeatureMap::new(2, 12, g_data).unwrap();
        let grad = maxunpool1d_backward(&rec, &g).unwrap();

        // finite differences: unpooling is linear in its input, so exact
        let h = 1e-6;
        for slot in 0..pooled.data.len() {
            let mut pp = pooled.clone();
            let mut pm = pooled.clone();
            pp.data[slot] += h;
            pm.data[slot] -= h;
            let f = |p: &FeatureMap| -> f64 {
                let u = maxunpool1d_forward(p, &rec).unwrap();
                u.data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
            };
            let fd = (f(&pp) - f(&pm)) / (2.0 * h);
            let denom = grad.data[slot].abs().max(fd.abs()).max(1e-9);
            assert!((grad.data[slot] - fd).abs() / denom < 1e-6, "slot {slot}");
        }
    }

    #[test]
    fn unpool_backward_of_zero_is_zero() {
        let x = rand_map(10, 1, 8);
        let (_, rec) = maxpool1d_forward(&x).unwrap();
        let g = FeatureMap::zeros(1, 8);
        let grad = maxunpool1d_backward(&rec, &g).unwrap();
        assert!(grad.data.iter().all(|&v| v == 0.0));
    }
}
