//! Post-training analyses: noise-variance sweeps, synthetic dataset
//! generation by denoising uniform draws, the covariance-trace diversity
//! criterion, and 2D PCA scatter projections.
//!
//! Covariance traces and PCA operate on whatever units the caller supplies;
//! for cross-dataset comparisons [`diversity_report`] converts each dataset's
//! clean vectors back to raw units using its stored normalization factor.

use rand::Rng;
use rayon::prelude::*;

use crate::autoencoder::{denoise_batch, AutoencoderWeights};
use crate::dataset::{build_dataset, CorruptionConfig, ParamDataset, SamplePair, SHAPE_NORMALIZATION};
use crate::error::{Error, Result};
use crate::morphable::{sample_uniform, MorphableModel, ParamGroup};
use crate::rng::stream;
use crate::trainer::evaluate_mse;

/// Uniform-interval multipliers used when generating synthetic datasets.
pub const DEFAULT_K_SHAPE: f64 = 10.0;
pub const DEFAULT_K_EXP: f64 = 15.0;
/// Sample budget for the diversity criterion.
pub const DEFAULT_DIVERSITY_SAMPLES: usize = 2000;

/// One sweep measurement at a single noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub sigma: f64,
    pub input_mse: f64,
    pub output_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

/// Nine log-spaced noise levels from `sigma_train/4` to `4·sigma_train`
/// (half-octave steps); indices 0, 2, 4, 6, 8 land exactly on σ/4, σ/2,
/// σ, 2σ, 4σ.
pub fn default_sigma_grid(sigma_train: f64) -> Vec<f64> {
    let r = 2.0_f64.sqrt();
    [0.25, 0.25 * r, 0.5, 0.5 * r, 1.0, r, 2.0, 2.0 * r, 4.0]
        .iter()
        .map(|m| m * sigma_train)
        .collect()
}

/// Corrupt the clean set at each noise level (`copies` noisy versions per
/// clean vector) and measure input/output MSE through the network. Clean
/// vectors and sigmas must be in the units the weights consume (normalized
/// for the shape group).
pub fn noise_sweep(
    weights: &AutoencoderWeights,
    clean_set: &[Vec<f64>],
    sigmas: &[f64],
    copies: usize,
    seed: u64,
) -> Result<SweepResult> {
    if clean_set.is_empty() {
        return Err(Error::Invalid("sweep requires a nonempty clean set".into()));
    }
    if sigmas.is_empty() {
        return Err(Error::Invalid("sweep requires at least one sigma".into()));
    }
    if !sigmas.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Invalid("sweep sigmas must be strictly increasing".into()));
    }

    let mut points = Vec::with_capacity(sigmas.len());
    for (index, &sigma) in sigmas.iter().enumerate() {
        let per_sigma_seed: u64 = stream(seed, "sweep-seed", &[index as u64]).random();
        let config = CorruptionConfig { sigma, copies, seed: per_sigma_seed };
        // transient pair set; the group label is irrelevant to evaluate_mse
        let pairs = build_dataset(ParamGroup::Expression, clean_set, &config)?;
        let (output_mse, input_mse) = evaluate_mse(weights, &pairs)?;
        points.push(SweepPoint { sigma, input_mse, output_mse });
    }
    Ok(SweepResult { points })
}

/// CSV rendering of a sweep: header plus one `sigma,input_mse,output_mse`
/// row per noise level.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("sigma,input_mse,output_mse\n");
    for p in &result.points {
        out.push_str(&format!("{},{},{}\n", p.sigma, p.input_mse, p.output_mse));
    }
    out
}

fn per_sample_seed(rng: &mut rand_chacha::ChaCha8Rng) -> u64 {
    rng.random()
}

/// Draw `count` uniform parameter vectors per group, push them through the
/// matching trained network (shape vectors are normalized for the network
/// and denormalized after), and package the results as datasets in raw
/// units: `clean` holds the denoised vector, `noisy` the raw uniform draw.
pub fn generate_synthetic(
    model: &MorphableModel,
    shape_weights: &AutoencoderWeights,
    exp_weights: &AutoencoderWeights,
    count: usize,
    k_shape: f64,
    k_exp: f64,
    seed: u64,
) -> Result<(ParamDataset, ParamDataset)> {
    for (weights, expected, what) in [
        (shape_weights, model.p_id(), "shape weights input length"),
        (exp_weights, model.p_exp(), "expression weights input length"),
    ] {
        if weights.spec.input_length != expected {
            return Err(Error::Mismatch { what, expected, actual: weights.spec.input_length });
        }
    }

    let make = |group: ParamGroup, weights: &AutoencoderWeights, k: f64| -> Result<ParamDataset> {
        let mut seeder = stream(seed, "generate", &[group.tag()]);
        let raw: Vec<Vec<f64>> = (0..count)
            .map(|_| sample_uniform(model, group, k, per_sample_seed(&mut seeder)).map(|v| v.values))
            .collect::<Result<Vec<_>>>()?;

        let network_inputs: Vec<Vec<f64>> = match group {
            ParamGroup::Identity => raw
                .iter()
                .map(|v| v.iter().map(|x| x * SHAPE_NORMALIZATION).collect())
                .collect(),
            ParamGroup::Expression => raw.clone(),
        };
        let denoised = denoise_batch(weights, &network_inputs)?;
        let restored: Vec<Vec<f64>> = match group {
            ParamGroup::Identity => denoised
                .into_iter()
                .map(|v| v.into_iter().map(|x| x / SHAPE_NORMALIZATION).collect())
                .collect(),
            ParamGroup::Expression => denoised,
        };

        let pairs = restored
            .into_iter()
            .zip(raw)
            .map(|(clean, noisy)| SamplePair { clean, noisy })
            .collect();
        Ok(ParamDataset {
            group,
            param_count: model.param_count(group),
            normalization: 1.0,
            pairs,
        })
    };

    Ok((
        make(ParamGroup::Identity, shape_weights, k_shape)?,
        make(ParamGroup::Expression, exp_weights, k_exp)?,
    ))
}

fn check_samples(samples: &[Vec<f64>], minimum: usize, what: &str) -> Result<usize> {
    if samples.len() < minimum {
        return Err(Error::Invalid(format!(
            "{what} requires at least {minimum} samples, got {}",
            samples.len()
        )));
    }
    let d = samples[0].len();
    if d == 0 {
        return Err(Error::Invalid("samples must have at least one dimension".into()));
    }
    for s in samples {
        if s.len() != d {
            return Err(Error::Mismatch { what: "sample length", expected: d, actual: s.len() });
        }
    }
    Ok(d)
}

fn column_means(samples: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= samples.len() as f64;
    }
    mean
}

/// Trace of the unbiased sample covariance matrix (divisor `n−1`): the sum
/// of per-dimension variances.
pub fn covariance_trace(samples: &[Vec<f64>]) -> Result<f64> {
    let d = check_samples(samples, 2, "covariance_trace")?;
    let mean = column_means(samples, d);
    let mut total = 0.0;
    for s in samples {
        for (v, m) in s.iter().zip(&mean) {
            let c = v - m;
            total += c * c;
        }
    }
    Ok(total / (samples.len() - 1) as f64)
}

fn covariance_matrix(samples: &[Vec<f64>], mean: &[f64]) -> Vec<f64> {
    let d = mean.len();
    let mut c = vec![0.0; d * d];
    for s in samples {
        let centered: Vec<f64> = s.iter().zip(mean).map(|(v, m)| v - m).collect();
        for i in 0..d {
            let ci = centered[i];
            let row = &mut c[i * d..(i + 1) * d];
            for (slot, &cj) in row.iter_mut().zip(&centered) {
                *slot += ci * cj;
            }
        }
    }
    let scale = 1.0 / (samples.len() - 1) as f64;
    for v in c.iter_mut() {
        *v *= scale;
    }
    c
}

fn matvec(c: &[f64], d: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let row = &c[i * d..(i + 1) * d];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn apply_sign_convention(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| **x != 0.0) {
        if first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

const POWER_TOLERANCE: f64 = 1e-10;
const POWER_MAX_ITERATIONS: usize = 10_000;

/// Dominant eigenpair of a symmetric PSD matrix by power iteration. Returns
/// a deterministic unit vector with zero eigenvalue when the matrix is
/// (numerically) zero in the directions orthogonal to `orthogonal_to`.
fn power_iterate(c: &[f64], d: usize, orthogonal_to: Option<&[f64]>) -> Result<(Vec<f64>, f64)> {
    let mut rng = stream(0xFACE, "pca-power", &[orthogonal_to.is_some() as u64]);
    let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    if let Some(p) = orthogonal_to {
        let proj: f64 = v.iter().zip(p).map(|(a, b)| a * b).sum();
        for (x, y) in v.iter_mut().zip(p) {
            *x -= proj * y;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }

    let mut w = vec![0.0; d];
    for _ in 0..POWER_MAX_ITERATIONS {
        matvec(c, d, &v, &mut w);
        if let Some(p) = orthogonal_to {
            let proj: f64 = w.iter().zip(p).map(|(a, b)| a * b).sum();
            for (x, y) in w.iter_mut().zip(p) {
                *x -= proj * y;
            }
        }
        let lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lambda < 1e-300 {
            // zero matrix in the remaining subspace: any unit vector will do;
            // pick the first coordinate direction orthogonal to the constraint
            let mut fallback = vec![0.0; d];
            for i in 0..d {
                fallback.iter_mut().for_each(|x| *x = 0.0);
                fallback[i] = 1.0;
                if let Some(p) = orthogonal_to {
                    let proj = fallback.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
                    for (x, y) in fallback.iter_mut().zip(p) {
                        *x -= proj * y;
                    }
                }
                let n = fallback.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 0.5 {
                    for x in fallback.iter_mut() {
                        *x /= n;
                    }
                    break;
                }
            }
            apply_sign_convention(&mut fallback);
            return Ok((fallback, 0.0));
        }
        let mut delta: f64 = 0.0;
        for (x, y) in w.iter().zip(&v) {
            delta = delta.max((x / lambda - y).abs());
        }
        for (dst, &x) in v.iter_mut().zip(w.iter()) {
            *dst = x / lambda;
        }
        if delta < POWER_TOLERANCE {
            apply_sign_convention(&mut v);
            let mut cv = vec![0.0; d];
            matvec(c, d, &v, &mut cv);
            let lambda = v.iter().zip(&cv).map(|(a, b)| a * b).sum();
            return Ok((v, lambda));
        }
    }
    Err(Error::Invalid(format!(
        "PCA power iteration did not converge within {POWER_MAX_ITERATIONS} iterations"
    )))
}

/// Top-2 principal components of the samples: eigenvectors (sign convention:
/// first nonzero coordinate positive), eigenvalues in descending order, and
/// the column means used for centering.
fn pca_top2(samples: &[Vec<f64>]) -> Result<(Vec<f64>, [Vec<f64>; 2], [f64; 2])> {
    let d = check_samples(samples, 3, "pca_project_2d")?;
    if d < 2 {
        return Err(Error::Invalid("PCA projection requires at least 2 dimensions".into()));
    }
    let mean = column_means(samples, d);
    let mut c = covariance_matrix(samples, &mean);
    let trace: f64 = (0..d).map(|i| c[i * d + i]).sum();
    if trace <= 0.0 {
        return Err(Error::Invalid("PCA requires non-identical samples (rank ≥ 1)".into()));
    }

    let (v1, l1) = power_iterate(&c, d, None)?;
    for i in 0..d {
        for j in 0..d {
            c[i * d + j] -= l1 * v1[i] * v1[j];
        }
    }
    let (v2, l2) = power_iterate(&c, d, Some(&v1))?;
    Ok((mean, [v1, v2], [l1, l2]))
}

/// Project samples onto their top-2 principal components, ordered by
/// descending eigenvalue.
pub fn pca_project_2d(samples: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let (mean, [v1, v2], _) = pca_top2(samples)?;
    Ok(project_onto(samples, &mean, &v1, &v2))
}

fn project_onto(samples: &[Vec<f64>], mean: &[f64], v1: &[f64], v2: &[f64]) -> Vec<[f64; 2]> {
    samples
        .par_iter()
        .map(|s| {
            let mut p = [0.0; 2];
            for ((x, m), (a, b)) in s.iter().zip(mean).zip(v1.iter().zip(v2)) {
                let c = x - m;
                p[0] += c * a;
                p[1] += c * b;
            }
            p
        })
        .collect()
}

/// Per-dataset diversity numbers plus a shared 2D projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityEntry {
    pub name: String,
    pub trace: f64,
    pub samples_used: usize,
    /// True when the dataset had fewer than the requested samples and all
    /// of them were used.
    pub used_all_available: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityReport {
    pub entries: Vec<DiversityEntry>,
    /// Pairwise trace ratios, labeled "a/b", in dataset order.
    pub ratios: Vec<(String, f64)>,
    pub projections: Vec<(String, Vec<[f64; 2]>)>,
}

/// Compute the covariance-trace criterion for each dataset over up to
/// `sample_count` clean vectors (converted to raw units via the dataset's
/// normalization factor), plus 2D PCA projections fitted on the union of
/// all selected samples so the axes are comparable across datasets.
pub fn diversity_report(
    datasets: &[(&str, &ParamDataset)],
    sample_count: usize,
) -> Result<DiversityReport> {
    if datasets.is_empty() {
        return Err(Error::Invalid("diversity report requires at least one dataset".into()));
    }
    if sample_count < 2 {
        return Err(Error::Invalid("diversity sample count must be at least 2".into()));
    }

    let mut entries = Vec::with_capacity(datasets.len());
    let mut selected: Vec<(String, Vec<Vec<f64>>)> = Vec::with_capacity(datasets.len());
    for (name, dataset) in datasets {
        let used = dataset.len().min(sample_count);
        let samples: Vec<Vec<f64>> = dataset.pairs[..used]
            .iter()
            .map(|p| p.clean.iter().map(|v| v / dataset.normalization).collect())
            .collect();
        let trace = covariance_trace(&samples)?;
        entries.push(DiversityEntry {
            name: name.to_string(),
            trace,
            samples_used: used,
            used_all_available: used < sample_count,
        });
        selected.push((name.to_string(), samples));
    }

    let mut ratios = Vec::new();
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            ratios.push((
                format!("{}/{}", entries[i].name, entries[j].name),
                entries[i].trace / entries[j].trace,
            ));
        }
    }

    let union: Vec<Vec<f64>> = selected.iter().flat_map(|(_, s)| s.iter().cloned()).collect();
    let (mean, [v1, v2], _) = pca_top2(&union)?;
    let projections = selected
        .into_iter()
        .map(|(name, samples)| (name, project_onto(&samples, &mean, &v1, &v2)))
        .collect();

    Ok(DiversityReport { entries, ratios, projections })
}

/// CSV rendering of the scatter projections: `dataset,pc1,pc2` per sample.
pub fn scatter_csv(report: &DiversityReport) -> String {
    let mut out = String::from("dataset,pc1,pc2\n");
    for (name, points) in &report.projections {
        for p in points {
            out.push_str(&format!("{},{},{}\n", name, p[0], p[1]));
        }
    }
    out
}
