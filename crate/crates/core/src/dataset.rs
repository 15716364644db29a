//! Clean/noisy parameter-pair datasets.
//!
//! Corruption picks a count `n` uniformly from `{1..P}`, then `n` distinct
//! entries uniformly at random, and adds independent `Normal(0, σ)` noise to
//! exactly those entries. Datasets can be scale-normalized (identity group),
//! split by clean-sample group, and persisted in the `.fds` binary format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::morphable::ParamGroup;
use crate::rng::stream;

const DATASET_MAGIC: &[u8; 4] = b"FDS1";

/// Multiplicative factor applied to identity-group datasets before training.
pub const SHAPE_NORMALIZATION: f64 = 1e-5;

/// One supervised training unit: a ground-truth vector and its corruption.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
}

/// Corruption procedure knobs. `sigma` is the noise standard deviation in
/// pre-normalization units; `copies` is the number of noisy versions made of
/// each clean sample.
#[derive(Debug, Clone)]
pub struct CorruptionConfig {
    pub sigma: f64,
    pub copies: usize,
    pub seed: u64,
}

impl CorruptionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if self.copies == 0 {
            return Err(Error::Invalid("copies must be at least 1".into()));
        }
        Ok(())
    }
}

/// An ordered collection of sample pairs for one parameter group.
/// `normalization` is the multiplicative factor currently applied to every
/// entry (1 for raw data, [`SHAPE_NORMALIZATION`] once normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDataset {
    pub group: ParamGroup,
    pub param_count: usize,
    pub normalization: f64,
    pub pairs: Vec<SamplePair>,
}

impl ParamDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.param_count == 0 {
            return Err(Error::Invalid("param_count must be at least 1".into()));
        }
        if !(self.normalization > 0.0) {
            return Err(Error::Invalid(format!(
                "normalization must be > 0, got {}",
                self.normalization
            )));
        }
        for (k, pair) in self.pairs.iter().enumerate() {
            for (name, v) in [("clean", &pair.clean), ("noisy", &pair.noisy)] {
                if v.len() != self.param_count {
                    return Err(Error::Mismatch {
                        what: if name == "clean" { "clean vector length" } else { "noisy vector length" },
                        expected: self.param_count,
                        actual: v.len(),
                    });
                }
                if !v.iter().all(|x| x.is_finite()) {
                    return Err(Error::Invalid(format!("pair {k} has non-finite {name} entries")));
                }
            }
        }
        Ok(())
    }
}

/// Corrupt one clean vector: choose `n ~ Uniform{1..P}`, then `n` distinct
/// entry positions, then add i.i.d. `Normal(0, sigma)` noise to those entries.
/// Unselected entries are returned bitwise unchanged.
pub fn corrupt(clean: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = clean.len();
    assert!(p >= 1, "corrupt requires at least one entry");
    let n = rng.random_range(1..=p);
    let mut indices: Vec<usize> = (0..p).collect();
    for t in 0..n {
        let j = rng.random_range(t..p);
        indices.swap(t, j);
    }
    let mut noisy = clean.to_vec();
    for &ix in &indices[..n] {
        let z: f64 = rng.sample(StandardNormal);
        noisy[ix] += sigma * z;
    }
    noisy
}

/// Build a dataset of `|clean_set| · copies` pairs. Pair `i·copies + j` uses
/// clean sample `i` with a corruption stream derived from `(seed, i, j)`, so
/// the result is bitwise identical regardless of execution parallelism.
pub fn build_dataset(
    group: ParamGroup,
    clean_set: &[Vec<f64>],
    config: &CorruptionConfig,
) -> Result<ParamDataset> {
    config.validate()?;
    let first = clean_set
        .first()
        .ok_or_else(|| Error::Invalid("clean set must be nonempty".into()))?;
    let p = first.len();
    if p == 0 {
        return Err(Error::Invalid("clean vectors must have at least one entry".into()));
    }
    for v in clean_set {
        if v.len() != p {
            return Err(Error::Mismatch {
                what: "clean vector length",
                expected: p,
                actual: v.len(),
            });
        }
    }

    let copies = config.copies;
    let pairs: Vec<SamplePair> = (0..clean_set.len() * copies)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / copies, k % copies);
            let clean = &clean_set[i];
            let mut rng = stream(config.seed, "corrupt", &[i as u64, j as u64]);
            let noisy = corrupt(clean, config.sigma, &mut rng);
            SamplePair { clean: clean.clone(), noisy }
        })
        .collect();

    Ok(ParamDataset { group, param_count: p, normalization: 1.0, pairs })
}

fn rescale(dataset: ParamDataset, factor: f64, new_normalization: f64) -> ParamDataset {
    let pairs = dataset
        .pairs
        .into_iter()
        .map(|mut pair| {
            for v in pair.clean.iter_mut().chain(pair.noisy.iter_mut()) {
                *v *= factor;
            }
            pair
        })
        .collect();
    ParamDataset { normalization: new_normalization, pairs, ..dataset }
}

/// Multiply every entry of an identity-group dataset by 1e-5 and record the
/// factor. Rejects non-identity groups and already-normalized datasets.
pub fn normalize_shape(dataset: ParamDataset) -> Result<ParamDataset> {
    if dataset.group != ParamGroup::Identity {
        return Err(Error::Invalid(format!(
            "shape normalization applies to the identity group, got {}",
            dataset.group.name()
        )));
    }
    if dataset.normalization != 1.0 {
        return Err(Error::Invalid(format!(
            "dataset is already normalized (factor {})",
            dataset.normalization
        )));
    }
    Ok(rescale(dataset, SHAPE_NORMALIZATION, SHAPE_NORMALIZATION))
}

/// Inverse of [`normalize_shape`]: multiply entries by 1e5 and reset the
/// normalization factor to 1.
pub fn denormalize_shape(dataset: ParamDataset) -> Result<ParamDataset> {
    if dataset.group != ParamGroup::Identity {
        return Err(Error::Invalid(format!(
            "shape denormalization applies to the identity group, got {}",
            dataset.group.name()
        )));
    }
    if dataset.normalization != SHAPE_NORMALIZATION {
        return Err(Error::Invalid(format!(
            "dataset is not normalized (factor {})",
            dataset.normalization
        )));
    }
    Ok(rescale(dataset, 1.0 / SHAPE_NORMALIZATION, 1.0))
}

/// Ranges of consecutive pairs sharing a bitwise-identical clean vector —
/// the copies of one clean sample as laid out by [`build_dataset`].
fn clean_groups(dataset: &ParamDataset) -> Vec<std::ops::Range<usize>> {
    let same = |a: &[f64], b: &[f64]| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
    };
    let mut groups = Vec::new();
    let mut start = 0;
    for k in 1..=dataset.pairs.len() {
        if k == dataset.pairs.len() || !same(&dataset.pairs[k].clean, &dataset.pairs[start].clean) {
            groups.push(start..k);
            start = k;
        }
    }
    groups
}

/// Partition a dataset into train and test sides by clean-sample group, so
/// that all noisy copies of one clean sample land on the same side. The test
/// side receives `round(test_fraction · group_count)` groups, chosen by a
/// seeded shuffle; within each side the original pair order is preserved.
pub fn split(
    dataset: &ParamDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(ParamDataset, ParamDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "test fraction must lie strictly between 0 and 1, got {test_fraction}"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Invalid("cannot split an empty dataset".into()));
    }

    let groups = clean_groups(dataset);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut stream(seed, "split", &[]));
    let test_count = (test_fraction * groups.len() as f64).round() as usize;
    let mut is_test = vec![false; groups.len()];
    for &g in &order[..test_count.min(groups.len())] {
        is_test[g] = true;
    }

    let side = |want_test: bool| -> ParamDataset {
        let pairs = groups
            .iter()
            .enumerate()
            .filter(|(g, _)| is_test[*g] == want_test)
            .flat_map(|(_, range)| dataset.pairs[range.clone()].iter().cloned())
            .collect();
        ParamDataset {
            group: dataset.group,
            param_count: dataset.param_count,
            normalization: dataset.normalization,
            pairs,
        }
    };
    Ok((side(false), side(true)))
}

/// Write a dataset in the `.fds` binary format (little-endian).
pub fn save_dataset(dataset: &ParamDataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_u8(dataset.group.tag() as u8)?;
    w.write_u32::<LittleEndian>(dataset.param_count as u32)?;
    w.write_u64::<LittleEndian>(dataset.pairs.len() as u64)?;
    w.write_f64::<LittleEndian>(dataset.normalization)?;
    for pair in &dataset.pairs {
        for &v in pair.clean.iter().chain(&pair.noisy) {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load and validate a `.fds` dataset file.
pub fn load_dataset(path: &Path) -> Result<ParamDataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Truncated { section: "magic" })?;
    if &magic != DATASET_MAGIC {
        return Err(Error::BadMagic { expected: "FDS1", found: magic });
    }
    let group_byte = r.read_u8().map_err(|_| Error::Truncated { section: "header" })?;
    let group = match group_byte {
        0 => ParamGroup::Identity,
        1 => ParamGroup::Expression,
        other => return Err(Error::Header(format!("invalid group byte {other}"))),
    };
    let p = r.read_u32::<LittleEndian>().map_err(|_| Error::Truncated { section: "header" })? as usize;
    let count = r.read_u64::<LittleEndian>().map_err(|_| Error::Truncated { section: "header" })?;
    let normalization = r
        .read_f64::<LittleEndian>()
        .map_err(|_| Error::Truncated { section: "header" })?;
    if p == 0 {
        return Err(Error::Header("param count must be at least 1".into()));
    }
    let doubles = (count as u128) * 2 * p as u128;
    if doubles > (1u128 << 34) {
        return Err(Error::Header("declared pair count overflows the supported size".into()));
    }

    let mut pairs = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut clean = vec![0.0; p];
        let mut noisy = vec![0.0; p];
        r.read_f64_into::<LittleEndian>(&mut clean)
            .map_err(|_| Error::Truncated { section: "pairs" })?;
        r.read_f64_into::<LittleEndian>(&mut noisy)
            .map_err(|_| Error::Truncated { section: "pairs" })?;
        pairs.push(SamplePair { clean, noisy });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Header("trailing bytes after pair section".into()));
    }

    let dataset = ParamDataset { group, param_count: p, normalization, pairs };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn changed(clean: &[f64], noisy: &[f64]) -> usize {
        clean
            .iter()
            .zip(noisy)
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count()
    }

    fn random_clean_set(count: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream(seed, "test-clean", &[]);
        (0..count)
            .map(|_| (0..p).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect()
    }

    #[test]
    fn corrupt_changes_between_one_and_p_entries() {
        let clean = vec![0.5; 29];
        for s in 0..200 {
            let mut rng = stream(s, "test-corrupt", &[]);
            let noisy = corrupt(&clean, 2.0, &mut rng);
            let c = changed(&clean, &noisy);
            assert!((1..=29).contains(&c), "changed {c}");
        }
    }

    #[test]
    fn full_support_corruption_changes_every_entry() {
        let clean = vec![1.0; 29];
        // find a seed whose first draw of n is the full 29
        let seed = (0..)
            .find(|&s| {
                stream(s, "test-corrupt", &[]).random_range(1..=29usize) == 29
            })
            .unwrap();
        let mut rng = stream(seed, "test-corrupt", &[]);
        let noisy = corrupt(&clean, 2.0, &mut rng);
        assert_eq!(changed(&clean, &noisy), 29);
    }

    #[test]
    fn vanishing_sigma_leaves_values_in_place() {
        let clean: Vec<f64> = (0..29).map(|i| i as f64 / 7.0).collect();
        let mut rng = stream(9, "test-corrupt", &[]);
        let noisy = corrupt(&clean, 1e-300, &mut rng);
        for (a, b) in clean.iter().zip(&noisy) {
            assert!((a - b).abs() <= 1e-290);
        }
    }

    #[test]
    fn unchanged_entries_are_bitwise_identical() {
        let clean: Vec<f64> = (0..17).map(|i| (i as f64).sin() * 1e3).collect();
        for s in 0..50 {
            let mut rng = stream(s, "test-corrupt-bits", &[]);
            let noisy = corrupt(&clean, 0.5, &mut rng);
            for (a, b) in clean.iter().zip(&noisy) {
                if a.to_bits() != b.to_bits() {
                    continue;
                }
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn mean_changed_count_matches_expectation() {
        let clean = vec![0.0; 29];
        let trials = 100_000;
        let mut total = 0usize;
        for s in 0..trials {
            let mut rng = stream(s as u64, "test-count", &[]);
            let noisy = corrupt(&clean, 2.0, &mut rng);
            total += changed(&clean, &noisy);
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 15.0).abs() <= 0.1, "mean changed count {mean}");
    }

    #[test]
    fn noise_std_over_changed_entries_matches_sigma() {
        let clean = vec![0.0; 29];
        let sigma = 2.0;
        let mut sum_sq = 0.0;
        let mut n = 0usize;
        let mut s = 0u64;
        while n < 1_000_000 {
            let mut rng = stream(s, "test-noise-std", &[]);
            let noisy = corrupt(&clean, sigma, &mut rng);
            for v in noisy {
                if v != 0.0 {
                    sum_sq += v * v;
                    n += 1;
                }
            }
            s += 1;
        }
        let std = (sum_sq / n as f64).sqrt();
        assert!((std - sigma).abs() / sigma < 0.01, "empirical std {std}");
    }

    #[test]
    fn build_dataset_count_and_layout() {
        let clean_set = random_clean_set(100, 29, 1);
        let config = CorruptionConfig { sigma: 2.0, copies: 50, seed: 7 };
        let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        assert_eq!(ds.len(), 5_000);
        assert_eq!(ds.param_count, 29);
        assert_eq!(ds.normalization, 1.0);
        for (i, clean) in clean_set.iter().enumerate() {
            for j in 0..50 {
                assert_eq!(&ds.pairs[i * 50 + j].clean, clean);
            }
        }
    }

    #[test]
    fn build_dataset_is_deterministic_across_thread_counts() {
        let clean_set = random_clean_set(20, 11, 2);
        let config = CorruptionConfig { sigma: 1.0, copies: 4, seed: 3 };
        let build = || build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(build);
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(build);
        assert_eq!(serial, parallel);
    }

    #[test]
    fn build_dataset_rejects_ragged_and_empty_input() {
        let config = CorruptionConfig { sigma: 1.0, copies: 2, seed: 0 };
        let ragged = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(build_dataset(ParamGroup::Expression, &ragged, &config).is_err());
        assert!(build_dataset(ParamGroup::Expression, &[], &config).is_err());
    }

    #[test]
    fn invalid_corruption_config_is_rejected() {
        let clean_set = random_clean_set(2, 3, 4);
        for config in [
            CorruptionConfig { sigma: 0.0, copies: 2, seed: 0 },
            CorruptionConfig { sigma: -1.0, copies: 2, seed: 0 },
            CorruptionConfig { sigma: 1.0, copies: 0, seed: 0 },
        ] {
            assert!(build_dataset(ParamGroup::Expression, &clean_set, &config).is_err());
        }
    }

    #[test]
    fn normalization_scales_and_round_trips() {
        let clean_set = vec![vec![500_000.0, 0.0, -250_000.0]];
        let config = CorruptionConfig { sigma: 1.0, copies: 3, seed: 5 };
        let raw = build_dataset(ParamGroup::Identity, &clean_set, &config).unwrap();
        let normalized = normalize_shape(raw.clone()).unwrap();
        assert_eq!(normalized.normalization, 1e-5);
        assert_eq!(normalized.pairs[0].clean[0], 5.0);
        assert_eq!(normalized.pairs[0].clean[1], 0.0);

        let back = denormalize_shape(normalized).unwrap();
        assert_eq!(back.normalization, 1.0);
        for (a, b) in raw.pairs.iter().zip(&back.pairs) {
            for (x, y) in a.clean.iter().zip(&b.clean).chain(a.noisy.iter().zip(&b.noisy)) {
                let denom = x.abs().max(1.0);
                assert!(((x - y) / denom).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn double_normalization_and_wrong_group_are_rejected() {
        let clean_set = random_clean_set(2, 3, 6);
        let config = CorruptionConfig { sigma: 1.0, copies: 2, seed: 0 };
        let shape = build_dataset(ParamGroup::Identity, &clean_set, &config).unwrap();
        let normalized = normalize_shape(shape).unwrap();
        assert!(normalize_shape(normalized.clone()).is_err());

        let exp = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        assert!(normalize_shape(exp.clone()).is_err());
        assert!(denormalize_shape(exp).is_err());
    }

    #[test]
    fn split_produces_group_aligned_sizes() {
        let clean_set = random_clean_set(100, 5, 8);
        let config = CorruptionConfig { sigma: 1.0, copies: 50, seed: 9 };
        let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        let (train, test) = split(&ds, 0.1, 11).unwrap();
        assert_eq!(test.len(), 500);
        assert_eq!(train.len(), 4_500);
    }

    #[test]
    fn split_keeps_copies_of_one_clean_sample_together() {
        let clean_set = random_clean_set(30, 4, 10);
        let config = CorruptionConfig { sigma: 1.0, copies: 7, seed: 12 };
        let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        let (train, test) = split(&ds, 0.3, 13).unwrap();
        let key = |v: &[f64]| -> Vec<u64> { v.iter().map(|x| x.to_bits()).collect() };
        let train_keys: std::collections::HashSet<_> =
            train.pairs.iter().map(|p| key(&p.clean)).collect();
        let test_keys: std::collections::HashSet<_> =
            test.pairs.iter().map(|p| key(&p.clean)).collect();
        assert!(train_keys.is_disjoint(&test_keys));
        assert_eq!(train_keys.len() + test_keys.len(), 30);
        for keys in [&train_keys, &test_keys] {
            for k in keys.iter() {
                let count = ds
                    .pairs
                    .iter()
                    .filter(|p| key(&p.clean) == *k)
                    .count();
                assert_eq!(count, 7);
            }
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let clean_set = random_clean_set(12, 3, 14);
        let config = CorruptionConfig { sigma: 1.0, copies: 3, seed: 15 };
        let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        let a = split(&ds, 0.25, 99).unwrap();
        let b = split(&ds, 0.25, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_rejects_out_of_range_fractions() {
        let clean_set = random_clean_set(4, 3, 16);
        let config = CorruptionConfig { sigma: 1.0, copies: 2, seed: 17 };
        let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        for f in [0.0, 1.0, 1.5, -0.1] {
            assert!(split(&ds, f, 0).is_err(), "fraction {f} accepted");
        }
    }

    #[test]
    fn save_load_round_trip_is_bitwise_exact() {
        let clean_set = random_clean_set(50, 7, 18);
        let config = CorruptionConfig { sigma: 2.0, copies: 20, seed: 19 };
        let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        assert_eq!(ds.len(), 1_000);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.fds");
        save_dataset(&ds, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(ds, loaded);
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = ParamDataset {
            group: ParamGroup::Identity,
            param_count: 199,
            normalization: 1.0,
            pairs: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.fds");
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.fds");
        std::fs::write(&path, b"JUNKxxxxxxxxxxxxxxxxxxxx").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn wrong_group_byte_is_a_format_error() {
        let clean_set = random_clean_set(2, 3, 20);
        let config = CorruptionConfig { sigma: 1.0, copies: 2, seed: 21 };
        let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.fds");
        save_dataset(&ds, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 7;
        std::fs::write(&path, &bytes).unwrap();
        match load_dataset(&path) {
            Err(Error::Header(msg)) => assert!(msg.contains('7'), "{msg}"),
            other => panic!("expected Header error, got {other:?}"),
        }
    }

    #[test]
    fn declared_count_beyond_payload_is_a_truncation_error() {
        let clean_set = random_clean_set(2, 3, 22);
        let config = CorruptionConfig { sigma: 1.0, copies: 2, seed: 23 };
        let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.fds");
        save_dataset(&ds, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[5 + 4] += 1; // bump the u64 pair count past the payload
        std::fs::write(&path, &bytes).unwrap();
        match load_dataset(&path) {
            Err(Error::Truncated { section }) => assert_eq!(section, "pairs"),
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let clean_set = random_clean_set(2, 3, 24);
        let config = CorruptionConfig { sigma: 1.0, copies: 2, seed: 25 };
        let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.fds");
        save_dataset(&ds, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(42);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Header(_))));
    }

    proptest! {
        #[test]
        fn corruption_count_is_within_bounds(
            p in 1usize..24,
            seed in 0u64..500,
            sigma in 0.01f64..10.0,
        ) {
            let clean: Vec<f64> = (0..p).map(|i| i as f64).collect();
            let mut rng = stream(seed, "prop-corrupt", &[]);
            let noisy = corrupt(&clean, sigma, &mut rng);
            let c = changed(&clean, &noisy);
            prop_assert!(c >= 1 && c <= p);
        }

        #[test]
        fn split_partitions_pairs_exactly(
            groups in 2usize..10,
            copies in 1usize..5,
            fraction in 0.05f64..0.95,
            seed in 0u64..100,
        ) {
            let clean_set = random_clean_set(groups, 3, seed);
            let config = CorruptionConfig { sigma: 1.0, copies, seed };
            let ds = build_dataset(ParamGroup::Expression, &clean_set, &config).unwrap();
            let (train, test) = split(&ds, fraction, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), ds.len());

            // each original pair appears exactly once across the two sides
            let mut recombined: Vec<&SamplePair> =
                train.pairs.iter().chain(test.pairs.iter()).collect();
            let key = |p: &SamplePair| -> Vec<u64> {
                p.clean.iter().chain(&p.noisy).map(|x| x.to_bits()).collect()
            };
            recombined.sort_by_key(|p| key(p));
            let mut original: Vec<&SamplePair> = ds.pairs.iter().collect();
            original.sort_by_key(|p| key(p));
            for (a, b) in recombined.iter().zip(&original) {
                prop_assert_eq!(*a, *b);
            }
        }
    }
}
