//! Repeated random-subsampling cross-validation.
//!
//! Each repetition draws an independent 80/20 split (not a partition into
//! folds), fits a fresh scaler and model on the training rows, and scores
//! r² on both sides in the original target units.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featsel::SelectionMask;
use crate::models::{ForecasterConfig, TrainedForecaster};
use crate::numerics::metrics::r2_score;
use crate::samples::SampleSet;

/// Scores closer than this count as equal in every argmax tie-break.
pub const SCORE_TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvProtocol {
    pub n_reps: usize,
    pub train_fraction: f64,
    /// Repetition `r` uses seed `seed + r` for its split and its training.
    pub seed: u64,
    /// Split by country instead of by row.
    pub group_by_country: bool,
}

impl Default for CvProtocol {
    fn default() -> Self {
        Self {
            n_reps: 10,
            train_fraction: 0.8,
            seed: 0,
            group_by_country: false,
        }
    }
}

impl CvProtocol {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }
}

/// Mixes `tags` into `base` (splitmix64 finalizer per step) for
/// independent, reproducible sub-seeds.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base;
    for &t in tags {
        z = z.wrapping_add(t.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Seeded train/test split of `n_rows` rows, both halves sorted. With
/// `groups`, whole groups go to one side.
pub fn split_rows(n_rows: usize, groups: Option<&[usize]>, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = |n: usize| ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    match groups {
        None => {
            if n_rows < 2 {
                return Err(Error::TooFewSamples { needed: 2, got: n_rows });
            }
            let mut order: Vec<usize> = (0..n_rows).collect();
            order.shuffle(&mut rng);
            let n_train = take(n_rows);
            let mut train = order[..n_train].to_vec();
            let mut test = order[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Ok((train, test))
        }
        Some(groups) => {
            let mut ids: Vec<usize> = groups.to_vec();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() < 2 {
                return Err(Error::Config("a country-level split needs at least two countries".into()));
            }
            ids.shuffle(&mut rng);
            let n_train = take(ids.len());
            let train_ids = &ids[..n_train];
            let (train, test): (Vec<usize>, Vec<usize>) = (0..groups.len()).partition(|&r| train_ids.contains(&groups[r]));
            Ok((train, test))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_r2: Option<f64>,
    pub test_r2: Option<f64>,
    pub epochs: usize,
    pub error: Option<String>,
}

impl RepResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub reps: Vec<RepResult>,
    pub mean_train: Option<f64>,
    pub mean_test: Option<f64>,
    pub sd_train: Option<f64>,
    pub sd_test: Option<f64>,
    pub failures: usize,
    /// At least one repetition succeeded and no more than half failed.
    pub valid: bool,
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(sd))
}

impl CvReport {
    /// Summarizes repetitions; failed ones are excluded from the statistics.
    pub fn from_reps(k: usize, reps: Vec<RepResult>) -> Self {
        let ok: Vec<&RepResult> = reps.iter().filter(|r| !r.failed()).collect();
        let train: Vec<f64> = ok.iter().filter_map(|r| r.train_r2).collect();
        let test: Vec<f64> = ok.iter().filter_map(|r| r.test_r2).collect();
        let (mean_train, sd_train) = mean_sd(&train);
        let (mean_test, sd_test) = mean_sd(&test);
        let failures = reps.len() - ok.len();
        Self {
            k,
            valid: !ok.is_empty() && failures * 2 <= reps.len(),
            reps,
            mean_train,
            mean_test,
            sd_train,
            sd_test,
            failures,
        }
    }

    /// Mean test r² of a valid report.
    pub fn score(&self) -> Option<f64> {
        if self.valid {
            self.mean_test
        } else {
            None
        }
    }
}

/// Fits on `train`, scores r² on `train` and `test` in original units.
pub fn fit_and_score(
    samples: &SampleSet,
    mask: &SelectionMask,
    config: &ForecasterConfig,
    k: usize,
    train: &[usize],
    test: &[usize],
) -> Result<(f64, f64, usize)> {
    let model = TrainedForecaster::fit(config, samples, mask, k, train)?;
    let y = samples.target(k)?;
    let score = |rows: &[usize]| -> Result<f64> {
        let pred = model.predict_rows(samples, rows)?;
        let truth: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        let pred = pred.to_vec();
        if pred.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch: model.loss_curve.len() });
        }
        r2_score(&truth, &pred).map_err(|e| match e {
            Error::ZeroVariance(_) => Error::DegenerateTarget,
            other => other,
        })
    };
    Ok((score(train)?, score(test)?, model.loss_curve.len()))
}

/// Runs `protocol.n_reps` seeded 80/20 repetitions for horizon `k`. Each
/// repetition trains with its own split seed.
pub fn mc_cv(samples: &SampleSet, mask: &SelectionMask, config: &ForecasterConfig, k: usize, protocol: &CvProtocol) -> Result<CvReport> {
    samples.target(k)?;
    mask.check_width(samples.n_features())?;
    let groups = protocol.group_by_country.then(|| samples.groups());
    let mut reps = Vec::with_capacity(protocol.n_reps);
    for r in 0..protocol.n_reps {
        let seed = protocol.rep_seed(r);
        let (train, test) = split_rows(samples.len(), groups.as_deref(), protocol.train_fraction, seed)?;
        let mut cfg = *config;
        cfg.training.seed = seed;
        let mut rep = RepResult {
            seed,
            n_train: train.len(),
            n_test: test.len(),
            train_r2: None,
            test_r2: None,
            epochs: 0,
            error: None,
        };
        match fit_and_score(samples, mask, &cfg, k, &train, &test) {
            Ok((tr, te, epochs)) => {
                rep.train_r2 = Some(tr);
                rep.test_r2 = Some(te);
                rep.epochs = epochs;
            }
            Err(e) if e.is_training_failure() => rep.error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
        reps.push(rep);
    }
    Ok(CvReport::from_reps(k, reps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_split_sizes_and_disjointness() {
        let (train, test) = split_rows(10, None, 0.8, 7).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all: Vec<usize> = train.iter().chain(&test).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_rows(10, None, 0.8, 7).unwrap(), (train, test));
    }

    #[test]
    fn group_split_keeps_countries_whole() {
        let groups = [0, 0, 1, 1, 2, 2, 3, 3, 4, 4];
        let (train, test) = split_rows(10, Some(&groups), 0.8, 1).unwrap();
        assert_eq!(train.len(), 8);
        for t in &test {
            assert!(train.iter().all(|r| groups[*r] != groups[*t]));
        }
    }

    #[test]
    fn report_statistics_skip_failures() {
        let rep = |tr: Option<f64>, te: Option<f64>, err: bool| RepResult {
            seed: 0,
            n_train: 8,
            n_test: 2,
            train_r2: tr,
            test_r2: te,
            epochs: 0,
            error: err.then(|| "diverged".to_string()),
        };
        let report = CvReport::from_reps(1, vec![rep(Some(1.0), Some(0.5), false), rep(Some(0.5), Some(0.0), false), rep(None, None, true)]);
        assert_eq!(report.mean_train, Some(0.75));
        assert_eq!(report.mean_test, Some(0.25));
        assert_eq!(report.failures, 1);
        assert!(report.valid);
        assert!((report.sd_test.unwrap() - 0.5f64.sqrt() * 0.5).abs() < 1e-15);
    }

    #[test]
    fn more_than_half_failed_is_invalid() {
        let failed = RepResult {
            seed: 0,
            n_train: 1,
            n_test: 1,
            train_r2: None,
            test_r2: None,
            epochs: 0,
            error: Some("x".into()),
        };
        let mut reps = vec![failed; 6];
        reps.extend(std::iter::repeat_n(
            RepResult {
                train_r2: Some(1.0),
                test_r2: Some(1.0),
                error: None,
                ..reps[0].clone()
            },
            4,
        ));
        assert!(!CvReport::from_reps(1, reps).valid);
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_eq!(derive_seed(9, &[3, 4]), derive_seed(9, &[3, 4]));
    }
}
