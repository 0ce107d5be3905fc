use ndarray::{concatenate, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use epiforecast::featsel::{
    feature_correlations, lasso_select, no_fs, pcorr_eliminate, pcorr_select, pcorr_thresholds, rfs_rank, rfs_select,
    LassoOptions, Scorer, SelectionMeta,
};
use epiforecast::harness::{mc_cv, CvProtocol};
use epiforecast::models::{Architecture, ForecasterConfig, TrainingConfig};
use epiforecast::samples::{build_samples, FeatureSpec, SampleSet};
use epiforecast::synthetic::{linear_panel, sparse_linear_samples};

fn lr_scorer(seed: u64) -> Scorer {
    Scorer {
        config: ForecasterConfig::new(Architecture::Linear, TrainingConfig::default()),
        protocol: CvProtocol::default().with_seed(seed),
    }
}

/// Appends a copy of column `source` as the last column.
fn with_duplicate(samples: &SampleSet, source: usize) -> SampleSet {
    let dup = samples.x.column(source).insert_axis(Axis(1)).to_owned();
    let x = concatenate(Axis(1), &[samples.x.view(), dup.view()]).unwrap();
    let groups = samples.groups();
    SampleSet::from_parts(x, samples.targets.clone(), &groups, FeatureSpec::anonymous(samples.n_features() + 1)).unwrap()
}

#[test]
fn pcorr_drops_an_injected_duplicate_at_every_threshold() {
    let (base, _) = sparse_linear_samples(80, 12, 3, 1, 0.1, 4);
    let samples = with_duplicate(&base, 5);
    let corr = feature_correlations(&samples).unwrap();
    let grid = pcorr_thresholds();
    assert_eq!(grid.len(), 50);
    for &p in &grid {
        let mask = pcorr_eliminate(corr.values.view(), p).unwrap();
        assert!(!(mask.contains(5) && mask.contains(12)), "p = {p}");
        assert!(mask.contains(5) || mask.contains(12));
    }
    let chosen = pcorr_select(&samples, 1, &lr_scorer(0)).unwrap();
    assert!(!(chosen.mask.contains(5) && chosen.mask.contains(12)));
    assert_eq!(chosen.candidates.len(), 50);
}

#[test]
fn pcorr_cannot_hurt_an_exact_linear_fit() {
    let panel = linear_panel(4, 60, 0.0, 3);
    let samples = build_samples(&panel, 1, 14).unwrap();
    let scorer = lr_scorer(1);
    let chosen = pcorr_select(&samples, 1, &scorer).unwrap();
    let best = chosen.candidates.iter().filter_map(|c| c.score).fold(f64::NEG_INFINITY, f64::max);
    let nofs = scorer.score(&samples, &no_fs(&samples.spec), 1).unwrap().unwrap();
    assert!(best >= nofs - 1e-6, "{best} vs {nofs}");
}

#[test]
fn rfs_ranks_by_coefficient_magnitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = Array2::from_shape_fn((100, 4), |_| rng.random_range(-1.0..1.0));
    x.column_mut(2).fill(0.0);
    let y: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| 3.0 * r[0] + 0.1 * r[1] + 0.01 * rng.random_range(-1.0..1.0))
        .collect();
    let rank = rfs_rank(x.view(), &y).unwrap();
    assert_eq!(rank[0], 0);
    assert_eq!(rank[3], 2);
    let mut sorted = rank.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, vec![0, 1, 2, 3]);
}

#[test]
fn rfs_recovers_three_informative_features() {
    let mut hits = 0;
    for seed in 0..10 {
        let (samples, support) = sparse_linear_samples(100, 20, 3, 1, 1e-6, seed);
        let sel = rfs_select(&samples, 1, &lr_scorer(seed)).unwrap();
        assert_eq!(sel.candidates.len(), 20);
        if sel.mask.indices == support {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn rfs_keeps_everything_when_everything_matters() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_fn((120, 6), |_| rng.random_range(-1.0..1.0));
    let y: Array1<f64> = x.rows().into_iter().map(|r| r.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v).sum()).collect();
    let groups: Vec<usize> = (0..120).map(|r| r % 4).collect();
    let samples = SampleSet::from_parts(x, vec![y], &groups, FeatureSpec::anonymous(6)).unwrap();
    let sel = rfs_select(&samples, 1, &lr_scorer(0)).unwrap();
    assert_eq!(sel.mask.len(), 6);
}

#[test]
fn lasso_recovers_a_sparse_support() {
    let mut hits = 0;
    for seed in 0..10 {
        let (samples, support) = sparse_linear_samples(200, 78, 5, 1, 1e-6, 100 + seed);
        let sel = lasso_select(&samples, 1, &LassoOptions::new(seed)).unwrap();
        if support.iter().all(|&j| sel.mask.contains(j)) && sel.mask.len() <= 15 {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10");
}

/// Under noise the prediction-optimal λ keeps extra features, but never
/// loses the support.
#[test]
fn noisy_lasso_still_covers_the_support() {
    for seed in 0..5 {
        let (samples, support) = sparse_linear_samples(200, 78, 5, 1, 0.2, 100 + seed);
        let sel = lasso_select(&samples, 1, &LassoOptions::new(seed)).unwrap();
        assert!(support.iter().all(|&j| sel.mask.contains(j)));
    }
}

#[test]
fn lasso_falls_back_to_one_feature_when_nothing_survives() {
    let (samples, support) = sparse_linear_samples(60, 10, 2, 1, 0.0, 5);
    let opts = LassoOptions {
        lambdas: Some(vec![1e6]),
        ..LassoOptions::new(0)
    };
    let sel = lasso_select(&samples, 1, &opts).unwrap();
    assert_eq!(sel.mask.len(), 1);
    assert!(matches!(sel.mask.meta, SelectionMeta::Lasso { fallback: true, .. }));
    assert!(support.contains(&sel.mask.indices[0]));
}

#[test]
fn lr_cv_is_exact_on_linear_panels_and_deterministic() {
    let panel = linear_panel(10, 80, 1e-6, 9);
    let samples = build_samples(&panel, 30, 14).unwrap();
    let config = ForecasterConfig::new(Architecture::Linear, TrainingConfig::default());
    let mask = no_fs(&samples.spec);
    let protocol = CvProtocol::default();
    for k in [1, 5, 15, 30] {
        let report = mc_cv(&samples, &mask, &config, k, &protocol).unwrap();
        assert!(report.mean_test.unwrap() >= 0.99, "K={k}: {:?}", report.mean_test);
    }
    let a = mc_cv(&samples, &mask, &config, 5, &protocol).unwrap();
    let b = mc_cv(&samples, &mask, &config, 5, &protocol).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
