//! Feature selection over the flat feature space: none, pairwise-correlation
//! elimination (PCorr), recursive selection by linear coefficients (RFS),
//! and Lasso support.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::cv::{derive_seed, mc_cv, split_rows, CvProtocol, SCORE_TIE_TOL};
use crate::models::ForecasterConfig;
use crate::numerics::lasso::{lambda_path, lasso_cd_from, LassoProblem, LASSO_MAX_ITER, LASSO_TOL};
use crate::numerics::linalg::least_squares;
use crate::numerics::metrics::{correlation_matrix, r2_score, CorrelationMatrix};
use crate::samples::{FeatureSpec, SampleSet, Scaler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "NoFS")]
    NoFs,
    #[serde(rename = "PCorr")]
    PCorr,
    #[serde(rename = "RFS")]
    Rfs,
    #[serde(rename = "Lasso")]
    Lasso,
}

impl Method {
    /// Also the tie-break order when choosing a best method.
    pub const ALL: [Method; 4] = [Method::NoFs, Method::PCorr, Method::Rfs, Method::Lasso];

    pub fn label(self) -> &'static str {
        match self {
            Method::NoFs => "NoFS",
            Method::PCorr => "PCorr",
            Method::Rfs => "RFS",
            Method::Lasso => "Lasso",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Method::NoFs => "nofs",
            Method::PCorr => "pcorr",
            Method::Rfs => "rfs",
            Method::Lasso => "lasso",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nofs" | "none" => Some(Method::NoFs),
            "pcorr" => Some(Method::PCorr),
            "rfs" => Some(Method::Rfs),
            "lasso" => Some(Method::Lasso),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum SelectionMeta {
    #[serde(rename = "NoFS")]
    NoFs,
    #[serde(rename = "PCorr")]
    PCorr { threshold: f64 },
    #[serde(rename = "RFS")]
    Rfs { n_selected: usize },
    #[serde(rename = "Lasso")]
    Lasso {
        lambda: f64,
        fold: usize,
        /// Every coefficient of the winner was zero; the single feature
        /// most correlated with the target was kept instead.
        fallback: bool,
    },
}

impl SelectionMeta {
    pub fn method(&self) -> Method {
        match self {
            SelectionMeta::NoFs => Method::NoFs,
            SelectionMeta::PCorr { .. } => Method::PCorr,
            SelectionMeta::Rfs { .. } => Method::Rfs,
            SelectionMeta::Lasso { .. } => Method::Lasso,
        }
    }
}

/// Retained feature indices, strictly increasing and non-empty, out of
/// `n_total` features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub indices: Vec<usize>,
    pub n_total: usize,
    pub meta: SelectionMeta,
}

impl SelectionMask {
    pub fn new(indices: Vec<usize>, n_total: usize, meta: SelectionMeta) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidMask("mask is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMask(format!("indices not strictly increasing: {indices:?}")));
        }
        if let Some(&last) = indices.last() {
            if last >= n_total {
                return Err(Error::InvalidMask(format!("index {last} out of range for {n_total} features")));
            }
        }
        Ok(Self { indices, n_total, meta })
    }

    pub fn method(&self) -> Method {
        self.meta.method()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn check_width(&self, n_features: usize) -> Result<()> {
        if n_features != self.n_total {
            return Err(Error::MaskMismatch {
                expected: self.n_total,
                got: n_features,
            });
        }
        Ok(())
    }

    /// Method, metadata and retained feature names, one per line.
    pub fn to_text(&self, spec: &FeatureSpec) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method: {}", self.method());
        match &self.meta {
            SelectionMeta::NoFs => {}
            SelectionMeta::PCorr { threshold } => {
                let _ = writeln!(out, "threshold: {threshold:.2}");
            }
            SelectionMeta::Rfs { n_selected } => {
                let _ = writeln!(out, "n_selected: {n_selected}");
            }
            SelectionMeta::Lasso { lambda, fold, fallback } => {
                let _ = writeln!(out, "lambda: {lambda:e}");
                let _ = writeln!(out, "fold: {fold}");
                let _ = writeln!(out, "fallback: {fallback}");
            }
        }
        let _ = writeln!(out, "count: {}", self.len());
        let _ = writeln!(out, "features:");
        let names = spec.names();
        for &i in &self.indices {
            let name = names.get(i).map(String::as_str).unwrap_or("?");
            let _ = writeln!(out, "{i}\t{name}");
        }
        out
    }
}

/// A candidate evaluated during a selection search: the threshold `p`, the
/// prefix size `N`, or the Lasso `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub param: f64,
    pub n_features: usize,
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub mask: SelectionMask,
    pub candidates: Vec<CandidateScore>,
}

/// How a candidate mask is scored: mean CV test r² of a forecaster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    pub config: ForecasterConfig,
    pub protocol: CvProtocol,
}

impl Scorer {
    pub fn score(&self, samples: &SampleSet, mask: &SelectionMask, k: usize) -> Result<Option<f64>> {
        Ok(mc_cv(samples, mask, &self.config, k, &self.protocol)?.score())
    }

    /// Scores many masks, once per distinct index set.
    fn score_all(&self, samples: &SampleSet, masks: &[SelectionMask], k: usize) -> Result<Vec<Option<f64>>> {
        let mut distinct: Vec<&Vec<usize>> = masks.iter().map(|m| &m.indices).collect();
        distinct.sort();
        distinct.dedup();
        let scored: Vec<(Vec<usize>, Option<f64>)> = distinct
            .par_iter()
            .map(|idx| {
                let m = SelectionMask {
                    indices: (*idx).clone(),
                    n_total: samples.n_features(),
                    meta: SelectionMeta::NoFs,
                };
                self.score(samples, &m, k).map(|s| ((*idx).clone(), s))
            })
            .collect::<Result<_>>()?;
        let cache: HashMap<Vec<usize>, Option<f64>> = scored.into_iter().collect();
        Ok(masks.iter().map(|m| cache[&m.indices]).collect())
    }
}

/// Index of the best score, scanning in `order`; a later candidate replaces
/// the incumbent only when better by more than [`SCORE_TIE_TOL`].
fn argmax_in_order(scores: &[Option<f64>], order: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in order {
        if let Some(s) = scores[i] {
            match best {
                Some((_, b)) if s <= b + SCORE_TIE_TOL => {}
                _ => best = Some((i, s)),
            }
        }
    }
    best.map(|(i, _)| i)
}

pub fn no_fs(spec: &FeatureSpec) -> SelectionMask {
    SelectionMask {
        indices: (0..spec.len()).collect(),
        n_total: spec.len(),
        meta: SelectionMeta::NoFs,
    }
}

/// PCorr threshold grid 0.50, 0.51, …, 0.99.
pub fn pcorr_thresholds() -> Vec<f64> {
    (50..=99).map(|i| i as f64 / 100.0).collect()
}

/// Removes one member of every pair with |ρ| > `p`. Pairs are visited in
/// ascending `(i, j)` order; of a pair whose members both survive so far,
/// the one with the larger mean |ρ| to the other surviving features goes
/// (the larger index on ties).
pub fn pcorr_eliminate(corr: ArrayView2<f64>, p: f64) -> Result<SelectionMask> {
    if !(0.5..=0.99).contains(&p) {
        return Err(Error::Config(format!("PCorr threshold {p} outside [0.5, 0.99]")));
    }
    let n = corr.nrows();
    if corr.ncols() != n || n == 0 {
        return Err(Error::ShapeMismatch(format!("correlation matrix is {}x{}", corr.nrows(), corr.ncols())));
    }
    let mut retained = vec![true; n];
    let mean_abs = |a: usize, retained: &[bool]| -> f64 {
        let others: Vec<f64> = (0..n).filter(|&j| j != a && retained[j]).map(|j| corr[[a, j]].abs()).collect();
        if others.is_empty() {
            0.0
        } else {
            others.iter().sum::<f64>() / others.len() as f64
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            if corr[[i, j]].abs() <= p || !retained[i] || !retained[j] {
                continue;
            }
            let (mi, mj) = (mean_abs(i, &retained), mean_abs(j, &retained));
            let drop = if mi > mj + 1e-12 { i } else { j };
            retained[drop] = false;
        }
    }
    let indices: Vec<usize> = (0..n).filter(|&i| retained[i]).collect();
    assert!(!indices.is_empty(), "the last member of a pair always survives");
    SelectionMask::new(indices, n, SelectionMeta::PCorr { threshold: p })
}

/// Pearson matrix over every feature column of `samples`.
pub fn feature_correlations(samples: &SampleSet) -> Result<CorrelationMatrix<f64>> {
    correlation_matrix(samples.x.view())
}

/// Tries every threshold and keeps the mask of the best-scoring one; ties go
/// to the larger threshold.
pub fn pcorr_select(samples: &SampleSet, k: usize, scorer: &Scorer) -> Result<Selection> {
    let corr = feature_correlations(samples)?;
    let thresholds = pcorr_thresholds();
    let masks: Vec<SelectionMask> = thresholds
        .iter()
        .map(|&p| pcorr_eliminate(corr.values.view(), p))
        .collect::<Result<_>>()?;
    let scores = scorer.score_all(samples, &masks, k)?;
    let best = argmax_in_order(&scores, (0..masks.len()).rev()).ok_or(Error::AllCellsFailed)?;
    let candidates = thresholds
        .iter()
        .zip(&masks)
        .zip(&scores)
        .map(|((&p, m), &s)| CandidateScore {
            param: p,
            n_features: m.len(),
            score: s,
        })
        .collect();
    Ok(Selection {
        mask: masks[best].clone(),
        candidates,
    })
}

/// Ranks features by descending |coefficient| of a least-squares fit on
/// standardized inputs; ties by ascending index.
pub fn rfs_rank(x_std: ArrayView2<f64>, y: &[f64]) -> Result<Vec<usize>> {
    let fit = least_squares(x_std, y)?;
    let mut order: Vec<usize> = (0..fit.weights.len()).collect();
    order.sort_by(|&a, &b| fit.weights[b].abs().total_cmp(&fit.weights[a].abs()).then(a.cmp(&b)));
    Ok(order)
}

fn standardized(samples: &SampleSet, k: usize, rows: &[usize]) -> Result<(Array2<f64>, Vec<f64>, Scaler)> {
    let y = samples.target(k)?;
    let scaler = Scaler::fit(samples.x.view(), &[y], rows)?;
    let x = scaler.transform_rows(samples.x.view(), rows)?;
    let y_rows: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    Ok((x, scaler.transform_target(0, &y_rows), scaler))
}

/// Evaluates the top-`N` ranked features for every `N`; the best `N` wins,
/// ties going to the smaller `N`. Masks are nested by construction.
pub fn rfs_select(samples: &SampleSet, k: usize, scorer: &Scorer) -> Result<Selection> {
    let all: Vec<usize> = (0..samples.len()).collect();
    let (x, y, _) = standardized(samples, k, &all)?;
    let ranking = rfs_rank(x.view(), &y)?;
    let n = samples.n_features();
    let masks: Vec<SelectionMask> = (1..=n)
        .map(|size| {
            let mut idx = ranking[..size].to_vec();
            idx.sort_unstable();
            SelectionMask::new(idx, n, SelectionMeta::Rfs { n_selected: size })
        })
        .collect::<Result<_>>()?;
    let scores = scorer.score_all(samples, &masks, k)?;
    let best = argmax_in_order(&scores, 0..n).ok_or(Error::AllCellsFailed)?;
    let candidates = (0..n)
        .map(|i| CandidateScore {
            param: (i + 1) as f64,
            n_features: i + 1,
            score: scores[i],
        })
        .collect();
    Ok(Selection {
        mask: masks[best].clone(),
        candidates,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoOptions {
    pub folds: usize,
    pub train_fraction: f64,
    pub seed: u64,
    /// Overrides the per-fold `λ` path.
    pub lambdas: Option<Vec<f64>>,
}

impl LassoOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            folds: 5,
            train_fraction: 0.8,
            seed,
            lambdas: None,
        }
    }
}

struct FoldBest {
    fold: usize,
    lambda: f64,
    score: f64,
    weights: Vec<f64>,
    x_train: Array2<f64>,
    y_train: Vec<f64>,
}

fn lasso_fold(samples: &SampleSet, k: usize, fold: usize, opts: &LassoOptions) -> Result<Option<FoldBest>> {
    let (train, test) = split_rows(samples.len(), None, opts.train_fraction, derive_seed(opts.seed, &[fold as u64]))?;
    let (x_train, y_train, scaler) = standardized(samples, k, &train)?;
    let x_test = scaler.transform_rows(samples.x.view(), &test)?;
    let y = samples.target(k)?;
    let y_test: Vec<f64> = scaler.transform_target(0, &test.iter().map(|&r| y[r]).collect::<Vec<_>>());
    let path = match &opts.lambdas {
        Some(l) => l.clone(),
        None => lambda_path(x_train.view(), &y_train),
    };
    let mut w = vec![0.0; samples.n_features()];
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    // descending λ with warm starts; a smaller λ must win by more than the tie tolerance
    for &lambda in &path {
        let problem = LassoProblem::new(x_train.view(), &y_train, lambda)?;
        w = lasso_cd_from(&problem, w, LASSO_TOL, LASSO_MAX_ITER).weights;
        let pred = x_test.dot(&ndarray::ArrayView1::from(&w));
        let score = match r2_score(&y_test, pred.as_slice().expect("contiguous")) {
            Ok(s) => s,
            Err(Error::ZeroVariance(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(_, b, _)| score > b + SCORE_TIE_TOL) {
            best = Some((lambda, score, w.clone()));
        }
    }
    Ok(best.map(|(lambda, score, weights)| FoldBest {
        fold,
        lambda,
        score,
        weights,
        x_train,
        y_train,
    }))
}

/// Per fold, sweeps the `λ` path on the fold's training rows and keeps the
/// `λ` with the best test r²; the single best (fold, `λ`) model supplies
/// the mask as its nonzero coefficients.
pub fn lasso_select(samples: &SampleSet, k: usize, opts: &LassoOptions) -> Result<Selection> {
    if samples.len() < 10 {
        return Err(Error::TooFewSamples {
            needed: 10,
            got: samples.len(),
        });
    }
    let folds: Vec<Option<FoldBest>> = (0..opts.folds)
        .into_par_iter()
        .map(|f| lasso_fold(samples, k, f, opts))
        .collect::<Result<_>>()?;
    let candidates: Vec<CandidateScore> = folds
        .iter()
        .flatten()
        .map(|f| CandidateScore {
            param: f.lambda,
            n_features: f.weights.iter().filter(|&&w| w != 0.0).count(),
            score: Some(f.score),
        })
        .collect();
    let mut winner: Option<&FoldBest> = None;
    for f in folds.iter().flatten() {
        if winner.is_none_or(|w| f.score > w.score + SCORE_TIE_TOL) {
            winner = Some(f);
        }
    }
    let winner = winner.ok_or(Error::AllCellsFailed)?;
    let n = samples.n_features();
    let mut indices: Vec<usize> = (0..n).filter(|&j| winner.weights[j] != 0.0).collect();
    let fallback = indices.is_empty();
    if fallback {
        let xty = winner.x_train.t().dot(&ndarray::ArrayView1::from(&winner.y_train));
        let mut best = 0;
        for j in 1..n {
            if xty[j].abs() > xty[best].abs() {
                best = j;
            }
        }
        log::warn!("lasso selected no feature at k={k}; keeping feature {best}");
        indices.push(best);
    }
    let mask = SelectionMask::new(
        indices,
        n,
        SelectionMeta::Lasso {
            lambda: winner.lambda,
            fold: winner.fold,
            fallback,
        },
    )?;
    Ok(Selection { mask, candidates })
}

/// Runs `method` on `samples` for horizon `k`.
pub fn select(samples: &SampleSet, method: Method, k: usize, scorer: &Scorer, lasso_seed: u64) -> Result<Selection> {
    match method {
        Method::NoFs => Ok(Selection {
            mask: no_fs(&samples.spec),
            candidates: Vec::new(),
        }),
        Method::PCorr => pcorr_select(samples, k, scorer),
        Method::Rfs => rfs_select(samples, k, scorer),
        Method::Lasso => lasso_select(samples, k, &LassoOptions::new(lasso_seed)),
    }
}

/// Correlations restricted to the static columns, with their names.
pub fn static_correlations(samples: &SampleSet) -> Result<(Vec<String>, CorrelationMatrix<f64>)> {
    let idx = samples.spec.static_indices();
    let names = samples.spec.names();
    let x = samples.x.select(Axis(1), &idx);
    Ok((idx.iter().map(|&i| names[i].clone()).collect(), correlation_matrix(x.view())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mask_invariants() {
        assert!(SelectionMask::new(vec![], 3, SelectionMeta::NoFs).is_err());
        assert!(SelectionMask::new(vec![1, 1], 3, SelectionMeta::NoFs).is_err());
        assert!(SelectionMask::new(vec![0, 3], 3, SelectionMeta::NoFs).is_err());
        assert!(SelectionMask::new(vec![0, 2], 3, SelectionMeta::NoFs).is_ok());
    }

    #[test]
    fn no_fs_keeps_everything() {
        let spec = FeatureSpec::new(14, &(0..36).map(|i| format!("s{i}")).collect::<Vec<_>>());
        let m = no_fs(&spec);
        assert_eq!(m.len(), 78);
        assert_eq!(m.method(), Method::NoFs);
        assert_eq!(no_fs(&spec), m);
    }

    #[test]
    fn pcorr_drops_the_more_correlated_member() {
        // pair (0,1) exceeds p; feature 1 is more correlated with feature 2
        let corr = array![[1.0, 0.95, 0.1], [0.95, 1.0, 0.4], [0.1, 0.4, 1.0]];
        let m = pcorr_eliminate(corr.view(), 0.9).unwrap();
        assert_eq!(m.indices, vec![0, 2]);
    }

    #[test]
    fn pcorr_tie_drops_larger_index() {
        let corr = array![[1.0, 1.0], [1.0, 1.0]];
        assert_eq!(pcorr_eliminate(corr.view(), 0.99).unwrap().indices, vec![0]);
    }

    #[test]
    fn pcorr_without_pairs_is_identity() {
        let corr = array![[1.0, 0.2], [0.2, 1.0]];
        assert_eq!(pcorr_eliminate(corr.view(), 0.5).unwrap().indices, vec![0, 1]);
        assert!(pcorr_eliminate(corr.view(), 0.3).is_err());
    }

    #[test]
    fn thresholds_grid() {
        let t = pcorr_thresholds();
        assert_eq!(t.len(), 50);
        assert_eq!(t[0], 0.5);
        assert_eq!(t[49], 0.99);
    }

    #[test]
    fn argmax_prefers_scan_order_on_ties() {
        let s = [Some(0.5), Some(0.5 + 1e-12), None, Some(0.4)];
        assert_eq!(argmax_in_order(&s, 0..4), Some(0));
        assert_eq!(argmax_in_order(&s, (0..4).rev()), Some(1));
        assert_eq!(argmax_in_order(&[None, None], 0..2), None);
    }

    #[test]
    fn rfs_rank_orders_by_magnitude() {
        let x = array![[1.0, 0.0, 2.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0], [2.0, 1.0, 1.0], [0.0, 2.0, 3.0]];
        let y: Vec<f64> = x.rows().into_iter().map(|r| 0.1 * r[0] - 3.0 * r[1] + 1.0 * r[2]).collect();
        assert_eq!(rfs_rank(x.view(), &y).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn mask_text_lists_names() {
        let spec = FeatureSpec::new(14, &["Smokers".to_string()]);
        let m = SelectionMask::new(vec![0, 42], 43, SelectionMeta::PCorr { threshold: 0.8 }).unwrap();
        let text = m.to_text(&spec);
        assert!(text.contains("method: PCorr"));
        assert!(text.contains("threshold: 0.80"));
        assert!(text.contains("0\tactive[t]"));
        assert!(text.contains("42\tSmokers"));
    }
}
