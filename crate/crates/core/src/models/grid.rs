//! Architecture search over the hidden-size grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featsel::SelectionMask;
use crate::harness::cv::{mc_cv, CvProtocol, CvReport, SCORE_TIE_TOL};
use crate::models::{Architecture, ForecasterConfig, ModelKind, SequenceLayout, TrainingConfig, HIDDEN_SIZES};
use crate::samples::SampleSet;

/// Every admissible architecture of `kind`. With `tied`, the LSTM's two
/// dense layers share one width.
pub fn architecture_grid(kind: ModelKind, tied: bool) -> Vec<Architecture> {
    let h: &'static [usize] = &HIDDEN_SIZES;
    match kind {
        ModelKind::Lr => vec![Architecture::Linear],
        ModelKind::Mlp => h
            .iter()
            .flat_map(|&a| h.iter().map(move |&b| Architecture::Mlp { hidden1: a, hidden2: b }))
            .collect(),
        ModelKind::Lstm if tied => h
            .iter()
            .flat_map(|&hidden| {
                h.iter().map(move |&d| Architecture::Lstm {
                    hidden,
                    dense1: d,
                    dense2: d,
                })
            })
            .collect(),
        ModelKind::Lstm => h
            .iter()
            .flat_map(|&hidden| {
                h.iter()
                    .flat_map(move |&d1| h.iter().map(move |&d2| Architecture::Lstm { hidden, dense1: d1, dense2: d2 }))
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub architecture: Architecture,
    pub n_params: usize,
    pub mean_test: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: Architecture,
    pub scores: Vec<GridScore>,
    /// The CV report of the chosen architecture.
    pub report: CvReport,
}

/// Index of the highest score; scores within [`SCORE_TIE_TOL`] of the best
/// are tied and resolved toward fewer parameters, then the smaller
/// architecture in lexicographic order.
pub fn select_architecture(scores: &[GridScore]) -> Option<usize> {
    let top = scores.iter().filter_map(|s| s.mean_test).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    (0..scores.len())
        .filter(|&i| scores[i].mean_test.is_some_and(|s| s >= top - SCORE_TIE_TOL))
        .min_by(|&a, &b| {
            let (sa, sb) = (&scores[a], &scores[b]);
            sa.n_params.cmp(&sb.n_params).then(sa.architecture.cmp(&sb.architecture))
        })
}

/// Scores every architecture of `kind` by mean CV test r² and keeps the
/// best.
pub fn grid_search(
    kind: ModelKind,
    samples: &SampleSet,
    mask: &SelectionMask,
    k: usize,
    training: &TrainingConfig,
    protocol: &CvProtocol,
    tied: bool,
) -> Result<GridOutcome> {
    let descriptors: Vec<_> = mask.indices.iter().map(|&i| samples.spec.descriptors[i].clone()).collect();
    let layout = SequenceLayout::from_descriptors(samples.spec.window, &descriptors);
    let grid = architecture_grid(kind, tied);
    let reports: Vec<CvReport> = grid
        .par_iter()
        .map(|&a| mc_cv(samples, mask, &ForecasterConfig::new(a, *training), k, protocol))
        .collect::<Result<_>>()?;
    let scores: Vec<GridScore> = grid
        .iter()
        .zip(&reports)
        .map(|(&a, r)| GridScore {
            architecture: a,
            n_params: a.n_params(&layout),
            mean_test: r.score(),
        })
        .collect();
    let best = select_architecture(&scores).ok_or(Error::AllCellsFailed)?;
    Ok(GridOutcome {
        best: grid[best],
        report: reports[best].clone(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cardinalities() {
        assert_eq!(architecture_grid(ModelKind::Mlp, false).len(), 16);
        assert_eq!(architecture_grid(ModelKind::Lstm, false).len(), 64);
        assert_eq!(architecture_grid(ModelKind::Lstm, true).len(), 16);
        assert_eq!(architecture_grid(ModelKind::Lr, true), vec![Architecture::Linear]);
    }

    #[test]
    fn ties_go_to_fewer_parameters() {
        let layout = SequenceLayout::from_descriptors(0, &crate::samples::FeatureSpec::anonymous(5).descriptors);
        let scores: Vec<GridScore> = architecture_grid(ModelKind::Mlp, false)
            .into_iter()
            .map(|a| GridScore {
                architecture: a,
                n_params: a.n_params(&layout),
                mean_test: Some(0.95),
            })
            .collect();
        let best = select_architecture(&scores).unwrap();
        assert_eq!(scores[best].architecture, Architecture::Mlp { hidden1: 4, hidden2: 4 });
    }

    #[test]
    fn clear_winner_beats_smaller_models() {
        let layout = SequenceLayout::from_descriptors(0, &crate::samples::FeatureSpec::anonymous(5).descriptors);
        let mk = |a: Architecture, s: f64| GridScore {
            architecture: a,
            n_params: a.n_params(&layout),
            mean_test: Some(s),
        };
        let scores = vec![
            mk(Architecture::Mlp { hidden1: 4, hidden2: 4 }, 0.9),
            mk(Architecture::Mlp { hidden1: 32, hidden2: 32 }, 0.91),
        ];
        assert_eq!(select_architecture(&scores), Some(1));
        assert_eq!(select_architecture(&[]), None);
    }
}
