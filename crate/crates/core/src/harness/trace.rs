//! Sliding-window K-step-ahead traces for one country.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::featsel::SelectionMask;
use crate::ingest::Panel;
use crate::models::{Architecture, ForecasterConfig, ModelKind, TrainedForecaster};
use crate::samples::{country_windows, SampleSet};

#[derive(Clone, Debug, PartialEq)]
pub struct TraceModel {
    pub config: ForecasterConfig,
    pub mask: SelectionMask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    pub model: ModelKind,
    pub architecture: Architecture,
    pub predictions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub country: String,
    pub k: usize,
    /// Last day of each input window.
    pub anchors: Vec<NaiveDate>,
    /// Day each prediction is for: anchor + `k`.
    pub dates: Vec<NaiveDate>,
    pub truth: Vec<f64>,
    pub series: Vec<TraceSeries>,
}

/// Trains each model once on every row of the pooled `samples`, then
/// predicts `k` days ahead from every window of `country`, one day apart.
pub fn country_trace(panel: &Panel, samples: &SampleSet, country: &str, k: usize, models: &[TraceModel]) -> Result<TraceResult> {
    let windows = country_windows(panel, country, k, samples.spec.window)?;
    let rows: Vec<usize> = (0..samples.len()).collect();
    let series = models
        .iter()
        .map(|m| {
            let trained = TrainedForecaster::fit(&m.config, samples, &m.mask, k, &rows)?;
            Ok(TraceSeries {
                model: m.config.kind(),
                architecture: m.config.architecture,
                predictions: trained.predict(windows.x.view())?.to_vec(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(TraceResult {
        country: country.to_string(),
        k,
        anchors: windows.anchors,
        dates: windows.target_dates,
        truth: windows.truth,
        series,
    })
}
