//! Sliding-window sample construction over a [`Panel`] and train-only
//! standardization.
//!
//! Feature order is fixed: for each series in `active, deaths_daily,
//! recovered_daily`, lags `0..window` (lag `j` reads day `t − j`), followed by
//! the panel's static features in canonical order. With the default window
//! of 14 and all 36 statics this gives 42 + 36 = 78 features.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Panel;
use crate::scalar::is_negligible_spread;

pub const DEFAULT_WINDOW: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemporalSeries {
    Active,
    DeathsDaily,
    RecoveredDaily,
}

impl TemporalSeries {
    pub const ALL: [TemporalSeries; 3] = [
        TemporalSeries::Active,
        TemporalSeries::DeathsDaily,
        TemporalSeries::RecoveredDaily,
    ];

    pub fn channel(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TemporalSeries::Active => "active",
            TemporalSeries::DeathsDaily => "deaths_daily",
            TemporalSeries::RecoveredDaily => "recovered_daily",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureDescriptor {
    Temporal { series: TemporalSeries, lag: usize },
    Static { name: String },
}

impl FeatureDescriptor {
    pub fn name(&self) -> String {
        match self {
            FeatureDescriptor::Temporal { series, lag: 0 } => format!("{}[t]", series.name()),
            FeatureDescriptor::Temporal { series, lag } => format!("{}[t-{lag}]", series.name()),
            FeatureDescriptor::Static { name } => name.clone(),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, FeatureDescriptor::Static { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub window: usize,
    pub descriptors: Vec<FeatureDescriptor>,
}

impl FeatureSpec {
    pub fn new(window: usize, static_names: &[String]) -> Self {
        let mut descriptors = Vec::with_capacity(3 * window + static_names.len());
        for series in TemporalSeries::ALL {
            for lag in 0..window {
                descriptors.push(FeatureDescriptor::Temporal { series, lag });
            }
        }
        descriptors.extend(
            static_names
                .iter()
                .map(|n| FeatureDescriptor::Static { name: n.clone() }),
        );
        Self { window, descriptors }
    }

    /// Spec for `n` anonymous static-like features (synthetic designs).
    pub fn anonymous(n: usize) -> Self {
        Self {
            window: 0,
            descriptors: (0..n)
                .map(|i| FeatureDescriptor::Static { name: format!("x{i}") })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn n_temporal(&self) -> usize {
        self.descriptors.iter().filter(|d| !d.is_static()).count()
    }

    pub fn temporal_index(&self, series: TemporalSeries, lag: usize) -> Option<usize> {
        (lag < self.window).then(|| series.channel() * self.window + lag)
    }

    pub fn static_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.descriptors[i].is_static()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.descriptors.iter().map(|d| d.name()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub country: String,
    pub country_index: usize,
    pub anchor: NaiveDate,
    /// Day index of the anchor within the panel's date axis.
    pub anchor_index: usize,
}

/// Pooled design matrix with one target vector per horizon `1..=k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub x: Array2<f64>,
    /// `targets[k - 1][s]` is the active count `k` days after row `s`'s anchor.
    pub targets: Vec<Array1<f64>>,
    pub provenance: Vec<Provenance>,
    pub spec: FeatureSpec,
    pub k_max: usize,
    /// Countries skipped for lack of history.
    pub dropped: Vec<String>,
}

impl SampleSet {
    /// Builds a sample set from already-formed parts; used for synthetic
    /// designs. Row `s` is attributed to country `groups[s]`.
    pub fn from_parts(x: Array2<f64>, targets: Vec<Array1<f64>>, groups: &[usize], spec: FeatureSpec) -> Result<Self> {
        if spec.len() != x.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "spec has {} features, matrix has {} columns",
                spec.len(),
                x.ncols()
            )));
        }
        if groups.len() != x.nrows() || targets.iter().any(|t| t.len() != x.nrows()) || targets.is_empty() {
            return Err(Error::ShapeMismatch("targets/groups must match the row count".into()));
        }
        let epoch = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
        let provenance = groups
            .iter()
            .enumerate()
            .map(|(s, &g)| Provenance {
                country: format!("group{g}"),
                country_index: g,
                anchor: epoch + chrono::Days::new(s as u64),
                anchor_index: s,
            })
            .collect();
        Ok(Self {
            k_max: targets.len(),
            x,
            targets,
            provenance,
            spec,
            dropped: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Target vector for horizon `k` (1-based).
    pub fn target(&self, k: usize) -> Result<ArrayView1<'_, f64>> {
        if k == 0 || k > self.k_max {
            return Err(Error::Config(format!("horizon {k} outside 1..={}", self.k_max)));
        }
        Ok(self.targets[k - 1].view())
    }

    /// Country index of every row.
    pub fn groups(&self) -> Vec<usize> {
        self.provenance.iter().map(|p| p.country_index).collect()
    }

    pub fn with_targets(&self, targets: Vec<Array1<f64>>) -> Result<Self> {
        if targets.len() != self.k_max || targets.iter().any(|t| t.len() != self.len()) {
            return Err(Error::ShapeMismatch("replacement targets have the wrong shape".into()));
        }
        Ok(Self {
            targets,
            ..self.clone()
        })
    }

    /// A copy holding only `rows`, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), rows),
            targets: self.targets.iter().map(|t| t.select(Axis(0), rows)).collect(),
            provenance: rows.iter().map(|&r| self.provenance[r].clone()).collect(),
            spec: self.spec.clone(),
            k_max: self.k_max,
            dropped: self.dropped.clone(),
        }
    }

    /// Columnar CSV `country,anchor_date,f0..f{n-1},y1..yK`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("country,anchor_date");
        for i in 0..self.n_features() {
            out.push_str(&format!(",f{i}"));
        }
        for k in 1..=self.k_max {
            out.push_str(&format!(",y{k}"));
        }
        out.push('\n');
        for (s, p) in self.provenance.iter().enumerate() {
            let country = if p.country.contains([',', '"']) {
                format!("\"{}\"", p.country.replace('"', "\"\""))
            } else {
                p.country.clone()
            };
            out.push_str(&format!("{country},{}", p.anchor));
            for v in self.x.row(s) {
                out.push_str(&format!(",{v}"));
            }
            for t in &self.targets {
                out.push_str(&format!(",{}", t[s]));
            }
            out.push('\n');
        }
        out
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn series_of(panel: &Panel, country: usize, series: TemporalSeries) -> &[f64] {
    let c = &panel.countries[country];
    match series {
        TemporalSeries::Active => &c.active,
        TemporalSeries::DeathsDaily => &c.deaths_daily,
        TemporalSeries::RecoveredDaily => &c.recovered_daily,
    }
}

fn fill_row(panel: &Panel, country: usize, anchor: usize, spec: &FeatureSpec, row: &mut [f64]) {
    let w = spec.window;
    for series in TemporalSeries::ALL {
        let values = series_of(panel, country, series);
        for lag in 0..w {
            row[series.channel() * w + lag] = values[anchor - lag];
        }
    }
    row[3 * w..].copy_from_slice(&panel.countries[country].statics);
}

/// Pools all countries' windows into one sample set with targets for
/// horizons `1..=k_max`. Anchors run over `window − 1 ..= T − 1 − k_max`.
pub fn build_samples(panel: &Panel, k_max: usize, window: usize) -> Result<SampleSet> {
    if k_max == 0 || window == 0 {
        return Err(Error::Config("k_max and window must be at least 1".into()));
    }
    let days = panel.len_days();
    let spec = FeatureSpec::new(window, &panel.static_names);
    let per_country = (days + 1).saturating_sub(window + k_max);
    let mut dropped = Vec::new();
    if per_country == 0 {
        dropped.extend(panel.countries.iter().map(|c| c.name.clone()));
        for name in &dropped {
            log::warn!("{name}: {days} days is too short for window {window} and horizon {k_max}");
        }
        return Err(Error::SeriesTooShort {
            needed: window + k_max,
            longest: days,
        });
    }
    let rows = per_country * panel.countries.len();
    let mut x = Array2::<f64>::zeros((rows, spec.len()));
    let mut targets = vec![Array1::<f64>::zeros(rows); k_max];
    let mut provenance = Vec::with_capacity(rows);
    let mut s = 0;
    for (ci, c) in panel.countries.iter().enumerate() {
        for anchor in (window - 1)..(days - k_max) {
            fill_row(panel, ci, anchor, &spec, x.row_mut(s).as_slice_mut().expect("standard layout"));
            for (k, t) in targets.iter_mut().enumerate() {
                t[s] = c.active[anchor + k + 1];
            }
            provenance.push(Provenance {
                country: c.name.clone(),
                country_index: ci,
                anchor: panel.dates[anchor],
                anchor_index: anchor,
            });
            s += 1;
        }
    }
    Ok(SampleSet {
        x,
        targets,
        provenance,
        spec,
        k_max,
        dropped,
    })
}

/// Every window of one country with its `k`-step-ahead truth, anchors
/// `window − 1 ..= T − 1 − k`.
#[derive(Clone, Debug)]
pub struct CountryWindows {
    pub x: Array2<f64>,
    pub anchors: Vec<NaiveDate>,
    pub target_dates: Vec<NaiveDate>,
    pub truth: Vec<f64>,
}

pub fn country_windows(panel: &Panel, country: &str, k: usize, window: usize) -> Result<CountryWindows> {
    let ci = panel
        .country_index(country)
        .ok_or_else(|| Error::UnknownCountry(country.to_string()))?;
    let days = panel.len_days();
    if days < window + k {
        return Err(Error::InsufficientHistory {
            country: country.to_string(),
            days,
            needed: window + k,
        });
    }
    let spec = FeatureSpec::new(window, &panel.static_names);
    let anchors: Vec<usize> = ((window - 1)..(days - k)).collect();
    let mut x = Array2::<f64>::zeros((anchors.len(), spec.len()));
    for (s, &a) in anchors.iter().enumerate() {
        fill_row(panel, ci, a, &spec, x.row_mut(s).as_slice_mut().expect("standard layout"));
    }
    let active = &panel.countries[ci].active;
    Ok(CountryWindows {
        x,
        anchors: anchors.iter().map(|&a| panel.dates[a]).collect(),
        target_dates: anchors.iter().map(|&a| panel.dates[a + k]).collect(),
        truth: anchors.iter().map(|&a| active[a + k]).collect(),
    })
}

/// Per-column means and standard deviations fitted on training rows only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub feature_mean: Vec<f64>,
    pub feature_sd: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_sd: Vec<f64>,
}

fn mean_sd<'a>(values: impl Iterator<Item = &'a f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 1.0);
    }
    let ss: f64 = values.clone().map(|v| (v - mean) * (v - mean)).sum();
    let scale = values.fold(0.0f64, |m, v| m.max(v.abs())) * (n as f64).sqrt();
    if is_negligible_spread(ss.sqrt(), scale, n) {
        (mean, 1.0)
    } else {
        (mean, (ss / (n - 1) as f64).sqrt())
    }
}

impl Scaler {
    /// Fits on `rows` of `x` and of each target. Constant columns get
    /// standard deviation 1.
    pub fn fit(x: ArrayView2<f64>, targets: &[ArrayView1<f64>], rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let n = rows.len();
        let mut feature_mean = Vec::with_capacity(x.ncols());
        let mut feature_sd = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let vals: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
            let (m, s) = mean_sd(vals.iter(), n);
            feature_mean.push(m);
            feature_sd.push(s);
        }
        let mut target_mean = Vec::with_capacity(targets.len());
        let mut target_sd = Vec::with_capacity(targets.len());
        for t in targets {
            let vals: Vec<f64> = rows.iter().map(|&r| t[r]).collect();
            let (m, s) = mean_sd(vals.iter(), n);
            target_mean.push(m);
            target_sd.push(s);
        }
        Ok(Self {
            feature_mean,
            feature_sd,
            target_mean,
            target_sd,
        })
    }

    /// An identity scaler (mean 0, sd 1) for `n` features and `m` targets.
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            feature_mean: vec![0.0; n],
            feature_sd: vec![1.0; n],
            target_mean: vec![0.0; m],
            target_sd: vec![1.0; m],
        }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.feature_mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "scaler has {} features, input has {}",
                self.feature_mean.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.feature_mean[j], self.feature_sd[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn transform_rows(&self, x: ArrayView2<f64>, rows: &[usize]) -> Result<Array2<f64>> {
        self.transform(x.select(Axis(0), rows).view())
    }

    pub fn transform_target(&self, target: usize, y: &[f64]) -> Vec<f64> {
        let (m, s) = (self.target_mean[target], self.target_sd[target]);
        y.iter().map(|v| (v - m) / s).collect()
    }

    pub fn inverse_target(&self, target: usize, values: &[f64]) -> Vec<f64> {
        let (m, s) = (self.target_mean[target], self.target_sd[target]);
        values.iter().map(|v| v * s + m).collect()
    }
}

/// Scaler over every feature of `samples` and every horizon (target index
/// `k − 1`), fitted on `train_rows`.
pub fn fit_scaler(samples: &SampleSet, train_rows: &[usize]) -> Result<Scaler> {
    let targets: Vec<ArrayView1<f64>> = samples.targets.iter().map(|t| t.view()).collect();
    Scaler::fit(samples.x.view(), &targets, train_rows)
}

pub fn transform(samples: &SampleSet, scaler: &Scaler, rows: &[usize]) -> Result<Array2<f64>> {
    scaler.transform_rows(samples.x.view(), rows)
}
