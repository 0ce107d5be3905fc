//! Run configuration: a flat TOML document, overridden key by key from the
//! command line.
//!
//! Keys (all optional):
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `confirmed`, `deaths`, `recovered` | cumulative time-series CSVs | none |
//! | `statics` | list of static-feature CSVs | `[]` |
//! | `panel` | directory of an ingested panel | `<out>/panel` |
//! | `start_date`, `end_date` | inclusive date window, `YYYY-MM-DD` | full range |
//! | `horizons` | forecasting horizons in 1..=30 | 1..=30, fast: 1,3,5,10,15,30 |
//! | `models` | subset of `LR`, `MLP`, `LSTM` | all |
//! | `methods` | subset of `NoFS`, `PCorr`, `RFS`, `Lasso` | all |
//! | `seed` | global seed | 0 |
//! | `mode` | `paper` or `strict_nested` | `paper` |
//! | `fast` | reduced sweep | false |
//! | `workers` | worker threads | 4 |
//! | `out` | output directory | `results` |
//! | `group_by_country` | split CV by country | false |
//! | `surrogate_lr` | score PCorr/RFS with LR | false, fast: true |
//! | `statics_only` | heatmap over static features only | true |
//! | `window` | days per input window | 14 |
//! | `reps` | CV repetitions | 10 |
//! | `max_epochs`, `patience`, `batch_size` | training loop | 600 (fast: 100), 30, 200 |
//! | `country`, `horizon`, `trace_method` | `trace` target | none, 1, best method |
//!
//! Relative paths in the file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use serde::Deserialize;

use epiforecast::featsel::Method;
use epiforecast::harness::{Mode, SweepConfig, FAST_HORIZONS};
use epiforecast::models::{ModelKind, TrainingConfig};
use epiforecast::samples::DEFAULT_WINDOW;

use crate::error::CliError;

#[derive(Args, Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Cumulative confirmed-cases CSV.
    #[arg(long, global = true)]
    pub confirmed: Option<PathBuf>,
    /// Cumulative deaths CSV.
    #[arg(long, global = true)]
    pub deaths: Option<PathBuf>,
    /// Cumulative recoveries CSV.
    #[arg(long, global = true)]
    pub recovered: Option<PathBuf>,
    /// Static-feature CSV (repeatable).
    #[arg(long, global = true)]
    pub statics: Option<Vec<PathBuf>>,
    /// Directory of an ingested panel.
    #[arg(long, global = true)]
    pub panel: Option<PathBuf>,
    #[arg(long, global = true)]
    pub start_date: Option<NaiveDate>,
    #[arg(long, global = true)]
    pub end_date: Option<NaiveDate>,
    /// Comma-separated horizons.
    #[arg(long, global = true, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    /// Comma-separated models (LR, MLP, LSTM).
    #[arg(long, global = true, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Comma-separated methods (NoFS, PCorr, RFS, Lasso).
    #[arg(long, global = true, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// paper or strict_nested.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub fast: Option<bool>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub group_by_country: Option<bool>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub surrogate_lr: Option<bool>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub statics_only: Option<bool>,
    #[arg(long, global = true)]
    pub window: Option<usize>,
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Country for `trace`.
    #[arg(long, global = true)]
    pub country: Option<String>,
    /// Horizon for `trace`.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Method for `trace` when no sweep result picks one.
    #[arg(long, global = true)]
    pub trace_method: Option<String>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),+) => {
        Settings { $($f: $hi.$f.or($lo.$f)),+ }
    };
}

impl Settings {
    /// Reads a TOML file; relative paths become relative to its directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut s: Settings = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        fix(&mut s.confirmed);
        fix(&mut s.deaths);
        fix(&mut s.recovered);
        fix(&mut s.panel);
        fix(&mut s.out);
        if let Some(list) = &mut s.statics {
            for p in list.iter_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(s)
    }

    /// Keys set in `self` win over `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        overlay!(
            self,
            lower,
            confirmed,
            deaths,
            recovered,
            statics,
            panel,
            start_date,
            end_date,
            horizons,
            models,
            methods,
            seed,
            mode,
            fast,
            workers,
            out,
            group_by_country,
            surrogate_lr,
            statics_only,
            window,
            reps,
            max_epochs,
            patience,
            batch_size,
            country,
            horizon,
            trace_method
        )
    }
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub confirmed: Option<PathBuf>,
    pub deaths: Option<PathBuf>,
    pub recovered: Option<PathBuf>,
    pub statics: Vec<PathBuf>,
    pub panel: PathBuf,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub out: PathBuf,
    pub workers: usize,
    pub statics_only: bool,
    pub window: usize,
    pub sweep: SweepConfig,
    pub country: Option<String>,
    pub horizon: usize,
    pub trace_method: Option<Method>,
}

fn parse_list<T>(values: &[String], parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Vec<T>, CliError> {
    values
        .iter()
        .map(|v| parse(v.trim()).ok_or_else(|| CliError::Usage(format!("unknown {what} `{v}`"))))
        .collect()
}

impl RunConfig {
    pub fn resolve(s: Settings) -> Result<Self, CliError> {
        let fast = s.fast.unwrap_or(false);
        let base = if fast { SweepConfig::fast() } else { SweepConfig::default() };
        let defaults = TrainingConfig::default();
        let training = TrainingConfig {
            batch_size: s.batch_size.unwrap_or(defaults.batch_size),
            max_epochs: s.max_epochs.unwrap_or(base.training.max_epochs),
            patience: s.patience.unwrap_or(defaults.patience),
            ..defaults
        };
        if training.batch_size == 0 || training.max_epochs == 0 {
            return Err(CliError::Usage("batch_size and max_epochs must be positive".into()));
        }
        let mut horizons = s.horizons.unwrap_or_else(|| if fast { FAST_HORIZONS.to_vec() } else { (1..=30).collect() });
        horizons.sort_unstable();
        horizons.dedup();
        let mut models = match &s.models {
            Some(m) => parse_list(m, ModelKind::parse, "model")?,
            None => ModelKind::ALL.to_vec(),
        };
        models.sort();
        models.dedup();
        let mut methods = match &s.methods {
            Some(m) => parse_list(m, Method::parse, "method")?,
            None => Method::ALL.to_vec(),
        };
        methods.sort();
        methods.dedup();
        let mode = match &s.mode {
            Some(m) => Mode::parse(m).ok_or_else(|| CliError::Usage(format!("unknown mode `{m}`")))?,
            None => Mode::Paper,
        };
        let sweep = SweepConfig {
            models,
            methods,
            horizons,
            seed: s.seed.unwrap_or(0),
            mode,
            n_reps: s.reps.unwrap_or(base.n_reps),
            train_fraction: base.train_fraction,
            group_by_country: s.group_by_country.unwrap_or(false),
            surrogate_lr: s.surrogate_lr.unwrap_or(base.surrogate_lr),
            tied_lstm: base.tied_lstm,
            training,
        };
        sweep.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let window = s.window.unwrap_or(DEFAULT_WINDOW);
        if window == 0 {
            return Err(CliError::Usage("window must be positive".into()));
        }
        let horizon = s.horizon.unwrap_or(1);
        if !(1..=30).contains(&horizon) {
            return Err(CliError::Usage(format!("trace horizon {horizon} outside 1..=30")));
        }
        let trace_method = match &s.trace_method {
            Some(m) => Some(Method::parse(m).ok_or_else(|| CliError::Usage(format!("unknown method `{m}`")))?),
            None => None,
        };
        if let (Some(a), Some(b)) = (s.start_date, s.end_date) {
            if a > b {
                return Err(CliError::Usage(format!("start_date {a} is after end_date {b}")));
            }
        }
        let out = s.out.unwrap_or_else(|| PathBuf::from("results"));
        Ok(Self {
            confirmed: s.confirmed,
            deaths: s.deaths,
            recovered: s.recovered,
            statics: s.statics.unwrap_or_default(),
            panel: s.panel.unwrap_or_else(|| out.join("panel")),
            start_date: s.start_date,
            end_date: s.end_date,
            workers: s.workers.unwrap_or(4).max(1),
            statics_only: s.statics_only.unwrap_or(true),
            window,
            sweep,
            country: s.country,
            horizon,
            trace_method,
            out,
        })
    }

    /// Flags over file over defaults.
    pub fn load(file: Option<&Path>, flags: Settings) -> Result<Self, CliError> {
        let from_file = match file {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        Self::resolve(flags.over(from_file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let file = Settings {
            seed: Some(5),
            workers: Some(2),
            ..Settings::default()
        };
        let flags = Settings {
            seed: Some(9),
            ..Settings::default()
        };
        let c = RunConfig::resolve(flags.over(file)).unwrap();
        assert_eq!(c.sweep.seed, 9);
        assert_eq!(c.workers, 2);
        assert_eq!(c.window, 14);
    }

    #[test]
    fn fast_mode_defaults() {
        let c = RunConfig::resolve(Settings {
            fast: Some(true),
            ..Settings::default()
        })
        .unwrap();
        assert_eq!(c.sweep.horizons, FAST_HORIZONS.to_vec());
        assert_eq!(c.sweep.training.max_epochs, 100);
        assert!(c.sweep.tied_lstm && c.sweep.surrogate_lr);
        assert_eq!(c.sweep.cells().len(), 72);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |s: Settings| RunConfig::resolve(s).is_err();
        assert!(bad(Settings {
            horizons: Some(vec![31]),
            ..Settings::default()
        }));
        assert!(bad(Settings {
            models: Some(vec!["GRU".into()]),
            ..Settings::default()
        }));
        assert!(bad(Settings {
            mode: Some("nested-ish".into()),
            ..Settings::default()
        }));
    }

    #[test]
    fn toml_keys_parse() {
        let s: Settings = toml::from_str("seed = 3\nfast = true\nhorizons = [1, 2]\nmodels = [\"LR\"]\n").unwrap();
        assert_eq!(s.seed, Some(3));
        assert_eq!(s.horizons, Some(vec![1, 2]));
        assert!(toml::from_str::<Settings>("sed = 3").is_err());
    }
}
