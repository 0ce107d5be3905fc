//! The experiment grid over forecaster, feature-selection method and
//! horizon.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featsel::{select, CandidateScore, Method, Scorer, Selection, SelectionMask};
use crate::harness::cv::{derive_seed, fit_and_score, mc_cv, split_rows, CvProtocol, CvReport, RepResult, SCORE_TIE_TOL};
use crate::harness::store::ResultStore;
use crate::models::grid::{grid_search, GridScore};
use crate::models::{Architecture, ForecasterConfig, ModelKind, TrainingConfig};
use crate::samples::SampleSet;

/// Horizons of a fast sweep.
pub const FAST_HORIZONS: [usize; 6] = [1, 3, 5, 10, 15, 30];

/// Architectures that score PCorr and RFS candidates for MLP and LSTM
/// cells when the linear surrogate is off.
pub const REFERENCE_MLP: Architecture = Architecture::Mlp { hidden1: 16, hidden2: 16 };
pub const REFERENCE_LSTM: Architecture = Architecture::Lstm {
    hidden: 16,
    dense1: 16,
    dense2: 16,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Masks and architectures chosen once on all rows, then scored by CV.
    Paper,
    /// Masks and architectures chosen inside each training split.
    StrictNested,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "paper" => Some(Mode::Paper),
            "strict_nested" | "strict" => Some(Mode::StrictNested),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub models: Vec<ModelKind>,
    pub methods: Vec<Method>,
    pub horizons: Vec<usize>,
    pub seed: u64,
    pub mode: Mode,
    pub n_reps: usize,
    pub train_fraction: f64,
    pub group_by_country: bool,
    /// Score PCorr/RFS candidates with linear regression for every model.
    pub surrogate_lr: bool,
    /// LSTM dense layers share one width in the architecture grid.
    pub tied_lstm: bool,
    pub training: TrainingConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            horizons: (1..=30).collect(),
            seed: 0,
            mode: Mode::Paper,
            n_reps: 10,
            train_fraction: 0.8,
            group_by_country: false,
            surrogate_lr: false,
            tied_lstm: false,
            training: TrainingConfig::default(),
        }
    }
}

impl SweepConfig {
    /// Reduced sweep: six horizons, tied LSTM widths, 100 epochs, and the
    /// linear surrogate for selection.
    pub fn fast() -> Self {
        Self {
            horizons: FAST_HORIZONS.to_vec(),
            surrogate_lr: true,
            tied_lstm: true,
            training: TrainingConfig {
                max_epochs: 100,
                ..TrainingConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn protocol(&self) -> CvProtocol {
        CvProtocol {
            n_reps: self.n_reps,
            train_fraction: self.train_fraction,
            seed: self.seed,
            group_by_country: self.group_by_country,
        }
    }

    pub fn k_max(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.methods.is_empty() || self.horizons.is_empty() {
            return Err(Error::Config("models, methods and horizons must be non-empty".into()));
        }
        if let Some(k) = self.horizons.iter().find(|&&k| !(1..=30).contains(&k)) {
            return Err(Error::Config(format!("horizon {k} outside 1..=30")));
        }
        if self.n_reps == 0 {
            return Err(Error::Config("at least one repetition is needed".into()));
        }
        Ok(())
    }

    /// All cell keys, sorted.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut keys = Vec::new();
        for &model in &self.models {
            for &method in &self.methods {
                for &k in &self.horizons {
                    keys.push(CellKey { model, method, k });
                }
            }
        }
        keys.sort();
        keys.dedup();
        keys
    }

    /// Forecaster used to score selection candidates for `model`'s cells.
    fn scorer_kind(&self, model: ModelKind, method: Method) -> ModelKind {
        match method {
            Method::NoFs | Method::Lasso => ModelKind::Lr,
            _ if self.surrogate_lr => ModelKind::Lr,
            _ => model,
        }
    }

    fn scorer(&self, kind: ModelKind, protocol: CvProtocol) -> Scorer {
        let architecture = match kind {
            ModelKind::Lr => Architecture::Linear,
            ModelKind::Mlp => REFERENCE_MLP,
            ModelKind::Lstm => REFERENCE_LSTM,
        };
        Scorer {
            config: ForecasterConfig::new(architecture, self.training),
            protocol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub model: ModelKind,
    pub method: Method,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: ModelKind,
    pub method: Method,
    pub k: usize,
    /// One mask in paper mode; one per repetition in strict mode.
    pub masks: Vec<SelectionMask>,
    pub architectures: Vec<Architecture>,
    pub selection_scores: Vec<CandidateScore>,
    pub grid: Vec<GridScore>,
    pub report: CvReport,
    pub error: Option<String>,
}

impl CellResult {
    pub fn key(&self) -> CellKey {
        CellKey {
            model: self.model,
            method: self.method,
            k: self.k,
        }
    }

    /// Mean number of selected features over the cell's masks.
    pub fn mean_selected(&self) -> Option<f64> {
        if self.masks.is_empty() {
            return None;
        }
        Some(self.masks.iter().map(|m| m.len() as f64).sum::<f64>() / self.masks.len() as f64)
    }

    fn failed(key: CellKey, error: &Error) -> Self {
        Self {
            model: key.model,
            method: key.method,
            k: key.k,
            masks: Vec::new(),
            architectures: Vec::new(),
            selection_scores: Vec::new(),
            grid: Vec::new(),
            report: CvReport::from_reps(key.k, Vec::new()),
            error: Some(error.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestMethod {
    pub model: ModelKind,
    pub k: usize,
    pub method: Option<Method>,
    pub mean_test: Option<f64>,
    pub mean_train: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub cells: Vec<CellResult>,
    pub best: Vec<BestMethod>,
}

impl SweepResult {
    pub fn from_cells(config: SweepConfig, mut cells: Vec<CellResult>) -> Self {
        cells.sort_by_key(|c| c.key());
        let mut result = Self {
            config,
            cells,
            best: Vec::new(),
        };
        let mut best = Vec::new();
        for &model in &result.config.models {
            for &k in &result.config.horizons {
                let chosen = best_method(&result, model, k).ok();
                best.push(BestMethod {
                    model,
                    k,
                    method: chosen.map(|(m, _)| m),
                    mean_test: chosen.and_then(|(_, c)| c.report.mean_test),
                    mean_train: chosen.and_then(|(_, c)| c.report.mean_train),
                });
            }
        }
        best.sort_by_key(|b| (b.model, b.k));
        result.best = best;
        result
    }

    pub fn cell(&self, key: &CellKey) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.key() == *key)
    }
}

/// The method with the highest mean test r² for `(model, k)`. Invalid
/// cells are skipped; ties within [`SCORE_TIE_TOL`] go to the earlier
/// method in NoFS, PCorr, RFS, Lasso order.
pub fn best_method(result: &SweepResult, model: ModelKind, k: usize) -> Result<(Method, &CellResult)> {
    let mut methods = result.config.methods.clone();
    methods.sort();
    methods.dedup();
    let mut best: Option<(Method, &CellResult, f64)> = None;
    for method in methods {
        let cell = result
            .cell(&CellKey { model, method, k })
            .ok_or_else(|| Error::MissingCells(format!("{model} {method} K={k}")))?;
        if let Some(score) = cell.report.score() {
            if best.is_none_or(|(_, _, b)| score > b + SCORE_TIE_TOL) {
                best = Some((method, cell, score));
            }
        }
    }
    best.map(|(m, c, _)| (m, c)).ok_or(Error::AllCellsFailed)
}

type MaskKey = (ModelKind, Method, usize);

fn selection_seed(seed: u64, method: Method, k: usize) -> u64 {
    derive_seed(seed, &[method as u64, k as u64])
}

fn paper_cell(samples: &SampleSet, config: &SweepConfig, key: CellKey, selection: &Selection) -> Result<CellResult> {
    let protocol = config.protocol();
    let mask = &selection.mask;
    let (architecture, grid, report) = match key.model {
        ModelKind::Lr => {
            let cfg = ForecasterConfig::new(Architecture::Linear, config.training);
            (Architecture::Linear, Vec::new(), mc_cv(samples, mask, &cfg, key.k, &protocol)?)
        }
        kind => {
            let outcome = grid_search(kind, samples, mask, key.k, &config.training, &protocol, config.tied_lstm)?;
            (outcome.best, outcome.scores, outcome.report)
        }
    };
    Ok(CellResult {
        model: key.model,
        method: key.method,
        k: key.k,
        masks: vec![mask.clone()],
        architectures: vec![architecture],
        selection_scores: selection.candidates.clone(),
        grid,
        report,
        error: None,
    })
}

/// Selection and architecture search see only the repetition's training
/// rows; the chosen model is then scored on the held-out rows.
fn strict_cell(samples: &SampleSet, config: &SweepConfig, key: CellKey) -> Result<CellResult> {
    let protocol = config.protocol();
    let groups = protocol.group_by_country.then(|| samples.groups());
    let mut reps = Vec::with_capacity(protocol.n_reps);
    let mut masks = Vec::new();
    let mut architectures = Vec::new();
    for r in 0..protocol.n_reps {
        let seed = protocol.rep_seed(r);
        let (train, test) = split_rows(samples.len(), groups.as_deref(), protocol.train_fraction, seed)?;
        let inner = samples.subset(&train);
        let inner_protocol = protocol.with_seed(derive_seed(seed, &[r as u64]));
        let scorer = config.scorer(config.scorer_kind(key.model, key.method), inner_protocol);
        let mut rep = RepResult {
            seed,
            n_train: train.len(),
            n_test: test.len(),
            train_r2: None,
            test_r2: None,
            epochs: 0,
            error: None,
        };
        let chosen = select(&inner, key.method, key.k, &scorer, selection_seed(inner_protocol.seed, key.method, key.k)).and_then(|sel| {
            let arch = match key.model {
                ModelKind::Lr => Architecture::Linear,
                kind => {
                    grid_search(kind, &inner, &sel.mask, key.k, &config.training, &inner_protocol, config.tied_lstm)?.best
                }
            };
            Ok((sel.mask, arch))
        });
        match chosen {
            Ok((mask, arch)) => {
                let mut training = config.training;
                training.seed = seed;
                match fit_and_score(samples, &mask, &ForecasterConfig::new(arch, training), key.k, &train, &test) {
                    Ok((tr, te, epochs)) => {
                        rep.train_r2 = Some(tr);
                        rep.test_r2 = Some(te);
                        rep.epochs = epochs;
                    }
                    Err(e) if e.is_training_failure() => rep.error = Some(e.to_string()),
                    Err(e) => return Err(e),
                }
                masks.push(mask);
                architectures.push(arch);
            }
            Err(e) if e.is_training_failure() || matches!(e, Error::AllCellsFailed) => rep.error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
        reps.push(rep);
    }
    Ok(CellResult {
        model: key.model,
        method: key.method,
        k: key.k,
        masks,
        architectures,
        selection_scores: Vec::new(),
        grid: Vec::new(),
        report: CvReport::from_reps(key.k, reps),
        error: None,
    })
}

fn recoverable(e: &Error) -> bool {
    e.is_training_failure() || matches!(e, Error::AllCellsFailed)
}

/// Evaluates every configured cell on `workers` threads. Cells already in
/// `store` are reused; new ones are saved as they finish. The result does
/// not depend on the worker count or execution order.
pub fn run_sweep(samples: &SampleSet, config: &SweepConfig, store: Option<&ResultStore>, workers: usize) -> Result<SweepResult> {
    config.validate()?;
    if config.k_max() > samples.k_max {
        return Err(Error::Config(format!(
            "sweep needs horizon {} but the samples stop at {}",
            config.k_max(),
            samples.k_max
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut done = BTreeMap::new();
        let mut pending = Vec::new();
        for key in config.cells() {
            match store.map(|s| s.load(&key)).transpose()?.flatten() {
                Some(cell) => {
                    done.insert(key, cell);
                }
                None => pending.push(key),
            }
        }
        let computed: Vec<CellResult> = match config.mode {
            Mode::Paper => {
                let mut mask_keys: Vec<MaskKey> = pending
                    .iter()
                    .map(|c| (config.scorer_kind(c.model, c.method), c.method, c.k))
                    .collect();
                mask_keys.sort();
                mask_keys.dedup();
                let protocol = config.protocol();
                let selections: BTreeMap<MaskKey, std::result::Result<Selection, String>> = mask_keys
                    .par_iter()
                    .map(|&(kind, method, k)| {
                        let scorer = config.scorer(kind, protocol);
                        match select(samples, method, k, &scorer, selection_seed(config.seed, method, k)) {
                            Ok(sel) => Ok(((kind, method, k), Ok(sel))),
                            Err(e) if recoverable(&e) => Ok(((kind, method, k), Err(e.to_string()))),
                            Err(e) => Err(e),
                        }
                    })
                    .collect::<Result<_>>()?;
                pending
                    .par_iter()
                    .map(|&key| {
                        let cell = match &selections[&(config.scorer_kind(key.model, key.method), key.method, key.k)] {
                            Ok(sel) => match paper_cell(samples, config, key, sel) {
                                Ok(c) => c,
                                Err(e) if recoverable(&e) => CellResult::failed(key, &e),
                                Err(e) => return Err(e),
                            },
                            Err(msg) => CellResult {
                                error: Some(msg.clone()),
                                ..CellResult::failed(key, &Error::AllCellsFailed)
                            },
                        };
                        if let Some(s) = store {
                            s.save(&cell)?;
                        }
                        log::info!("cell {} {} K={} done", key.model, key.method, key.k);
                        Ok(cell)
                    })
                    .collect::<Result<_>>()?
            }
            Mode::StrictNested => pending
                .par_iter()
                .map(|&key| {
                    let cell = match strict_cell(samples, config, key) {
                        Ok(c) => c,
                        Err(e) if recoverable(&e) => CellResult::failed(key, &e),
                        Err(e) => return Err(e),
                    };
                    if let Some(s) = store {
                        s.save(&cell)?;
                    }
                    Ok(cell)
                })
                .collect::<Result<_>>()?,
        };
        let mut cells: Vec<CellResult> = done.into_values().collect();
        cells.extend(computed);
        Ok(SweepResult::from_cells(config.clone(), cells))
    })
}
