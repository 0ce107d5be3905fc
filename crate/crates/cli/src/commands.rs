//! The five subcommands. Every output is plain delimited text or JSON with
//! no timestamps, so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use epiforecast::featsel::{select, Method, Scorer};
use epiforecast::harness::sweep::{REFERENCE_LSTM, REFERENCE_MLP};
use epiforecast::harness::{
    best_method, country_trace, run_sweep, BestMethod, CellKey, CellResult, ResultStore, SweepConfig, SweepResult, TraceModel,
};
use epiforecast::ingest::{country_file_stem, load_static_csv, load_timeseries_csv, merge_and_clean, MergeOptions, Panel, SeriesKind};
use epiforecast::models::{Architecture, ForecasterConfig, ModelKind, MODEL_FORMAT_VERSION};
use epiforecast::numerics::correlation_matrix;
use epiforecast::samples::build_samples;
use epiforecast::Error;

use crate::config::RunConfig;
use crate::error::CliError;

/// Version of the summary document layout.
pub const SUMMARY_FORMAT_VERSION: u32 = 1;

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sweep_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("sweep")
}

#[derive(Serialize)]
struct IngestReport<'a> {
    countries: &'a [String],
    days: usize,
    first_date: Option<String>,
    last_date: Option<String>,
    static_features: &'a [String],
    dropped_countries: &'a [(String, String)],
    dropped_features: &'a [String],
    warnings: &'a [String],
}

/// Loads, merges and exports the panel; returns it with the report path.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<(Panel, PathBuf), CliError> {
    let need = |p: &Option<PathBuf>, key: &str| {
        p.clone()
            .ok_or_else(|| CliError::Usage(format!("ingest needs `{key}` (file key or --{key})")))
    };
    let c = load_timeseries_csv(need(&cfg.confirmed, "confirmed")?, SeriesKind::Confirmed)?;
    let d = load_timeseries_csv(need(&cfg.deaths, "deaths")?, SeriesKind::Deaths)?;
    let r = load_timeseries_csv(need(&cfg.recovered, "recovered")?, SeriesKind::Recovered)?;
    let statics = cfg
        .statics
        .iter()
        .map(|p| load_static_csv(p, false))
        .collect::<Result<Vec<_>, _>>()?;
    let options = MergeOptions {
        start: cfg.start_date,
        end: cfg.end_date,
    };
    let (panel, report) = merge_and_clean(&c, &d, &r, &statics, &options)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    panel.export(&cfg.panel)?;
    let doc = IngestReport {
        countries: &report.countries,
        days: panel.len_days(),
        first_date: panel.dates.first().map(|d| d.to_string()),
        last_date: panel.dates.last().map(|d| d.to_string()),
        static_features: &panel.static_names,
        dropped_countries: &report.dropped_countries,
        dropped_features: &report.dropped_features,
        warnings: &report.warnings,
    };
    let path = cfg.out.join("ingest_report.json");
    write_file(&path, &(serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"))?;
    Ok((panel, path))
}

pub fn load_panel(cfg: &RunConfig) -> Result<Panel, CliError> {
    if !cfg.panel.join("statics.csv").exists() {
        return Err(CliError::Data(format!(
            "no ingested panel at {}; run `epiforecast ingest` first",
            cfg.panel.display()
        )));
    }
    Ok(Panel::import(&cfg.panel)?)
}

/// Writes `heatmap/correlation.csv` (square matrix with a label column)
/// and `heatmap/labels.txt`.
pub fn cmd_heatmap(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let panel = load_panel(cfg)?;
    let (labels, corr) = if cfg.statics_only {
        let x = Array2::from_shape_fn((panel.countries.len(), panel.static_names.len()), |(i, j)| panel.countries[i].statics[j]);
        (panel.static_names.clone(), correlation_matrix(x.view())?)
    } else {
        let samples = build_samples(&panel, cfg.sweep.k_max(), cfg.window)?;
        (samples.spec.names(), correlation_matrix(samples.x.view())?)
    };
    let mut text = String::from("feature");
    for l in &labels {
        text.push(',');
        text.push_str(&csv_field(l));
    }
    text.push('\n');
    for (i, l) in labels.iter().enumerate() {
        text.push_str(&csv_field(l));
        for j in 0..labels.len() {
            let _ = write!(text, ",{}", corr.values[[i, j]]);
        }
        text.push('\n');
    }
    let dir = cfg.out.join("heatmap");
    write_file(&dir.join("labels.txt"), &(labels.join("\n") + "\n"))?;
    let path = dir.join("correlation.csv");
    write_file(&path, &text)?;
    Ok(path)
}

fn curve_csv(result: &SweepResult, model: ModelKind, method: Method) -> String {
    let mut text = String::from("k,mean_train,sd_train,mean_test,sd_test,failures,valid,n_selected\n");
    for &k in &result.config.horizons {
        if let Some(c) = result.cell(&CellKey { model, method, k }) {
            let r = &c.report;
            let _ = writeln!(
                text,
                "{k},{},{},{},{},{},{},{}",
                opt(r.mean_train),
                opt(r.sd_train),
                opt(r.mean_test),
                opt(r.sd_test),
                r.failures,
                r.valid,
                opt(c.mean_selected())
            );
        }
    }
    text
}

fn best_csv(best: &[BestMethod]) -> String {
    let mut text = String::from("model,k,method,mean_train,mean_test\n");
    for b in best {
        let method = b.method.map(|m| m.label()).unwrap_or("");
        let _ = writeln!(text, "{},{},{method},{},{}", b.model, b.k, opt(b.mean_train), opt(b.mean_test));
    }
    text
}

fn counts_csv(result: &SweepResult) -> String {
    let mut text = String::from("model,method,k,n_selected\n");
    for c in &result.cells {
        let _ = writeln!(text, "{},{},{},{}", c.model, c.method, c.k, opt(c.mean_selected()));
    }
    text
}

/// Plot-data files derived from a sweep result.
pub fn write_sweep_outputs(dir: &Path, result: &SweepResult, window: usize, n_statics: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for &model in &result.config.models {
        for &method in &result.config.methods {
            let path = dir.join("curves").join(format!("{}_{}.csv", model.slug(), method.slug()));
            write_file(&path, &curve_csv(result, model, method))?;
            written.push(path);
        }
    }
    let path = dir.join("best_methods.csv");
    write_file(&path, &best_csv(&result.best))?;
    written.push(path);
    let path = dir.join("selected_counts.csv");
    write_file(&path, &counts_csv(result))?;
    written.push(path);
    let spec = epiforecast::samples::FeatureSpec::new(window, n_statics);
    for c in &result.cells {
        if let Some(mask) = c.masks.first() {
            let path = dir.join("masks").join(format!("{}_{}_K{}.txt", c.model.slug(), c.method.slug(), c.k));
            write_file(&path, &mask.to_text(&spec))?;
        }
    }
    Ok(written)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepResult, CliError> {
    let panel = load_panel(cfg)?;
    let samples = build_samples(&panel, cfg.sweep.k_max(), cfg.window)?;
    for c in &samples.dropped {
        log::warn!("{c} has too little history for K={} and was left out", cfg.sweep.k_max());
    }
    let dir = sweep_dir(cfg);
    let store = ResultStore::open(&dir, &cfg.sweep)?;
    let result = run_sweep(&samples, &cfg.sweep, Some(&store), cfg.workers)?;
    write_sweep_outputs(&dir, &result, cfg.window, &panel.static_names)?;
    Ok(result)
}

fn reference_architecture(model: ModelKind) -> Architecture {
    match model {
        ModelKind::Lr => Architecture::Linear,
        ModelKind::Mlp => REFERENCE_MLP,
        ModelKind::Lstm => REFERENCE_LSTM,
    }
}

/// Writes `trace/<country>_K<k>.csv` with columns `date,truth,<models…>`.
pub fn cmd_trace(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let country = cfg
        .country
        .clone()
        .ok_or_else(|| CliError::Usage("trace needs `country` (file key or --country)".into()))?;
    let panel = load_panel(cfg)?;
    let k = cfg.horizon;
    let samples = build_samples(&panel, k, cfg.window)?;
    let stored = match ResultStore::open_existing(sweep_dir(cfg)) {
        Ok((store, sweep_cfg)) => Some(SweepResult::from_cells(sweep_cfg, store.load_all()?)),
        Err(_) => None,
    };
    let mut models = Vec::new();
    for &model in &cfg.sweep.models {
        let from_sweep: Option<&CellResult> = stored.as_ref().and_then(|r| {
            let method = cfg.trace_method.or_else(|| best_method(r, model, k).ok().map(|(m, _)| m))?;
            r.cell(&CellKey { model, method, k }).filter(|c| !c.masks.is_empty())
        });
        let mut training = cfg.sweep.training;
        training.seed = cfg.sweep.seed;
        let tm = match from_sweep {
            Some(cell) if cell.masks[0].n_total == samples.n_features() => TraceModel {
                config: ForecasterConfig::new(cell.architectures[0], training),
                mask: cell.masks[0].clone(),
            },
            _ => {
                let method = cfg.trace_method.unwrap_or(Method::NoFs);
                let scorer_arch = if cfg.sweep.surrogate_lr || model == ModelKind::Lr {
                    Architecture::Linear
                } else {
                    reference_architecture(model)
                };
                let scorer = Scorer {
                    config: ForecasterConfig::new(scorer_arch, cfg.sweep.training),
                    protocol: cfg.sweep.protocol(),
                };
                let selection = select(&samples, method, k, &scorer, cfg.sweep.seed)?;
                TraceModel {
                    config: ForecasterConfig::new(reference_architecture(model), training),
                    mask: selection.mask,
                }
            }
        };
        models.push(tm);
    }
    let trace = country_trace(&panel, &samples, &country, k, &models)?;
    let mut text = String::from("date,truth");
    for s in &trace.series {
        let _ = write!(text, ",{}", s.model);
    }
    text.push('\n');
    for (i, date) in trace.dates.iter().enumerate() {
        let _ = write!(text, "{date},{}", trace.truth[i]);
        for s in &trace.series {
            let _ = write!(text, ",{}", s.predictions[i]);
        }
        text.push('\n');
    }
    let path = cfg.out.join("trace").join(format!("{}_K{k}.csv", country_file_stem(&country)));
    write_file(&path, &text)?;
    Ok(path)
}

#[derive(Serialize)]
struct CellSummary {
    model: ModelKind,
    method: Method,
    k: usize,
    mean_train: Option<f64>,
    sd_train: Option<f64>,
    mean_test: Option<f64>,
    sd_test: Option<f64>,
    failures: usize,
    valid: bool,
    n_selected: Option<f64>,
    architecture: Option<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: &'static str,
    version: &'static str,
    summary_format: u32,
    model_format: u32,
    config_sha256: String,
    seed: u64,
    config: &'a SweepConfig,
    n_cells: usize,
    cells: Vec<CellSummary>,
    best: &'a [BestMethod],
}

/// SHA-256 of the configuration's canonical JSON.
pub fn config_hash(config: &SweepConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

fn table(result: &SweepResult, model: ModelKind) -> String {
    let mut text = format!("{model}: mean test r2 (train in brackets)\n");
    let _ = write!(text, "{:>4}", "K");
    for m in &result.config.methods {
        let _ = write!(text, " {:>20}", m.label());
    }
    text.push('\n');
    for &k in &result.config.horizons {
        let _ = write!(text, "{k:>4}");
        for &method in &result.config.methods {
            let cell = result.cell(&CellKey { model, method, k });
            let entry = match cell.map(|c| (&c.report, c.report.valid)) {
                Some((r, true)) => format!("{:.4} ({:.4})", r.mean_test.unwrap_or(f64::NAN), r.mean_train.unwrap_or(f64::NAN)),
                Some(_) => "failed".to_string(),
                None => "-".to_string(),
            };
            let _ = write!(text, " {entry:>20}");
        }
        text.push('\n');
    }
    text
}

/// Writes `report/summary.json` and `report/summary.txt`.
pub fn cmd_report(cfg: &RunConfig) -> Result<(PathBuf, usize), CliError> {
    let dir = sweep_dir(cfg);
    let (store, sweep_cfg) = ResultStore::open_existing(&dir)
        .map_err(|_| CliError::Data(format!("no sweep results under {}; run `epiforecast sweep` first", dir.display())))?;
    let cells = store.load_all()?;
    if cells.is_empty() {
        return Err(CliError::Data(format!("results directory {} holds no cells", dir.display())));
    }
    let result = SweepResult::from_cells(sweep_cfg, cells);
    let summary = Summary {
        tool: "epiforecast",
        version: env!("CARGO_PKG_VERSION"),
        summary_format: SUMMARY_FORMAT_VERSION,
        model_format: MODEL_FORMAT_VERSION,
        config_sha256: config_hash(&result.config),
        seed: result.config.seed,
        config: &result.config,
        n_cells: result.cells.len(),
        cells: result
            .cells
            .iter()
            .map(|c| CellSummary {
                model: c.model,
                method: c.method,
                k: c.k,
                mean_train: c.report.mean_train,
                sd_train: c.report.sd_train,
                mean_test: c.report.mean_test,
                sd_test: c.report.sd_test,
                failures: c.report.failures,
                valid: c.report.valid,
                n_selected: c.mean_selected(),
                architecture: c.architectures.first().map(|a| a.to_string()),
                error: c.error.clone(),
            })
            .collect(),
        best: &result.best,
    };
    let out = cfg.out.join("report");
    let json_path = out.join("summary.json");
    write_file(&json_path, &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    let mut text = format!(
        "epiforecast {} | config sha256 {} | seed {} | {} cells\n\n",
        env!("CARGO_PKG_VERSION"),
        summary.config_sha256,
        result.config.seed,
        result.cells.len()
    );
    for &model in &result.config.models {
        text.push_str(&table(&result, model));
        text.push('\n');
    }
    text.push_str("best method per model and horizon\n");
    text.push_str(&best_csv(&result.best));
    write_file(&out.join("summary.txt"), &text)?;
    Ok((json_path, result.cells.len()))
}
