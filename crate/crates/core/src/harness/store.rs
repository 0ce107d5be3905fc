//! One JSON document per sweep cell, so an interrupted sweep resumes where it
//! stopped.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::sweep::{CellKey, CellResult, SweepConfig};

const CONFIG_FILE: &str = "sweep_config.json";
const CELL_DIR: &str = "cells";

#[derive(Clone, Debug)]
pub struct ResultStore {
    root: PathBuf,
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl ResultStore {
    /// Opens (or creates) a store for `config`. A store written by a
    /// different configuration is refused.
    pub fn open(root: impl Into<PathBuf>, config: &SweepConfig) -> Result<Self> {
        let root = root.into();
        let cells = root.join(CELL_DIR);
        fs::create_dir_all(&cells).map_err(|e| Error::io(&cells, e))?;
        let path = root.join(CONFIG_FILE);
        let text = serde_json::to_string_pretty(config).expect("config serializes");
        if path.exists() {
            let existing = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let stored: SweepConfig = serde_json::from_str(&existing).map_err(|e| Error::Json {
                path: path.clone(),
                source: e,
            })?;
            if &stored != config {
                return Err(Error::Config(format!(
                    "{} holds results of a different sweep configuration",
                    root.display()
                )));
            }
        } else {
            write_atomic(&path, &text)?;
        }
        Ok(Self { root })
    }

    /// Opens an existing store without checking its configuration.
    pub fn open_existing(root: impl Into<PathBuf>) -> Result<(Self, SweepConfig)> {
        let root = root.into();
        let path = root.join(CONFIG_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let config = serde_json::from_str(&text).map_err(|e| Error::Json { path, source: e })?;
        Ok((Self { root }, config))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `cells/{model}_{method}_K{k}.json`, e.g. `cells/lstm_pcorr_K15.json`.
    pub fn cell_path(&self, key: &CellKey) -> PathBuf {
        self.root.join(CELL_DIR).join(format!("{}_{}_K{}.json", key.model.slug(), key.method.slug(), key.k))
    }

    pub fn load(&self, key: &CellKey) -> Result<Option<CellResult>> {
        let path = self.cell_path(key);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        match serde_json::from_str::<CellResult>(&text) {
            Ok(cell) if cell.key() == *key => Ok(Some(cell)),
            // a torn or foreign file is recomputed
            _ => Ok(None),
        }
    }

    pub fn save(&self, cell: &CellResult) -> Result<()> {
        let text = serde_json::to_string_pretty(cell).expect("cells serialize");
        write_atomic(&self.cell_path(&cell.key()), &text)
    }

    /// Every readable cell document, sorted by key.
    pub fn load_all(&self) -> Result<Vec<CellResult>> {
        let dir = self.root.join(CELL_DIR);
        let mut cells = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let cell: CellResult = serde_json::from_str(&text).map_err(|e| Error::Json { path, source: e })?;
            cells.push(cell);
        }
        cells.sort_by_key(|c| c.key());
        Ok(cells)
    }
}
