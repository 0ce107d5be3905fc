//! A forecaster bundled with the mask and scaler it was trained with, and its
//! versioned on-disk document.

use std::fs;
use std::path::Path;

use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featsel::SelectionMask;
use crate::models::{fit, predict, Architecture, Forecaster, ForecasterConfig, SequenceLayout};
use crate::samples::{SampleSet, Scaler};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedForecaster {
    pub config: ForecasterConfig,
    pub horizon: usize,
    pub mask: SelectionMask,
    /// Over the masked columns; its single target is the horizon's target.
    pub scaler: Scaler,
    pub standardized: bool,
    pub model: Forecaster<f64>,
    pub loss_curve: Vec<f64>,
}

impl TrainedForecaster {
    /// Fits on `rows` of `samples`, restricted to `mask`, for horizon `k`.
    pub fn fit(config: &ForecasterConfig, samples: &SampleSet, mask: &SelectionMask, k: usize, rows: &[usize]) -> Result<Self> {
        mask.check_width(samples.n_features())?;
        if rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let y_all = samples.target(k)?;
        let x = samples.x.select(Axis(0), rows).select(Axis(1), &mask.indices);
        let y: Vec<f64> = rows.iter().map(|&r| y_all[r]).collect();
        let standardized = match config.architecture {
            Architecture::Linear => config.training.standardize_lr,
            _ => true,
        };
        let scaler = if standardized {
            let all: Vec<usize> = (0..rows.len()).collect();
            Scaler::fit(x.view(), &[ndarray::ArrayView1::from(&y)], &all)?
        } else {
            Scaler::identity(mask.len(), 1)
        };
        let z = if standardized { scaler.transform(x.view())? } else { x };
        let yz = Array1::from(scaler.transform_target(0, &y));
        let descriptors: Vec<_> = mask.indices.iter().map(|&i| samples.spec.descriptors[i].clone()).collect();
        let layout = SequenceLayout::from_descriptors(samples.spec.window, &descriptors);
        let outcome = fit(config, z.view(), yz.view(), &layout)?;
        Ok(Self {
            config: *config,
            horizon: k,
            mask: mask.clone(),
            scaler,
            standardized,
            model: outcome.model,
            loss_curve: outcome.loss_curve,
        })
    }

    /// Predictions in original units for full-width feature rows.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.mask.check_width(x.ncols())?;
        let xm = x.select(Axis(1), &self.mask.indices);
        let z = if self.standardized { self.scaler.transform(xm.view())? } else { xm };
        let out = predict(&self.model, z.view())?;
        Ok(Array1::from(self.scaler.inverse_target(0, out.as_slice().expect("contiguous"))))
    }

    pub fn predict_rows(&self, samples: &SampleSet, rows: &[usize]) -> Result<Array1<f64>> {
        self.predict(samples.x.select(Axis(0), rows).view())
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            forecaster: self.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| Error::Config(format!("model document: {e}")))?;
        if header.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(header.format_version));
        }
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Config(format!("model document: {e}")))?;
        Ok(doc.forecaster)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub forecaster: TrainedForecaster,
}
