//! The three forecasters: linear regression, a two-hidden-layer perceptron
//! and an LSTM network, plus training, serialization and architecture
//! search.

pub mod grid;
pub mod lstm;
pub mod mlp;
pub mod pipeline;
pub mod train;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::adam::AdamConfig;
use crate::numerics::linalg::{least_squares, LeastSquares};
use crate::scalar::Scalar;

pub use grid::{architecture_grid, grid_search, select_architecture, GridOutcome};
pub use lstm::{InputSlot, Lstm, SequenceLayout};
pub use mlp::{Mlp, MlpShape};
pub use pipeline::{ModelDocument, TrainedForecaster, MODEL_FORMAT_VERSION};
pub use train::{stopping_rule_holds, train, Differentiable, TrainReport};

/// Hidden-layer widths searched for MLP and LSTM: powers of two in [4, 32].
pub const HIDDEN_SIZES: [usize; 4] = [4, 8, 16, 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "LSTM")]
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lr, ModelKind::Mlp, ModelKind::Lstm];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Mlp => "MLP",
            ModelKind::Lstm => "LSTM",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "linear" => Some(ModelKind::Lr),
            "mlp" => Some(ModelKind::Mlp),
            "lstm" => Some(ModelKind::Lstm),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Architecture {
    #[serde(rename = "LR")]
    Linear,
    #[serde(rename = "MLP")]
    Mlp { hidden1: usize, hidden2: usize },
    #[serde(rename = "LSTM")]
    Lstm { hidden: usize, dense1: usize, dense2: usize },
}

impl Architecture {
    pub fn kind(&self) -> ModelKind {
        match self {
            Architecture::Linear => ModelKind::Lr,
            Architecture::Mlp { .. } => ModelKind::Mlp,
            Architecture::Lstm { .. } => ModelKind::Lstm,
        }
    }

    /// Trainable parameter count for `layout`'s inputs.
    pub fn n_params(&self, layout: &SequenceLayout) -> usize {
        match *self {
            Architecture::Linear => layout.n_inputs() + 1,
            Architecture::Mlp { hidden1, hidden2 } => MlpShape {
                inputs: layout.n_inputs(),
                hidden1,
                hidden2,
            }
            .n_params(),
            Architecture::Lstm { hidden, dense1, dense2 } => lstm::LstmShape {
                steps: layout.steps,
                channels: layout.channels,
                n_static: layout.n_static,
                hidden,
                dense1,
                dense2,
            }
            .n_params(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: usize| HIDDEN_SIZES.contains(&v);
        match *self {
            Architecture::Linear => Ok(()),
            Architecture::Mlp { hidden1, hidden2 } if ok(hidden1) && ok(hidden2) => Ok(()),
            Architecture::Lstm { hidden, dense1, dense2 } if ok(hidden) && ok(dense1) && ok(dense2) => Ok(()),
            other => Err(Error::Config(format!("hidden sizes of {other:?} must be powers of two in [4, 32]"))),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Linear => write!(f, "LR"),
            Architecture::Mlp { hidden1, hidden2 } => write!(f, "MLP({hidden1},{hidden2})"),
            Architecture::Lstm { hidden, dense1, dense2 } => write!(f, "LSTM({hidden};{dense1},{dense2})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Standardize features and target for linear regression as well.
    pub standardize_lr: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 200,
            max_epochs: 600,
            patience: 30,
            seed: 0,
            adam: AdamConfig::default(),
            standardize_lr: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecasterConfig {
    pub architecture: Architecture,
    pub training: TrainingConfig,
}

impl ForecasterConfig {
    pub fn new(architecture: Architecture, training: TrainingConfig) -> Self {
        Self { architecture, training }
    }

    pub fn kind(&self) -> ModelKind {
        self.architecture.kind()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Forecaster<T> {
    Linear(LeastSquares<T>),
    Mlp(Mlp<T>),
    Lstm(Lstm<T>),
}

impl<T: Scalar> Forecaster<T> {
    pub fn params(&self) -> Vec<T> {
        match self {
            Forecaster::Linear(m) => {
                let mut p = m.weights.clone();
                p.push(m.intercept);
                p
            }
            Forecaster::Mlp(m) => m.params.clone(),
            Forecaster::Lstm(m) => m.params.clone(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            Forecaster::Linear(m) => m.weights.len(),
            Forecaster::Mlp(m) => m.shape.inputs,
            Forecaster::Lstm(m) => m.layout.n_inputs(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome<T> {
    pub model: Forecaster<T>,
    pub loss_curve: Vec<f64>,
    pub stopped_early: bool,
}

/// Trains one forecaster on already-masked (and, for MLP/LSTM,
/// standardized) inputs. `layout` describes the columns of `x`.
pub fn fit<T: Scalar>(config: &ForecasterConfig, x: ArrayView2<T>, y: ArrayView1<T>, layout: &SequenceLayout) -> Result<FitOutcome<T>> {
    config.architecture.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {} targets", x.nrows(), y.len())));
    }
    if x.ncols() != layout.n_inputs() {
        return Err(Error::MaskMismatch {
            expected: layout.n_inputs(),
            got: x.ncols(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.training.seed);
    match config.architecture {
        Architecture::Linear => {
            let y: Vec<T> = y.to_vec();
            let m = least_squares(x, &y)?;
            if !m.intercept.is_finite() || m.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch: 0 });
            }
            Ok(FitOutcome {
                model: Forecaster::Linear(m),
                loss_curve: Vec::new(),
                stopped_early: false,
            })
        }
        Architecture::Mlp { hidden1, hidden2 } => {
            let shape = MlpShape {
                inputs: x.ncols(),
                hidden1,
                hidden2,
            };
            let mut m = Mlp::init(shape, &mut rng);
            let report = train(&mut m, x, y, &config.training, &mut rng)?;
            Ok(FitOutcome {
                model: Forecaster::Mlp(m),
                loss_curve: report.loss_curve,
                stopped_early: report.stopped_early,
            })
        }
        Architecture::Lstm { hidden, dense1, dense2 } => {
            let mut m = Lstm::init(layout.clone(), hidden, dense1, dense2, &mut rng);
            let report = train(&mut m, x, y, &config.training, &mut rng)?;
            Ok(FitOutcome {
                model: Forecaster::Lstm(m),
                loss_curve: report.loss_curve,
                stopped_early: report.stopped_early,
            })
        }
    }
}

/// Deterministic forward pass on inputs laid out like the training inputs.
pub fn predict<T: Scalar>(model: &Forecaster<T>, x: ArrayView2<T>) -> Result<Array1<T>> {
    match model {
        Forecaster::Linear(m) => m.predict(x),
        Forecaster::Mlp(m) => m.predict(x),
        Forecaster::Lstm(m) => m.predict(x),
    }
}
