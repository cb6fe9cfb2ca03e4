//! JSON run configuration. Every field is optional in the file; command-line
//! flags override whatever the file sets.
//!
//! ```json
//! {
//!   "data": { "dataset": "mnist", "grouping": "three-five", "features": "compressed",
//!             "train_size": 5000, "val_size": 2000, "test_size": null, "split_seed": 0 },
//!   "model": "ttn", "scheme": "per-qubit", "ancillas": 1, "p": 0.0,
//!   "dephase_data_layer": true, "seed": 0,
//!   "epochs": 30, "batch_size": 250, "learning_rate": null, "init_std": null,
//!   "p_grid": [0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0], "k_list": [0, 1, 2], "runs": 5
//! }
//! ```
//!
//! `learning_rate` and `init_std` default to the tabulated values for the
//! dataset, model, ancilla count and rate.

use std::fs;
use std::path::Path;

use dtnml::data::DatasetSpec;
use dtnml::train::P_GRID;
use dtnml::{AncillaScheme, Error, ModelKind};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DatasetSpec,
    pub model: ModelKind,
    pub scheme: AncillaScheme,
    pub ancillas: usize,
    pub p: f64,
    pub dephase_data_layer: bool,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: Option<f64>,
    pub init_std: Option<f64>,
    pub p_grid: Vec<f64>,
    pub k_list: Vec<usize>,
    pub runs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DatasetSpec::default(),
            model: ModelKind::Ttn,
            scheme: AncillaScheme::PerQubit,
            ancillas: 0,
            p: 0.0,
            dephase_data_layer: true,
            seed: 0,
            epochs: 30,
            batch_size: 250,
            learning_rate: None,
            init_std: None,
            p_grid: P_GRID.to_vec(),
            k_list: vec![0, 1, 2],
            runs: 5,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
        }
    }
}
