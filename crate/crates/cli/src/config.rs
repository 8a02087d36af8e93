//! The `--config` TOML file.
//!
//! ```toml
//! seed = 7
//! workers = 2
//!
//! [curate]
//! cap_per_level = 5000
//! cap_mode = "reservoir"
//!
//! [toy-train]
//! epochs = 12
//! mask_prob = 0.2
//! ```
//!
//! Each table holds the keys of the matching subcommand; unknown tables
//! and keys are rejected. Flags take precedence over the file.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::CliError;

const TABLES: [&str; 11] = [
    "label",
    "curate",
    "train-classifier",
    "predict",
    "score",
    "ter",
    "bleu",
    "toy-gen",
    "toy-train",
    "toy-eval",
    "report",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    table: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.to_owned(), message: e.to_string() })?;
        let parse = |message: String| CliError::Parse { path: path.to_owned(), message };
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse(e.to_string()))?;
        let seed = match table.remove("seed") {
            None => None,
            Some(v) => Some(
                u64::try_from(v.as_integer().ok_or_else(|| parse("`seed` must be an integer".into()))?)
                    .map_err(|_| parse("`seed` must be non-negative".into()))?,
            ),
        };
        let workers = match table.remove("workers") {
            None => None,
            Some(v) => Some(
                usize::try_from(v.as_integer().ok_or_else(|| parse("`workers` must be an integer".into()))?)
                    .map_err(|_| parse("`workers` must be non-negative".into()))?,
            ),
        };
        for (k, v) in &table {
            if !TABLES.contains(&k.as_str()) || !v.is_table() {
                return Err(parse(format!("unknown key `{k}`")));
            }
        }
        Ok(FileConfig { seed, workers, table })
    }

    /// The table for `name`, or `T::default()` when absent.
    pub fn section<T: DeserializeOwned + Default>(&self, name: &str, path: &Path) -> Result<T, CliError> {
        match self.table.get(name) {
            None => Ok(T::default()),
            Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| CliError::Parse {
                path: path.to_owned(),
                message: format!("[{name}]: {e}"),
            }),
        }
    }
}
