//! Run configuration. Values come from command-line flags, then the TOML
//! config file, then built-in defaults.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use protclust::alignment::{
    AlignmentParams, SubstitutionMatrix, Thresholds, DEFAULT_GAP_EXTEND, DEFAULT_GAP_OPEN,
};
use protclust::dist::controller::DEFAULT_BATCH_SIZE;
use protclust::sequence::SequenceStore;
use protclust::shared::{default_threads, DEFAULT_GRANULARITY};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const BUILTIN_MATRIX: &str = "pam250";
pub const DEFAULT_WORKER_WAIT_SECS: u64 = 300;
pub const DEFAULT_SEED: u64 = 1;

/// One layer of optional settings. The config file deserializes straight
/// into this; flags are converted into it.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub input: Option<Vec<PathBuf>>,
    /// `pam250` or a path to a matrix file.
    pub matrix: Option<String>,
    pub gap_open: Option<i32>,
    pub gap_extend: Option<i32>,
    pub similarity: Option<i32>,
    pub full_merge: Option<i32>,
    pub max_uncovered: Option<usize>,
    pub threads: Option<usize>,
    pub granularity: Option<u64>,
    pub batch_size: Option<usize>,
    pub listen: Option<String>,
    pub connect: Option<String>,
    pub worker_wait_secs: Option<u64>,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), msg: e.to_string() })
    }

    /// Fills every unset field from `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            input: self.input.or(lower.input),
            matrix: self.matrix.or(lower.matrix),
            gap_open: self.gap_open.or(lower.gap_open),
            gap_extend: self.gap_extend.or(lower.gap_extend),
            similarity: self.similarity.or(lower.similarity),
            full_merge: self.full_merge.or(lower.full_merge),
            max_uncovered: self.max_uncovered.or(lower.max_uncovered),
            threads: self.threads.or(lower.threads),
            granularity: self.granularity.or(lower.granularity),
            batch_size: self.batch_size.or(lower.batch_size),
            listen: self.listen.or(lower.listen),
            connect: self.connect.or(lower.connect),
            worker_wait_secs: self.worker_wait_secs.or(lower.worker_wait_secs),
            seed: self.seed.or(lower.seed),
        }
    }
}

/// Fully resolved configuration, embedded in every run report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: String,
    pub config_file: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub thresholds: Thresholds,
    pub matrix: String,
    pub gap_open: i32,
    pub gap_extend: i32,
    pub threads: usize,
    pub granularity: u64,
    pub batch_size: usize,
    pub listen: Option<String>,
    pub connect: Option<String>,
    pub worker_wait_secs: u64,
    pub seed: u64,
    pub outputs: BTreeMap<String, PathBuf>,
}

impl RunConfig {
    pub fn resolve(mode: &str, flags: Settings, config_file: Option<&Path>) -> Result<Self> {
        let file = config_file.map(Settings::load).transpose()?.unwrap_or_default();
        let s = flags.over(file);
        let defaults = Thresholds::default();
        let cfg = RunConfig {
            mode: mode.to_string(),
            config_file: config_file.map(Path::to_path_buf),
            inputs: s.input.unwrap_or_default(),
            thresholds: Thresholds {
                similarity: s.similarity.unwrap_or(defaults.similarity),
                full_merge: s.full_merge.unwrap_or(defaults.full_merge),
                max_uncovered: s.max_uncovered.unwrap_or(defaults.max_uncovered),
            },
            matrix: s.matrix.unwrap_or_else(|| BUILTIN_MATRIX.to_string()),
            gap_open: s.gap_open.unwrap_or(DEFAULT_GAP_OPEN),
            gap_extend: s.gap_extend.unwrap_or(DEFAULT_GAP_EXTEND),
            threads: s.threads.unwrap_or_else(default_threads),
            granularity: s.granularity.unwrap_or(DEFAULT_GRANULARITY),
            batch_size: s.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
            listen: s.listen,
            connect: s.connect,
            worker_wait_secs: s.worker_wait_secs.unwrap_or(DEFAULT_WORKER_WAIT_SECS),
            seed: s.seed.unwrap_or(DEFAULT_SEED),
            outputs: BTreeMap::new(),
        };
        cfg.thresholds.validate()?;
        if cfg.threads == 0 {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        if cfg.granularity == 0 {
            return Err(CliError::Usage("granularity must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn with_output(mut self, name: &str, path: &Path) -> Self {
        self.outputs.insert(name.to_string(), path.to_path_buf());
        self
    }

    pub fn params(&self) -> Result<AlignmentParams> {
        let matrix = if self.matrix.eq_ignore_ascii_case(BUILTIN_MATRIX) {
            SubstitutionMatrix::pam250()
        } else {
            SubstitutionMatrix::load(&self.matrix)?
        };
        Ok(AlignmentParams::new(matrix, self.gap_open, self.gap_extend)?)
    }

    /// Reads and concatenates all input FASTA files.
    pub fn load_store(&self) -> Result<SequenceStore> {
        if self.inputs.is_empty() {
            return Err(CliError::Usage("no input given (use --input or `input` in the config file)".into()));
        }
        let mut text = Vec::new();
        for path in &self.inputs {
            File::open(path).and_then(|mut f| f.read_to_end(&mut text)).map_err(|e| CliError::file(path, e))?;
            if !text.ends_with(b"\n") {
                text.push(b'\n');
            }
        }
        Ok(SequenceStore::read_fasta(&text[..])?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "threads = 3\ngap_open = 20\nsimilarity = 200\n").unwrap();
        let flags = Settings { threads: Some(5), ..Settings::default() };
        let cfg = RunConfig::resolve("cluster", flags, Some(&path)).unwrap();
        assert_eq!(cfg.threads, 5);
        assert_eq!(cfg.gap_open, 20);
        assert_eq!(cfg.thresholds.similarity, 200);
        assert_eq!(cfg.thresholds.full_merge, 250);
        assert_eq!(cfg.gap_extend, DEFAULT_GAP_EXTEND);
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::resolve("cluster", Settings::default(), None).unwrap();
        assert_eq!(cfg.thresholds, Thresholds { similarity: 181, full_merge: 250, max_uncovered: 15 });
        assert_eq!(cfg.threads, default_threads());
        assert_eq!(cfg.matrix, "pam250");
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "thread = 3\n").unwrap();
        assert!(matches!(RunConfig::resolve("cluster", Settings::default(), Some(&path)), Err(CliError::Config { .. })));
        let flags = Settings { full_merge: Some(100), ..Settings::default() };
        assert!(RunConfig::resolve("cluster", flags, None).is_err());
    }
}
