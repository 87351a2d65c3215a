//! On-disk layout of one experiment: its config, an append-only
//! observation log and a snapshot of the suggestion store.

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::store::Store;
use super::Observation;
use crate::engine::ExperimentConfig;
use crate::error::{Error, Result};

const CONFIG_FILE: &str = "experiment.json";
const LOG_FILE: &str = "observations.jsonl";
const STORE_FILE: &str = "store.json";

/// Writes through a temporary file and a rename so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub struct ExperimentDir(pub PathBuf);

impl ExperimentDir {
    pub fn create(root: &Path, id: &str) -> Result<Self> {
        let dir = root.join(id);
        fs::create_dir_all(&dir)?;
        fs::File::create(dir.join(LOG_FILE))?;
        Ok(Self(dir))
    }

    pub fn is_experiment(path: &Path) -> bool {
        path.join(CONFIG_FILE).is_file()
    }

    pub fn write_config(&self, config: &ExperimentConfig) -> Result<()> {
        write_atomic(&self.0.join(CONFIG_FILE), serde_json::to_string_pretty(config)?.as_bytes())
    }

    pub fn write_store(&self, store: &Store) -> Result<()> {
        write_atomic(&self.0.join(STORE_FILE), serde_json::to_string(store)?.as_bytes())
    }

    pub fn append_observation(&self, obs: &Observation) -> Result<()> {
        let mut f = OpenOptions::new().append(true).create(true).open(self.0.join(LOG_FILE))?;
        let mut line = serde_json::to_vec(obs)?;
        line.push(b'\n');
        f.write_all(&line)?;
        f.sync_data()?;
        Ok(())
    }

    pub fn read_config(&self) -> Result<ExperimentConfig> {
        Ok(serde_json::from_str(&fs::read_to_string(self.0.join(CONFIG_FILE))?)?)
    }

    /// The store snapshot, or an empty store when none was written.
    pub fn read_store(&self) -> Result<Store> {
        let path = self.0.join(STORE_FILE);
        if !path.exists() {
            return Ok(Store::default());
        }
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// The observation log. A torn final line from an interrupted append is
    /// ignored.
    pub fn read_log(&self) -> Result<Vec<Observation>> {
        let path = self.0.join(LOG_FILE);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let lines: Vec<String> = BufReader::new(fs::File::open(&path)?).lines().collect::<std::io::Result<_>>()?;
        let mut out = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Observation>(line) {
                Ok(o) => out.push(o),
                Err(e) if i + 1 == lines.len() => {
                    log::warn!("{}: dropping torn last line: {e}", path.display());
                }
                Err(e) => return Err(Error::Data(format!("{}:{}: {e}", path.display(), i + 1))),
            }
        }
        Ok(out)
    }
}
