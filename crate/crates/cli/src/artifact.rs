//! Output files. Every artifact carries the config hash and seed.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub data: T,
}

pub struct OutDir {
    pub dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
}

impl OutDir {
    pub fn create(dir: PathBuf, config_hash: String, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutDir {
            dir,
            config_hash,
            seed,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV with a leading `#` provenance line.
    pub fn write_csv(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(name);
        let text = format!(
            "# config_hash={} seed={}\n{body}",
            self.config_hash, self.seed
        );
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, kind: &str, data: T) -> Result<PathBuf> {
        let path = self.path(name);
        let a = Artifact {
            kind: kind.to_string(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            data,
        };
        let text = serde_json::to_string_pretty(&a)?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// A previous artifact of this kind written under the same config and seed.
    pub fn reusable<T: DeserializeOwned>(&self, name: &str, kind: &str) -> Option<T> {
        let a: Artifact<T> = read_json(&self.path(name)).ok()?;
        (a.kind == kind && a.config_hash == self.config_hash && a.seed == self.seed)
            .then_some(a.data)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
