use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use gecweight::hash::{fnv1a, to_hex};
use serde::Serialize;

/// Provenance record written next to a command's primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// FNV-1a 64 of each input file's bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(RunManifest {
            subcommand: subcommand.to_owned(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(path.display().to_string(), to_hex(fnv1a(&bytes)));
        Ok(())
    }

    pub fn inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
        for p in paths {
            self.input(p)?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes `<primary>.manifest.json` and returns its path.
    pub fn write_next_to(&self, primary: &Path) -> Result<PathBuf> {
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
