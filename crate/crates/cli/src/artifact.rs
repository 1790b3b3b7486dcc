//! Inputs with content hashes, artifact emission and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use clustertail::{Error, Model, ModelConfig, RareEventSet, Result};

/// A file read once; parsing and hashing see the same bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Input {
    pub path: PathBuf,
    pub sha256: String,
    #[serde(skip)]
    pub text: String,
}

impl Input {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let sha256 = hex(&Sha256::digest(&bytes));
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        Ok(Input {
            path: path.to_path_buf(),
            sha256,
            text,
        })
    }

    pub fn config(&self) -> Result<ModelConfig> {
        ModelConfig::from_json_str(&self.text)
    }

    /// Loads the model and insists on all structural assumptions.
    pub fn model(&self) -> Result<Model> {
        Model::new_validated(self.config()?)
    }

    pub fn set(&self) -> Result<RareEventSet> {
        RareEventSet::from_json_str(&self.text)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub args: Vec<String>,
    pub config: Option<&'a Input>,
    pub set_file: Option<&'a Input>,
    pub seed: u64,
    pub threads: usize,
    pub version: &'static str,
    pub duration_seconds: f64,
    pub artifacts: Vec<PathBuf>,
}

/// Where artifacts go: `--out` (plus its manifest) or standard output.
#[derive(Debug)]
pub struct Sink {
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(out: Option<PathBuf>, plot: Option<PathBuf>) -> Self {
        Sink {
            out,
            plot,
            written: Vec::new(),
        }
    }

    pub fn emit(&mut self, body: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                fs::write(path, body)?;
                self.written.push(path.clone());
            }
            None => print!("{body}"),
        }
        Ok(())
    }

    pub fn emit_json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.emit(&body)
    }

    pub fn emit_plot(&mut self, svg: &str) -> Result<()> {
        if let Some(path) = &self.plot {
            fs::write(path, svg)?;
            self.written.push(path.clone());
        }
        Ok(())
    }

    /// Writes `<out>.manifest.json` next to the artifact, or a one-line
    /// manifest to standard error when the artifact went to standard output.
    pub fn finish(self, mut manifest: RunManifest<'_>, elapsed: Duration) -> Result<()> {
        manifest.duration_seconds = elapsed.as_secs_f64();
        manifest.artifacts = self.written;
        match self.out {
            Some(out) => {
                let mut name = out.into_os_string();
                name.push(".manifest.json");
                fs::write(PathBuf::from(name), serde_json::to_string_pretty(&manifest)? + "\n")?;
            }
            None => eprintln!("manifest: {}", serde_json::to_string(&manifest)?),
        }
        Ok(())
    }
}
