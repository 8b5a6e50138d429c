use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one invocation: enough to rerun it and compare outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub argv: Vec<String>,
    pub input_hashes: BTreeMap<String, String>,
    pub output_hashes: BTreeMap<String, String>,
    pub master_seed: Option<u64>,
    pub tool_version: &'static str,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub warnings: BTreeMap<String, u64>,
    #[serde(skip)]
    started: Option<Instant>,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    let mut reader = BufReader::new(File::open(path)?);
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn start(subcommand: &str, argv: Vec<String>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            argv,
            input_hashes: BTreeMap::new(),
            output_hashes: BTreeMap::new(),
            master_seed: None,
            tool_version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            wall_clock_seconds: 0.0,
            warnings: BTreeMap::new(),
            started: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.input_hashes.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn outputs(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            self.output_hashes.insert(p.display().to_string(), sha256_file(p)?);
        }
        Ok(())
    }

    pub fn warn(&mut self, name: &str, count: u64) {
        self.warnings.insert(name.to_string(), count);
    }

    pub fn write(mut self, path: &Path) -> Result<()> {
        if let Some(t) = self.started {
            self.wall_clock_seconds = t.elapsed().as_secs_f64();
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(())
    }
}
