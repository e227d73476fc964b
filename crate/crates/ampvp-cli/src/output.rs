//! Result files: CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use ampvp::montecarlo::SummaryStats;
use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// Full-precision float cell.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// An output directory that refuses to overwrite unless forced.
pub struct OutDir {
    root: PathBuf,
    force: bool,
    written: Vec<String>,
}

impl OutDir {
    pub fn new(root: &Path, force: bool) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        let out = Self { root: root.to_path_buf(), force, written: Vec::new() };
        out.check(MANIFEST)?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn check(&self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() && !self.force {
            bail!("{} already exists; pass --force to overwrite", p.display());
        }
        Ok(p)
    }

    /// Reserves `name` for a file written by someone else (a plot backend).
    pub fn claim(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.check(name)?;
        self.written.push(name.to_string());
        Ok(p)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.check(name)?;
        fs::write(&p, bytes).with_context(|| format!("cannot write {}", p.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.write(name, &bytes)
    }

    /// The `(experiment, n, k_or_avg, psi, empirical, stderr, theory, zscore)` table.
    pub fn summary(&mut self, name: &str, stats: &[SummaryStats]) -> Result<()> {
        let rows = stats.iter().map(|s| {
            vec![
                s.experiment.clone(),
                s.n.to_string(),
                s.target.clone(),
                s.psi.clone(),
                num(s.mean),
                opt(s.stderr),
                num(s.theory),
                opt(s.zscore),
            ]
        });
        self.csv(name, &["experiment", "n", "k_or_avg", "psi", "empirical", "stderr", "theory", "zscore"], rows)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

#[derive(Serialize)]
pub struct Seeds {
    pub base_seed: Option<u64>,
    pub count: Option<usize>,
    pub rule: &'static str,
}

impl Seeds {
    pub fn new(base_seed: u64, count: usize) -> Self {
        Self { base_seed: Some(base_seed), count: Some(count), rule: "replicate r uses base_seed xor r" }
    }

    pub fn none() -> Self {
        Self { base_seed: None, count: None, rule: "deterministic; no sampling" }
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    config: &'a C,
    seeds: Seeds,
    pass: Option<bool>,
    outputs: Vec<String>,
}

/// Writes `manifest.json` naming the effective config, its hash, the seeds and every output.
pub fn write_manifest<C: Serialize>(out: &mut OutDir, command: &str, config: &C, seeds: Seeds, pass: Option<bool>) -> Result<()> {
    let canonical = serde_json::to_vec(config)?;
    let config_sha256 = Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect();
    let manifest = Manifest {
        command,
        version: ampvp::VERSION,
        config_sha256,
        config,
        seeds,
        pass,
        outputs: out.written().to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    out.write(MANIFEST, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_overwrite_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::new(dir.path(), false).unwrap();
        out.write("a.csv", b"x").unwrap();
        assert!(out.write("a.csv", b"y").is_err());
        let mut forced = OutDir::new(dir.path(), true).unwrap();
        forced.write("a.csv", b"y").unwrap();
        assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), b"y");
    }

    #[test]
    fn existing_manifest_blocks_new_run() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST), "{}").unwrap();
        assert!(OutDir::new(dir.path(), false).is_err());
        assert!(OutDir::new(dir.path(), true).is_ok());
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
