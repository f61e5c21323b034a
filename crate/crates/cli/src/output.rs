//! Output files: a `# key = value` provenance header, then tab-separated rows.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const TOOL: &str = concat!("spdt ", env!("CARGO_PKG_VERSION"));

/// What every output header records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    /// `None` for commands that draw no random numbers.
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn pairs(&self) -> Vec<(String, String)> {
        vec![
            ("tool".into(), TOOL.into()),
            ("config_hash".into(), self.config_hash.clone()),
            ("seed".into(), self.seed.map_or_else(|| "none".into(), |s| s.to_string())),
        ]
    }

    pub fn header(&self) -> String {
        self.pairs().iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
    }
}

/// A table being assembled in memory.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(prov: &Provenance, columns: &[&str]) -> Self {
        let mut text = prov.header();
        text.push_str(&columns.join("\t"));
        text.push('\n');
        Table { text }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: std::fmt::Display,
    {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push('\t');
            }
            first = false;
            let _ = write!(self.text, "{c}");
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Floats printed with enough digits to round-trip.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "nan".into()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), num)
}

/// Files written by one command, in order.
#[derive(Default)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

impl Written {
    pub fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path.clone());
        Ok(path)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
