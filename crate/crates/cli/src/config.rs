//! Config file layering and output provenance.
//!
//! A config file is TOML with an optional top-level `seed` and one table per
//! command (`[evaluate]`, `[rank]`, `[niqe.train]`, `[study.plan]`, ...). Keys
//! mirror the long flag names with `-` replaced by `_`. Flags win over the
//! file. Relative paths in the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, io_at, runtime, Result};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const SECTIONS: [&str; 6] = ["evaluate", "rank", "niqe", "study", "analyze", "synth"];

pub trait Layered: Sized {
    /// Takes every value from `file` that is unset in `self`.
    fn fill_from(&mut self, file: Self);
    /// Resolves relative path values against `base`.
    fn rebase(&mut self, base: &Path);
}

macro_rules! layered {
    ($ty:ty { $($field:ident),* $(,)? } paths { $($p:ident),* $(,)? }) => {
        impl $crate::config::Layered for $ty {
            fn fill_from(&mut self, file: Self) {
                $(if self.$field.is_none() {
                    self.$field = file.$field;
                })*
            }

            #[allow(unused_variables)]
            fn rebase(&mut self, base: &std::path::Path) {
                $(if let Some(p) = self.$p.as_mut() {
                    *p = base.join(&*p);
                })*
            }
        }
    };
}
pub(crate) use layered;

pub struct ConfigFile {
    root: toml::Table,
    base: PathBuf,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        let root: toml::Table = toml::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        for key in root.keys() {
            if key != "seed" && !SECTIONS.contains(&key.as_str()) {
                return Err(invalid(format!("config {}: unknown key `{key}`", path.display())));
            }
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, base })
    }

    pub fn seed(&self) -> Result<Option<u64>> {
        match self.root.get("seed") {
            None => Ok(None),
            Some(toml::Value::Integer(n)) if *n >= 0 => Ok(Some(*n as u64)),
            Some(v) => Err(invalid(format!("config: seed must be a non-negative integer, found {v}"))),
        }
    }

    fn section<T: DeserializeOwned + Default + Layered>(&self, path: &[&str]) -> Result<T> {
        let mut table = &self.root;
        for key in path {
            match table.get(*key) {
                None => return Ok(T::default()),
                Some(toml::Value::Table(t)) => table = t,
                Some(_) => return Err(invalid(format!("config: `{}` must be a table", path.join(".")))),
            }
        }
        let mut section: T = table
            .clone()
            .try_into()
            .map_err(|e| invalid(format!("config [{}]: {e}", path.join("."))))?;
        section.rebase(&self.base);
        Ok(section)
    }
}

/// Merges the config section at `path` under the flag values.
pub fn layer<T: DeserializeOwned + Default + Layered>(flags: &mut T, config: Option<&ConfigFile>, path: &[&str]) -> Result<()> {
    if let Some(cfg) = config {
        flags.fill_from(cfg.section(path)?);
    }
    Ok(())
}

/// Identifies the tool build and effective configuration behind an output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    /// Hashes the canonical JSON of the merged command settings.
    pub fn new(command: &str, settings: &impl Serialize, seed: u64) -> Self {
        let canonical = serde_json::json!({
            "command": command,
            "seed": seed,
            "settings": settings,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            config_sha256: hex::encode(digest),
            seed,
        }
    }

    fn line(&self) -> String {
        format!(
            "{} {} {} config_sha256={} seed={}",
            self.tool, self.version, self.command, self.config_sha256, self.seed
        )
    }

    pub fn csv_comment(&self) -> String {
        format!("# {}\n", self.line())
    }

    pub fn markdown_comment(&self) -> String {
        format!("<!-- {} -->\n", self.line())
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_at(parent))?;
    }
    std::fs::write(path, contents).map_err(io_at(path))
}

/// Pretty JSON with a trailing newline.
pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(runtime)?;
    s.push('\n');
    Ok(s)
}

/// Sorted stems of the PNG files directly inside `dir`.
pub fn png_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_at(dir))? {
        let path = entry.map_err(io_at(dir))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

/// Path of the PNG with the given stem, accepting either extension case.
pub fn png_path(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["png", "PNG"]
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}
