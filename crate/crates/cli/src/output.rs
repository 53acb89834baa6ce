//! Output directory handling and run manifests.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;

pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn note(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(&p, contents).map_err(|e| CliError::io(&p, e))?;
        self.note(name);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Opens `name` for appending (`append`) or truncates it.
    pub fn open(&mut self, name: &str, append: bool) -> Result<CsvSink, CliError> {
        let p = self.path(name);
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&p)
            .map_err(|e| CliError::io(&p, e))?;
        self.note(name);
        Ok(CsvSink { path: p, file })
    }

    /// Writes `<command>.manifest.json` listing every output of the run.
    pub fn manifest(
        &mut self,
        command: &str,
        seed: u64,
        threads: usize,
        settings: &Settings,
    ) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'static str,
            version: &'static str,
            command: &'a str,
            master_seed: u64,
            threads: usize,
            settings: &'a BTreeMap<String, String>,
            outputs: Vec<String>,
        }
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            master_seed: seed,
            threads,
            settings: settings.entries(),
            outputs: self.files.clone(),
        };
        self.write_json(&format!("{command}.manifest.json"), &m)
    }
}

/// Line-oriented file that is flushed after every chunk.
pub struct CsvSink {
    path: PathBuf,
    file: File,
}

impl CsvSink {
    pub fn line(&mut self, line: &str) -> Result<(), CliError> {
        writeln!(self.file, "{line}").map_err(|e| CliError::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.file.flush().map_err(|e| CliError::io(&self.path, e))?;
        self.file
            .sync_data()
            .map_err(|e| CliError::io(&self.path, e))
    }
}
