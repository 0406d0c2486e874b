use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Provenance record written next to every command's outputs, also when
/// the command fails part way. Contains nothing that varies between
/// identical runs (no timestamps, paths or worker counts).
#[derive(Debug)]
pub struct Manifest {
    path: PathBuf,
    entries: Vec<(String, String)>,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(path: impl Into<PathBuf>, command: &str) -> Self {
        Manifest {
            path: path.into(),
            entries: vec![
                ("tool".into(), format!("ghostlab {}", env!("CARGO_PKG_VERSION"))),
                ("command".into(), command.into()),
            ],
            outputs: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    fn render(&self, status: &str) -> String {
        let mut o = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(o, "{k} = {v}");
        }
        let _ = writeln!(o, "status = {status}");
        for f in &self.outputs {
            let _ = writeln!(o, "output = {f}");
        }
        o
    }

    fn write(&self, status: &str) -> Result<(), CliError> {
        std::fs::write(&self.path, self.render(status)).map_err(|e| CliError::io(self.path.display(), e))
    }

    /// Writes the manifest with the outcome of `result` and passes it on.
    pub fn finish<T>(self, result: Result<T, CliError>) -> Result<T, CliError> {
        match result {
            Ok(v) => {
                self.write("complete")?;
                Ok(v)
            }
            Err(e) => {
                let msg = e.to_string().replace('\n', " ");
                if let Err(w) = self.write(&format!("failed: {msg}")) {
                    log::error!("{w}");
                }
                Err(e)
            }
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
