use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vortex_core::diagnostics::SCHEMA_VERSION;
use vortex_core::grid::GridField;

/// A stage failure with the code written to the run log.
#[derive(Debug, thiserror::Error)]
#[error("{code}: {message}")]
pub struct StageError {
    pub code: String,
    pub message: String,
}

impl StageError {
    pub fn config(message: impl Into<String>) -> Self {
        StageError {
            code: "CONFIG".into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        StageError {
            code: "IO".into(),
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<vortex_core::Error> for StageError {
    fn from(e: vortex_core::Error) -> Self {
        StageError {
            code: e.code().as_str().into(),
            message: e.to_string(),
        }
    }
}

/// Any report written to disk carries the schema version next to its fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Versioned {
            schema_version: SCHEMA_VERSION,
            body,
        }
    }
}

pub fn create_dir(dir: &Path) -> Result<(), StageError> {
    fs::create_dir_all(dir).map_err(|e| StageError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StageError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| StageError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| StageError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StageError> {
    let text = fs::read_to_string(path).map_err(|e| StageError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| StageError {
        code: "SCHEMA".into(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Header line plus rows, values printed with full round-trip precision.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), StageError> {
    let file = File::create(path).map_err(|e| StageError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let err = |e| StageError::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(err)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(err)?;
    }
    out.flush().map_err(err)
}

pub fn write_grid(path: &Path, field: &GridField) -> Result<(), StageError> {
    let file = File::create(path).map_err(|e| StageError::io(path, e))?;
    let mut out = BufWriter::new(file);
    field.write_csv(&mut out).map_err(|e| StageError::io(path, e))?;
    out.flush().map_err(|e| StageError::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: String,
    pub ok: bool,
    pub error_code: Option<String>,
    pub message: Option<String>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLog {
    pub schema_version: u32,
    pub command: String,
    pub stages: Vec<StageEntry>,
    pub checks_passed: Option<bool>,
    pub exit_code: i32,
}

impl RunLog {
    pub fn new(command: &str) -> Self {
        RunLog {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            stages: Vec::new(),
            checks_passed: None,
            exit_code: 0,
        }
    }

    pub fn record<T>(&mut self, stage: &str, result: &Result<(T, Vec<PathBuf>), StageError>) {
        let entry = match result {
            Ok((_, artifacts)) => StageEntry {
                stage: stage.into(),
                ok: true,
                error_code: None,
                message: None,
                artifacts: artifacts.clone(),
            },
            Err(e) => StageEntry {
                stage: stage.into(),
                ok: false,
                error_code: Some(e.code.clone()),
                message: Some(e.message.clone()),
                artifacts: Vec::new(),
            },
        };
        self.stages.push(entry);
    }

    pub fn failed_stage(&self) -> Option<&StageEntry> {
        self.stages.iter().find(|s| !s.ok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_keep_their_code() {
        let e: StageError = vortex_core::Error::FluxNonzero { net: 1.0, tol: 1e-9 }.into();
        assert_eq!(e.code, "FLUX_NONZERO");
        let wrapped = vortex_core::Error::AtEps {
            eps: 0.5,
            source: Box::new(vortex_core::Error::BracketSign {
                vortex: 0,
                detail: String::new(),
            }),
        };
        assert_eq!(StageError::from(wrapped).code, "BRACKET_SIGN");
    }

    #[test]
    fn versioned_flattens() {
        #[derive(Serialize, Deserialize)]
        struct A {
            x: f64,
        }
        let s = serde_json::to_string(&Versioned::new(A { x: 0.5 })).unwrap();
        assert_eq!(s, format!("{{\"schema_version\":{SCHEMA_VERSION},\"x\":0.5}}"));
        let back: Versioned<A> = serde_json::from_str(&s).unwrap();
        assert_eq!(back.body.x, 0.5);
    }
}
