use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Syntax or type error in a structured document.
    #[error("parse error{}: {message}", location_suffix(*line, *column, field))]
    Parse {
        message: String,
        line: Option<usize>,
        column: Option<usize>,
        field: Option<String>,
    },

    /// One entry per violated invariant.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite state at step {step} (t = {time} s)")]
    NonFinite { step: usize, time: f64 },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("unknown preset '{0}' (expected single-ray, cuttlebot, tuna or jellyfish)")]
    UnknownPreset(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location_suffix(line: Option<usize>, column: Option<usize>, field: &Option<String>) -> String {
    let mut out = String::new();
    if let Some(l) = line {
        out.push_str(&format!(" at line {l}"));
        if let Some(c) = column {
            out.push_str(&format!(", column {c}"));
        }
    }
    if let Some(f) = field {
        out.push_str(&format!(" in field '{f}'"));
    }
    out
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(message: impl Into<String>) -> Self {
        Error::Parse {
            message: message.into(),
            line: None,
            column: None,
            field: None,
        }
    }

    /// True for errors caused by the user's input rather than the simulation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation(_) | Error::UnknownPreset(_) | Error::Domain(_)
        )
    }
}
