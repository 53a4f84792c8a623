//! Batch front end: one subcommand per analysis, seeded and file-based.
//!
//! Every run writes `<command>.json` (result plus the full configuration and
//! tool version), and where meaningful `<command>.csv` ladders and `.svg`
//! plots. Exit status is 0 on success, 2 when the analysis ran but flagged a
//! problem (non-converged solve, non-decreasing residuals, failed check), 1 on
//! errors.

pub mod commands;
pub mod config;
pub mod plot;
pub mod suite;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{Command, Format, RunConfig};
pub use plot::{emit_plot, Plot};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("analysis failed: {0}")]
    Analysis(String),
}

macro_rules! analysis_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Analysis(e.to_string())
            }
        })*
    };
}

analysis_error!(
    carnot_qr::algebra::AlgebraError,
    carnot_qr::frame::FrameError,
    carnot_qr::metric::MetricError,
    carnot_qr::maps::MapError,
    carnot_qr::qr::QrError,
    carnot_qr::modulus::ModulusError,
    serde_json::Error
);

/// What a command produced before it is written out.
#[derive(Debug, Default)]
pub struct Artifact {
    pub result: serde_json::Value,
    pub csv: Option<String>,
    /// `(file suffix, document)`; the suffix is appended to the command name.
    pub svgs: Vec<(String, String)>,
    /// Analysis flags; any flag makes the exit status 2.
    pub flags: Vec<String>,
    /// Human-readable summary for the terminal.
    pub summary: String,
    /// Files whose content may legitimately vary between runs (timings).
    pub extra_files: Vec<(String, String)>,
}

#[derive(Debug)]
pub struct Outcome {
    pub command: Command,
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.flags.is_empty() {
            0
        } else {
            2
        }
    }
}

/// Serialized JSON output of a run: provenance plus result.
pub fn json_document(cfg: &RunConfig, artifact: &Artifact) -> Result<String, CliError> {
    let doc = serde_json::json!({
        "tool": "carnot-qr",
        "version": VERSION,
        "command": cfg.command()?.name(),
        "config": cfg,
        "flags": artifact.flags,
        "result": artifact.result,
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Validates the configuration, runs the command and writes its artifacts.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let command = cfg.command()?;
    let artifact = commands::dispatch(cfg)?;
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let stem = command.name();
    if cfg.format.json() {
        let p = dir.join(format!("{stem}.json"));
        write(&p, &json_document(cfg, &artifact)?)?;
        files.push(p);
    }
    if cfg.format.csv() {
        if let Some(csv) = &artifact.csv {
            let p = dir.join(format!("{stem}.csv"));
            write(&p, csv)?;
            files.push(p);
        }
    }
    if cfg.format.svg() {
        if artifact.svgs.is_empty() && cfg.format == Format::Svg {
            warnings.push(format!("{stem} produces no plot"));
        }
        for (suffix, svg) in &artifact.svgs {
            let p = dir.join(format!("{stem}{suffix}.svg"));
            write(&p, svg)?;
            files.push(p);
        }
    }
    for (name, text) in &artifact.extra_files {
        let p = dir.join(name);
        write(&p, text)?;
        files.push(p);
    }
    Ok(Outcome {
        command,
        flags: artifact.flags,
        warnings,
        files,
        summary: artifact.summary,
    })
}
