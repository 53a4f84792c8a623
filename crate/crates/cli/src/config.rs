//! Run configuration: command-line flags merged over an optional TOML file.

use std::path::{Path, PathBuf};

use carnot_qr::qr::Region;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Output directory used when neither `--out` nor the config sets one.
pub const OUT_ENV: &str = "CARNOT_QR_OUT";
pub const DEFAULT_OUT: &str = "carnot-qr-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    AlgebraVerify,
    Growth,
    Dist,
    BallBox,
    Modulus,
    Dilatation,
    Pansu,
    Jacobian,
    AreaCheck,
    KoCheck,
    BranchScan,
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::AlgebraVerify => "algebra-verify",
            Command::Growth => "growth",
            Command::Dist => "dist",
            Command::BallBox => "ball-box",
            Command::Modulus => "modulus",
            Command::Dilatation => "dilatation",
            Command::Pansu => "pansu",
            Command::Jacobian => "jacobian",
            Command::AreaCheck => "area-check",
            Command::KoCheck => "ko-check",
            Command::BranchScan => "branch-scan",
            Command::Suite => "suite",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
    #[default]
    All,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::All)
    }
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::All)
    }
    pub fn svg(self) -> bool {
        matches!(self, Format::Svg | Format::All)
    }
}

/// Everything a run depends on. The output directory and worker count do not
/// change results and are left out of the provenance copy in JSON outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// Frame or algebra: builtin name or file path.
    pub frame: String,
    /// Catalogue map, optionally `map@space`.
    pub map: String,
    pub point: Option<Vec<f64>>,
    /// Second point for `dist`.
    pub target: Option<Vec<f64>>,
    pub r0: f64,
    pub ladder: usize,
    pub samples: Option<usize>,
    pub seed: u64,
    /// Modulus exponent; defaults to the homogeneous dimension for `ko-check`.
    pub p: Option<f64>,
    /// Grid cells per axis (modulus) or grid points per axis (branch scan).
    pub grid: Option<Vec<usize>>,
    /// Curve family CSV.
    pub family: Option<PathBuf>,
    pub region: Option<Region>,
    /// Support of the indicator test function in `area-check`.
    pub test_region: Option<Region>,
    /// Chart bounds for image densities in `ko-check`.
    pub image_bounds: Option<(Vec<f64>, Vec<f64>)>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            frame: "heisenberg1".into(),
            map: "identity".into(),
            point: None,
            target: None,
            r0: 0.1,
            ladder: 5,
            samples: None,
            seed: 0,
            p: None,
            grid: None,
            family: None,
            region: None,
            test_region: None,
            image_bounds: None,
            out: None,
            workers: None,
            format: Format::All,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config {
            field: "config".into(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn command(&self) -> Result<Command, CliError> {
        self.command.ok_or_else(|| CliError::Config {
            field: "command".into(),
            message: "no subcommand given".into(),
        })
    }

    /// `--out`, then the config, then the environment, then the default.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, message: &str| {
            Err(CliError::Config {
                field: field.into(),
                message: message.into(),
            })
        };
        self.command()?;
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return bad("r0", "must be positive");
        }
        if self.ladder == 0 {
            return bad("ladder", "must be at least 1");
        }
        if self.samples == Some(0) {
            return bad("samples", "must be positive");
        }
        if let Some(p) = self.p {
            if !(p >= 1.0) {
                return bad("p", "must be at least 1");
            }
        }
        if let Some(g) = &self.grid {
            if g.is_empty() || g.contains(&0) {
                return bad("grid", "entries must be positive");
            }
        }
        if self.workers == Some(0) {
            return bad("workers", "must be positive");
        }
        for (name, v) in [("point", &self.point), ("target", &self.target)] {
            if let Some(v) = v {
                if v.iter().any(|x| !x.is_finite()) {
                    return bad(name, "coordinates must be finite");
                }
            }
        }
        Ok(())
    }

    /// The ladder `r0·2^{−i}`.
    pub fn radii(&self) -> Vec<f64> {
        (0..self.ladder).map(|i| self.r0 * 0.5f64.powi(i as i32)).collect()
    }
}
