use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("empty point set")]
    EmptySet,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input set is not normalized (bounding-box center {center_x},{center_y}, diameter {diameter})")]
    NotNormalized {
        center_x: f64,
        center_y: f64,
        diameter: f64,
    },

    #[error("scale underflow: level {level} cell side is below machine precision relative to R = {radius}")]
    ScaleUnderflow { level: u32, radius: f64 },

    #[error("brute-force covering limited to {limit} points, got {got}; use count_dyadic instead")]
    SizeLimit { limit: usize, got: usize },

    #[error("{primitive}: point ({x}, {y}) lies within {eps} of a singularity")]
    Singularity {
        primitive: String,
        x: f64,
        y: f64,
        eps: f64,
    },

    #[error("degenerate differential at probe ({x}, {y}): |f_z| <= |f_zbar|")]
    DegenerateDifferential { x: f64, y: f64 },

    #[error("map expression: {0}")]
    MapSyntax(String),

    #[error(
        "refinement exceeded level budget {max_level} with {surviving} major squares remaining"
    )]
    LevelBudget { max_level: u32, surviving: usize },

    #[error("spectrum curve has no samples with theta >= {min_theta}")]
    InsufficientRange { min_theta: f64 },

    #[error("no probe radius at or above the resolution floor {floor}")]
    Resolution { floor: f64 },

    #[error("suite {suite}, row {row}: {source}")]
    SuiteRow {
        suite: String,
        row: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
