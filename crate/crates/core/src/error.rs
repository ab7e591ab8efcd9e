use thiserror::Error;

/// Shortfall of Hankel columns in one region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionDeficit {
    pub region: usize,
    pub available: usize,
    pub required: usize,
}

impl std::fmt::Display for RegionDeficit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "region {}: {} of {} columns (deficit {})",
            self.region,
            self.available,
            self.required,
            self.required - self.available
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("segment {index} has {len} samples, at least {required} are needed")]
    SegmentTooShort {
        index: usize,
        len: usize,
        required: usize,
    },

    #[error("insufficient data: {available} columns available, {required} requested")]
    InsufficientColumns { available: usize, required: usize },

    #[error("insufficient data per region: {}", format_deficits(.0))]
    StarvedRegions(Vec<RegionDeficit>),

    #[error("controller is not warmed up: {have} of {need} samples buffered")]
    NotWarmedUp { have: usize, need: usize },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("simulation diverged at step {step} (last valid state x1={x1}, x2={x2})")]
    Divergence { step: usize, x1: f64, x2: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_deficits(d: &[RegionDeficit]) -> String {
    d.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Configuration-type failures map to CLI exit status 1, everything else to 2.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_))
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Config(_) => "config",
            Error::SegmentTooShort { .. } => "segment_too_short",
            Error::InsufficientColumns { .. } => "insufficient_columns",
            Error::StarvedRegions(_) => "starved_regions",
            Error::NotWarmedUp { .. } => "not_warmed_up",
            Error::Solver(_) => "solver",
            Error::Divergence { .. } => "divergence",
            Error::Parse(_) => "parse",
            Error::Metrics(_) => "metrics",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
