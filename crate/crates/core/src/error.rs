use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("loss intensity {value} exceeds the ceiling {ceiling} at t = {time}")]
    IntensityBound { value: f64, ceiling: f64, time: f64 },

    #[error("claim lattice needs {needed} points but the bound is {bound}")]
    LatticeBound { needed: usize, bound: usize },

    #[error("regression is rank deficient: {samples} samples for {basis} basis functions")]
    RankDeficient { samples: usize, basis: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("only {found} defaulted paths, at least {required} are needed; raise the default intensity or the path count")]
    TooFewDefaults { found: usize, required: usize },

    #[error("hedge denominator {0:e} is degenerate")]
    DegenerateHedge(f64),

    #[error("no value table for post-default intensity {0}")]
    MissingTable(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
