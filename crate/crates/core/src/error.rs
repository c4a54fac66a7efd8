use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator set has no matrix for slot {0}")]
    MissingSlot(u32),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(
        "insufficient data: {usable} usable rows (need {needed}) with error in window [{lo:e}, {hi:e}]"
    )]
    InsufficientData {
        usable: usize,
        needed: usize,
        lo: f64,
        hi: f64,
    },

    #[error("assumption {id} ({name}) violated, margin {margin:e}")]
    AssumptionViolated {
        id: u8,
        name: &'static str,
        margin: f64,
    },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("construction unverified: fitted order {fitted:.3} below required {required:.3}")]
    ConstructionUnverified { fitted: f64, required: f64 },

    #[error("operators {first} and {second} do not commute (residual {residual:e})")]
    NonCommuting {
        first: usize,
        second: usize,
        residual: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
