use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("backend mismatch: {0}")]
    BackendMismatch(String),

    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid group point: {0}")]
    InvalidPoint(String),

    #[error("operation not supported on the {backend} backend: {op}")]
    Unsupported { backend: &'static str, op: &'static str },

    #[error("off-lattice dilation: a = {a} is not an integer power of the grid ratio {ratio}")]
    OffLatticeDilation { a: f64, ratio: f64 },

    #[error(
        "symbol solve failed: relative residual {residual:.3e} exceeds {tolerance:.1e} \
         (min retained singular value {min_singular:.3e}, max {max_singular:.3e}, \
         deficient blocks {deficient_blocks})"
    )]
    Solver {
        residual: f64,
        tolerance: f64,
        min_singular: f64,
        max_singular: f64,
        deficient_blocks: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
