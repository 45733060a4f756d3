use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("degenerate output: {0}")]
    DegenerateOutput(String),
    #[error("backward called before forward")]
    StateMissing,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("input too small: {0}")]
    InputTooSmall(String),
    #[error("label must be 0 or 1, got {0}")]
    LabelInvalid(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("image {width}x{height} is smaller than the {size}x{size} crop")]
    ImageTooSmall { width: usize, height: usize, size: usize },
    #[error("rotation needs a square image, got {width}x{height}")]
    NonSquareRotation { width: usize, height: usize },
    #[error("thresholds must satisfy 0 < t_cup < t_disc < 1, got {t_cup} and {t_disc}")]
    ThresholdInvalid { t_cup: f64, t_disc: f64 },
    #[error("mask has an empty optic disc")]
    DegenerateMask,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("metric needs both positive and negative labels")]
    OneClassOnly,
}
