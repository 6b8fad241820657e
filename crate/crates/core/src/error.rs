use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Variants are grouped so that the runner can map them onto process exit
/// codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("Hermitian symmetry violated at wavevector {wavevector:?} (mismatch {mismatch:.3e})")]
    NotHermitian { wavevector: Vec<i64>, mismatch: f64 },

    #[error("imaginary residue {residue:.3e} exceeds tolerance after inverse transform")]
    ImaginaryResidue { residue: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("preset `{preset}` is missing parameter `{param}`")]
    MissingParameter { preset: String, param: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("empty region")]
    EmptyRegion,

    #[error("ball sampler: {0}")]
    Sampler(String),

    #[error("rescaled support leaves the box: {0}")]
    SupportLeavesBox(String),

    #[error("time source does not cover t = {0}")]
    CoverageGap(f64),

    #[error("Picard closure failed at t = {time}: residual {residual:.3e} after {iterations} iterations")]
    PicardDiverged {
        time: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("Cesàro averaging stalled after {iterations} iterations (last increment {last_increment:.3e})")]
    CesaroStalled {
        iterations: usize,
        last_increment: f64,
        history: Vec<(usize, f64)>,
    },

    #[error("smallness violated: contraction ratio {ratio:.4} >= 1 at forcing amplitude {amplitude:.3e}")]
    SmallnessViolated { ratio: f64, amplitude: f64 },

    #[error("outer iteration reached {iterations} steps without meeting tolerance (last increment {last_increment:.3e})")]
    OuterStalled {
        iterations: usize,
        last_increment: f64,
    },

    #[error("mean mode: {0}")]
    MeanMode(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("missing inputs: {}", .0.join(", "))]
    MissingInputs(Vec<String>),

    #[error("config: {0}")]
    Config(String),

    #[error("field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis(_) => 3,
            Error::PicardDiverged { .. }
            | Error::CesaroStalled { .. }
            | Error::SmallnessViolated { .. }
            | Error::OuterStalled { .. } => 4,
            Error::Io(_) | Error::Format(_) => 5,
            _ => 2,
        }
    }
}
