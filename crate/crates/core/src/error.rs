use thiserror::Error;

/// Every failure the library can report. Level indices are stored 0-based and
/// displayed 1-based, matching the numbering used in level diagrams.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("levels {} and {} have equal slopes but coupling {g}", .i + 1, .j + 1)]
    DegenerateSlopeCoupling { i: usize, j: usize, g: f64 },
    #[error("coupling between levels {} and {} has imaginary part {im}", .i + 1, .j + 1)]
    NonRealCoupling { i: usize, j: usize, im: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("duplicate coupling between levels {} and {}", .i + 1, .j + 1)]
    DuplicateCoupling { i: usize, j: usize },
    #[error("level index {index} out of range for {n} levels")]
    LevelOutOfRange { index: usize, n: usize },
    #[error("eigensolver did not converge at t = {t}")]
    EigensolveFailure { t: f64 },
    #[error("cycle is not closed at edge {0}")]
    NotClosed(usize),
    #[error("intermediate level {} is degenerate with the pair at t = {t}", .level + 1)]
    DegenerateDenominator { level: usize, t: f64 },
    #[error("levels {} and {} are coupled directly", .i + 1, .j + 1)]
    PairCoupled { i: usize, j: usize },
    #[error("no interior gap minimum in [{lo}, {hi}]")]
    NoMinimumInBracket { lo: f64, hi: f64 },
    #[error("unitarity defect {defect:.3e} exceeds 1e-4; reduce dt")]
    StepTooLarge { defect: f64 },
    #[error("invalid integration config: {0}")]
    BadConfig(String),
    #[error("equal-time events at t = {t} share a level at distinct energies")]
    OverlappingSimultaneousEvents { t: f64 },
    #[error("equal slopes")]
    EqualSlopes,
    #[error("not a bow-tie crossing: {0}")]
    NotBowtie(String),
    #[error("not a spin-1 crossing: {0}")]
    NotSpin1Pattern(String),
    #[error("no analytic block for crossing at t = {t}: {reason}")]
    UnknownBlockKind { t: f64, reason: String },
    #[error("path passes through a crossing of {0} levels")]
    MultiLevelEventOnPath(usize),
    #[error("bad particle number {n_particles} for {n_sites} sites")]
    BadParticleNumber { n_particles: usize, n_sites: usize },
    #[error("band energies are not strictly increasing")]
    UnsortedBand,
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("no analytic form: {0}")]
    NoAnalyticForm(String),
    #[error("unknown catalog entry '{0}'")]
    UnknownModel(String),
    #[error("parse error at {location}: {message}")]
    ParseError { location: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
