use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("snowflake self-intersects at depth {depth} (eta = {eta})")]
    SelfIntersection { eta: f64, depth: u32 },

    #[error("eta = {eta} is out of range: the dimension equation has no root in (1, 2)")]
    EtaOutOfRange { eta: f64 },

    #[error("kernel {kernel} is sign-changing; {what} requires a nonnegative kernel")]
    SignChangingKernel { kernel: String, what: &'static str },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("t = {t} is below the resolution floor {floor} of the polygon")]
    BelowResolutionFloor { t: f64, floor: f64 },

    #[error("rejection sampler efficiency {efficiency:.3e} is below 1e-3")]
    RejectionEfficiency { efficiency: f64 },

    #[error("radial grid ends at {grid_max} but kernel tail mass beyond it is {tail:.3e} > 1e-6")]
    RadialGridTooShort { grid_max: f64, tail: f64 },

    #[error("eigensolver failed to converge after {attempts} attempts")]
    EigenSolver { attempts: u32 },

    #[error("zero sample variance")]
    ZeroVariance,

    #[error("polygons overlap")]
    OverlappingPolygons,

    #[error("support touches the unit circle (|c| + radius = {reach})")]
    SupportTouchesUnitCircle { reach: f64 },

    #[error("nonpositive value on log axis")]
    NonPositiveOnLogAxis,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("unknown experiment `{name}`; valid names: {valid}")]
    UnknownExperiment { name: String, valid: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
