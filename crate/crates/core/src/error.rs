use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid metric parameters: {0}")]
    InvalidParams(String),

    #[error("metric is not positive definite at {x:?} (min eigenvalue {min_eigenvalue:e})")]
    NonPositiveDefinite { x: [f64; 3], min_eigenvalue: f64 },

    #[error("square root failed: eigenvalue {0:e} of the inverse metric is below 1e-12")]
    SqrtFailure(f64),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field is under-resolved: spectral tail {tail:e} exceeds {threshold:e}")]
    ResolutionError { tail: f64, threshold: f64 },

    #[error("time step {dt} exceeds the CFL bound {max_dt}")]
    CflViolation { dt: f64, max_dt: f64 },

    #[error("final time {t_final} exceeds the wrap-around cap {cap} for this box")]
    WraparoundRisk { t_final: f64, cap: f64 },

    #[error("operation requires a flat geometry")]
    NotFlat,

    #[error("removed zero mode carries {fraction:.3e} of the L2 mass")]
    ZeroModeDominance { fraction: f64 },

    #[error("triple (s={s}, q={q}, r={r}) is not admissible")]
    NotAdmissible { s: f64, q: f64, r: f64 },

    #[error("massive endpoint q = 2 is excluded (estimate requires q > 2)")]
    ExcludedEndpoint,

    #[error("config error: {0}")]
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
}

impl Error {
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// True for configuration problems, including ones wrapped in a stage.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
