use thiserror::Error;

pub type Result<T> = std::result::Result<T, EgwError>;

#[derive(Debug, Error)]
pub enum EgwError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("weights not normalized (sum = {sum}, tolerance {tol:e})")]
    WeightsNotNormalized { sum: f64, tol: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("map is not orthogonal (max deviation {0:e})")]
    NotOrthogonal(f64),

    #[error("kernel overflow, increase eps or rescale data")]
    KernelOverflow,

    #[error("kernel underflow: zero {0} sum in Sinkhorn update, increase eps or use --log-domain")]
    KernelUnderflow(&'static str),

    #[error("tolerance too small: delta = {delta:e} gives a nonpositive stopping threshold; use delta >= {suggested:e}")]
    ToleranceTooSmall { delta: f64, suggested: f64 },

    #[error("h-system ill-conditioned (residual {0:e})")]
    IllConditioned(f64),

    #[error("measures are not centered; pass allow_uncentered to report a flagged decomposition")]
    NotCentered,

    #[error("initial point is (nearly) stationary: |G(C0)| = {grad:e} < {threshold:e}")]
    StationaryStart { grad: f64, threshold: f64 },

    #[error("initial point outside the feasible ball: |C0| = {norm} > {radius}")]
    InfeasibleStart { norm: f64, radius: f64 },

    #[error("{stage} solve failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<EgwError>,
    },
}

impl EgwError {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        EgwError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by invalid user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            EgwError::InvalidMeasure(_)
            | EgwError::WeightsNotNormalized { .. }
            | EgwError::Parse(_)
            | EgwError::DimensionMismatch(_)
            | EgwError::InvalidArgument(_)
            | EgwError::NotOrthogonal(_)
            | EgwError::NotCentered
            | EgwError::InfeasibleStart { .. } => true,
            EgwError::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
