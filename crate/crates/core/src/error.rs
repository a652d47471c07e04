use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("band limit exceeded in term {term}: {detail}")]
    BandLimitExceeded { term: usize, detail: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("non-positive density {value:e} from the defining relation of rho")]
    NonPositiveDensity { value: f64 },

    #[error(
        "Lagrangian is not positive: cos(theta) = {margin:.3e} at sample {index}, x = {point:?}"
    )]
    NotPositive {
        index: usize,
        point: Vec<f64>,
        margin: f64,
    },

    #[error("tangent functions live on different Lagrangians")]
    GammaMismatch,

    #[error(
        "Re of the pulled-back volume form is nearly singular ({value:.3e}) at sample {index}"
    )]
    SingularDensity { index: usize, value: f64 },

    #[error("not enough samples to differentiate at t = {t}")]
    InsufficientSamples { t: f64 },

    #[error("positivity lost at t = {t}: {source}")]
    PositivityLost {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("step rejected at t = {t}: relative energy drift {drift:.3e} exceeds {threshold:.3e}")]
    StepRejected { t: f64, drift: f64, threshold: f64 },

    #[error("positivity margin {margin:.3e} below threshold {threshold:.3e}")]
    MarginTooSmall { margin: f64, threshold: f64 },

    #[error("degenerate plane: Gram determinant {gram:.3e} below threshold {threshold:.3e}")]
    DegeneratePlane { gram: f64, threshold: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn positivity_lost(t: f64, source: Error) -> Self {
        Error::PositivityLost {
            t,
            source: Box::new(source),
        }
    }

    /// True for errors that mean a Lagrangian left the positive locus.
    pub fn is_positivity(&self) -> bool {
        matches!(
            self,
            Error::NotPositive { .. }
                | Error::PositivityLost { .. }
                | Error::SingularDensity { .. }
                | Error::MarginTooSmall { .. }
        )
    }
}
