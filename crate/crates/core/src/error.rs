use crate::lattice::Reflection;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("reflection {reflection} cannot be reached at λ = {lambda} Å (sin θ = {sin_theta:.6} > 1)")]
    NoReflection {
        reflection: Reflection,
        lambda: f64,
        sin_theta: f64,
    },

    #[error("reflection {0} has an empty wavelength/angle window")]
    EmptyWindow(Reflection),

    #[error("reflection {0} is forbidden or extinct for the diamond structure")]
    ForbiddenReflection(Reflection),

    #[error("form factor for {element} undefined at Q/4π = {q} Å⁻¹ (table covers up to {max} Å⁻¹)")]
    FormFactorDomain { element: String, q: f64, max: f64 },

    #[error("invalid form-factor table: {0}")]
    InvalidTable(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate abscissa: all x values coincide")]
    DegenerateAbscissa,

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors that come from malformed configuration rather than data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidTable(_))
    }
}
