use thiserror::Error;

/// Errors raised by the library. Each variant maps to either a validation
/// failure (bad input, violated precondition) or a numerical failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("pole of the regime boundary curve: h coincides with {0}")]
    PoleAtAnisotropyField(&'static str),
    #[error("degenerate leading coefficient in a dispersion factor")]
    DegenerateLeadingCoefficient,
    #[error("ellipticity predicate violated: {0}")]
    EllipticityViolated(String),
    #[error("Morse index changed between large spectral parameters ({0} vs {1})")]
    IndexUnstable(usize, usize),
    #[error("root continuation met another collision at tau = {0}")]
    PathAmbiguous(f64),
    #[error("parameters are not in the required monostable regime")]
    NotMonostable,
    #[error("parameters are not in the bistable regime")]
    NotBistable,
    #[error("profile has no interior point with sin(theta) above threshold")]
    SingularProfile,
    #[error("logarithm argument 1 + ccp*m3 = {0} is not positive")]
    LogDomain(f64),
    #[error("tridiagonal solve degenerated at row {0}")]
    SolverFailure(usize),
    #[error("solution blew up at t = {0}")]
    NumericalBlowup(f64),
    #[error("zero vector at grid index {0}")]
    ZeroVector(usize),
    #[error("translation and rotation generators are collinear (Gram determinant {0:e})")]
    DegenerateGram(f64),
    #[error("compound-matrix integration overflowed at xi = {0}")]
    IntegrationOverflow(f64),
    #[error("asymptotic subspace is degenerate: {0}")]
    SubspaceDegenerate(String),
    #[error("phase increments unresolved after {0} mesh refinements")]
    PhaseUnresolved(usize),
    #[error("weight eta = {0} leaves essential spectrum inside the contour")]
    InadmissibleWeight(f64),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "InvalidParams",
            Error::PoleAtAnisotropyField(_) => "PoleAtAnisotropyField",
            Error::DegenerateLeadingCoefficient => "DegenerateLeadingCoefficient",
            Error::EllipticityViolated(_) => "EllipticityViolated",
            Error::IndexUnstable(..) => "IndexUnstable",
            Error::PathAmbiguous(_) => "PathAmbiguous",
            Error::NotMonostable => "NotMonostable",
            Error::NotBistable => "NotBistable",
            Error::SingularProfile => "SingularProfile",
            Error::LogDomain(_) => "LogDomain",
            Error::SolverFailure(_) => "SolverFailure",
            Error::NumericalBlowup(_) => "NumericalBlowup",
            Error::ZeroVector(_) => "ZeroVector",
            Error::DegenerateGram(_) => "DegenerateGram",
            Error::IntegrationOverflow(_) => "IntegrationOverflow",
            Error::SubspaceDegenerate(_) => "SubspaceDegenerate",
            Error::PhaseUnresolved(_) => "PhaseUnresolved",
            Error::InadmissibleWeight(_) => "InadmissibleWeight",
        }
    }

    /// True for failures of a numerical method, false for rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IndexUnstable(..)
                | Error::PathAmbiguous(_)
                | Error::SolverFailure(_)
                | Error::NumericalBlowup(_)
                | Error::ZeroVector(_)
                | Error::DegenerateGram(_)
                | Error::IntegrationOverflow(_)
                | Error::SubspaceDegenerate(_)
                | Error::PhaseUnresolved(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
