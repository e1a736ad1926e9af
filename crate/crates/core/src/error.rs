use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("wavelength {lambda_nm} nm outside {material} range [{lo_nm}, {hi_nm}] nm")]
    WavelengthRange {
        material: String,
        lambda_nm: f64,
        lo_nm: f64,
        hi_nm: f64,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{what} (residual {residual:e})")]
    Numeric { what: String, residual: f64 },
    #[error("no root in bracket [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("not phasematchable; residual {residual:e} /mm is smallest at internal angle {best_angle_rad} rad")]
    NotPhasematchable { best_angle_rad: f64, residual: f64 },
    #[error("no cut angle reaches the target; attainable external half-angles span [{lo_rad}, {hi_rad}] rad")]
    CutUnreachable { lo_rad: f64, hi_rad: f64 },
    #[error("cannot compensate with this cut: {0}")]
    CannotCompensate(String),
    #[error("grid truncated: edge amplitude {edge_ratio:e} of peak; suggested half-widths {suggest_s} and {suggest_i} rad/fs")]
    Grid {
        edge_ratio: f64,
        suggest_s: f64,
        suggest_i: f64,
    },
    #[error("invalid density matrix: {0}")]
    State(String),
    #[error("unknown material '{0}'")]
    UnknownMaterial(String),
    #[error("materials data: {0}")]
    Data(String),
}

impl Error {
    /// Stable machine-readable kind used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::WavelengthRange { .. } => "wavelength_range",
            Error::Argument(_) => "argument",
            Error::Domain(_) => "domain",
            Error::Numeric { .. } => "numeric",
            Error::NoRoot { .. } => "no_root",
            Error::NotPhasematchable { .. } => "not_phasematchable",
            Error::CutUnreachable { .. } => "cut_unreachable",
            Error::CannotCompensate(_) => "cannot_compensate",
            Error::Grid { .. } => "grid",
            Error::State(_) => "state",
            Error::UnknownMaterial(_) => "unknown_material",
            Error::Data(_) => "data",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
