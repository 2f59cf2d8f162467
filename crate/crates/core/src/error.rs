use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(
        "sampling too coarse: dx = {dx_um} um, wavelength {wavelength_um} um requires dx <= {required_dx_um} um"
    )]
    Undersampled {
        dx_um: f64,
        wavelength_um: f64,
        required_dx_um: f64,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular sphere fit: {0}")]
    SingularFit(String),
    #[error("lens {lens}: {reason}")]
    Extraction { lens: usize, reason: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("target sag {target_um} um outside achievable range [{min_um}, {max_um}] um")]
    OutOfRange {
        target_um: f64,
        min_um: f64,
        max_um: f64,
    },
    #[error("non-monotone response: {0}")]
    NonMonotone(String),
}

pub type Result<T> = std::result::Result<T, Error>;
