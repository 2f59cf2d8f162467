//! Simulation and metrology for concave microlens-array molds made by UV
//! proximity printing.
//!
//! The pipeline runs mask rasterization, scalar diffraction across the
//! printing gap and into the resist, vertical development, replica casting
//! and finally lens metrology. [`studio`] wires the stages together for
//! sweeps, calibration and inverse design.

pub mod error;
mod fft;
pub mod grid;
pub mod mask;
pub mod metrology;
pub mod propagate;
pub mod resist;
pub mod studio;

pub use error::{Error, Result};
pub use grid::GridSpec;
pub use mask::{LensLayout, MaskSpec, TransmissionGrid, UnitCell};
pub use metrology::{LensMetrics, MetrologyConfig, ProfileReport, Regime, RoughnessReport};
pub use propagate::{ExposureOptions, ExposureVolume, IntensityVolume, SampledField, Spectrum};
pub use resist::{Orientation, ProcessRecipe, SurfaceProfile};
pub use studio::{Pipeline, SweepAxis, SweepResult};
