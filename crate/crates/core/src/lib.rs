//! Ghost imaging with entangled `|1,N>` photon-number states.
//!
//! One photon of each pair travels the ancilla arm (wavelength `lambda2`,
//! imaging lens, detector D2), the `N` degenerate photons travel the other arm
//! (wavelength `lambda1`, detector D1). The object sits in either arm. The
//! crate evaluates the resulting N+1 photon coincidence amplitudes in closed
//! form and by direct quadrature, models phase-randomising objects by
//! Monte-Carlo, and measures resolution.

pub mod analytic;
pub mod error;
pub mod field;
pub mod numeric;
pub mod object;
pub mod optics;
pub mod resolution;
pub mod special;
pub mod speckle;
pub mod validation;

pub use analytic::{DetectionScheme, Scene};
pub use error::{Error, Result};
pub use field::{ComplexField, GridSpec, ImageField, Plane, RealField, Rect, Vec2};
pub use num_complex::Complex64;
pub use object::{Dimensionality, ObjectModel, SampledObject, TwoPointObject};
pub use optics::{Configuration, ImagingGeometry, SourceSpec, ThinLensKnown};
pub use numeric::{AlphaMode, QuadratureSpec};
pub use resolution::{ResolutionReport, SweepParameter, SweepSpec};
pub use speckle::{EnsembleConfig, SpeckleReport};
