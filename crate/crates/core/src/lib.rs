//! Numerical laboratory for weak `L^{3,∞}` solutions of the three-dimensional
//! Navier–Stokes equations on a periodic box.
//!
//! Fields live on `[-L/2, L/2)³` and are handled pseudo-spectrally. The
//! modules build on each other: [`field`] and [`lorentz`] provide the
//! discretization and the Lorentz-space analysis, [`heat`] and [`stokes`] the
//! linear solution operators, [`kato`] the mild-solution iteration, and
//! [`energy`] the energy-inequality verifiers. [`initdata`] generates the
//! divergence-free test data.

pub mod energy;
pub mod error;
pub mod fft;
pub mod field;
pub mod heat;
pub mod initdata;
pub mod kato;
pub mod lorentz;
pub mod par;
pub mod report;
pub mod snapshot;
pub mod stokes;
pub mod testfn;
pub mod timegrid;
pub mod trace;

pub use error::{Error, Result};
pub use field::{Grid, GridField, Magnitudes, ScalarField, SpectralField};
pub use report::VerifierReport;
pub use timegrid::TimeGrid;
pub use trace::Trace;
