//! Processing chain for cellular base stations operated as opportunistic
//! pulsed Doppler weather radars.
//!
//! The crate covers the full path from complex I/Q pulse data to rain
//! products:
//!
//! * [`types`] — frame timing, beam geometry, I/Q cubes, axes arithmetic;
//! * [`spectral`] — range compression, windowed periodograms, Doppler
//!   moments;
//! * [`clutter`] — differential-phase circular variance, persistency
//!   masking, and Gaussian spectral interpolation for ground-clutter
//!   suppression;
//! * [`physics`] — radar equation, radar constant, antenna correction
//!   factor, path attenuation, and sensitivity (MDZ/MDR);
//! * [`dsd`] — drop-size-distribution microphysics and Z–R power-law
//!   fitting;
//! * [`sim`] — physically based synthesis of rain/clutter/noise I/Q cubes
//!   and two-site geometry projection;
//! * [`pipeline`] — the per-sweep orchestration producing product grids;
//! * [`io`] — binary cube files, product/mask/table text formats, and
//!   scene/chain configuration.
//!
//! All types are immutable after construction; every per-gate operation is
//! pure, so callers may map over beams and gates in parallel without
//! synchronization.

// Validation guards use `!(v > 0.0)` so NaN is rejected along with the
// out-of-range values; the negated form is load-bearing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clutter;
pub mod dsd;
pub mod error;
pub mod io;
pub mod physics;
pub mod pipeline;
pub(crate) mod rng;
pub mod sim;
pub mod spectral;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    blind_zone_and_max_range, doppler_axis, BeamGeometry, ClutterMask, FrameTiming, GateValidity,
    IqCube, MaskKind, ProductCell, ProductGrid, RangeDopplerSpectrum, WindowKind, BOLTZMANN,
    REFERENCE_TEMPERATURE, SPEED_OF_LIGHT,
};
