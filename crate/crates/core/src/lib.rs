//! Optical MISO communication over an event camera.
//!
//! A bar of LED clusters transmits OOK chip streams encoded with
//! Walsh-Hadamard codewords; an event camera observes the resulting
//! brightness transitions as sparse polarity events. This crate contains
//! the full link:
//!
//! - [`codec`] — the 16-entry Walsh-Hadamard codebook (8 high-transition
//!   rows plus their negations) and transition-domain matched-filter
//!   decoding.
//! - [`framing`] — bipolar pilot spreading, Barker synchronization, and
//!   per-cluster packet assembly into chip timelines.
//! - [`events`] — the event record type plus binary and CSV stream I/O.
//! - [`geometry`] — pinhole projection of the LED bar, motion and
//!   vibration trajectories. Generic over the float scalar.
//! - [`sim`] — the synthetic event-camera channel: transition-driven
//!   event generation under drop, jitter, refractory and background noise.
//! - [`receiver`] — the decode pipeline: alternation-number filtering,
//!   sync correlation, centroid tracking with vibration correction, grid
//!   pilot correlation, weighted cluster separation, payload decoding.
//! - [`eval`] — distance/speed BER sweeps, throughput accounting, and
//!   plot-ready reports.
//!
//! Chip-domain arithmetic is exact integer math throughout. Geometry and
//! tracking are generic over [`real::Real`] (`f32` or `f64`); the concrete
//! aliases below fix the scalar used by configs, file formats and the CLI.

pub mod codec;
pub mod error;
pub mod eval;
pub mod events;
pub mod framing;
pub mod geometry;
pub mod real;
pub mod receiver;
pub mod sim;

pub use error::{Error, Result};

/// Scalar used by serialized configs, reports and the CLI.
pub type Scalar = f64;

/// Scene description with the default scalar.
pub type Scene = geometry::SceneConfig<Scalar>;
/// Receiver trajectory with the default scalar.
pub type Motion = geometry::Trajectory<Scalar>;
/// Noise model with the default scalar.
pub type Noise = sim::NoiseModel<Scalar>;

/// Event-camera sensor width in pixels.
pub const SENSOR_W: u16 = 1280;
/// Event-camera sensor height in pixels.
pub const SENSOR_H: u16 = 720;

/// LED blinking rate: one OOK chip per 100 µs.
pub const CHIP_RATE_HZ: u32 = 10_000;
/// Duration of one chip in microseconds.
pub const CHIP_US: u64 = 1_000_000 / CHIP_RATE_HZ as u64;
