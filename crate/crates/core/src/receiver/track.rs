//! Bar tracking: per-pilot centroids and intra-frame motion correction.
//!
//! Each frame's pilot yields one bar position. Motion inside a frame is
//! corrected by interpolating the displacement measured between
//! consecutive pilots: every event is shifted toward where the bar sits
//! at mid-frame, using the displacement of the half-frame it falls in.

use crate::error::{Error, Result};
use crate::events::Event;
use crate::real::Real;
use crate::receiver::filter::PixelBox;
use crate::{SENSOR_H, SENSOR_W};

/// An event whose coordinates have been shifted into sub-pixel floats.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectedEvent<R> {
    pub t_us: u64,
    pub x: R,
    pub y: R,
    pub p: i8,
}

impl<R: Real> CorrectedEvent<R> {
    /// Lifts a raw event to its pixel-center coordinates, unshifted.
    pub fn from_event(e: &Event) -> Self {
        CorrectedEvent {
            t_us: e.t_us,
            x: R::of(e.x as f64 + 0.5),
            y: R::of(e.y as f64 + 0.5),
            p: e.p,
        }
    }
}

/// Event centroid of one pilot window.
///
/// Builds the per-pixel event image over `region` (saturated to presence
/// — a pilot hits every covered pixel many times over, so raw counts
/// only add sensitivity to drop luck), smooths it with a Gaussian of
/// `sigma_px`, keeps pixels above `threshold_rel` of the smoothed
/// maximum, and returns their smoothed-weighted centroid in pixel-center
/// coordinates.
pub fn estimate_centroid<R: Real>(
    pilot_events: &[Event],
    region: PixelBox,
    sigma_px: R,
    threshold_rel: R,
) -> Result<(R, R)> {
    let w = region.width();
    let h = region.height();
    let mut image = vec![R::zero(); w * h];
    let mut any = false;
    for e in pilot_events {
        if region.contains(e.x, e.y) {
            let ix = (e.x - region.x_min) as usize;
            let iy = (e.y - region.y_min) as usize;
            image[iy * w + ix] = R::one();
            any = true;
        }
    }
    if !any {
        return Err(Error::TrackingLost(
            "pilot window contains no events inside the bar box".into(),
        ));
    }

    let smoothed = gaussian_blur(&image, w, h, sigma_px);
    let max = smoothed
        .iter()
        .copied()
        .fold(R::zero(), |a, b| if b > a { b } else { a });
    let threshold = threshold_rel * max;

    let (mut sx, mut sy, mut sw) = (R::zero(), R::zero(), R::zero());
    for iy in 0..h {
        for ix in 0..w {
            let v = smoothed[iy * w + ix];
            if v > threshold {
                let px = R::of(region.x_min as f64 + ix as f64 + 0.5);
                let py = R::of(region.y_min as f64 + iy as f64 + 0.5);
                sx += v * px;
                sy += v * py;
                sw += v;
            }
        }
    }
    if sw <= R::zero() {
        return Err(Error::TrackingLost("all pixels fell below threshold".into()));
    }
    Ok((sx / sw, sy / sw))
}

/// Separable Gaussian blur with kernel radius `ceil(3 sigma)`.
fn gaussian_blur<R: Real>(image: &[R], w: usize, h: usize, sigma: R) -> Vec<R> {
    if sigma <= R::zero() {
        return image.to_vec();
    }
    let radius = (sigma.to_f64c() * 3.0).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut norm = R::zero();
    for i in -radius..=radius {
        let x = R::of(i as f64) / sigma;
        let v = (-x * x / R::of(2.0)).exp();
        kernel.push(v);
        norm += v;
    }
    for v in kernel.iter_mut() {
        *v = *v / norm;
    }

    let mut tmp = vec![R::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = R::zero();
            for (ki, kv) in kernel.iter().enumerate() {
                let sx = x as i64 + ki as i64 - radius;
                if sx >= 0 && (sx as usize) < w {
                    acc += *kv * image[y * w + sx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![R::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = R::zero();
            for (ki, kv) in kernel.iter().enumerate() {
                let sy = y as i64 + ki as i64 - radius;
                if sy >= 0 && (sy as usize) < h {
                    acc += *kv * tmp[sy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Pilot centroids of consecutive frames and their displacements.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidTrack<R> {
    /// One centroid per frame's pilot, in packet order; `None` where the
    /// pilot window was empty.
    pub centroids: Vec<Option<(R, R)>>,
}

impl<R: Real> CentroidTrack<R> {
    /// Displacement from pilot `k` to pilot `k + 1`, when both exist.
    pub fn displacement(&self, k: usize) -> Option<(R, R)> {
        match (self.centroids.get(k)?, self.centroids.get(k + 1)?) {
            (Some(a), Some(b)) => Some((b.0 - a.0, b.1 - a.1)),
            _ => None,
        }
    }

    /// Correction for frame `i` spanning `[t_start, t_end)`.
    ///
    /// At packet edges (or around empty pilots) the single available
    /// displacement serves both half-frames; with none available the
    /// correction degenerates to the identity.
    pub fn frame_correction(&self, i: usize, t_start_us: u64, t_end_us: u64) -> FrameCorrection<R> {
        let prev = if i > 0 { self.displacement(i - 1) } else { None };
        let next = self.displacement(i);
        let zero = (R::zero(), R::zero());
        FrameCorrection {
            t_start_us,
            t_end_us,
            delta_prev: prev.or(next).unwrap_or(zero),
            delta_next: next.or(prev).unwrap_or(zero),
        }
    }
}

/// Interpolated displacement correction over one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameCorrection<R> {
    pub t_start_us: u64,
    pub t_end_us: u64,
    /// Bar displacement measured across the preceding inter-pilot gap.
    pub delta_prev: (R, R),
    /// Bar displacement measured across the following inter-pilot gap.
    pub delta_next: (R, R),
}

impl<R: Real> FrameCorrection<R> {
    pub fn t_mid_us(&self) -> R {
        R::of((self.t_start_us + self.t_end_us) as f64 / 2.0)
    }

    /// Correction factor: positive before mid-frame, zero at it,
    /// negative after.
    pub fn alpha(&self, t_us: u64) -> R {
        let span = R::of((self.t_end_us - self.t_start_us) as f64);
        (self.t_mid_us() - R::of(t_us as f64)) / span
    }

    /// Identity correction for a frame (used when correction is disabled).
    pub fn identity(t_start_us: u64, t_end_us: u64) -> Self {
        FrameCorrection {
            t_start_us,
            t_end_us,
            delta_prev: (R::zero(), R::zero()),
            delta_next: (R::zero(), R::zero()),
        }
    }

    /// Applies the shift to one coordinate pair, clamping to the sensor.
    pub fn apply(&self, x: R, y: R, t_us: u64) -> (R, R) {
        let a = self.alpha(t_us);
        let (dx, dy) = if R::of(t_us as f64) < self.t_mid_us() {
            self.delta_prev
        } else {
            self.delta_next
        };
        let max_x = R::of(SENSOR_W as f64);
        let max_y = R::of(SENSOR_H as f64);
        (
            (x + a * dx).max(R::zero()).min(max_x),
            (y + a * dy).max(R::zero()).min(max_y),
        )
    }
}

/// Shifts every event of one frame per the interpolated displacement.
pub fn correct_vibration<R: Real>(
    events: &[Event],
    correction: &FrameCorrection<R>,
) -> Vec<CorrectedEvent<R>> {
    events
        .iter()
        .map(|e| {
            let c = CorrectedEvent::from_event(e);
            let (x, y) = correction.apply(c.x, c.y, c.t_us);
            CorrectedEvent { x, y, ..c }
        })
        .collect()
}
