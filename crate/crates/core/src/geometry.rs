//! LED-bar geometry: pinhole projection, motion and vibration.
//!
//! The bar of `n_leds` LEDs hangs vertically, centered in the field of
//! view; a pinhole camera with focal length `focal_px` projects it at
//! the trajectory's current range. All math here is generic over the
//! float scalar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::{SENSOR_H, SENSOR_W};

/// Transmitter and camera geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig<R> {
    /// Total LEDs on the bar.
    pub n_leds: usize,
    /// Adjacent LEDs driven together: 8, 6 or 3 (12/16/32 clusters).
    pub leds_per_cluster: usize,
    /// Vertical LED spacing in meters.
    pub led_pitch_m: R,
    /// Initial transmitter-receiver range in meters.
    pub distance_m: R,
    /// Focal length in pixels (25 mm lens over 4.86 um pitch ~ 5144).
    pub focal_px: R,
    /// Optical point-spread width; LEDs raster as discs of radius
    /// `2 * blob_sigma_px`.
    pub blob_sigma_px: R,
}

impl<R: Real> Default for SceneConfig<R> {
    fn default() -> Self {
        SceneConfig {
            n_leds: 96,
            leds_per_cluster: 6,
            led_pitch_m: R::of(0.0125),
            distance_m: R::of(30.0),
            focal_px: R::of(5144.0),
            blob_sigma_px: R::of(0.4),
        }
    }
}

impl<R: Real> SceneConfig<R> {
    pub fn n_clusters(&self) -> usize {
        self.n_leds / self.leds_per_cluster
    }

    pub fn validate(&self) -> Result<()> {
        if self.leds_per_cluster == 0 || self.n_leds == 0 {
            return Err(Error::Config("scene: zero LED count".into()));
        }
        if self.n_leds % self.leds_per_cluster != 0 {
            return Err(Error::Config(format!(
                "scene.n_leds {} not divisible by leds_per_cluster {}",
                self.n_leds, self.leds_per_cluster
            )));
        }
        if self.distance_m <= R::zero() {
            return Err(Error::Config("scene.distance_m must be positive".into()));
        }
        if self.focal_px <= R::zero() || self.led_pitch_m <= R::zero() {
            return Err(Error::Config(
                "scene.focal_px and scene.led_pitch_m must be positive".into(),
            ));
        }
        if self.blob_sigma_px < R::of(0.25) {
            return Err(Error::Config(
                "scene.blob_sigma_px below 0.25 leaves sub-pixel footprints".into(),
            ));
        }
        Ok(())
    }
}

/// Receiver motion: longitudinal approach plus vertical vibration.
///
/// Vibration is a sinusoid plus a seeded random walk (1 ms knots,
/// linearly interpolated), both expressed in sensor pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Trajectory<R> {
    /// Approach speed in m/s (0 for a static link).
    pub speed_mps: R,
    /// Peak amplitude of the vibration sinusoid in pixels.
    pub vib_amp_px: R,
    pub vib_freq_hz: R,
    /// Per-knot standard deviation of the random-walk component.
    pub vib_walk_sigma_px: R,
    /// Seed of the random-walk component.
    pub seed: u64,
}

impl<R: Real> Default for Trajectory<R> {
    fn default() -> Self {
        Trajectory {
            speed_mps: R::zero(),
            vib_amp_px: R::zero(),
            vib_freq_hz: R::zero(),
            vib_walk_sigma_px: R::zero(),
            seed: 0,
        }
    }
}

/// Random-walk knots at 1 ms spacing, extended lazily.
struct WalkCache<R> {
    knots: Vec<R>,
    rng: rand_chacha::ChaCha8Rng,
}

const WALK_KNOT_US: u64 = 1_000;

impl<R: Real> WalkCache<R> {
    fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        WalkCache {
            knots: vec![R::zero()],
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x57a1_4b2d_9c0f_e681),
        }
    }

    fn at(&mut self, t_us: u64, sigma: R) -> R {
        if sigma == R::zero() {
            return R::zero();
        }
        use rand_distr::Distribution;
        let idx = (t_us / WALK_KNOT_US) as usize;
        let frac = R::of_usize((t_us % WALK_KNOT_US) as usize) / R::of_usize(WALK_KNOT_US as usize);
        let normal = rand_distr::Normal::new(0.0f64, 1.0).unwrap();
        while self.knots.len() <= idx + 1 {
            let step = R::of(normal.sample(&mut self.rng)) * sigma;
            let last = *self.knots.last().unwrap();
            self.knots.push(last + step);
        }
        self.knots[idx] + (self.knots[idx + 1] - self.knots[idx]) * frac
    }
}

/// Evaluates bar pose over time for one (scene, trajectory) pair.
///
/// Holds the random-walk cache, so evaluation is deterministic for a
/// given trajectory seed no matter the query order.
pub struct TrajectorySampler<'a, R: Real> {
    scene: &'a SceneConfig<R>,
    traj: &'a Trajectory<R>,
    walk: WalkCache<R>,
}

impl<'a, R: Real> TrajectorySampler<'a, R> {
    pub fn new(scene: &'a SceneConfig<R>, traj: &'a Trajectory<R>) -> Self {
        TrajectorySampler {
            scene,
            traj,
            walk: WalkCache::new(traj.seed),
        }
    }

    /// Range to the transmitter at `t`; errors once the bar is reached.
    pub fn distance_m(&self, t_us: u64) -> Result<R> {
        let t_s = R::of_usize(t_us as usize) / R::of(1e6);
        let d = self.scene.distance_m - self.traj.speed_mps * t_s;
        if d <= R::zero() {
            return Err(Error::SimulationHorizon {
                t_us,
                distance_m: d.to_f64c(),
            });
        }
        Ok(d)
    }

    /// Vertical vibration displacement at `t`, in pixels.
    pub fn vibration_px(&mut self, t_us: u64) -> R {
        let t_s = R::of_usize(t_us as usize) / R::of(1e6);
        let sin = self.traj.vib_amp_px
            * (R::of(2.0) * R::PI() * self.traj.vib_freq_hz * t_s).sin();
        sin + self.walk.at(t_us, self.traj.vib_walk_sigma_px)
    }

    /// Projected bar center `(x, y)` in pixels.
    pub fn bar_center_px(&mut self, t_us: u64) -> Result<(R, R)> {
        self.distance_m(t_us)?;
        let cx = R::of(SENSOR_W as f64 / 2.0);
        let cy = R::of(SENSOR_H as f64 / 2.0) + self.vibration_px(t_us);
        Ok((cx, cy))
    }

    /// Projected center of LED `k` (0-based from the top of the bar).
    pub fn led_center_px(&mut self, led: usize, t_us: u64) -> Result<(R, R)> {
        let d = self.distance_m(t_us)?;
        let (cx, cy) = self.bar_center_px(t_us)?;
        let half = R::of_usize(self.scene.n_leds - 1) / R::of(2.0);
        let off_m = (R::of_usize(led) - half) * self.scene.led_pitch_m;
        Ok((cx, cy + self.scene.focal_px * off_m / d))
    }

    /// Projected pixel spacing between adjacent LEDs.
    pub fn led_spacing_px(&self, t_us: u64) -> Result<R> {
        let d = self.distance_m(t_us)?;
        Ok(self.scene.focal_px * self.scene.led_pitch_m / d)
    }

    /// Pixel footprint of one cluster: the union of discs of radius
    /// `2 * blob_sigma_px` around its LED centers, clipped to the sensor.
    pub fn cluster_footprint(&mut self, cluster: usize, t_us: u64) -> Result<Footprint> {
        let lpc = self.scene.leds_per_cluster;
        let r = R::of(2.0) * self.scene.blob_sigma_px;
        let r2 = r * r;
        let mut pixels: Vec<(u16, u16)> = Vec::new();
        for led in cluster * lpc..(cluster + 1) * lpc {
            let (cx, cy) = self.led_center_px(led, t_us)?;
            let x_lo = (cx - r).floor().to_f64c().max(0.0) as i64;
            let x_hi = (cx + r).ceil().to_f64c().min(SENSOR_W as f64 - 1.0) as i64;
            let y_lo = (cy - r).floor().to_f64c().max(0.0) as i64;
            let y_hi = (cy + r).ceil().to_f64c().min(SENSOR_H as f64 - 1.0) as i64;
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    let dx = R::of(x as f64 + 0.5) - cx;
                    let dy = R::of(y as f64 + 0.5) - cy;
                    if dx * dx + dy * dy <= r2 {
                        pixels.push((x as u16, y as u16));
                    }
                }
            }
        }
        pixels.sort_unstable();
        pixels.dedup();
        Ok(Footprint { pixels })
    }

    /// Count-weighted centroid of all LED centers (the analytic truth the
    /// receiver's measured centroid is compared against).
    pub fn analytic_centroid(&mut self, t_us: u64) -> Result<(R, R)> {
        self.bar_center_px(t_us)
    }
}

/// Set of sensor pixels one cluster currently covers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Footprint {
    /// Sorted, deduplicated `(x, y)` pixels.
    pub pixels: Vec<(u16, u16)>,
}

impl Footprint {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Bounding box `(x_min, y_min, x_max, y_max)`, if nonempty.
    pub fn bounds(&self) -> Option<(u16, u16, u16, u16)> {
        if self.pixels.is_empty() {
            return None;
        }
        let mut b = (u16::MAX, u16::MAX, 0u16, 0u16);
        for &(x, y) in &self.pixels {
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        Some(b)
    }
}

/// Footprints of every cluster at time `t`.
pub fn project_bar<R: Real>(
    scene: &SceneConfig<R>,
    traj: &Trajectory<R>,
    t_us: u64,
) -> Result<Vec<Footprint>> {
    scene.validate()?;
    let mut sampler = TrajectorySampler::new(scene, traj);
    (0..scene.n_clusters())
        .map(|k| sampler.cluster_footprint(k, t_us))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scene64(distance: f64) -> SceneConfig<f64> {
        SceneConfig {
            distance_m: distance,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn static_scene_footprints_constant() {
        let scene = scene64(30.0);
        let traj = Trajectory::default();
        let a = project_bar(&scene, &traj, 0).unwrap();
        let b = project_bar(&scene, &traj, 5_000_000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        assert!(a.iter().all(|f| !f.is_empty()));
    }

    #[test]
    fn halving_distance_doubles_spacing() {
        let scene = scene64(40.0);
        let traj = Trajectory::default();
        let s40 = TrajectorySampler::new(&scene, &traj).led_spacing_px(0).unwrap();
        let scene20 = scene64(20.0);
        let s20 = TrajectorySampler::new(&scene20, &traj).led_spacing_px(0).unwrap();
        assert_relative_eq!(s20, 2.0 * s40, max_relative = 1e-12);
    }

    #[test]
    fn spacing_at_40m_matches_pinhole() {
        // 5144 px * 0.0125 m / 40 m = 1.6075 px
        let scene = scene64(40.0);
        let traj = Trajectory::default();
        let s = TrajectorySampler::new(&scene, &traj).led_spacing_px(0).unwrap();
        assert_relative_eq!(s, 1.6075, epsilon = 1e-9);
    }

    #[test]
    fn horizon_error_when_bar_reached() {
        let scene = scene64(10.0);
        let traj = Trajectory {
            speed_mps: 10.0,
            ..Trajectory::default()
        };
        let sampler = TrajectorySampler::new(&scene, &traj);
        assert!(sampler.distance_m(999_999).is_ok());
        assert!(matches!(
            sampler.distance_m(1_000_001),
            Err(Error::SimulationHorizon { .. })
        ));
    }

    #[test]
    fn vibration_slew_reaches_eight_px_per_10ms() {
        // amp 4 px at 50 Hz: trough-to-peak is 8 px over a half period (10 ms)
        let scene = scene64(30.0);
        let traj = Trajectory {
            vib_amp_px: 4.0,
            vib_freq_hz: 50.0,
            ..Trajectory::default()
        };
        let mut sampler = TrajectorySampler::new(&scene, &traj);
        // quarter period at 5 ms: -4 px; three quarters at 15 ms: +4 px
        let lo = sampler.vibration_px(15_000);
        let hi = sampler.vibration_px(5_000);
        assert_relative_eq!((lo - hi).abs(), 8.0, epsilon = 1e-6);
    }

    #[test]
    fn walk_is_deterministic_and_continuous() {
        let scene = scene64(30.0);
        let traj = Trajectory {
            vib_walk_sigma_px: 0.5,
            seed: 42,
            ..Trajectory::default()
        };
        let mut a = TrajectorySampler::new(&scene, &traj);
        let mut b = TrajectorySampler::new(&scene, &traj);
        // query in different orders; values must agree
        let va_late = a.vibration_px(20_000);
        let va_early = a.vibration_px(3_500);
        let vb_early = b.vibration_px(3_500);
        let vb_late = b.vibration_px(20_000);
        assert_eq!(va_late, vb_late);
        assert_eq!(va_early, vb_early);
        // interpolation stays between neighboring knots
        let k3 = a.vibration_px(3_000);
        let k4 = a.vibration_px(4_000);
        assert!(va_early >= k3.min(k4) && va_early <= k3.max(k4));
    }

    #[test]
    fn generic_over_f32() {
        let scene: SceneConfig<f32> = SceneConfig {
            distance_m: 40.0,
            ..SceneConfig::default()
        };
        let traj: Trajectory<f32> = Trajectory::default();
        let s = TrajectorySampler::new(&scene, &traj).led_spacing_px(0).unwrap();
        assert!((s - 1.6075).abs() < 1e-4);
        let fp = project_bar(&scene, &traj, 0).unwrap();
        let fp64 = project_bar(&scene64(40.0), &Trajectory::default(), 0).unwrap();
        assert_eq!(fp.len(), fp64.len());
    }

    #[test]
    fn footprint_pixels_within_bounds_and_deduped() {
        let scene = scene64(10.0);
        let traj = Trajectory::default();
        for fp in project_bar(&scene, &traj, 0).unwrap() {
            let mut seen = fp.pixels.clone();
            seen.dedup();
            assert_eq!(seen.len(), fp.pixels.len());
            for &(x, y) in &fp.pixels {
                assert!(x < SENSOR_W && y < SENSOR_H);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut scene = scene64(30.0);
        scene.leds_per_cluster = 7;
        assert!(scene.validate().is_err());
        let mut scene = scene64(0.0);
        scene.distance_m = 0.0;
        assert!(scene.validate().is_err());
        assert!(scene64(30.0).validate().is_ok());
    }
}
