//! Synthetic event-camera channel.
//!
//! LEDs are binary sources, so the sensor model is transition-driven: at
//! every chip boundary where a cluster's OOK level changes, each pixel of
//! that cluster's footprint sees an intensity step. Pixels whose net step
//! (summed over overlapping clusters) clears the contrast threshold emit
//! one event with the step's sign. Hardware high-pass filtering is taken
//! as already applied: static background gradients produce nothing and
//! only a Poisson noise floor, timestamp jitter, event drops and a
//! per-pixel refractory dead time remain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::events::{sort_events, Event};
use crate::framing::ChipTimeline;
use crate::geometry::{SceneConfig, Trajectory, TrajectorySampler};
use crate::real::Real;
use crate::{CHIP_RATE_HZ, CHIP_US, SENSOR_H, SENSOR_W};

/// Channel impairments of the simulated sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel<R> {
    /// Probability that any single event is lost.
    pub p_drop: R,
    /// Gaussian timestamp jitter, standard deviation in microseconds.
    pub jitter_sigma_us: R,
    /// Background event rate per pixel (post hardware filtering).
    pub bg_rate_hz_per_px: R,
    /// Per-pixel dead time; must stay below one chip (100 us) or
    /// consecutive-chip edges get eaten.
    pub refractory_us: u64,
    /// Minimum net intensity step that triggers an event. A single
    /// cluster contributes a unit step, so 0.5 fires on any lone edge
    /// while letting opposite edges of overlapping clusters cancel.
    pub contrast_threshold: R,
}

impl<R: Real> Default for NoiseModel<R> {
    fn default() -> Self {
        NoiseModel {
            p_drop: R::zero(),
            jitter_sigma_us: R::zero(),
            bg_rate_hz_per_px: R::zero(),
            refractory_us: 50,
            contrast_threshold: R::of(0.5),
        }
    }
}

impl<R: Real> NoiseModel<R> {
    pub fn validate(&self) -> Result<()> {
        if self.p_drop < R::zero() || self.p_drop > R::one() {
            return Err(Error::Config("noise.p_drop must lie in [0, 1]".into()));
        }
        if self.jitter_sigma_us < R::zero() || self.bg_rate_hz_per_px < R::zero() {
            return Err(Error::Config(
                "noise.jitter_sigma_us and noise.bg_rate_hz_per_px must be >= 0".into(),
            ));
        }
        if self.contrast_threshold <= R::zero() {
            return Err(Error::Config("noise.contrast_threshold must be > 0".into()));
        }
        Ok(())
    }
}

/// SplitMix64 step, used to derive independent sub-seeds from a master
/// seed. Stable across platforms.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generates the event stream for time-aligned cluster timelines.
///
/// `start_us` places chip 0 on the absolute simulation clock, so
/// back-to-back packets share one trajectory. The output is sorted by
/// `(t, y, x)` and is a pure function of the arguments.
pub fn generate_events<R: Real>(
    timelines: &[ChipTimeline],
    scene: &SceneConfig<R>,
    traj: &Trajectory<R>,
    noise: &NoiseModel<R>,
    seed: u64,
    start_us: u64,
) -> Result<Vec<Event>> {
    scene.validate()?;
    noise.validate()?;
    if timelines.is_empty() {
        return Ok(Vec::new());
    }
    let n_chips = timelines[0].len();
    for tl in timelines {
        if tl.len() != n_chips {
            return Err(Error::invalid("timelines must share one length"));
        }
        if tl.chip_rate_hz != CHIP_RATE_HZ {
            return Err(Error::invalid(format!(
                "timeline chip rate {} != {CHIP_RATE_HZ}",
                tl.chip_rate_hz
            )));
        }
        if tl.cluster_id >= scene.n_clusters() {
            return Err(Error::invalid(format!(
                "timeline cluster {} outside scene's {} clusters",
                tl.cluster_id,
                scene.n_clusters()
            )));
        }
    }

    let mut sampler = TrajectorySampler::new(scene, traj);
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
    let jitter = if noise.jitter_sigma_us > R::zero() {
        Some(Normal::new(0.0f64, noise.jitter_sigma_us.to_f64c()).unwrap())
    } else {
        None
    };

    // signal events at level-change boundaries
    let threshold = noise.contrast_threshold.to_f64c();
    let mut candidates: Vec<Event> = Vec::new();
    let mut steps: HashMap<(u16, u16), i32> = HashMap::new();
    for j in 1..n_chips {
        let t_boundary = start_us + j as u64 * CHIP_US;
        steps.clear();
        for tl in timelines {
            let delta = tl.levels[j] as i32 - tl.levels[j - 1] as i32;
            if delta == 0 {
                continue;
            }
            let footprint = sampler.cluster_footprint(tl.cluster_id, t_boundary)?;
            for &(x, y) in &footprint.pixels {
                *steps.entry((x, y)).or_insert(0) += delta;
            }
        }
        if steps.is_empty() {
            continue;
        }
        // deterministic pixel order for the RNG draws
        let mut changed: Vec<((u16, u16), i32)> =
            steps.iter().map(|(&px, &d)| (px, d)).collect();
        changed.sort_unstable_by_key(|&((x, y), _)| (y, x));
        for ((x, y), d) in changed {
            if (d.abs() as f64) < threshold {
                continue;
            }
            let t = match &jitter {
                Some(n) => {
                    let dt = n.sample(&mut jitter_rng).round() as i64;
                    (t_boundary as i64 + dt).max(0) as u64
                }
                None => t_boundary,
            };
            candidates.push(Event::new(t, x, y, if d > 0 { 1 } else { -1 }));
        }
    }

    // Poisson background over the whole sensor
    let duration_s = (n_chips as u64 * CHIP_US) as f64 * 1e-6;
    let bg_rate = noise.bg_rate_hz_per_px.to_f64c();
    if bg_rate > 0.0 {
        let mut bg_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
        let lambda = bg_rate * duration_s * (SENSOR_W as f64) * (SENSOR_H as f64);
        let count = Poisson::new(lambda).unwrap().sample(&mut bg_rng) as u64;
        let t_end = start_us + n_chips as u64 * CHIP_US;
        for _ in 0..count {
            candidates.push(Event::new(
                bg_rng.gen_range(start_us..t_end),
                bg_rng.gen_range(0..SENSOR_W),
                bg_rng.gen_range(0..SENSOR_H),
                if bg_rng.gen::<bool>() { 1 } else { -1 },
            ));
        }
    }

    // transport loss
    let p_drop = noise.p_drop.to_f64c();
    if p_drop > 0.0 {
        let mut drop_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 3));
        candidates.retain(|_| drop_rng.gen::<f64>() >= p_drop);
    }

    // per-pixel refractory suppression in chronological order
    if noise.refractory_us > 0 {
        candidates.sort_unstable_by_key(|e| (e.x, e.y, e.t_us));
        let mut kept: Vec<Event> = Vec::with_capacity(candidates.len());
        let mut last: Option<(u16, u16, u64)> = None;
        for e in candidates {
            let blocked = matches!(
                last,
                Some((x, y, t)) if x == e.x && y == e.y && e.t_us.saturating_sub(t) < noise.refractory_us
            );
            if !blocked {
                last = Some((e.x, e.y, e.t_us));
                kept.push(e);
            }
        }
        candidates = kept;
    }

    sort_events(&mut candidates);
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing;

    fn one_cluster_scene() -> SceneConfig<f64> {
        SceneConfig {
            n_leds: 6,
            leds_per_cluster: 6,
            distance_m: 30.0,
            ..SceneConfig::default()
        }
    }

    fn quiet() -> NoiseModel<f64> {
        NoiseModel::default()
    }

    #[test]
    fn constant_level_emits_nothing() {
        let tl = ChipTimeline {
            cluster_id: 0,
            levels: vec![1; 64],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        let ev = generate_events(
            &[tl],
            &one_cluster_scene(),
            &Trajectory::default(),
            &quiet(),
            0,
            0,
        )
        .unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn single_edge_fires_every_footprint_pixel_once() {
        let scene = one_cluster_scene();
        let traj = Trajectory::default();
        let fp = crate::geometry::project_bar(&scene, &traj, 100).unwrap();
        let tl = ChipTimeline {
            cluster_id: 0,
            levels: vec![0, 1],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        let ev = generate_events(&[tl], &scene, &traj, &quiet(), 0, 0).unwrap();
        assert_eq!(ev.len(), fp[0].len());
        assert!(!ev.is_empty());
        for e in &ev {
            assert_eq!(e.p, 1);
            assert_eq!(e.t_us, 100);
            assert!(fp[0].pixels.binary_search(&(e.x, e.y)).is_ok());
        }
    }

    #[test]
    fn spread_pilot_alternates_polarity_per_pixel() {
        // the all-ones pilot spreads to (-1,+1) repeated: every boundary flips
        let pilots = framing::build_pilot_codebook();
        let spread = pilots[0].spread();
        let tl = ChipTimeline::from_bipolar(0, &spread[..]);
        let scene = one_cluster_scene();
        let ev =
            generate_events(&[tl], &scene, &Trajectory::default(), &quiet(), 0, 0).unwrap();

        let mut per_pixel: HashMap<(u16, u16), Vec<(u64, i8)>> = HashMap::new();
        for e in &ev {
            per_pixel.entry((e.x, e.y)).or_default().push((e.t_us, e.p));
        }
        for seq in per_pixel.values() {
            assert_eq!(seq.len(), 31); // 31 internal boundaries, all of them edges
            for (i, &(t, p)) in seq.iter().enumerate() {
                assert_eq!(t, (i as u64 + 1) * CHIP_US);
                let expect = if i % 2 == 0 { 1 } else { -1 };
                assert_eq!(p, expect);
            }
        }
    }

    #[test]
    fn polarity_balance_on_symmetric_timeline() {
        let tl = ChipTimeline {
            cluster_id: 0,
            levels: vec![0, 1, 0],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        let ev = generate_events(
            &[tl],
            &one_cluster_scene(),
            &Trajectory::default(),
            &quiet(),
            0,
            0,
        )
        .unwrap();
        let pos = ev.iter().filter(|e| e.p == 1).count();
        let neg = ev.iter().filter(|e| e.p == -1).count();
        assert!(pos > 0);
        assert_eq!(pos, neg);
    }

    #[test]
    fn event_conservation_without_noise() {
        // widely separated clusters: total events = edges x footprint size
        let scene = SceneConfig {
            n_leds: 12,
            leds_per_cluster: 6,
            distance_m: 10.0,
            ..SceneConfig::default()
        };
        let traj = Trajectory::default();
        let fp = crate::geometry::project_bar(&scene, &traj, 0).unwrap();
        // disjoint footprints make the count exact
        let mut all: Vec<(u16, u16)> = fp.iter().flat_map(|f| f.pixels.clone()).collect();
        let total: usize = fp.iter().map(|f| f.len()).sum();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), total);

        let t0 = ChipTimeline {
            cluster_id: 0,
            levels: vec![0, 1, 1, 0, 1],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        let t1 = ChipTimeline {
            cluster_id: 1,
            levels: vec![1, 1, 0, 0, 1],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        let edges0 = 3; // 0->1, 1->0, 0->1
        let edges1 = 2; // 1->0, 0->1
        let ev = generate_events(&[t0, t1], &scene, &traj, &quiet(), 7, 0).unwrap();
        assert_eq!(ev.len(), edges0 * fp[0].len() + edges1 * fp[1].len());
    }

    #[test]
    fn overlapping_opposite_edges_cancel() {
        // two clusters forced onto the same pixels by a huge blob
        let scene = SceneConfig {
            n_leds: 2,
            leds_per_cluster: 1,
            distance_m: 60.0,
            blob_sigma_px: 3.0,
            ..SceneConfig::default()
        };
        let traj = Trajectory::default();
        let fp = crate::geometry::project_bar(&scene, &traj, 0).unwrap();
        let shared: Vec<(u16, u16)> = fp[0]
            .pixels
            .iter()
            .filter(|p| fp[1].pixels.binary_search(p).is_ok())
            .copied()
            .collect();
        assert!(!shared.is_empty(), "test needs overlapping footprints");

        let up = ChipTimeline {
            cluster_id: 0,
            levels: vec![0, 1],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        let down = ChipTimeline {
            cluster_id: 1,
            levels: vec![1, 0],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        let ev = generate_events(&[up, down], &scene, &traj, &quiet(), 0, 0).unwrap();
        for e in &ev {
            assert!(
                shared.binary_search(&(e.x, e.y)).is_err(),
                "shared pixel ({}, {}) fired despite cancelling edges",
                e.x,
                e.y
            );
        }
    }

    #[test]
    fn deterministic_under_full_noise() {
        let pilots = framing::build_pilot_codebook();
        let tl = ChipTimeline::from_bipolar(0, &pilots[3].spread()[..]);
        let noise = NoiseModel {
            p_drop: 0.1,
            jitter_sigma_us: 20.0,
            bg_rate_hz_per_px: 5.0,
            refractory_us: 50,
            ..NoiseModel::default()
        };
        let scene = one_cluster_scene();
        let traj = Trajectory {
            vib_amp_px: 2.0,
            vib_freq_hz: 30.0,
            vib_walk_sigma_px: 0.1,
            seed: 5,
            ..Trajectory::default()
        };
        let a = generate_events(&[tl.clone()], &scene, &traj, &noise, 99, 1000).unwrap();
        let b = generate_events(&[tl], &scene, &traj, &noise, 99, 1000).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        assert!(crate::events::is_sorted(&a));
    }

    #[test]
    fn measured_centroid_matches_analytic() {
        // identical waveforms on every cluster give uniform per-pixel
        // counts, so the count-weighted centroid is purely geometric
        let pilots = framing::build_pilot_codebook();
        let scene = SceneConfig {
            distance_m: 20.0,
            ..SceneConfig::default()
        };
        let traj = Trajectory::default();
        let timelines: Vec<ChipTimeline> = (0..scene.n_clusters())
            .map(|k| ChipTimeline::from_bipolar(k, &pilots[0].spread()[..]))
            .collect();
        let ev = generate_events(&timelines, &scene, &traj, &quiet(), 0, 0).unwrap();
        let (mut sx, mut sy, mut n) = (0.0f64, 0.0f64, 0.0f64);
        for e in &ev {
            sx += e.x as f64 + 0.5;
            sy += e.y as f64 + 0.5;
            n += 1.0;
        }
        let (ax, ay) = TrajectorySampler::new(&scene, &traj)
            .analytic_centroid(0)
            .unwrap();
        assert!((sx / n - ax).abs() < 0.5, "x {} vs {}", sx / n, ax);
        assert!((sy / n - ay).abs() < 0.5, "y {} vs {}", sy / n, ay);
    }

    #[test]
    fn refractory_suppresses_same_pixel_bursts() {
        let scene = one_cluster_scene();
        let tl = ChipTimeline {
            cluster_id: 0,
            levels: vec![0, 1, 0, 1, 0],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        // 100 us edges survive a 50 us dead time...
        let ev = generate_events(
            &[tl.clone()],
            &scene,
            &Trajectory::default(),
            &quiet(),
            0,
            0,
        )
        .unwrap();
        // ...but a dead time longer than a chip eats every second edge
        let slow = NoiseModel {
            refractory_us: 150,
            ..NoiseModel::default()
        };
        let ev_slow =
            generate_events(&[tl], &scene, &Trajectory::default(), &slow, 0, 0).unwrap();
        assert_eq!(ev_slow.len(), ev.len() / 2);
    }

    #[test]
    fn rejects_mismatched_timelines() {
        let a = ChipTimeline {
            cluster_id: 0,
            levels: vec![0, 1],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        let b = ChipTimeline {
            cluster_id: 1,
            levels: vec![0, 1, 0],
            chip_rate_hz: CHIP_RATE_HZ,
        };
        let scene = SceneConfig {
            n_leds: 12,
            leds_per_cluster: 6,
            ..SceneConfig::default()
        };
        assert!(generate_events(
            &[a, b],
            &scene,
            &Trajectory::default(),
            &quiet(),
            0,
            0
        )
        .is_err());
    }
}
