//! Grid pilot correlation and weighted cluster separation.
//!
//! The bar box is tiled into small square grids. Each grid pools its
//! events into a tri-valued chip sequence; correlating the reconstructed
//! pilot portion against every cluster's codeword gives the cluster
//! existence weights, and info chips are separated by weighting each
//! grid's signal with them.

use crate::codec::{self, Chip, Codebook, CODEWORD_LEN};
use crate::error::{Error, Result};
use crate::framing::{complement_missing, reconstruct_even, PilotSequence};
use crate::real::Real;
use crate::receiver::filter::PixelBox;
use crate::receiver::track::CorrectedEvent;
use crate::CHIP_US;

/// Tiling of the bar box into `grid_px` x `grid_px` cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub origin_x: u16,
    pub origin_y: u16,
    pub grid_px: u16,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn from_box(bbox: PixelBox, grid_px: u16) -> GridSpec {
        let grid_px = grid_px.max(1);
        GridSpec {
            origin_x: bbox.x_min,
            origin_y: bbox.y_min,
            grid_px,
            nx: bbox.width().div_ceil(grid_px as usize),
            ny: bbox.height().div_ceil(grid_px as usize),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat cell index of a (sub-pixel) coordinate, if inside the tiling.
    pub fn cell_of<R: Real>(&self, x: R, y: R) -> Option<usize> {
        let gx = (x - R::of(self.origin_x as f64)).to_f64c();
        let gy = (y - R::of(self.origin_y as f64)).to_f64c();
        if gx < 0.0 || gy < 0.0 {
            return None;
        }
        let gx = (gx / self.grid_px as f64) as usize;
        let gy = (gy / self.grid_px as f64) as usize;
        if gx >= self.nx || gy >= self.ny {
            return None;
        }
        Some(gy * self.nx + gx)
    }

    /// Grid coordinates `(gx, gy)` of a flat index.
    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }
}

/// Per-grid tri-valued chip sequence (the pooled event polarity signs).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSignal {
    pub gx: usize,
    pub gy: usize,
    pub i_xy: Vec<i8>,
}

/// Pools events into per-cell, per-slot polarity sums and quantizes each
/// slot to its sign. Slot 0 opens at `slot0_t_us`; events are binned to
/// the nearest chip boundary.
pub fn grid_signals<R: Real>(
    events: &[CorrectedEvent<R>],
    spec: &GridSpec,
    slot0_t_us: u64,
    n_slots: usize,
) -> Vec<Vec<i8>> {
    let mut sums = vec![0i32; spec.n_cells() * n_slots];
    for e in events {
        let Some(cell) = spec.cell_of(e.x, e.y) else {
            continue;
        };
        let rel = e.t_us as i64 - slot0_t_us as i64 + CHIP_US as i64 / 2;
        if rel < 0 {
            continue;
        }
        let slot = (rel / CHIP_US as i64) as usize;
        if slot < n_slots {
            sums[cell * n_slots + slot] += e.p as i32;
        }
    }
    (0..spec.n_cells())
        .map(|c| {
            sums[c * n_slots..(c + 1) * n_slots]
                .iter()
                .map(|&s| s.signum() as i8)
                .collect()
        })
        .collect()
}

/// Thresholded per-grid, per-cluster existence weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterWeightMap {
    pub spec: GridSpec,
    /// `weights[cell][k]` after thresholding: 0 or a value above
    /// `thetas[k]`.
    pub weights: Vec<Vec<i32>>,
    /// Per-cluster threshold, relative to that cluster's peak weight so
    /// a cluster with a weak footprint keeps its best grids.
    pub thetas: Vec<f64>,
    pub n_clusters: usize,
}

impl ClusterWeightMap {
    pub fn weight(&self, gx: usize, gy: usize, k: usize) -> i32 {
        self.weights[gy * self.spec.nx + gx][k]
    }

    /// Clusters with no surviving weight anywhere.
    pub fn lost_clusters(&self) -> Vec<usize> {
        (0..self.n_clusters)
            .filter(|&k| self.weights.iter().all(|w| w[k] == 0))
            .collect()
    }

    pub fn max_weight(&self, k: usize) -> i32 {
        self.weights.iter().map(|w| w[k]).max().unwrap_or(0)
    }

    pub fn active_grids(&self, k: usize) -> usize {
        self.weights.iter().filter(|w| w[k] > 0).count()
    }
}

/// Correlates every grid's reconstructed pilot against the assigned
/// cluster codewords and thresholds the weights.
///
/// The pilot sequence of each cell is rebuilt from whichever spread pair
/// element survived, then `w[cell][k]` is its inner product with cluster
/// `k`'s codeword. Weights at or below `theta_rel` times the cluster's
/// own peak weight are zeroed.
pub fn grid_correlate_lossy<R: Real>(
    pilot_events: &[CorrectedEvent<R>],
    spec: &GridSpec,
    pilots: &[PilotSequence],
    n_clusters: usize,
    pilot_slot0_us: u64,
    theta_rel: f64,
) -> (ClusterWeightMap, Vec<usize>) {
    let n_slots = 2 * CODEWORD_LEN;
    let signals = grid_signals(pilot_events, spec, pilot_slot0_us, n_slots);

    let mut weights = vec![vec![0i32; n_clusters]; spec.n_cells()];
    for (cell, b) in signals.iter().enumerate() {
        if b.iter().all(|&v| v == 0) {
            continue;
        }
        let b_prime = reconstruct_even(b).expect("slot count is even");
        let b_second = complement_missing(b, &b_prime).expect("length matches");
        for (k, pilot) in pilots.iter().take(n_clusters).enumerate() {
            let w: i32 = b_second
                .iter()
                .zip(pilot.wh_code())
                .map(|(&o, &c)| o as i32 * c as i32)
                .sum();
            weights[cell][k] = w;
        }
    }

    // ruling out weights below half of a perfect correlation keeps pure
    // noise from carrying a cluster whose pilot is nowhere in view
    let floor = CODEWORD_LEN as f64 / 2.0;
    let thetas: Vec<f64> = (0..n_clusters)
        .map(|k| {
            let max_w = weights.iter().map(|w| w[k]).max().unwrap_or(0);
            theta_rel * (max_w as f64).max(floor)
        })
        .collect();
    for w in weights.iter_mut() {
        for (v, theta) in w.iter_mut().zip(&thetas) {
            if (*v as f64) <= *theta {
                *v = 0;
            }
        }
    }

    let map = ClusterWeightMap {
        spec: *spec,
        weights,
        thetas,
        n_clusters,
    };
    let lost = map.lost_clusters();
    (map, lost)
}

/// [`grid_correlate_lossy`] that fails when any cluster went unseen.
pub fn grid_correlate<R: Real>(
    pilot_events: &[CorrectedEvent<R>],
    spec: &GridSpec,
    pilots: &[PilotSequence],
    n_clusters: usize,
    pilot_slot0_us: u64,
    theta_rel: f64,
) -> Result<ClusterWeightMap> {
    let (map, lost) = grid_correlate_lossy(
        pilot_events,
        spec,
        pilots,
        n_clusters,
        pilot_slot0_us,
        theta_rel,
    );
    match lost.first() {
        Some(&cluster_id) => Err(Error::ClusterLost { cluster_id }),
        None => Ok(map),
    }
}

/// One cluster's decode of a single frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterFrameDecode {
    pub cluster_id: usize,
    /// 24 payload bits (MSB-first nibbles), zeroed when `lost`.
    pub bits: Vec<bool>,
    pub symbols: Vec<u8>,
    /// Matched-filter score per codeword.
    pub scores: Vec<i32>,
    /// True when no grid carried this cluster's pilot this frame.
    pub lost: bool,
}

/// Separates the frame's info chips into per-cluster bit streams.
///
/// For each cluster the grids' sign signals are combined weighted by the
/// cluster's weights, sign-quantized, and decoded codeword by codeword.
/// The chip preceding each codeword (the pilot's last spread chip, then
/// each decoded codeword's tail) feeds the boundary template element.
pub fn separate_and_decode<R: Real>(
    info_events: &[CorrectedEvent<R>],
    weights: &ClusterWeightMap,
    book: &Codebook,
    pilots: &[PilotSequence],
    info_slot0_us: u64,
    n_info_chips: usize,
) -> Vec<ClusterFrameDecode> {
    let signals = grid_signals(info_events, &weights.spec, info_slot0_us, n_info_chips);
    let n_codewords = n_info_chips / CODEWORD_LEN;

    (0..weights.n_clusters)
        .map(|k| {
            if weights.weights.iter().all(|w| w[k] == 0) {
                return ClusterFrameDecode {
                    cluster_id: k,
                    bits: vec![false; n_codewords * 4],
                    symbols: vec![0; n_codewords],
                    scores: vec![0; n_codewords],
                    lost: true,
                };
            }
            // I(t) = sum over grids of w * i_xy(t), then sign-quantize
            let mut combined = vec![0i64; n_info_chips];
            for (cell, sig) in signals.iter().enumerate() {
                let w = weights.weights[cell][k] as i64;
                if w == 0 {
                    continue;
                }
                for (t, &v) in sig.iter().enumerate() {
                    combined[t] += w * v as i64;
                }
            }
            let quantized: Vec<i8> = combined.iter().map(|&v| v.signum() as i8).collect();

            // spread[31] = +wh_code[15]: the chip entering the info block
            let mut prev = Chip::new(pilots[k].wh_code()[CODEWORD_LEN - 1])
                .expect("codewords are bipolar");
            let mut bits = Vec::with_capacity(n_codewords * 4);
            let mut symbols = Vec::with_capacity(n_codewords);
            let mut scores = Vec::with_capacity(n_codewords);
            for m in 0..n_codewords {
                let obs = &quantized[m * CODEWORD_LEN..(m + 1) * CODEWORD_LEN];
                let (sym, score) = codec::decode_codeword_after(obs, book, Some(prev))
                    .expect("observation length is fixed");
                bits.extend_from_slice(&codec::symbol_to_bits(sym));
                symbols.push(sym);
                scores.push(score);
                prev = book.entry(sym).last_chip();
            }
            ClusterFrameDecode {
                cluster_id: k,
                bits,
                symbols,
                scores,
                lost: false,
            }
        })
        .collect()
}
