//! The receive pipeline.
//!
//! Per packet window: rate-filter the events and box the bar, correlate
//! for the sync, measure one centroid per pilot, shift each frame's
//! events by the interpolated inter-pilot displacement, correlate grids
//! against the pilot codebook, and decode the weighted sums. Streams of
//! back-to-back packets reuse the first sync to pace packet windows.

pub mod filter;
pub mod grid;
pub mod report;
pub mod sync;
pub mod track;

pub use filter::{alternation_filter, FilterResult, PixelBox};
pub use grid::{
    grid_correlate, grid_correlate_lossy, separate_and_decode, ClusterFrameDecode,
    ClusterWeightMap, GridSignal, GridSpec,
};
pub use report::DecodeReport;
pub use sync::{detect_sync, sync_transition_template, SyncResult};
pub use track::{
    correct_vibration, estimate_centroid, CentroidTrack, CorrectedEvent, FrameCorrection,
};

use serde::{Deserialize, Serialize};

use crate::codec::Codebook;
use crate::error::{Error, Result};
use crate::events::Event;
use crate::framing::{PacketLayout, PilotSequence};
use crate::{Scalar, CHIP_US};

/// Tunable receiver parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    /// Alternation filter window.
    pub alternation_window_us: u64,
    /// Events per (pixel, window) needed to survive the filter.
    pub alternation_min_count: u32,
    /// Peak-to-sidelobe ratio below which sync is rejected.
    pub sync_margin_threshold: f64,
    /// How many chips into a packet window the sync may start.
    pub sync_search_chips: usize,
    /// Square grid size in pixels.
    pub grid_px: u16,
    /// Weight threshold as a fraction of the maximum weight. Pooled
    /// mixtures of two assigned pilots reach at most 13/16 of full
    /// weight, so 0.85 admits only near-pure grids into the combining.
    pub theta_rel: f64,
    /// Gaussian sigma for the pilot count image.
    pub centroid_sigma_px: f64,
    /// Pixel-selection threshold relative to the smoothed maximum.
    pub centroid_threshold_rel: f64,
    /// Apply inter-pilot displacement correction.
    pub vibration_correction: bool,
    /// Margin added around the filtered bar box before gridding.
    pub bbox_margin_px: u16,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            alternation_window_us: 10_000,
            alternation_min_count: 8,
            sync_margin_threshold: 1.2,
            sync_search_chips: 60,
            grid_px: 2,
            theta_rel: 0.85,
            centroid_sigma_px: 2.0,
            centroid_threshold_rel: 0.25,
            vibration_correction: true,
            bbox_margin_px: 4,
        }
    }
}

impl ReceiverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alternation_window_us == 0 || self.alternation_min_count == 0 {
            return Err(Error::Config(
                "receiver.alternation_window_us and alternation_min_count must be positive".into(),
            ));
        }
        if self.sync_margin_threshold < 1.0 {
            return Err(Error::Config(
                "receiver.sync_margin_threshold below 1 accepts ambiguous peaks".into(),
            ));
        }
        if self.grid_px == 0 {
            return Err(Error::Config("receiver.grid_px must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.theta_rel) {
            return Err(Error::Config("receiver.theta_rel must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.centroid_threshold_rel) {
            return Err(Error::Config(
                "receiver.centroid_threshold_rel must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Decode result of one frame.
#[derive(Clone, Debug)]
pub struct FrameDecode {
    pub weights: ClusterWeightMap,
    pub lost_clusters: Vec<usize>,
    pub decodes: Vec<ClusterFrameDecode>,
}

/// One cluster's payload share across a packet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterPacketDecode {
    pub cluster_id: usize,
    /// 72 bits: 24 per frame, frames in order.
    pub bits: Vec<bool>,
    /// Frames where this cluster's pilot went unseen (bits zero-filled).
    pub lost_frames: Vec<usize>,
}

/// Full decode of a packet window.
#[derive(Clone, Debug)]
pub struct PacketDecode {
    pub sync: SyncResult,
    pub bbox: PixelBox,
    pub track: CentroidTrack<Scalar>,
    pub frames: Vec<FrameDecode>,
    pub clusters: Vec<ClusterPacketDecode>,
}

/// Runs the pipeline on a window expected to hold one whole packet.
///
/// `pilots` is the full pilot codebook; the per-cluster assignment is
/// derived internally, mirroring the transmitter.
pub fn decode_packet_window(
    events: &[Event],
    cfg: &ReceiverConfig,
    n_clusters: usize,
    book: &Codebook,
    pilots: &[PilotSequence],
) -> Result<PacketDecode> {
    cfg.validate()?;
    let layout = PacketLayout::default();
    let assigned = crate::framing::assign_pilots(pilots, n_clusters)?;

    let filtered =
        alternation_filter(events, cfg.alternation_window_us, cfg.alternation_min_count)?;
    let sync = detect_sync(
        &filtered.events,
        filtered.bbox,
        cfg.sync_margin_threshold,
        Some(cfg.sync_search_chips),
        None,
    )?;
    let mut stream = filtered.events;
    if sync.polarity_flipped {
        for e in stream.iter_mut() {
            e.p = -e.p;
        }
    }
    let t0 = sync.packet_start_us;
    let region = filtered.bbox.expand(cfg.bbox_margin_px);
    let spec = GridSpec::from_box(region, cfg.grid_px);

    // events of a chip range, by rounded slot boundaries
    let chip_slice = |range: std::ops::Range<usize>| -> &[Event] {
        let lo = t0 as i64 + range.start as i64 * CHIP_US as i64 - CHIP_US as i64 / 2;
        let hi = t0 as i64 + range.end as i64 * CHIP_US as i64 - CHIP_US as i64 / 2;
        let a = stream.partition_point(|e| (e.t_us as i64) < lo);
        let b = stream.partition_point(|e| (e.t_us as i64) < hi);
        &stream[a..b]
    };

    // One centroid per pilot, from raw (uncorrected) coordinates. The
    // smoothing must straddle a few LED pitches, or per-LED pixel luck
    // makes the thresholded region flap between frames; a 96-LED bar has
    // its pitch well under a 32nd of its extent.
    let sigma = cfg
        .centroid_sigma_px
        .max(region.height().max(region.width()) as Scalar / 32.0);
    let centroids: Vec<Option<(Scalar, Scalar)>> = (0..layout.frames_per_packet)
        .map(|f| {
            // skip the pilot's first chip: its transition depends on the
            // preceding info data, which would differ frame to frame
            let mut window = layout.pilot_range(f);
            window.start += 1;
            let pilot_events = chip_slice(window);
            match estimate_centroid(pilot_events, region, sigma, cfg.centroid_threshold_rel) {
                Ok(c) => Some(c),
                Err(_) => None,
            }
        })
        .collect();
    let track = CentroidTrack { centroids };

    let mut frames = Vec::with_capacity(layout.frames_per_packet);
    for f in 0..layout.frames_per_packet {
        let fr = layout.frame_range(f);
        let t_start = t0 + fr.start as u64 * CHIP_US;
        let correction = if cfg.vibration_correction {
            track.frame_correction(f, t_start, t0 + fr.end as u64 * CHIP_US)
        } else {
            FrameCorrection::identity(t_start, t0 + fr.end as u64 * CHIP_US)
        };
        let corrected = correct_vibration(chip_slice(fr), &correction);

        let pilot_end_us =
            t_start as i64 + layout.pilot_chips as i64 * CHIP_US as i64 - CHIP_US as i64 / 2;
        let split = corrected.partition_point(|e| (e.t_us as i64) < pilot_end_us);
        let (pilot_ev, info_ev) = corrected.split_at(split);

        let (weights, lost_clusters) =
            grid_correlate_lossy(pilot_ev, &spec, &assigned, n_clusters, t_start, cfg.theta_rel);
        let info_t0 = t_start + layout.pilot_chips as u64 * CHIP_US;
        let decodes =
            separate_and_decode(info_ev, &weights, book, &assigned, info_t0, layout.info_chips);
        frames.push(FrameDecode {
            weights,
            lost_clusters,
            decodes,
        });
    }

    let clusters = (0..n_clusters)
        .map(|k| {
            let mut bits = Vec::with_capacity(layout.bits_per_cluster());
            let mut lost_frames = Vec::new();
            for (f, frame) in frames.iter().enumerate() {
                bits.extend_from_slice(&frame.decodes[k].bits);
                if frame.decodes[k].lost {
                    lost_frames.push(f);
                }
            }
            ClusterPacketDecode {
                cluster_id: k,
                bits,
                lost_frames,
            }
        })
        .collect();

    Ok(PacketDecode {
        sync,
        bbox: filtered.bbox,
        track,
        frames,
        clusters,
    })
}

/// Outcome of one packet inside a stream.
#[derive(Debug)]
pub enum PacketOutcome {
    Decoded(Box<PacketDecode>),
    /// The packet window did not decode; its payload bits are unknown.
    Lost { start_us: u64, reason: String },
}

/// Decode of a stream holding one or more back-to-back packets.
#[derive(Debug)]
pub struct StreamDecode {
    pub first_sync: SyncResult,
    pub n_clusters: usize,
    pub packets: Vec<PacketOutcome>,
}

impl StreamDecode {
    pub fn decoded_packets(&self) -> usize {
        self.packets
            .iter()
            .filter(|p| matches!(p, PacketOutcome::Decoded(_)))
            .count()
    }

    pub fn lost_packets(&self) -> usize {
        self.packets.len() - self.decoded_packets()
    }
}

/// Locates the packet cadence from one global sync search, then decodes
/// every complete packet window in the stream.
pub fn decode_stream(
    events: &[Event],
    cfg: &ReceiverConfig,
    n_clusters: usize,
    book: &Codebook,
    pilots: &[PilotSequence],
) -> Result<StreamDecode> {
    cfg.validate()?;
    let layout = PacketLayout::default();
    let period = layout.packet_duration_us();

    let filtered =
        alternation_filter(events, cfg.alternation_window_us, cfg.alternation_min_count)?;
    let first_sync = detect_sync(
        &filtered.events,
        filtered.bbox,
        cfg.sync_margin_threshold,
        None,
        Some(layout.packet_chips()),
    )?;

    // earliest packet start on the detected cadence that the stream covers
    let t_min = events.first().map(|e| e.t_us).unwrap_or(0);
    let t_max = events.last().map(|e| e.t_us).unwrap_or(0);
    let anchor = first_sync.packet_start_us;
    let lead = CHIP_US; // tolerate one chip of slack before the first event
    let first_start = if anchor >= t_min + lead {
        anchor - (anchor - t_min - lead) / period * period
    } else {
        anchor
    };

    let mut packets = Vec::new();
    let mut start = first_start;
    while start + period <= t_max + CHIP_US {
        let lo = start.saturating_sub(2_000);
        let hi = start + period + 1_000;
        let a = events.partition_point(|e| e.t_us < lo);
        let b = events.partition_point(|e| e.t_us < hi);
        let outcome = match decode_packet_window(&events[a..b], cfg, n_clusters, book, pilots) {
            Ok(d) => PacketOutcome::Decoded(Box::new(d)),
            Err(e @ (Error::NoSignal(_) | Error::SyncNotFound { .. })) => PacketOutcome::Lost {
                start_us: start,
                reason: e.to_string(),
            },
            Err(e) => return Err(e),
        };
        packets.push(outcome);
        start += period;
    }
    if packets.is_empty() {
        return Err(Error::NoSignal(
            "stream shorter than one packet duration".into(),
        ));
    }

    Ok(StreamDecode {
        first_sync,
        n_clusters,
        packets,
    })
}
