//! Decode report serialization.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::framing::PacketLayout;
use crate::receiver::{PacketOutcome, StreamDecode};

/// JSON decode report: per-cluster bits and BER, weight summaries,
/// centroid track and sync timing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecodeReport {
    pub sync_time_us: u64,
    pub sync_peak: f64,
    pub sync_margin: f64,
    pub n_clusters: usize,
    pub packets: usize,
    pub lost_packets: usize,
    pub clusters: Vec<ClusterReport>,
    pub centroid_track: Vec<CentroidPoint>,
    pub frames: Vec<FrameWeightSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterReport {
    pub cluster_id: usize,
    /// Recovered bits, MSB-first hex.
    pub bits_hex: String,
    pub bit_len: usize,
    pub lost_frames: usize,
    /// Filled when a reference payload was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bits_compared: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ber: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CentroidPoint {
    pub packet: usize,
    pub frame: usize,
    pub t_us: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameWeightSummary {
    pub packet: usize,
    pub frame: usize,
    pub lost_clusters: Vec<usize>,
    pub cluster_weights: Vec<ClusterWeightStat>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterWeightStat {
    pub cluster_id: usize,
    pub max_weight: i32,
    pub active_grids: usize,
}

/// Packs bits (MSB first) into lowercase hex; the tail pads with zeros.
pub fn bits_to_hex(bits: &[bool]) -> String {
    let mut s = String::with_capacity(bits.len().div_ceil(4));
    for nibble in bits.chunks(4) {
        let mut v = 0u8;
        for (i, &b) in nibble.iter().enumerate() {
            if b {
                v |= 1 << (3 - i);
            }
        }
        s.push(char::from_digit(v as u32, 16).unwrap());
    }
    s
}

/// Inverse of [`bits_to_hex`] given the original bit count.
pub fn hex_to_bits(hex: &str, bit_len: usize) -> Result<Vec<bool>> {
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for c in hex.chars() {
        let v = c.to_digit(16).ok_or_else(|| {
            crate::error::Error::invalid(format!("bad hex digit {c:?} in payload"))
        })? as u8;
        for i in (0..4).rev() {
            bits.push(v & (1 << i) != 0);
        }
    }
    if bits.len() < bit_len {
        return Err(crate::error::Error::invalid(format!(
            "payload hex holds {} bits, need {bit_len}",
            bits.len()
        )));
    }
    bits.truncate(bit_len);
    Ok(bits)
}

impl DecodeReport {
    /// Builds the report from a stream decode.
    ///
    /// `reference` is the transmitted payload (concatenated across
    /// packets); when present, per-cluster BER is computed against it.
    /// Undecoded packets contribute zero bits, so their reference ones
    /// count as errors.
    pub fn from_stream(stream: &StreamDecode, reference: Option<&[bool]>) -> DecodeReport {
        let layout = PacketLayout::default();
        let share = layout.bits_per_cluster();
        let per_packet = layout.capacity_bits(stream.n_clusters);
        let n_packets = stream.packets.len();

        let mut cluster_bits: Vec<Vec<bool>> = vec![Vec::new(); stream.n_clusters];
        let mut lost_frames = vec![0usize; stream.n_clusters];
        let mut centroid_track = Vec::new();
        let mut frames = Vec::new();

        for (p, outcome) in stream.packets.iter().enumerate() {
            match outcome {
                PacketOutcome::Decoded(d) => {
                    for c in &d.clusters {
                        cluster_bits[c.cluster_id].extend_from_slice(&c.bits);
                        lost_frames[c.cluster_id] += c.lost_frames.len();
                    }
                    for (f, c) in d.track.centroids.iter().enumerate() {
                        if let Some((x, y)) = c {
                            centroid_track.push(CentroidPoint {
                                packet: p,
                                frame: f,
                                t_us: d.sync.packet_start_us
                                    + layout.pilot_range(f).start as u64 * crate::CHIP_US,
                                x: *x,
                                y: *y,
                            });
                        }
                    }
                    for (f, fd) in d.frames.iter().enumerate() {
                        frames.push(FrameWeightSummary {
                            packet: p,
                            frame: f,
                            lost_clusters: fd.lost_clusters.clone(),
                            cluster_weights: (0..stream.n_clusters)
                                .map(|k| ClusterWeightStat {
                                    cluster_id: k,
                                    max_weight: fd.weights.max_weight(k),
                                    active_grids: fd.weights.active_grids(k),
                                })
                                .collect(),
                        });
                    }
                }
                PacketOutcome::Lost { .. } => {
                    for bits in cluster_bits.iter_mut() {
                        bits.extend(std::iter::repeat(false).take(share));
                    }
                    for lf in lost_frames.iter_mut() {
                        *lf += layout.frames_per_packet;
                    }
                }
            }
        }

        let clusters = (0..stream.n_clusters)
            .map(|k| {
                let bits = &cluster_bits[k];
                let (errors, compared) = match reference {
                    Some(reference) => {
                        let mut errors = 0u64;
                        let mut compared = 0u64;
                        for p in 0..n_packets {
                            let ref_lo = p * per_packet + k * share;
                            for b in 0..share {
                                let Some(&want) = reference.get(ref_lo + b) else {
                                    continue;
                                };
                                compared += 1;
                                if bits[p * share + b] != want {
                                    errors += 1;
                                }
                            }
                        }
                        (Some(errors), Some(compared))
                    }
                    None => (None, None),
                };
                ClusterReport {
                    cluster_id: k,
                    bits_hex: bits_to_hex(bits),
                    bit_len: bits.len(),
                    lost_frames: lost_frames[k],
                    errors,
                    bits_compared: compared,
                    ber: match (errors, compared) {
                        (Some(e), Some(c)) if c > 0 => Some(e as f64 / c as f64),
                        _ => None,
                    },
                }
            })
            .collect();

        DecodeReport {
            sync_time_us: stream.first_sync.packet_start_us,
            sync_peak: stream.first_sync.peak,
            sync_margin: stream.first_sync.margin.min(1e6),
            n_clusters: stream.n_clusters,
            packets: n_packets,
            lost_packets: stream.lost_packets(),
            clusters,
            centroid_track,
            frames,
        }
    }
}

/// Writes every nonzero grid weight as CSV rows
/// `packet,frame,gx,gy,cluster,weight`.
pub fn write_weight_dump<W: std::io::Write>(stream: &StreamDecode, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["packet", "frame", "gx", "gy", "cluster", "weight"])
        .map_err(crate::framing::csv_err)?;
    for (p, outcome) in stream.packets.iter().enumerate() {
        let PacketOutcome::Decoded(d) = outcome else {
            continue;
        };
        for (f, fd) in d.frames.iter().enumerate() {
            for (cell, weights) in fd.weights.weights.iter().enumerate() {
                let (gx, gy) = fd.weights.spec.coords(cell);
                for (k, &weight) in weights.iter().enumerate() {
                    if weight != 0 {
                        w.write_record([
                            p.to_string(),
                            f.to_string(),
                            gx.to_string(),
                            gy.to_string(),
                            k.to_string(),
                            weight.to_string(),
                        ])
                        .map_err(crate::framing::csv_err)?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
