//! Transmit-side framing: pilot spreading, Barker sync, packet assembly.
//!
//! Every LED cluster transmits the same fixed layout, time-aligned across
//! the bar:
//!
//! ```text
//! | sync (26 chips) | frame 0 (128) | frame 1 (128) | frame 2 (128) |
//!                     ^ pilot (32) + info (96 = 6 codewords = 24 bits)
//! ```
//!
//! The sync is a bipolar-spread Barker-13 shared by all clusters, so the
//! whole bar flashes it coherently. Each frame opens with the cluster's
//! bipolar-spread pilot codeword. Spreading maps every chip `c` to the
//! pair `(-c, +c)`, which forces a polarity reversal inside each pair so
//! an event camera observes at least one event per spread chip; the
//! inverse pair [`reconstruct_even`] / [`complement_missing`] recovers
//! the unspread sequence from whichever pair element survived.

use serde::{Deserialize, Serialize};

use crate::codec::{encode_bits, Codebook, CODEWORD_LEN};
use crate::error::{Error, Result};
use crate::CHIP_RATE_HZ;

/// Barker-13 sequence used for packet synchronization.
pub const BARKER13: [i8; 13] = [1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1];

/// Number of pilot codewords: 16 Sylvester rows plus 16 negations.
pub const PILOT_CODEBOOK_LEN: usize = 32;

/// Fixed chip layout of one packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacketLayout {
    /// Spread sync length in chips.
    pub sync_chips: usize,
    /// Spread pilot length in chips.
    pub pilot_chips: usize,
    /// Info chips per frame.
    pub info_chips: usize,
    /// Frames per packet.
    pub frames_per_packet: usize,
}

impl Default for PacketLayout {
    fn default() -> Self {
        PacketLayout {
            sync_chips: 2 * BARKER13.len(),
            pilot_chips: 32,
            info_chips: 96,
            frames_per_packet: 3,
        }
    }
}

impl PacketLayout {
    pub fn frame_chips(&self) -> usize {
        self.pilot_chips + self.info_chips
    }

    pub fn packet_chips(&self) -> usize {
        self.sync_chips + self.frames_per_packet * self.frame_chips()
    }

    pub fn packet_duration_us(&self) -> u64 {
        self.packet_chips() as u64 * crate::CHIP_US
    }

    /// Payload bits carried per cluster per packet (code rate 1/4).
    pub fn bits_per_cluster(&self) -> usize {
        self.frames_per_packet * self.info_chips / CODEWORD_LEN * 4
    }

    /// Total payload bits one packet carries across `n_clusters`.
    pub fn capacity_bits(&self, n_clusters: usize) -> usize {
        n_clusters * self.bits_per_cluster()
    }

    /// Chip range of frame `f` within the packet.
    pub fn frame_range(&self, f: usize) -> std::ops::Range<usize> {
        let start = self.sync_chips + f * self.frame_chips();
        start..start + self.frame_chips()
    }

    /// Chip range of frame `f`'s pilot within the packet.
    pub fn pilot_range(&self, f: usize) -> std::ops::Range<usize> {
        let start = self.sync_chips + f * self.frame_chips();
        start..start + self.pilot_chips
    }

    /// Chip range of frame `f`'s info chips within the packet.
    pub fn info_range(&self, f: usize) -> std::ops::Range<usize> {
        let start = self.sync_chips + f * self.frame_chips() + self.pilot_chips;
        start..start + self.info_chips
    }
}

/// Packet header metadata serialized next to chip timelines.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketHeader {
    pub chip_rate_hz: u32,
    pub n_clusters: usize,
    pub frames_per_packet: usize,
    pub payload_bit_len: usize,
}

/// A cluster's pilot: its codeword and the bipolar-spread on-air form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PilotSequence {
    cluster_id: usize,
    wh_code: [i8; CODEWORD_LEN],
    spread: [i8; 2 * CODEWORD_LEN],
}

impl PilotSequence {
    pub fn cluster_id(&self) -> usize {
        self.cluster_id
    }

    /// The unspread length-16 codeword.
    pub fn wh_code(&self) -> &[i8; CODEWORD_LEN] {
        &self.wh_code
    }

    /// The length-32 spread sequence actually transmitted.
    pub fn spread(&self) -> &[i8; 2 * CODEWORD_LEN] {
        &self.spread
    }
}

/// One frame: a pilot followed by encoded info chips.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub pilot: PilotSequence,
    /// Bipolar info chips (96 = 6 codewords).
    pub info: Vec<i8>,
}

/// One cluster's packet: shared sync plus its frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    /// Spread Barker sync chips, identical on every cluster.
    pub sync: Vec<i8>,
    pub frames: Vec<Frame>,
    /// Bit count of the original (unpadded) payload share.
    pub payload_bit_len: usize,
}

impl Packet {
    /// Concatenated bipolar chip sequence of the whole packet.
    pub fn chips(&self) -> Vec<i8> {
        let mut out = self.sync.clone();
        for f in &self.frames {
            out.extend_from_slice(f.pilot.spread());
            out.extend_from_slice(&f.info);
        }
        out
    }
}

/// On-air OOK level sequence for one cluster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChipTimeline {
    pub cluster_id: usize,
    /// OOK levels, one per chip: 1 = LED on, 0 = off.
    pub levels: Vec<u8>,
    pub chip_rate_hz: u32,
}

impl ChipTimeline {
    pub fn from_bipolar(cluster_id: usize, chips: &[i8]) -> ChipTimeline {
        ChipTimeline {
            cluster_id,
            levels: chips.iter().map(|&c| ((c + 1) / 2) as u8).collect(),
            chip_rate_hz: CHIP_RATE_HZ,
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn duration_us(&self) -> u64 {
        self.levels.len() as u64 * crate::CHIP_US
    }
}

/// Expands each chip `c` into the pair `(-c, +c)`.
pub fn spread_bipolar(code: &[i8]) -> Vec<i8> {
    let mut out = Vec::with_capacity(2 * code.len());
    for &c in code {
        out.push(-c);
        out.push(c);
    }
    out
}

/// Keeps the "+1"-multiplied element of each spread pair: `B'[i] = B[2i+1]`.
///
/// Inverse of [`spread_bipolar`] on fully observed sequences; zeros
/// (missed events) pass through for [`complement_missing`] to fill.
pub fn reconstruct_even(b: &[i8]) -> Result<Vec<i8>> {
    if b.len() % 2 != 0 {
        return Err(Error::invalid(format!(
            "spread sequence length {} is odd",
            b.len()
        )));
    }
    Ok(b.iter().skip(1).step_by(2).copied().collect())
}

/// Fills gaps in `b_prime` from the sign-inverted "-1" pair elements.
///
/// `B''[i] = B'[i]` when observed, else `-B[2i]`; if both pair elements
/// were lost the output keeps the 0 erasure for the correlator to ignore.
pub fn complement_missing(b: &[i8], b_prime: &[i8]) -> Result<Vec<i8>> {
    if b.len() != 2 * b_prime.len() {
        return Err(Error::invalid(format!(
            "pair sequence length {} != 2 x {}",
            b.len(),
            b_prime.len()
        )));
    }
    Ok(b_prime
        .iter()
        .enumerate()
        .map(|(i, &bp)| if bp != 0 { bp } else { -b[2 * i] })
        .collect())
}

/// The 32-entry pilot codebook: Sylvester-16 rows 0..=15, then their
/// negations as 16..=31, each bipolar-spread to 32 chips.
pub fn build_pilot_codebook() -> Vec<PilotSequence> {
    let h = crate::codec::build_hadamard(CODEWORD_LEN).expect("16 is a valid order");
    let mut pilots = Vec::with_capacity(PILOT_CODEBOOK_LEN);
    for k in 0..PILOT_CODEBOOK_LEN {
        let mut wh_code = [0i8; CODEWORD_LEN];
        for (j, w) in wh_code.iter_mut().enumerate() {
            let v = h[k % CODEWORD_LEN][j];
            *w = if k < CODEWORD_LEN { v } else { -v };
        }
        let spread_vec = spread_bipolar(&wh_code);
        let mut spread = [0i8; 2 * CODEWORD_LEN];
        spread.copy_from_slice(&spread_vec);
        pilots.push(PilotSequence {
            cluster_id: k,
            wh_code,
            spread,
        });
    }
    pilots
}

/// Spread Barker-13 sync chips shared by all clusters.
pub fn sync_chips() -> Vec<i8> {
    spread_bipolar(&BARKER13)
}

/// Pilot codebook index assigned to each physical cluster.
///
/// Sylvester rows `2k` and `2k+1` are alternation partners: a grid that
/// pools both (adjacent clusters always share boundary pixels once their
/// footprints approach) reconstructs exactly row `2k`, which hands a
/// mixed grid full weight for one cluster while it carries the other's
/// data. Assigning even rows to the top half of the bar and odd rows to
/// the bottom keeps partner codes apart, so pooled boundary grids only
/// ever reach partial weight.
pub fn pilot_assignment(n_clusters: usize) -> Result<Vec<usize>> {
    if n_clusters == 0 || n_clusters > PILOT_CODEBOOK_LEN {
        return Err(Error::invalid(format!(
            "n_clusters {n_clusters} not in 1..={PILOT_CODEBOOK_LEN}"
        )));
    }
    let half: Vec<usize> = (0..16).step_by(2).chain((1..16).step_by(2)).collect();
    let mut order = half.clone();
    order.extend(half.iter().map(|&p| p + 16));
    order.truncate(n_clusters);
    Ok(order)
}

/// The pilot sequence transmitted by each cluster, indexed by cluster.
pub fn assign_pilots(
    pilots: &[PilotSequence],
    n_clusters: usize,
) -> Result<Vec<PilotSequence>> {
    let order = pilot_assignment(n_clusters)?;
    order
        .into_iter()
        .map(|p| {
            pilots.get(p).cloned().ok_or_else(|| {
                Error::invalid(format!("pilot codebook too short: missing entry {p}"))
            })
        })
        .collect()
}

/// Assembles one packet per cluster and returns the on-air timelines.
///
/// The payload is split across clusters in contiguous shares of
/// [`PacketLayout::bits_per_cluster`] bits (cluster `k` carries bits
/// `k*share..(k+1)*share`); a short final share is zero-padded and the
/// true bit count is recorded in the returned header. Cluster pilots
/// follow [`pilot_assignment`].
pub fn build_packet(
    payload: &[bool],
    n_clusters: usize,
    book: &Codebook,
    pilots: &[PilotSequence],
) -> Result<(Vec<ChipTimeline>, PacketHeader)> {
    let layout = PacketLayout::default();
    let assigned = assign_pilots(pilots, n_clusters)?;
    let capacity = layout.capacity_bits(n_clusters);
    if payload.len() > capacity {
        return Err(Error::invalid(format!(
            "payload of {} bits exceeds packet capacity {capacity}",
            payload.len()
        )));
    }

    let share = layout.bits_per_cluster();
    let bits_per_frame = share / layout.frames_per_packet;
    let sync = sync_chips();

    let mut timelines = Vec::with_capacity(n_clusters);
    for k in 0..n_clusters {
        let mut cluster_bits = vec![false; share];
        let lo = (k * share).min(payload.len());
        let hi = ((k + 1) * share).min(payload.len());
        cluster_bits[..hi - lo].copy_from_slice(&payload[lo..hi]);

        let mut chips = sync.clone();
        for f in 0..layout.frames_per_packet {
            chips.extend_from_slice(&assigned[k].spread()[..]);
            let frame_bits = &cluster_bits[f * bits_per_frame..(f + 1) * bits_per_frame];
            chips.extend_from_slice(&encode_bits(frame_bits, book));
        }
        debug_assert_eq!(chips.len(), layout.packet_chips());
        timelines.push(ChipTimeline::from_bipolar(k, &chips));
    }

    Ok((
        timelines,
        PacketHeader {
            chip_rate_hz: CHIP_RATE_HZ,
            n_clusters,
            frames_per_packet: layout.frames_per_packet,
            payload_bit_len: payload.len(),
        },
    ))
}

/// Writes timelines as CSV rows `cluster_id,chip_index,level`.
pub fn write_timelines_csv<W: std::io::Write>(
    timelines: &[ChipTimeline],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster_id", "chip_index", "level"])
        .map_err(csv_err)?;
    for tl in timelines {
        for (i, &level) in tl.levels.iter().enumerate() {
            w.write_record([
                tl.cluster_id.to_string(),
                i.to_string(),
                level.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        offset: 0,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::build_codebook;

    #[test]
    fn spread_single_chip() {
        assert_eq!(spread_bipolar(&[1]), vec![-1, 1]);
        assert_eq!(spread_bipolar(&[1, -1]), vec![-1, 1, 1, -1]);
    }

    #[test]
    fn spread_then_reconstruct_is_identity() {
        let mut code = Vec::new();
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..10_000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            code.push(if state >> 63 == 0 { 1i8 } else { -1i8 });
        }
        let rec = reconstruct_even(&spread_bipolar(&code)).unwrap();
        assert_eq!(rec, code);
    }

    #[test]
    fn reconstruct_even_selects_odd_positions() {
        assert_eq!(reconstruct_even(&[-1, 1, -1, 1]).unwrap(), vec![1, 1]);
        assert_eq!(reconstruct_even(&[-1, 1, 1, -1]).unwrap(), vec![1, -1]);
        assert_eq!(reconstruct_even(&[-1, 0, 1, -1]).unwrap(), vec![0, -1]);
        assert!(reconstruct_even(&[1, -1, 1]).is_err());
    }

    #[test]
    fn complement_fills_from_pair_element() {
        // observed odd element wins regardless of the even one
        assert_eq!(complement_missing(&[1, 1], &[1]).unwrap(), vec![1]);
        // missing odd element recovered from sign-inverted even element
        assert_eq!(complement_missing(&[-1, 0], &[0]).unwrap(), vec![1]);
        // both lost: erasure survives
        assert_eq!(complement_missing(&[0, 0], &[0]).unwrap(), vec![0]);
        assert!(complement_missing(&[1, 1, 1], &[1]).is_err());
    }

    #[test]
    fn complement_recovers_from_any_single_loss() {
        // exhaustive over pair-erasure patterns for every pilot codeword
        for pilot in build_pilot_codebook() {
            let spread = pilot.spread();
            for m in 0..CODEWORD_LEN {
                for drop_odd in [false, true] {
                    let mut b: Vec<i8> = spread.to_vec();
                    if drop_odd {
                        b[2 * m + 1] = 0;
                    } else {
                        b[2 * m] = 0;
                    }
                    let bp = reconstruct_even(&b).unwrap();
                    let bpp = complement_missing(&b, &bp).unwrap();
                    assert_eq!(&bpp, pilot.wh_code(), "cluster {}", pilot.cluster_id());
                }
            }
        }
    }

    #[test]
    fn pilot_codebook_structure() {
        let pilots = build_pilot_codebook();
        assert_eq!(pilots.len(), 32);

        // entry 0 is the all-ones row: spread alternates -1,+1
        let expected: Vec<i8> = std::iter::repeat([-1i8, 1i8])
            .take(16)
            .flatten()
            .collect();
        assert_eq!(&pilots[0].spread()[..], &expected[..]);

        // every spread pair contains a sign change
        for p in &pilots {
            for pair in p.spread().chunks(2) {
                assert_ne!(pair[0], pair[1]);
            }
        }

        // negation halves and orthogonality of the unspread codes
        for i in 0..32 {
            for j in 0..32 {
                let ip: i32 = pilots[i]
                    .wh_code()
                    .iter()
                    .zip(pilots[j].wh_code())
                    .map(|(&a, &b)| a as i32 * b as i32)
                    .sum();
                let expect = if i == j {
                    16
                } else if i.abs_diff(j) == 16 {
                    -16
                } else {
                    0
                };
                assert_eq!(ip, expect, "pilots {i},{j}");
            }
        }
    }

    #[test]
    fn layout_numbers() {
        let layout = PacketLayout::default();
        assert_eq!(layout.frame_chips(), 128);
        // 128 chips at 100 us = 12.8 ms per frame
        assert_eq!(layout.frame_chips() as u64 * crate::CHIP_US, 12_800);
        assert_eq!(layout.packet_chips(), 410);
        assert_eq!(layout.packet_duration_us(), 41_000);
        assert_eq!(layout.bits_per_cluster(), 72);
        assert_eq!(layout.capacity_bits(16), 1152);
    }

    #[test]
    fn build_packet_sixteen_clusters() {
        let book = build_codebook();
        let pilots = build_pilot_codebook();
        let payload: Vec<bool> = (0..1152).map(|i| i % 3 == 0).collect();
        let (timelines, header) = build_packet(&payload, 16, &book, &pilots).unwrap();

        assert_eq!(timelines.len(), 16);
        for tl in &timelines {
            assert_eq!(tl.len(), 410);
            assert_eq!(tl.chip_rate_hz, 10_000);
        }
        assert_eq!(header.payload_bit_len, 1152);

        // throughput under this layout: 16 x 72 bits / 41 ms = 28.1 kbps
        let layout = PacketLayout::default();
        let bps = layout.capacity_bits(16) as f64 / (layout.packet_duration_us() as f64 * 1e-6);
        assert!((bps - 28_097.6).abs() < 1.0, "got {bps}");

        // sync chips identical on all clusters
        for tl in &timelines[1..] {
            assert_eq!(&tl.levels[..26], &timelines[0].levels[..26]);
        }
    }

    #[test]
    fn build_packet_single_cluster() {
        let book = build_codebook();
        let pilots = build_pilot_codebook();
        let payload = vec![true; 72];
        let (timelines, _) = build_packet(&payload, 1, &book, &pilots).unwrap();
        assert_eq!(timelines.len(), 1);
        assert_eq!(timelines[0].len(), 410);
    }

    #[test]
    fn build_packet_rejects_bad_args() {
        let book = build_codebook();
        let pilots = build_pilot_codebook();
        assert!(build_packet(&[], 33, &book, &pilots).is_err());
        assert!(build_packet(&[], 0, &book, &pilots).is_err());
        let too_long = vec![false; 73];
        assert!(build_packet(&too_long, 1, &book, &pilots).is_err());
    }

    #[test]
    fn packet_chips_round_trip_structure() {
        let book = build_codebook();
        let pilots = build_pilot_codebook();
        let payload = vec![false; 72];
        let (timelines, _) = build_packet(&payload, 1, &book, &pilots).unwrap();

        // levels are the OOK mapping of the bipolar chips
        let packet = Packet {
            sync: sync_chips(),
            frames: (0..3)
                .map(|_| Frame {
                    pilot: pilots[0].clone(),
                    info: crate::codec::encode_bits(&[false; 24], &book),
                })
                .collect(),
            payload_bit_len: 72,
        };
        let bipolar = packet.chips();
        assert_eq!(bipolar.len(), 410);
        let levels: Vec<u8> = bipolar.iter().map(|&c| ((c + 1) / 2) as u8).collect();
        assert_eq!(levels, timelines[0].levels);
    }

    #[test]
    fn timeline_csv_dump() {
        let tl = ChipTimeline::from_bipolar(3, &[1, -1, 1]);
        let mut buf = Vec::new();
        write_timelines_csv(std::slice::from_ref(&tl), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "cluster_id,chip_index,level\n3,0,1\n3,1,0\n3,2,1\n"
        );
    }
}
