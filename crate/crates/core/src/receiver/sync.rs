//! Packet synchronization by sliding correlation against the spread
//! Barker transition template.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::Event;
use crate::framing;
use crate::receiver::filter::PixelBox;
use crate::CHIP_US;

/// Outcome of a successful sync search.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SyncResult {
    /// Detected packet start on the event clock (chip-0 boundary).
    pub packet_start_us: u64,
    /// Correlation value at the peak.
    pub peak: f64,
    /// Peak over the strongest competing peak (excluding +-1 chip and,
    /// when a packet period is given, packet-aligned repeats).
    pub margin: f64,
    /// True when the stream's polarity convention is globally inverted;
    /// callers should flip event polarities before decoding.
    pub polarity_flipped: bool,
}

/// Margin reported when no competing positive peak exists.
const MARGIN_CAP: f64 = 1e6;

/// Transition template of the spread Barker sync.
///
/// Element 0 is zero: the chip preceding the packet is unknown (idle or
/// the tail of the previous packet).
pub fn sync_transition_template() -> Vec<i8> {
    let chips = framing::sync_chips();
    let mut d = vec![0i8; chips.len()];
    for j in 1..chips.len() {
        d[j] = (chips[j] - chips[j - 1]).signum();
    }
    d
}

/// Searches for the packet start among events inside `bbox`.
///
/// Event polarities are summed into 100 us slots and correlated with the
/// sync transition template at every chip shift. `max_start_chip` bounds
/// the search when the caller already knows roughly where the packet
/// begins; `period_chips` excludes packet-aligned repeats from the
/// margin when the stream holds several back-to-back packets.
pub fn detect_sync(
    events: &[Event],
    bbox: PixelBox,
    margin_threshold: f64,
    max_start_chip: Option<usize>,
    period_chips: Option<usize>,
) -> Result<SyncResult> {
    // Half-chip oversampling keeps the peak intact when event phase
    // straddles a slot boundary (a straddled peak smears over two chips
    // and can fall below the template's own negative sidelobes).
    const OS: usize = 2;
    let half_chip = CHIP_US as i64 / OS as i64;
    let template = sync_transition_template();
    let tpl_len = template.len() * OS;
    let (slots, t_origin, pad) = slot_sums(events, bbox, tpl_len, OS)?;
    if slots.len() < tpl_len + pad {
        return Err(Error::NoSignal(format!(
            "window of {} half-chips shorter than the sync template",
            slots.len() - pad,
        )));
    }

    let last_start = slots.len() - tpl_len;
    let search_end = match max_start_chip {
        Some(m) => (pad + m * OS).min(last_start),
        None => last_start,
    };
    let corr: Vec<i64> = (0..=search_end)
        .map(|tau| {
            template
                .iter()
                .enumerate()
                .map(|(j, &d)| slots[tau + OS * j] as i64 * d as i64)
                .sum()
        })
        .collect();

    // strongest magnitude decides the peak and the polarity convention
    let (tau_star, &raw_peak) = corr
        .iter()
        .enumerate()
        .max_by_key(|&(tau, &c)| (c.unsigned_abs(), std::cmp::Reverse(tau)))
        .expect("search range is nonempty");
    let polarity_flipped = raw_peak < 0;
    let sign = if polarity_flipped { -1 } else { 1 };
    let peak = (raw_peak * sign) as f64;

    let mut second = i64::MIN;
    for (tau, &c) in corr.iter().enumerate() {
        let off = tau.abs_diff(tau_star);
        if off <= OS {
            continue;
        }
        if let Some(p) = period_chips {
            let m = off % (p * OS);
            if m <= OS || m + OS >= p * OS {
                continue;
            }
        }
        second = second.max(c * sign);
    }
    let margin = if second <= 0 {
        MARGIN_CAP
    } else {
        peak / second as f64
    };
    if margin <= margin_threshold || peak <= 0.0 {
        return Err(Error::SyncNotFound {
            margin,
            threshold: margin_threshold,
        });
    }

    let coarse = t_origin as i64 + (tau_star as i64 - pad as i64) * half_chip;
    let start = coarse + subchip_phase(events, bbox, coarse);
    Ok(SyncResult {
        packet_start_us: start.max(0) as u64,
        peak,
        margin,
        polarity_flipped,
    })
}

/// Sub-chip refinement: the slot grid is anchored at an arbitrary event,
/// so the chip-granular estimate carries a uniform phase error of up to
/// half a chip — enough to push jittered events into neighboring slots.
/// The circular mean of event phases over the sync span recovers it.
fn subchip_phase(events: &[Event], bbox: PixelBox, coarse_start: i64) -> i64 {
    let span_end = coarse_start + (2 * framing::BARKER13.len() as i64) * CHIP_US as i64;
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for e in events {
        let t = e.t_us as i64;
        if t < coarse_start - (CHIP_US as i64) / 2 || t >= span_end || !bbox.contains(e.x, e.y) {
            continue;
        }
        let angle = (t - coarse_start) as f64 / CHIP_US as f64 * std::f64::consts::TAU;
        s += angle.sin();
        c += angle.cos();
    }
    if s == 0.0 && c == 0.0 {
        return 0;
    }
    let mut phase = s.atan2(c) / std::f64::consts::TAU * CHIP_US as f64;
    if phase >= CHIP_US as f64 / 2.0 {
        phase -= CHIP_US as f64;
    }
    phase.round() as i64
}

/// Sums event polarities into slots of `CHIP_US / oversample` (rounded
/// binning, so an event at a slot boundary lands in the slot that
/// boundary opens).
///
/// `pad` empty slots are prepended so the template can align with packet
/// starts slightly before the first observed event (the chip-0 boundary
/// often produces no event).
fn slot_sums(
    events: &[Event],
    bbox: PixelBox,
    pad: usize,
    oversample: usize,
) -> Result<(Vec<i32>, u64, usize)> {
    let step = CHIP_US / oversample as u64;
    let mut it = events.iter().filter(|e| bbox.contains(e.x, e.y));
    let first = it
        .next()
        .ok_or_else(|| Error::NoSignal("no events inside the bar box".into()))?;
    let t_origin = first.t_us;
    let last_t = events.last().expect("nonempty").t_us;
    let n_slots = ((last_t - t_origin + step / 2) / step + 1) as usize;
    let mut slots = vec![0i32; pad + n_slots];

    let idx_of = |t: u64| pad + ((t - t_origin + step / 2) / step) as usize;
    slots[idx_of(first.t_us)] += first.p as i32;
    for e in it {
        slots[idx_of(e.t_us)] += e.p as i32;
    }
    Ok((slots, t_origin, pad))
}
