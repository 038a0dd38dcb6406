//! Alternation-number filtering: keep fast-blinking pixels.
//!
//! LED pixels toggle at chip rate, so their event count per unit time is
//! orders of magnitude above background activity. Counting events per
//! (pixel, time window) and keeping only well-populated cells removes
//! background and locates the bar in one pass.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::Event;
use crate::{SENSOR_H, SENSOR_W};

/// Inclusive pixel bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PixelBox {
    pub x_min: u16,
    pub y_min: u16,
    pub x_max: u16,
    pub y_max: u16,
}

impl PixelBox {
    pub fn contains(&self, x: u16, y: u16) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn width(&self) -> usize {
        (self.x_max - self.x_min) as usize + 1
    }

    pub fn height(&self) -> usize {
        (self.y_max - self.y_min) as usize + 1
    }

    /// Grows the box by `margin` pixels, clipped to the sensor.
    pub fn expand(&self, margin: u16) -> PixelBox {
        PixelBox {
            x_min: self.x_min.saturating_sub(margin),
            y_min: self.y_min.saturating_sub(margin),
            x_max: (self.x_max + margin).min(SENSOR_W - 1),
            y_max: (self.y_max + margin).min(SENSOR_H - 1),
        }
    }
}

/// Filter output: surviving events and the coarse bar location.
#[derive(Clone, Debug)]
pub struct FilterResult {
    pub events: Vec<Event>,
    pub bbox: PixelBox,
}

/// Keeps events of pixels that reach `min_count` events within some
/// `window_us` window (windows anchored at t = 0).
///
/// Clearing the bar in any one window marks the pixel as part of the
/// LED bar for the whole stream — blinking pixels keep their complete
/// event history (including partial head/tail windows), background
/// pixels never clear the bar and are removed entirely. Returns the
/// surviving stream plus the bounding box of surviving pixels.
pub fn alternation_filter(
    events: &[Event],
    window_us: u64,
    min_count: u32,
) -> Result<FilterResult> {
    if window_us == 0 {
        return Err(Error::invalid("alternation window must be positive"));
    }
    debug_assert!(crate::events::is_sorted(events));

    let mut alive: HashMap<(u16, u16), bool> = HashMap::new();
    let mut counts: HashMap<(u16, u16), u32> = HashMap::new();
    let mut run_start = 0;
    while run_start < events.len() {
        let window = events[run_start].t_us / window_us;
        let mut run_end = run_start;
        while run_end < events.len() && events[run_end].t_us / window_us == window {
            run_end += 1;
        }
        counts.clear();
        for e in &events[run_start..run_end] {
            *counts.entry((e.x, e.y)).or_insert(0) += 1;
        }
        for (&px, &n) in counts.iter() {
            if n >= min_count {
                alive.insert(px, true);
            }
        }
        run_start = run_end;
    }

    let mut kept = Vec::new();
    let mut bbox: Option<PixelBox> = None;
    for e in events {
        if !alive.contains_key(&(e.x, e.y)) {
            continue;
        }
        kept.push(*e);
        bbox = Some(match bbox {
            None => PixelBox {
                x_min: e.x,
                y_min: e.y,
                x_max: e.x,
                y_max: e.y,
            },
            Some(b) => PixelBox {
                x_min: b.x_min.min(e.x),
                y_min: b.y_min.min(e.y),
                x_max: b.x_max.max(e.x),
                y_max: b.y_max.max(e.y),
            },
        });
    }

    match bbox {
        Some(bbox) => Ok(FilterResult { events: kept, bbox }),
        None => Err(Error::NoSignal(format!(
            "no pixel reached {min_count} events per {window_us} us window"
        ))),
    }
}
