//! Polarity event records and stream I/O.
//!
//! Streams are kept sorted by timestamp (ties by `(y, x)`). Two on-disk
//! encodings exist: a little-endian binary format with an `EVLC0001`
//! magic, 16 bytes per record, and a `t_us,x,y,p` CSV for interop.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::{SENSOR_H, SENSOR_W};

/// File magic of the binary event encoding.
pub const MAGIC: &[u8; 8] = b"EVLC0001";
/// Bytes per binary record: t:u64, x:u16, y:u16, p:i8, pad:u8*3.
pub const RECORD_BYTES: usize = 16;

/// One sensor event: a single pixel's brightness change.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    /// Polarity: +1 brightness increase, -1 decrease.
    pub p: i8,
}

impl Event {
    pub fn new(t_us: u64, x: u16, y: u16, p: i8) -> Event {
        Event { t_us, x, y, p }
    }

    fn sort_key(&self) -> (u64, u16, u16) {
        (self.t_us, self.y, self.x)
    }

    fn validate(&self, offset: u64) -> Result<()> {
        if self.x >= SENSOR_W || self.y >= SENSOR_H {
            return Err(Error::Parse {
                offset,
                message: format!("pixel ({}, {}) outside {SENSOR_W}x{SENSOR_H}", self.x, self.y),
            });
        }
        if self.p != 1 && self.p != -1 {
            return Err(Error::Parse {
                offset,
                message: format!("polarity {} not in {{-1,+1}}", self.p),
            });
        }
        Ok(())
    }
}

/// Sorts a stream in place by `(t, y, x)`.
pub fn sort_events(events: &mut [Event]) {
    events.sort_unstable_by_key(Event::sort_key);
}

pub fn is_sorted(events: &[Event]) -> bool {
    events.windows(2).all(|w| w[0].sort_key() <= w[1].sort_key())
}

fn sorted_copy(events: &[Event]) -> std::borrow::Cow<'_, [Event]> {
    if is_sorted(events) {
        std::borrow::Cow::Borrowed(events)
    } else {
        let mut v = events.to_vec();
        sort_events(&mut v);
        std::borrow::Cow::Owned(v)
    }
}

/// Writes the binary encoding; unsorted input is sorted first.
pub fn write_events_binary<W: Write>(events: &[Event], out: W) -> Result<()> {
    let events = sorted_copy(events);
    let mut w = BufWriter::new(out);
    w.write_all(MAGIC)?;
    let mut rec = [0u8; RECORD_BYTES];
    for e in events.iter() {
        rec[..8].copy_from_slice(&e.t_us.to_le_bytes());
        rec[8..10].copy_from_slice(&e.x.to_le_bytes());
        rec[10..12].copy_from_slice(&e.y.to_le_bytes());
        rec[12] = e.p as u8;
        w.write_all(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the binary encoding, verifying bounds and monotonic timestamps.
pub fn read_events_binary<R: Read>(input: R) -> Result<Vec<Event>> {
    let mut r = BufReader::new(input);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::Parse {
        offset: 0,
        message: format!("missing magic: {e}"),
    })?;
    if &magic != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad magic {magic:?}"),
        });
    }

    let mut events = Vec::new();
    let mut rec = [0u8; RECORD_BYTES];
    let mut offset = MAGIC.len() as u64;
    let mut last_t = 0u64;
    loop {
        match read_record(&mut r, &mut rec) {
            RecordRead::Eof => break,
            RecordRead::Err(e) => {
                return Err(Error::Parse {
                    offset,
                    message: format!("truncated record: {e}"),
                })
            }
            RecordRead::Ok => {}
        }
        let e = Event {
            t_us: u64::from_le_bytes(rec[..8].try_into().unwrap()),
            x: u16::from_le_bytes(rec[8..10].try_into().unwrap()),
            y: u16::from_le_bytes(rec[10..12].try_into().unwrap()),
            p: rec[12] as i8,
        };
        e.validate(offset)?;
        if e.t_us < last_t {
            return Err(Error::Parse {
                offset,
                message: format!("timestamp {} before {last_t}", e.t_us),
            });
        }
        last_t = e.t_us;
        events.push(e);
        offset += RECORD_BYTES as u64;
    }
    Ok(events)
}

enum RecordRead {
    Ok,
    Eof,
    Err(std::io::Error),
}

fn read_record<R: Read>(r: &mut R, rec: &mut [u8; RECORD_BYTES]) -> RecordRead {
    let mut filled = 0;
    while filled < RECORD_BYTES {
        match r.read(&mut rec[filled..]) {
            Ok(0) if filled == 0 => return RecordRead::Eof,
            Ok(0) => {
                return RecordRead::Err(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    format!("{filled} of {RECORD_BYTES} bytes"),
                ))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return RecordRead::Err(e),
        }
    }
    RecordRead::Ok
}

/// Writes the CSV encoding (`t_us,x,y,p`); unsorted input is sorted first.
pub fn write_events_csv<W: Write>(events: &[Event], out: W) -> Result<()> {
    let events = sorted_copy(events);
    let mut w = BufWriter::new(out);
    writeln!(w, "t_us,x,y,p")?;
    for e in events.iter() {
        writeln!(w, "{},{},{},{}", e.t_us, e.x, e.y, e.p)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV encoding, verifying bounds and monotonic timestamps.
pub fn read_events_csv<R: Read>(input: R) -> Result<Vec<Event>> {
    let r = BufReader::new(input);
    let mut events = Vec::new();
    let mut offset = 0u64;
    let mut last_t = 0u64;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line_len = line.len() as u64 + 1;
        if lineno == 0 {
            if line.trim() != "t_us,x,y,p" {
                return Err(Error::Parse {
                    offset: 0,
                    message: format!("bad header {line:?}"),
                });
            }
            offset += line_len;
            continue;
        }
        if line.trim().is_empty() {
            offset += line_len;
            continue;
        }
        let mut fields = line.split(',');
        let e = (|| -> Option<Event> {
            Some(Event {
                t_us: fields.next()?.trim().parse().ok()?,
                x: fields.next()?.trim().parse().ok()?,
                y: fields.next()?.trim().parse().ok()?,
                p: fields.next()?.trim().parse().ok()?,
            })
        })()
        .ok_or_else(|| Error::Parse {
            offset,
            message: format!("bad row {line:?}"),
        })?;
        e.validate(offset)?;
        if e.t_us < last_t {
            return Err(Error::Parse {
                offset,
                message: format!("timestamp {} before {last_t}", e.t_us),
            });
        }
        last_t = e.t_us;
        events.push(e);
        offset += line_len;
    }
    Ok(events)
}

/// Reads an event file, sniffing binary vs CSV from the magic bytes.
pub fn read_events_path(path: &Path) -> Result<Vec<Event>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() >= MAGIC.len() && &bytes[..MAGIC.len()] == MAGIC {
        read_events_binary(&bytes[..])
    } else {
        read_events_csv(&bytes[..])
    }
}
