//! Walsh-Hadamard codebook and transition-domain decoding.
//!
//! Data symbols are 4-bit values mapped onto length-16 chip sequences.
//! The codebook keeps only the eight Sylvester-Hadamard rows with the
//! most polarity transitions — low-transition rows barely register on a
//! sensor that only reports brightness *changes* — and doubles the set
//! with their element-wise negations, for 16 codewords at code rate 1/4.
//!
//! Decoding never reconstructs the transmitted waveform. The observation
//! is a per-chip transition polarity in {-1, 0, +1}; each codeword is
//! matched through its first-difference template and the largest inner
//! product wins.

use crate::error::{Error, Result};

/// Chip count of every codeword.
pub const CODEWORD_LEN: usize = 16;
/// Number of codebook entries (8 rows + 8 negations).
pub const CODEBOOK_LEN: usize = 16;

/// One bipolar OOK chip level.
///
/// `+1` drives the LED on, `-1` off.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Chip(i8);

impl Chip {
    pub const PLUS: Chip = Chip(1);
    pub const MINUS: Chip = Chip(-1);

    /// Builds a chip from a bipolar level.
    pub fn new(value: i8) -> Result<Chip> {
        match value {
            1 | -1 => Ok(Chip(value)),
            v => Err(Error::invalid(format!("chip level {v} not in {{-1,+1}}"))),
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    /// OOK level: +1 -> 1 (on), -1 -> 0 (off).
    pub fn ook_level(self) -> u8 {
        ((self.0 + 1) / 2) as u8
    }

    pub fn negate(self) -> Chip {
        Chip(-self.0)
    }
}

/// A codeword: 16 chips, its symbol index, and its transition count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codeword {
    chips: [i8; CODEWORD_LEN],
    index: u8,
    transitions: u8,
}

impl Codeword {
    pub fn chips(&self) -> &[i8; CODEWORD_LEN] {
        &self.chips
    }

    /// Symbol value 0..=15 this codeword encodes.
    pub fn index(&self) -> u8 {
        self.index
    }

    /// Number of adjacent sign changes within the chips.
    pub fn transitions(&self) -> u8 {
        self.transitions
    }

    pub fn last_chip(&self) -> Chip {
        Chip(self.chips[CODEWORD_LEN - 1])
    }

    /// First-difference template with an open boundary (`diffs[0] = 0`).
    pub fn template(&self) -> TransitionTemplate {
        self.template_after(None)
    }

    /// First-difference template given the chip preceding this codeword.
    ///
    /// With `prev` known the boundary element carries signal; with `None`
    /// it stays 0 and the matched filter ignores it.
    pub fn template_after(&self, prev: Option<Chip>) -> TransitionTemplate {
        let mut diffs = [0i8; CODEWORD_LEN];
        diffs[0] = match prev {
            Some(p) => self.chips[0] - p.value(),
            None => 0,
        };
        for j in 1..CODEWORD_LEN {
            diffs[j] = self.chips[j] - self.chips[j - 1];
        }
        TransitionTemplate { diffs }
    }
}

/// First difference of a codeword's chips; elements in {-2, 0, +2}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionTemplate {
    diffs: [i8; CODEWORD_LEN],
}

impl TransitionTemplate {
    pub fn diffs(&self) -> &[i8; CODEWORD_LEN] {
        &self.diffs
    }

    /// Template normalized to per-element signs in {-1, 0, +1}.
    pub fn signs(&self) -> [i8; CODEWORD_LEN] {
        let mut s = [0i8; CODEWORD_LEN];
        for (out, d) in s.iter_mut().zip(self.diffs.iter()) {
            *out = d.signum();
        }
        s
    }
}

/// The 16-entry codebook.
///
/// Entries 0..=7 are the eight Sylvester rows with the highest transition
/// counts, ordered by descending count; entries 8..=15 are their
/// negations in matching order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codebook {
    entries: Vec<Codeword>,
    /// Size of the Hadamard matrix the originals were drawn from.
    source_order: usize,
}

impl Codebook {
    pub fn entries(&self) -> &[Codeword] {
        &self.entries
    }

    pub fn entry(&self, index: u8) -> &Codeword {
        &self.entries[index as usize]
    }

    pub fn source_order(&self) -> usize {
        self.source_order
    }
}

/// Sylvester Hadamard matrix of the given power-of-two order.
///
/// Row 0 is all +1 and H·Hᵀ = order·I.
pub fn build_hadamard(order: usize) -> Result<Vec<Vec<i8>>> {
    if order == 0 || !order.is_power_of_two() || order > 32 {
        return Err(Error::invalid(format!(
            "hadamard order {order} not a power of two in 2..=32"
        )));
    }
    let mut h = vec![vec![1i8]];
    while h.len() < order {
        let n = h.len();
        let mut next = vec![vec![0i8; 2 * n]; 2 * n];
        for (r, row) in h.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                next[r][c] = v;
                next[r][c + n] = v;
                next[r + n][c] = v;
                next[r + n][c + n] = -v;
            }
        }
        h = next;
    }
    Ok(h)
}

fn count_transitions(chips: &[i8]) -> u8 {
    chips.windows(2).filter(|w| w[0] != w[1]).count() as u8
}

/// Builds the improved codebook from the 16x16 Sylvester matrix.
///
/// The eight rows with the most transitions are sorted by descending
/// count (ties by ascending row index, though Sylvester counts are all
/// distinct) into entries 0..=7; entries 8..=15 are their negations.
pub fn build_codebook() -> Codebook {
    let h = build_hadamard(CODEWORD_LEN).expect("16 is a valid order");
    let mut ranked: Vec<(usize, u8)> = h
        .iter()
        .enumerate()
        .map(|(r, row)| (r, count_transitions(row)))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(CODEBOOK_LEN / 2);

    let mut entries = Vec::with_capacity(CODEBOOK_LEN);
    for (i, &(row, transitions)) in ranked.iter().enumerate() {
        let mut chips = [0i8; CODEWORD_LEN];
        chips.copy_from_slice(&h[row]);
        entries.push(Codeword {
            chips,
            index: i as u8,
            transitions,
        });
    }
    for i in 0..CODEBOOK_LEN / 2 {
        let mut chips = entries[i].chips;
        for c in chips.iter_mut() {
            *c = -*c;
        }
        entries.push(Codeword {
            chips,
            index: (i + CODEBOOK_LEN / 2) as u8,
            transitions: entries[i].transitions,
        });
    }
    Codebook {
        entries,
        source_order: CODEWORD_LEN,
    }
}

/// Looks up the codeword for a 4-bit symbol.
pub fn encode_symbol(sym: u8, book: &Codebook) -> Result<&Codeword> {
    if sym as usize >= CODEBOOK_LEN {
        return Err(Error::invalid(format!("symbol {sym} out of range 0..=15")));
    }
    Ok(book.entry(sym))
}

/// Packs 4 bits (MSB first) into a symbol value.
pub fn bits_to_symbol(bits: &[bool]) -> u8 {
    debug_assert!(bits.len() <= 4);
    let mut sym = 0u8;
    for &b in bits {
        sym = (sym << 1) | b as u8;
    }
    // a trailing partial nibble is padded with zero bits
    sym << (4 - bits.len())
}

/// Unpacks a symbol into 4 bits, MSB first.
pub fn symbol_to_bits(sym: u8) -> [bool; 4] {
    [
        sym & 0b1000 != 0,
        sym & 0b0100 != 0,
        sym & 0b0010 != 0,
        sym & 0b0001 != 0,
    ]
}

/// Encodes a bit sequence into a chip sequence at rate 1/4.
///
/// Bits are consumed as MSB-first nibbles; a trailing partial nibble is
/// zero-padded (callers record the original bit count in framing
/// metadata).
pub fn encode_bits(bits: &[bool], book: &Codebook) -> Vec<i8> {
    let mut chips = Vec::with_capacity(bits.len().div_ceil(4) * CODEWORD_LEN);
    for nibble in bits.chunks(4) {
        let sym = bits_to_symbol(nibble);
        chips.extend_from_slice(book.entry(sym).chips());
    }
    chips
}

/// Decodes one observed transition sequence by maximum inner product.
///
/// `observed` holds per-chip transition polarities in {-1, 0, +1}. Every
/// codebook entry is correlated through its sign-normalized
/// first-difference template; the highest score wins and ties go to the
/// lowest symbol index (an all-zero observation decodes to 0 with score
/// 0 — callers may treat a small score as an erasure).
pub fn decode_codeword(observed: &[i8], book: &Codebook) -> Result<(u8, i32)> {
    decode_codeword_after(observed, book, None)
}

/// [`decode_codeword`] with the chip preceding the observation known,
/// which lets the boundary template element carry signal.
pub fn decode_codeword_after(
    observed: &[i8],
    book: &Codebook,
    prev: Option<Chip>,
) -> Result<(u8, i32)> {
    if observed.len() != CODEWORD_LEN {
        return Err(Error::invalid(format!(
            "observation length {} != {CODEWORD_LEN}",
            observed.len()
        )));
    }
    let mut best_sym = 0u8;
    let mut best_score = i32::MIN;
    for entry in book.entries() {
        let signs = entry.template_after(prev).signs();
        let score: i32 = observed
            .iter()
            .zip(signs.iter())
            .map(|(&o, &t)| (o as i32) * (t as i32))
            .sum();
        if score > best_score {
            best_score = score;
            best_sym = entry.index();
        }
    }
    Ok((best_sym, best_score))
}
