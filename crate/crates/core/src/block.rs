//! Blocks of symbols, their enumeration order, and input tapes indexed by
//! absolute time.

use std::ops::Range;

use crate::{Error, Result, Symbol};

/// Largest number of enumerated blocks any dense table may hold.
pub const MAX_DENSE_BLOCKS: usize = 4096;

/// Number of blocks of length `n` over an alphabet of size `q`, or `None`
/// on overflow.
pub fn block_count(q: usize, n: usize) -> Option<usize> {
    let mut count: usize = 1;
    for _ in 0..n {
        count = count.checked_mul(q)?;
    }
    Some(count)
}

/// Like [`block_count`], but fails with a guard error above `limit`.
pub fn guarded_block_count(q: usize, n: usize, guard: &'static str, limit: usize) -> Result<usize> {
    match block_count(q, n) {
        Some(c) if c <= limit => Ok(c),
        Some(c) => Err(Error::Guard {
            guard,
            limit,
            actual: c,
        }),
        None => Err(Error::Guard {
            guard,
            limit,
            actual: usize::MAX,
        }),
    }
}

/// Position of `block` in lexicographic order (first symbol most
/// significant).
pub fn block_index(block: &[Symbol], q: usize) -> usize {
    block.iter().fold(0usize, |acc, &s| acc * q + s as usize)
}

/// Inverse of [`block_index`].
pub fn block_at(mut index: usize, q: usize, n: usize) -> Vec<Symbol> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = (index % q) as Symbol;
        index /= q;
    }
    out
}

/// Writes the block with the given index into `out`.
pub fn fill_block(mut index: usize, q: usize, out: &mut [Symbol]) {
    for slot in out.iter_mut().rev() {
        *slot = (index % q) as Symbol;
        index /= q;
    }
}

pub fn check_alphabet(block: &[Symbol], q: usize) -> Result<()> {
    match block.iter().find(|&&s| s as usize >= q) {
        Some(s) => Err(Error::AlphabetMismatch(format!(
            "symbol {s} outside alphabet of size {q}"
        ))),
        None => Ok(()),
    }
}

/// Parses a block literal.
///
/// Accepts either a run of digits (`"0110"`, one symbol per digit) or a
/// comma/whitespace separated list (`"0, 12, 3"`). Every symbol must be
/// below `q`.
pub fn parse_block(text: &str, q: usize) -> Result<Vec<Symbol>> {
    if q == 0 || q > 256 {
        return Err(Error::invalid(format!("alphabet size {q} not in 1..=256")));
    }
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::invalid("empty block literal"));
    }
    let separated = text.contains(',') || text.contains(char::is_whitespace);
    let symbols: Vec<u32> = if separated {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| Error::invalid(format!("bad symbol `{t}`")))
            })
            .collect::<Result<_>>()?
    } else {
        text.chars()
            .map(|c| {
                c.to_digit(10)
                    .ok_or_else(|| Error::invalid(format!("bad symbol `{c}`")))
            })
            .collect::<Result<_>>()?
    };
    if symbols.is_empty() {
        return Err(Error::invalid("block literal has no symbols"));
    }
    symbols
        .into_iter()
        .map(|s| {
            if (s as usize) < q {
                Ok(s as Symbol)
            } else {
                Err(Error::AlphabetMismatch(format!(
                    "symbol {s} outside alphabet of size {q}"
                )))
            }
        })
        .collect()
}

/// Finite stretch of a doubly-infinite input sequence, positioned on the
/// integer time axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tape {
    origin: i64,
    symbols: Vec<Symbol>,
}

impl Tape {
    /// `symbols[0]` sits at time `origin`.
    pub fn new(origin: i64, symbols: Vec<Symbol>) -> Self {
        Tape { origin, symbols }
    }

    /// Constant tape covering `range`.
    pub fn constant(range: Range<i64>, symbol: Symbol) -> Self {
        let len = (range.end - range.start).max(0) as usize;
        Tape::new(range.start, vec![symbol; len])
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn range(&self) -> Range<i64> {
        self.origin..self.origin + self.symbols.len() as i64
    }

    pub fn covers(&self, range: &Range<i64>) -> bool {
        range.start >= self.origin && range.end <= self.origin + self.symbols.len() as i64
    }

    pub fn get(&self, t: i64) -> Option<Symbol> {
        let offset = t.checked_sub(self.origin)?;
        if offset < 0 {
            return None;
        }
        self.symbols.get(offset as usize).copied()
    }

    /// Symbol at `t`, or `fill` outside the tape.
    pub fn get_or(&self, t: i64, fill: Symbol) -> Symbol {
        self.get(t).unwrap_or(fill)
    }

    pub fn slice(&self, range: Range<i64>) -> Option<&[Symbol]> {
        if !self.covers(&range) || range.end < range.start {
            return None;
        }
        let lo = (range.start - self.origin) as usize;
        let hi = (range.end - self.origin) as usize;
        Some(&self.symbols[lo..hi])
    }

    pub fn set(&mut self, t: i64, symbol: Symbol) -> bool {
        match t.checked_sub(self.origin) {
            Some(off) if off >= 0 && (off as usize) < self.symbols.len() => {
                self.symbols[off as usize] = symbol;
                true
            }
            _ => false,
        }
    }

    /// Overwrites `block` starting at time `start`; fails when it does not
    /// fit on the tape.
    pub fn write(&mut self, start: i64, block: &[Symbol]) -> Result<()> {
        let range = start..start + block.len() as i64;
        if !self.covers(&range) {
            return Err(Error::pre(format!(
                "block at {range:?} does not fit on tape {:?}",
                self.range()
            )));
        }
        let lo = (start - self.origin) as usize;
        self.symbols[lo..lo + block.len()].copy_from_slice(block);
        Ok(())
    }

    /// The shifted tape `Tx`, with `(Tx)_t = x_{t+1}`.
    pub fn shift_left(&self) -> Tape {
        Tape::new(self.origin - 1, self.symbols.clone())
    }
}
