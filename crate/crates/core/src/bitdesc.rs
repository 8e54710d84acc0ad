//! Bit-packed binary descriptors and Hamming-space primitives.
//!
//! Bit `d` of a descriptor lives in byte `d / 8` at bit position `d % 8`
//! (least significant bit first). Internally bits are kept in `u64` words
//! using the same little-endian mapping, so word `w` covers bits
//! `64 * w .. 64 * w + 63` and serializing the words little-endian yields the
//! on-disk byte layout directly.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported descriptor length in bits.
pub const MAX_DIMS: usize = 1024;

fn words_for(dims: usize) -> usize {
    dims.div_ceil(64)
}

/// Number of bytes one packed descriptor occupies on disk.
pub fn bytes_for(dims: usize) -> usize {
    dims.div_ceil(8)
}

fn check_dims(dims: usize) -> Result<()> {
    if (1..=MAX_DIMS).contains(&dims) {
        Ok(())
    } else {
        Err(Error::InvalidDimension(dims))
    }
}

/// A single `D`-bit binary feature. Padding bits past `D` are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryDescriptor {
    words: Vec<u64>,
    dims: usize,
}

impl BinaryDescriptor {
    /// All-zero descriptor of `dims` bits.
    pub fn zeros(dims: usize) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            words: vec![0; words_for(dims)],
            dims,
        })
    }

    pub fn from_fn(dims: usize, mut f: impl FnMut(usize) -> bool) -> Result<Self> {
        let mut out = Self::zeros(dims)?;
        for d in 0..dims {
            if f(d) {
                out.words[d / 64] |= 1 << (d % 64);
            }
        }
        Ok(out)
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        Self::from_fn(bits.len(), |d| bits[d])
    }

    /// Parses a string of `0`/`1` characters, bit 0 first.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::param("bits", format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }

    /// Unpacks `bytes` in the on-disk layout. Rejects nonzero padding bits.
    pub fn from_bytes(dims: usize, bytes: &[u8]) -> Result<Self> {
        check_dims(dims)?;
        Error::check_dims(bytes_for(dims), bytes.len())?;
        let mut words = vec![0u64; words_for(dims)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= u64::from(b) << (8 * (i % 8));
        }
        let out = Self { words, dims };
        if out.padding_is_clear() {
            Ok(out)
        } else {
            Err(Error::validation("bits", "nonzero padding bits"))
        }
    }

    /// Packs into the on-disk layout (`ceil(D / 8)` bytes).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(bytes_for(self.dims));
        self.write_bytes(&mut out);
        out
    }

    pub(crate) fn write_bytes(&self, out: &mut Vec<u8>) {
        let n = bytes_for(self.dims);
        out.extend(
            self.words
                .iter()
                .flat_map(|w| w.to_le_bytes())
                .take(n),
        );
    }

    fn padding_is_clear(&self) -> bool {
        let rem = self.dims % 64;
        rem == 0 || self.words[self.words.len() - 1] >> rem == 0
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Value of bit `d`. Panics if `d >= dims`.
    #[inline]
    pub fn bit(&self, d: usize) -> bool {
        assert!(d < self.dims, "bit index {d} out of range for {} bits", self.dims);
        (self.words[d / 64] >> (d % 64)) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Indices of the set bits, ascending.
    pub fn ones(&self) -> Ones<'_> {
        Ones {
            words: &self.words,
            index: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }

    /// Hamming distance. Fails when the two descriptors differ in length.
    pub fn hamming(&self, other: &Self) -> Result<u32> {
        Error::check_dims(self.dims, other.dims)?;
        Ok(self.hamming_unchecked(other))
    }

    /// Hamming distance without the length check; callers guarantee equal `D`.
    #[inline]
    pub fn hamming_unchecked(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Keeps the first `d_prime` bits.
    pub fn truncate(&self, d_prime: usize) -> Result<Self> {
        if d_prime == 0 || d_prime > self.dims {
            return Err(Error::param(
                "d_prime",
                format!("must be in 1..={}, got {d_prime}", self.dims),
            ));
        }
        let mut words = self.words[..words_for(d_prime)].to_vec();
        let rem = d_prime % 64;
        if rem != 0 {
            let last = words.len() - 1;
            words[last] &= (1u64 << rem) - 1;
        }
        Ok(Self {
            words,
            dims: d_prime,
        })
    }

    /// Lowercase hex of the packed bytes.
    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses the packed-byte hex form produced by [`to_hex`](Self::to_hex).
    pub fn from_hex(dims: usize, hex: &str) -> Result<Self> {
        let hex = hex.trim();
        if !hex.len().is_multiple_of(2) {
            return Err(Error::Parse(format!("odd-length hex string {hex:?}")));
        }
        let bytes = (0..hex.len())
            .step_by(2)
            .map(|i| {
                hex.get(i..i + 2)
                    .and_then(|s| u8::from_str_radix(s, 16).ok())
                    .ok_or_else(|| Error::Parse(format!("invalid hex in {hex:?}")))
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_bytes(dims, &bytes)
    }
}

impl fmt::Debug for BinaryDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryDescriptor({self})")
    }
}

impl fmt::Display for BinaryDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in 0..self.dims {
            f.write_str(if self.bit(d) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Iterator over set-bit indices of a descriptor.
pub struct Ones<'a> {
    words: &'a [u64],
    index: usize,
    current: u64,
}

impl Iterator for Ones<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        while self.current == 0 {
            self.index += 1;
            self.current = *self.words.get(self.index)?;
        }
        let tz = self.current.trailing_zeros() as usize;
        self.current &= self.current - 1;
        Some(self.index * 64 + tz)
    }
}

/// The descriptors of one image, all sharing one bit length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSet {
    dims: usize,
    descriptors: Vec<BinaryDescriptor>,
}

impl FeatureSet {
    pub fn new(dims: usize, descriptors: Vec<BinaryDescriptor>) -> Result<Self> {
        check_dims(dims)?;
        for x in &descriptors {
            Error::check_dims(dims, x.dims)?;
        }
        Ok(Self { dims, descriptors })
    }

    pub fn empty(dims: usize) -> Result<Self> {
        Self::new(dims, Vec::new())
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Number of descriptors (`T`).
    #[inline]
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    #[inline]
    pub fn descriptors(&self) -> &[BinaryDescriptor] {
        &self.descriptors
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BinaryDescriptor> {
        self.descriptors.iter()
    }

    pub fn into_descriptors(self) -> Vec<BinaryDescriptor> {
        self.descriptors
    }

    pub fn push(&mut self, x: BinaryDescriptor) -> Result<()> {
        Error::check_dims(self.dims, x.dims)?;
        self.descriptors.push(x);
        Ok(())
    }

    /// Appends every descriptor of `other`.
    pub fn extend_from(&mut self, other: &FeatureSet) -> Result<()> {
        Error::check_dims(self.dims, other.dims)?;
        self.descriptors.extend_from_slice(&other.descriptors);
        Ok(())
    }

    /// Keeps the first `d_prime` bits of every descriptor.
    pub fn truncate(&self, d_prime: usize) -> Result<Self> {
        if d_prime == 0 || d_prime > self.dims {
            return Err(Error::param(
                "d_prime",
                format!("must be in 1..={}, got {d_prime}", self.dims),
            ));
        }
        let descriptors = self
            .descriptors
            .iter()
            .map(|x| x.truncate(d_prime))
            .collect::<Result<_>>()?;
        Ok(Self {
            dims: d_prime,
            descriptors,
        })
    }
}

impl<'a> IntoIterator for &'a FeatureSet {
    type Item = &'a BinaryDescriptor;
    type IntoIter = std::slice::Iter<'a, BinaryDescriptor>;

    fn into_iter(self) -> Self::IntoIter {
        self.descriptors.iter()
    }
}

/// Index of the nearest candidate in Hamming distance, ties to the lowest index.
/// Returns `None` when `candidates` is empty.
pub(crate) fn nearest(x: &BinaryDescriptor, candidates: &[BinaryDescriptor]) -> Option<(usize, u32)> {
    let mut best: Option<(usize, u32)> = None;
    for (k, c) in candidates.iter().enumerate() {
        let dist = x.hamming_unchecked(c);
        if best.is_none_or(|(_, b)| dist < b) {
            best = Some((k, dist));
        }
    }
    best
}
