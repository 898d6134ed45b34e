//! MSB-first bit writer and reader.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of bits written.
    pub fn bit_len(&self) -> u64 {
        self.len
    }

    pub fn write_bit(&mut self, bit: bool) {
        let offset = (self.len % 8) as u32;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> offset;
        }
        self.len += 1;
    }

    /// Low `n` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 64);
        for shift in (0..n).rev() {
            self.write_bit(value >> shift & 1 == 1);
        }
    }

    /// `q` one-bits followed by a zero.
    pub fn write_unary(&mut self, q: u64) {
        for _ in 0..q {
            self.write_bit(true);
        }
        self.write_bit(false);
    }

    /// Truncated binary code of `r` in `[0, m)`.
    pub fn write_truncated_binary(&mut self, r: u64, m: u64) {
        debug_assert!(r < m);
        if m <= 1 {
            return;
        }
        let b = 64 - (m - 1).leading_zeros();
        let cutoff = (1u64 << b) - m;
        if r < cutoff {
            self.write_bits(r, b - 1);
        } else {
            self.write_bits(r + cutoff, b);
        }
    }

    /// Order-0 Exp-Golomb code of `x`.
    pub fn write_exp_golomb(&mut self, x: u64) {
        let y = x as u128 + 1;
        let len = 128 - y.leading_zeros();
        for _ in 1..len {
            self.write_bit(false);
        }
        for shift in (0..len).rev() {
            self.write_bit(y >> shift & 1 == 1);
        }
    }

    /// Zigzag-mapped signed Exp-Golomb code.
    pub fn write_signed_exp_golomb(&mut self, x: i64) {
        self.write_exp_golomb(zigzag(x));
    }

    pub fn into_bytes(self) -> (Vec<u8>, u64) {
        (self.bytes, self.len)
    }
}

pub(crate) fn zigzag(x: i64) -> u64 {
    ((x << 1) ^ (x >> 63)) as u64
}

pub(crate) fn unzigzag(x: u64) -> i64 {
    ((x >> 1) as i64) ^ -((x & 1) as i64)
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    /// Reader over the first `len` bits of `bytes`.
    pub fn new(bytes: &'a [u8], len: u64) -> Result<Self> {
        if len > bytes.len() as u64 * 8 {
            return Err(Error::Decode(format!(
                "bit length {len} exceeds buffer of {} bytes",
                bytes.len()
            )));
        }
        Ok(BitReader { bytes, len, pos: 0 })
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.len - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.len {
            return Err(Error::Decode("unexpected end of bit stream".into()));
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = v << 1 | self.read_bit()? as u64;
        }
        Ok(v)
    }

    /// Reads a unary count, refusing runs longer than `max`.
    pub fn read_unary(&mut self, max: u64) -> Result<u64> {
        let mut q = 0;
        while self.read_bit()? {
            q += 1;
            if q > max {
                return Err(Error::Decode("unary run exceeds bound".into()));
            }
        }
        Ok(q)
    }

    pub fn read_truncated_binary(&mut self, m: u64) -> Result<u64> {
        if m <= 1 {
            return Ok(0);
        }
        let b = 64 - (m - 1).leading_zeros();
        let cutoff = (1u64 << b) - m;
        let head = self.read_bits(b - 1)?;
        if head < cutoff {
            Ok(head)
        } else {
            let full = head << 1 | self.read_bit()? as u64;
            Ok(full - cutoff)
        }
    }

    pub fn read_exp_golomb(&mut self) -> Result<u64> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 64 {
                return Err(Error::Decode("exp-golomb prefix too long".into()));
            }
        }
        let mut y: u128 = 1;
        for _ in 0..zeros {
            y = y << 1 | self.read_bit()? as u128;
        }
        u64::try_from(y - 1).map_err(|_| Error::Decode("exp-golomb value overflows".into()))
    }

    pub fn read_signed_exp_golomb(&mut self) -> Result<i64> {
        Ok(unzigzag(self.read_exp_golomb()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_first_layout() {
        let mut w = BitWriter::new();
        w.write_bits(0b101, 3);
        w.write_bits(0b11111, 5);
        w.write_bit(true);
        let (bytes, len) = w.into_bytes();
        assert_eq!(len, 9);
        assert_eq!(bytes, vec![0b1011_1111, 0b1000_0000]);
    }

    #[test]
    fn truncated_binary_lengths() {
        // m = 5: codes 00, 01, 10, 110, 111.
        let lens: Vec<u64> = (0..5)
            .map(|r| {
                let mut w = BitWriter::new();
                w.write_truncated_binary(r, 5);
                w.bit_len()
            })
            .collect();
        assert_eq!(lens, vec![2, 2, 2, 3, 3]);
    }

    #[test]
    fn reading_past_end_fails() {
        let mut r = BitReader::new(&[0xff], 3).unwrap();
        assert!(r.read_bits(3).is_ok());
        assert!(matches!(r.read_bit(), Err(Error::Decode(_))));
        assert!(BitReader::new(&[0xff], 9).is_err());
    }

    #[test]
    fn exp_golomb_extremes() {
        for x in [0u64, 1, 2, 1 << 40, u64::MAX - 1, u64::MAX] {
            let mut w = BitWriter::new();
            w.write_exp_golomb(x);
            let (b, n) = w.into_bytes();
            assert_eq!(BitReader::new(&b, n).unwrap().read_exp_golomb().unwrap(), x);
        }
        for x in [0i64, -1, 1, i64::MIN, i64::MAX] {
            assert_eq!(unzigzag(zigzag(x)), x);
        }
    }

    proptest! {
        #[test]
        fn mixed_codes_roundtrip(
            items in prop::collection::vec((0u64..10_000, 1u64..300, any::<i64>()), 0..50)
        ) {
            let mut w = BitWriter::new();
            for &(n, m, s) in &items {
                w.write_unary(n / m);
                w.write_truncated_binary(n % m, m);
                w.write_signed_exp_golomb(s);
            }
            let (bytes, len) = w.into_bytes();
            let mut r = BitReader::new(&bytes, len).unwrap();
            for &(n, m, s) in &items {
                let q = r.read_unary(u64::MAX).unwrap();
                let rem = r.read_truncated_binary(m).unwrap();
                prop_assert_eq!(q * m + rem, n);
                prop_assert_eq!(r.read_signed_exp_golomb().unwrap(), s);
            }
            prop_assert_eq!(r.remaining(), 0);
        }
    }
}
