//! MSB-first bit packing.

use crate::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push(&mut self, value: u32, width: u32) {
        debug_assert!(width <= 32);
        debug_assert!(width == 32 || value >> width == 0, "value {value} wider than {width} bits");
        for b in (0..width).rev() {
            if self.len.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if (value >> b) & 1 == 1 {
                let last = self.bytes.last_mut().expect("byte allocated above");
                *last |= 0x80 >> (self.len % 8);
            }
            self.len += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn finish(self) -> (Vec<u8>, usize) {
        (self.bytes, self.len)
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    len: usize,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Decode(format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        Ok(BitReader { bytes, len, pos: 0 })
    }

    pub fn read(&mut self, width: u32) -> Result<u32> {
        if self.pos + width as usize > self.len {
            return Err(Error::Decode(format!(
                "payload exhausted at bit {} (need {width} more)",
                self.pos
            )));
        }
        let mut v = 0u32;
        for _ in 0..width {
            let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | u32::from(bit);
            self.pos += 1;
        }
        Ok(v)
    }

    pub fn remaining(&self) -> usize {
        self.len - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_layout() {
        let mut w = BitWriter::new();
        w.push(0b101, 3);
        w.push(0b1, 1);
        w.push(0xAB, 8);
        let (bytes, len) = w.finish();
        assert_eq!(len, 12);
        assert_eq!(bytes, vec![0b1011_1010, 0b1011_0000]);
        let mut r = BitReader::new(&bytes, len).unwrap();
        assert_eq!(r.read(3).unwrap(), 0b101);
        assert_eq!(r.read(1).unwrap(), 1);
        assert_eq!(r.read(8).unwrap(), 0xAB);
        assert!(r.read(1).is_err());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(BitReader::new(&[0, 0], 17).is_err());
        assert!(BitReader::new(&[0, 0], 8).is_err());
    }
}
