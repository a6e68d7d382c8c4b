use serde::{Deserialize, Serialize};

use super::{Reader, WireError};
use crate::hashmerkle::{sha256d, Digest32};

pub const HEADER_SIZE: usize = 80;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockHeader {
    pub version: i32,
    pub prev_hash: Digest32,
    pub merkle_root: Digest32,
    pub timestamp: u32,
    pub bits: u32,
    pub nonce: u32,
}

impl BlockHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_SIZE] {
        let mut out = [0u8; HEADER_SIZE];
        out[0..4].copy_from_slice(&self.version.to_le_bytes());
        out[4..36].copy_from_slice(&self.prev_hash.0);
        out[36..68].copy_from_slice(&self.merkle_root.0);
        out[68..72].copy_from_slice(&self.timestamp.to_le_bytes());
        out[72..76].copy_from_slice(&self.bits.to_le_bytes());
        out[76..80].copy_from_slice(&self.nonce.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let h = Self::read(&mut r)?;
        r.finish()?;
        Ok(h)
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(BlockHeader {
            version: r.i32_le()?,
            prev_hash: r.digest()?,
            merkle_root: r.digest()?,
            timestamp: r.u32_le()?,
            bits: r.u32_le()?,
            nonce: r.u32_le()?,
        })
    }

    /// Double SHA-256 of the 80 serialized bytes.
    pub fn block_hash(&self) -> Digest32 {
        sha256d(&self.to_bytes())
    }
}

/// A 256-bit proof-of-work target, stored big-endian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Target(pub [u8; 32]);

impl Target {
    /// Expand the compact `bits` encoding.
    ///
    /// Zero, negative and overflowing encodings are rejected, as is any
    /// encoding that expands to a zero target.
    pub fn from_compact(bits: u32) -> Result<Self, WireError> {
        let exponent = (bits >> 24) as usize;
        let mantissa = bits & 0x007f_ffff;
        if bits & 0x0080_0000 != 0 || mantissa == 0 {
            return Err(WireError::InvalidTarget(bits));
        }
        let mut out = [0u8; 32];
        if exponent <= 3 {
            let v = mantissa >> (8 * (3 - exponent));
            if v == 0 {
                return Err(WireError::InvalidTarget(bits));
            }
            out[28..].copy_from_slice(&v.to_be_bytes());
        } else {
            let shift = exponent - 3;
            for k in 0..3 {
                let byte = ((mantissa >> (8 * k)) & 0xff) as u8;
                if byte == 0 {
                    continue;
                }
                // position of this byte counted from the least significant end
                let from_lsb = shift + k;
                if from_lsb >= 32 {
                    return Err(WireError::InvalidTarget(bits));
                }
                out[31 - from_lsb] = byte;
            }
        }
        Ok(Target(out))
    }

    /// Compact encoding of this target (precision is truncated to 3 bytes).
    pub fn to_compact(&self) -> u32 {
        let Some(first) = self.0.iter().position(|&b| b != 0) else {
            return 0;
        };
        let mut size = 32 - first;
        let mut mantissa: u32 = 0;
        for i in 0..3 {
            mantissa <<= 8;
            if first + i < 32 {
                mantissa |= u32::from(self.0[first + i]);
            }
        }
        if size < 3 {
            mantissa >>= 8 * (3 - size);
        }
        if mantissa & 0x0080_0000 != 0 {
            mantissa >>= 8;
            size += 1;
        }
        ((size as u32) << 24) | mantissa
    }

    /// `true` iff `hash`, read as a little-endian integer, is at most this target.
    pub fn is_met_by(&self, hash: &Digest32) -> bool {
        let mut be = hash.0;
        be.reverse();
        be <= self.0
    }
}

/// Proof-of-work check against the header's own `bits`.
pub fn check_pow(header: &BlockHeader) -> Result<bool, WireError> {
    let target = Target::from_compact(header.bits)?;
    Ok(target.is_met_by(&header.block_hash()))
}
