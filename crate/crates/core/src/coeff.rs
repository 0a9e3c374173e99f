//! 32-bit sign-magnitude coefficient words.

use std::fmt;

use crate::error::{Error, Result};

pub const MAGNITUDE_BITS: u32 = 31;
pub const MAGNITUDE_MASK: u32 = (1 << MAGNITUDE_BITS) - 1;
const SIGN_BIT: u32 = 1 << MAGNITUDE_BITS;

/// A coefficient as 1 sign bit (bit 31) and a 31-bit magnitude.
///
/// Zero is always stored as `+0`; the constructors never produce a
/// negative zero, which keeps OR masks over residuals deterministic.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct SignMag32(u32);

impl SignMag32 {
    pub const ZERO: SignMag32 = SignMag32(0);

    /// Builds a word from its fields, normalizing `-0` to `+0`.
    pub fn from_parts(negative: bool, magnitude: u32) -> Result<Self> {
        if magnitude > MAGNITUDE_MASK {
            return Err(Error::MagnitudeOverflow(magnitude as i64));
        }
        let sign = if negative && magnitude != 0 { SIGN_BIT } else { 0 };
        Ok(SignMag32(sign | magnitude))
    }

    pub fn encode(v: i64) -> Result<Self> {
        let mag = v.unsigned_abs();
        if mag > MAGNITUDE_MASK as u64 {
            return Err(Error::MagnitudeOverflow(v));
        }
        Self::from_parts(v < 0, mag as u32)
    }

    /// Infallible encode for values already known to be in range
    /// (wavelet coefficients of bounded-depth images).
    pub(crate) fn from_i32(v: i32) -> Self {
        debug_assert!(v != i32::MIN);
        let mag = v.unsigned_abs();
        SignMag32(if v < 0 { SIGN_BIT | mag } else { mag })
    }

    pub fn decode(self) -> i64 {
        let m = self.magnitude() as i64;
        if self.is_negative() {
            -m
        } else {
            m
        }
    }

    pub fn is_negative(self) -> bool {
        self.0 & SIGN_BIT != 0
    }

    pub fn magnitude(self) -> u32 {
        self.0 & MAGNITUDE_MASK
    }

    /// Raw 32-bit word as stored in memory images.
    pub fn to_bits(self) -> u32 {
        self.0
    }

    /// Reinterprets a stored word. A `-0` pattern is normalized to `+0`.
    pub fn from_bits(bits: u32) -> Self {
        if bits == SIGN_BIT {
            SignMag32(0)
        } else {
            SignMag32(bits)
        }
    }
}

impl fmt::Debug for SignMag32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.decode())
    }
}

impl fmt::Display for SignMag32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.decode())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_is_positive() {
        let z = SignMag32::encode(0).unwrap();
        assert!(!z.is_negative());
        assert_eq!(z.magnitude(), 0);
        assert_eq!(SignMag32::from_parts(true, 0).unwrap(), SignMag32::ZERO);
        assert_eq!(SignMag32::from_bits(0x8000_0000), SignMag32::ZERO);
    }

    #[test]
    fn negative_seven() {
        let v = SignMag32::encode(-7).unwrap();
        assert!(v.is_negative());
        assert_eq!(v.magnitude(), 7);
        assert_eq!(v.to_bits(), 0x8000_0007);
    }

    #[test]
    fn overflow_rejected() {
        assert!(SignMag32::encode(1 << 31).is_err());
        assert!(SignMag32::encode(-(1 << 31)).is_err());
        assert!(SignMag32::encode((1 << 31) - 1).is_ok());
        assert!(SignMag32::from_parts(false, 1 << 31).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(v in -(MAGNITUDE_MASK as i64)..=(MAGNITUDE_MASK as i64)) {
            prop_assert_eq!(SignMag32::encode(v).unwrap().decode(), v);
        }

        #[test]
        fn bits_round_trip(v in -(MAGNITUDE_MASK as i64)..=(MAGNITUDE_MASK as i64)) {
            let w = SignMag32::encode(v).unwrap();
            prop_assert_eq!(SignMag32::from_bits(w.to_bits()), w);
        }
    }
}
