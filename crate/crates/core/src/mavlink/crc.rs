//! MAVLink checksum (CRC-16/MCRF4XX, the "X.25" accumulator used by MAVLink).

/// Seed value of the accumulator.
pub const CRC_INIT: u16 = 0xFFFF;

/// Rolling checksum state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crc16(u16);

impl Default for Crc16 {
    fn default() -> Self {
        Self(CRC_INIT)
    }
}

impl Crc16 {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resume accumulation from a previously computed value.
    pub fn from_value(value: u16) -> Self {
        Self(value)
    }

    pub fn accumulate(&mut self, byte: u8) {
        let mut tmp = byte ^ (self.0 & 0xFF) as u8;
        tmp ^= tmp << 4;
        let tmp = u16::from(tmp);
        self.0 = (self.0 >> 8) ^ (tmp << 8) ^ (tmp << 3) ^ (tmp >> 4);
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.accumulate(b);
        }
    }

    pub fn value(self) -> u16 {
        self.0
    }
}

/// Checksum of `bytes` starting from [`CRC_INIT`]. No final XOR is applied,
/// matching the MAVLink wire checksum.
pub fn crc_x25(bytes: &[u8]) -> u16 {
    let mut crc = Crc16::new();
    crc.update(bytes);
    crc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Table-driven reflected CRC-16 (poly 0x1021 reflected = 0x8408), built
    // independently of the shift-based accumulator above.
    fn table_crc(bytes: &[u8]) -> u16 {
        let mut table = [0u16; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            let mut c = i as u16;
            for _ in 0..8 {
                c = if c & 1 != 0 { (c >> 1) ^ 0x8408 } else { c >> 1 };
            }
            *slot = c;
        }
        bytes.iter().fold(0xFFFF, |crc, &b| {
            (crc >> 8) ^ table[usize::from((crc ^ u16::from(b)) & 0xFF)]
        })
    }

    #[test]
    fn empty_input_is_seed() {
        assert_eq!(crc_x25(&[]), 0xFFFF);
    }

    #[test]
    fn check_value() {
        // MCRF4XX check value; the X-25 variant's 0x906E is its complement.
        assert_eq!(crc_x25(b"123456789"), 0x6F91);
        assert_eq!(!crc_x25(b"123456789"), 0x906E);
        assert_eq!(table_crc(b"123456789"), 0x6F91);
    }

    proptest! {
        #[test]
        fn matches_table_reference(data in proptest::collection::vec(any::<u8>(), 0..512)) {
            prop_assert_eq!(crc_x25(&data), table_crc(&data));
        }

        #[test]
        fn incremental(data in proptest::collection::vec(any::<u8>(), 0..256), b in any::<u8>()) {
            let mut whole = data.clone();
            whole.push(b);
            let mut resumed = Crc16::from_value(crc_x25(&data));
            resumed.accumulate(b);
            prop_assert_eq!(resumed.value(), crc_x25(&whole));
        }
    }
}
