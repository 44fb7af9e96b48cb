//! Uncompressed run-length encoding of binary masks, row-major, runs
//! alternating between background and foreground starting with background.

use serde::{Deserialize, Serialize};

use super::SegmentError;
use crate::scene::MaskBits;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    /// `[height, width]`
    pub size: [u32; 2],
    pub counts: Vec<u32>,
}

pub fn encode(bits: &MaskBits) -> Rle {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for &b in &bits.data {
        if b != current {
            counts.push(run);
            run = 0;
            current = b;
        }
        run += 1;
    }
    counts.push(run);
    Rle { size: [bits.height, bits.width], counts }
}

pub fn decode(rle: &Rle) -> Result<MaskBits, SegmentError> {
    let [h, w] = rle.size;
    let total = h as u64 * w as u64;
    let sum: u64 = rle.counts.iter().map(|c| *c as u64).sum();
    if sum != total {
        return Err(SegmentError::Protocol(format!("RLE counts sum to {sum}, expected {h}x{w} = {total}")));
    }
    let mut data = Vec::with_capacity(total as usize);
    let mut value = false;
    for &c in &rle.counts {
        data.extend(std::iter::repeat_n(value, c as usize));
        value = !value;
    }
    Ok(MaskBits { width: w, height: h, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_encoding() {
        let m = MaskBits { width: 3, height: 2, data: vec![true, true, false, false, false, true] };
        let r = encode(&m);
        assert_eq!(r.counts, vec![0, 2, 3, 1]);
        assert_eq!(r.size, [2, 3]);
        assert_eq!(decode(&r).unwrap(), m);
    }

    #[test]
    fn bad_sum_is_protocol_error() {
        let r = Rle { size: [2, 2], counts: vec![1, 2] };
        assert!(matches!(decode(&r), Err(SegmentError::Protocol(_))));
    }

    proptest! {
        #[test]
        fn round_trip(bits in proptest::collection::vec(any::<bool>(), 1..200), w in 1u32..20) {
            let h = bits.len() as u32 / w;
            prop_assume!(h > 0);
            let m = MaskBits { width: w, height: h, data: bits[..(w * h) as usize].to_vec() };
            let r = encode(&m);
            prop_assert_eq!(&decode(&r).unwrap(), &m);
            prop_assert_eq!(encode(&decode(&r).unwrap()), r);
        }
    }
}
