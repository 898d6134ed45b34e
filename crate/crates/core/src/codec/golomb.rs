//! Golomb coding of sorted index sets.
//!
//! The set `{i_0 < i_1 < ...}` is coded as the gap sequence
//! `i_0, i_1 - i_0 - 1, i_2 - i_1 - 1, ...`. Each gap `g` is written as the
//! unary code of `g / m` (ones terminated by a zero) followed by the
//! truncated binary code of `g % m`.

use crate::codec::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};

/// `max(1, round(-1 / log2(1 - K/d)))`.
pub fn golomb_parameter(k: usize, d: usize) -> u64 {
    if d == 0 || k == 0 {
        return 1;
    }
    let p = k as f64 / d as f64;
    let m = (-1.0 / (1.0 - p).log2()).round();
    if m.is_finite() && m >= 1.0 {
        m as u64
    } else {
        1
    }
}

pub fn golomb_encode_into(
    w: &mut BitWriter,
    indices: &[usize],
    d: usize,
    m: u64,
) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("Golomb parameter must be >= 1".into()));
    }
    let mut next = 0usize;
    for &i in indices {
        if i < next {
            return Err(Error::InvalidInput(
                "indices must be strictly increasing".into(),
            ));
        }
        if i >= d {
            return Err(Error::InvalidInput(format!(
                "index {i} out of range for dimension {d}"
            )));
        }
        let gap = (i - next) as u64;
        w.write_unary(gap / m);
        w.write_truncated_binary(gap % m, m);
        next = i + 1;
    }
    Ok(())
}

/// Encode a strictly increasing index set.
pub fn golomb_encode(indices: &[usize], d: usize, m: u64) -> Result<BitWriter> {
    let mut w = BitWriter::new();
    golomb_encode_into(&mut w, indices, d, m)?;
    Ok(w)
}

pub fn golomb_decode_from(
    r: &mut BitReader<'_>,
    count: usize,
    d: usize,
    m: u64,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::Decode("Golomb parameter must be >= 1".into()));
    }
    if count > d {
        return Err(Error::Decode(format!("{count} indices exceed dimension {d}")));
    }
    let mut out = Vec::with_capacity(count);
    let mut next = 0u64;
    for _ in 0..count {
        let max_q = (d as u64).saturating_sub(next) / m;
        let q = r.read_unary(max_q)?;
        let gap = q * m + r.read_truncated_binary(m)?;
        let i = next + gap;
        if i >= d as u64 {
            return Err(Error::Decode(format!(
                "decoded index {i} out of range for dimension {d}"
            )));
        }
        out.push(i as usize);
        next = i + 1;
    }
    Ok(out)
}

/// Decode `count` indices from a stream produced by [`golomb_encode`].
pub fn golomb_decode(bytes: &[u8], bit_len: u64, count: usize, d: usize, m: u64) -> Result<Vec<usize>> {
    let mut r = BitReader::new(bytes, bit_len)?;
    let out = golomb_decode_from(&mut r, count, d, m)?;
    if r.remaining() != 0 {
        return Err(Error::Decode(format!(
            "{} trailing bits after index set",
            r.remaining()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::rate::binary_entropy;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand::seq::index::sample;

    fn roundtrip(indices: &[usize], d: usize, m: u64) -> Vec<usize> {
        let (bytes, len) = golomb_encode(indices, d, m).unwrap().into_bytes();
        golomb_decode(&bytes, len, indices.len(), d, m).unwrap()
    }

    #[test]
    fn empty_set_is_empty_payload() {
        for m in [1, 3, 64] {
            assert_eq!(golomb_encode(&[], 10, m).unwrap().bit_len(), 0);
            assert!(roundtrip(&[], 10, m).is_empty());
        }
    }

    #[test]
    fn single_zero_index_with_unit_parameter() {
        let (bytes, len) = golomb_encode(&[0], 10, 1).unwrap().into_bytes();
        assert_eq!(len, 1);
        assert_eq!(bytes, vec![0]);
    }

    #[test]
    fn contiguous_prefix_roundtrips() {
        let idx: Vec<usize> = (0..37).collect();
        for m in [1, 2, 7] {
            assert_eq!(roundtrip(&idx, 100, m), idx);
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(golomb_encode(&[3, 2], 10, 2).is_err());
        assert!(golomb_encode(&[2, 2], 10, 2).is_err());
        assert!(golomb_encode(&[10], 10, 2).is_err());
        assert!(golomb_encode(&[1], 10, 0).is_err());
    }

    #[test]
    fn truncated_stream_is_decode_error() {
        let (bytes, len) = golomb_encode(&[5, 50, 90], 100, 8).unwrap().into_bytes();
        assert!(matches!(
            golomb_decode(&bytes, len - 3, 3, 100, 8),
            Err(Error::Decode(_))
        ));
        // Asking for more indices than were coded runs out of bits.
        assert!(golomb_decode(&bytes, len, 4, 100, 8).is_err());
    }

    #[test]
    fn parameter_choice() {
        assert_eq!(golomb_parameter(1, 2), 1);
        assert_eq!(golomb_parameter(10, 10), 1);
        assert_eq!(golomb_parameter(1000, 100_000), 69);
    }

    fn random_subset(rng: &mut RngStream, d: usize, k: usize) -> Vec<usize> {
        let mut v = sample(rng.inner_mut(), d, k).into_vec();
        v.sort_unstable();
        v
    }

    #[test]
    fn rate_close_to_entropy_at_one_percent() {
        let (d, k) = (100_000, 1000);
        let m = golomb_parameter(k, d);
        let mut rng = RngStream::new(17);
        let mut total = 0u64;
        let trials = 20;
        for _ in 0..trials {
            let idx = random_subset(&mut rng, d, k);
            total += golomb_encode(&idx, d, m).unwrap().bit_len();
        }
        let per_component = total as f64 / (trials * d) as f64;
        let h = binary_entropy(k as f64 / d as f64).unwrap();
        assert!(per_component <= 1.2 * h, "{per_component} vs {h}");
        assert!(per_component >= h * 0.99);
    }

    #[test]
    fn payload_within_twenty_percent_of_entropy_across_densities() {
        let d = 100_000;
        let mut rng = RngStream::new(29);
        for frac in [0.001, 0.003, 0.01, 0.03, 0.1, 0.2, 0.3, 0.4, 0.5] {
            let k = (frac * d as f64) as usize;
            let m = golomb_parameter(k, d);
            let idx = random_subset(&mut rng, d, k);
            let bits = golomb_encode(&idx, d, m).unwrap().bit_len() as f64;
            let bound = d as f64 * binary_entropy(frac).unwrap();
            assert!(
                (bits / bound - 1.0).abs() <= 0.2,
                "K/d={frac}: {bits} bits vs entropy {bound}"
            );
        }
    }

    #[test]
    fn ten_thousand_random_sets_roundtrip() {
        let mut rng = RngStream::new(5);
        for _ in 0..10_000 {
            let d = 1 + rng.below(500);
            let k = rng.below(d + 1);
            let idx = random_subset(&mut rng, d, k);
            let m = if k == 0 { 1 + rng.below(8) as u64 } else { golomb_parameter(k, d) };
            assert_eq!(roundtrip(&idx, d, m), idx);
        }
    }

    proptest! {
        #[test]
        fn arbitrary_parameter_roundtrip(
            set in prop::collection::btree_set(0usize..2000, 0..100),
            m in 1u64..500,
        ) {
            let idx: Vec<usize> = set.into_iter().collect();
            prop_assert_eq!(roundtrip(&idx, 2000, m), idx);
        }
    }
}
