//! The `GCF1` frame: one worker's quantized update for one step.
//!
//! Layout (all multi-byte header integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GCF1"
//! 4       1     scheme (0 TopK, 1 TopKQ, 2 ScaledSign, 3 DitheredUniform, 4 Passthrough)
//! 5       4     d
//! 9       4     K
//! 13      4     Golomb parameter m (0 when unused)
//! 17      8     payload bit length
//! 25      ..    payload, MSB-first, zero-padded to a byte boundary
//! ..      4*n   binary32 values, little-endian
//! ```
//!
//! Payload and value section per scheme:
//!
//! | scheme      | payload                                   | values            |
//! |-------------|-------------------------------------------|-------------------|
//! | TopK        | Golomb index gaps                         | K kept values     |
//! | TopKQ       | Golomb index gaps, then K sign bits       | [pos, neg] levels |
//! | ScaledSign  | d sign bits                               | [scale]           |
//! | Dithered    | d zigzag Exp-Golomb levels                | [step]            |
//! | Passthrough | d raw binary64 bit patterns               | none              |
//!
//! Sign bits are 1 for negative. K is d for ScaledSign, Dithered and Passthrough.

use crate::codec::bits::{BitReader, BitWriter};
use crate::codec::golomb::{golomb_decode_from, golomb_encode_into, golomb_parameter};
use crate::error::{Error, Result};
use crate::quantize::{DitheredLevels, Quantized, QuantizerSpec, SignUpdate, TernaryUpdate};
use crate::vector::{ParamVector, SparseUpdate};

pub const MAGIC: [u8; 4] = *b"GCF1";
pub const HEADER_BYTES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Scheme {
    TopK = 0,
    TopKQ = 1,
    ScaledSign = 2,
    DitheredUniform = 3,
    Passthrough = 4,
}

impl Scheme {
    fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => Scheme::TopK,
            1 => Scheme::TopKQ,
            2 => Scheme::ScaledSign,
            3 => Scheme::DitheredUniform,
            4 => Scheme::Passthrough,
            other => return Err(Error::Decode(format!("unknown scheme code {other}"))),
        })
    }

    fn value_count(self, k: usize) -> usize {
        match self {
            Scheme::TopK => k,
            Scheme::TopKQ => 2,
            Scheme::ScaledSign | Scheme::DitheredUniform => 1,
            Scheme::Passthrough => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedFrame {
    pub scheme: Scheme,
    pub dim: u32,
    pub k: u32,
    pub golomb_m: u32,
    pub payload_bits: u64,
    pub payload: Vec<u8>,
    pub values: Vec<f32>,
}

impl CompressedFrame {
    /// Payload plus value bits, excluding the fixed header.
    pub fn body_bits(&self) -> u64 {
        self.payload_bits + 32 * self.values.len() as u64
    }

    pub fn total_bits(&self) -> u64 {
        8 * HEADER_BYTES as u64 + 8 * self.payload.len() as u64 + 32 * self.values.len() as u64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.payload.len() + 4 * self.values.len());
        out.extend_from_slice(&MAGIC);
        out.push(self.scheme as u8);
        out.extend_from_slice(&self.dim.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.golomb_m.to_le_bytes());
        out.extend_from_slice(&self.payload_bits.to_le_bytes());
        out.extend_from_slice(&self.payload);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::Decode(format!("frame of {} bytes is shorter than header", bytes.len())));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let scheme = Scheme::from_code(bytes[4])?;
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let dim = u32_at(5);
        let k = u32_at(9);
        let golomb_m = u32_at(13);
        let payload_bits = u64::from_le_bytes(bytes[17..25].try_into().unwrap());
        let payload_len = usize::try_from(payload_bits.div_ceil(8))
            .map_err(|_| Error::Decode("payload length overflows".into()))?;
        let n_values = scheme.value_count(k as usize);
        let expected = HEADER_BYTES
            .checked_add(payload_len)
            .and_then(|x| x.checked_add(4 * n_values))
            .ok_or_else(|| Error::Decode("frame length overflows".into()))?;
        if bytes.len() != expected {
            return Err(Error::Decode(format!(
                "frame is {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let payload = bytes[HEADER_BYTES..HEADER_BYTES + payload_len].to_vec();
        let values = bytes[HEADER_BYTES + payload_len..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(CompressedFrame {
            scheme,
            dim,
            k,
            golomb_m,
            payload_bits,
            payload,
            values,
        })
    }
}

fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::InvalidInput(format!("dimension {d} exceeds frame limit")))
}

fn finish(scheme: Scheme, dim: usize, k: usize, m: u64, w: BitWriter, values: Vec<f32>) -> Result<CompressedFrame> {
    let (payload, payload_bits) = w.into_bytes();
    Ok(CompressedFrame {
        scheme,
        dim: dim_u32(dim)?,
        k: dim_u32(k)?,
        golomb_m: u32::try_from(m).map_err(|_| Error::InvalidInput("Golomb parameter too large".into()))?,
        payload_bits,
        payload,
        values,
    })
}

fn check_f32(x: f64) -> Result<f32> {
    let y = x as f32;
    if !y.is_finite() {
        return Err(Error::Numeric("frame value"));
    }
    Ok(y)
}

/// Encode a quantizer output. `spec` must describe the same quantizer.
pub fn encode_frame(q: &Quantized, spec: &QuantizerSpec) -> Result<CompressedFrame> {
    let d = q.dim();
    spec.validate(d)?;
    let mismatch = || Error::InvalidInput(format!("{} output does not match spec {:?}", variant_name(q), spec));
    match (q, *spec) {
        (Quantized::Sparse(s), QuantizerSpec::TopK { k }) => {
            if s.len() != k {
                return Err(mismatch());
            }
            let m = golomb_parameter(k, d);
            let mut w = BitWriter::new();
            golomb_encode_into(&mut w, s.indices(), d, m)?;
            let values = s.values().iter().map(|&v| check_f32(v)).collect::<Result<_>>()?;
            finish(Scheme::TopK, d, k, m, w, values)
        }
        (Quantized::Ternary(t), QuantizerSpec::TopKQ { k }) => {
            if t.indices.len() != k || t.negative.len() != k {
                return Err(mismatch());
            }
            let m = golomb_parameter(k, d);
            let mut w = BitWriter::new();
            golomb_encode_into(&mut w, &t.indices, d, m)?;
            for &neg in &t.negative {
                w.write_bit(neg);
            }
            let values = vec![check_f32(t.positive_level)?, check_f32(t.negative_level)?];
            finish(Scheme::TopKQ, d, k, m, w, values)
        }
        (Quantized::Sign(s), QuantizerSpec::ScaledSign) => {
            let mut w = BitWriter::new();
            for &neg in &s.negative {
                w.write_bit(neg);
            }
            finish(Scheme::ScaledSign, d, d, 0, w, vec![check_f32(s.scale)?])
        }
        (Quantized::Dithered(l), QuantizerSpec::DitheredUniform { .. }) => {
            let mut w = BitWriter::new();
            for &q in &l.levels {
                w.write_signed_exp_golomb(q);
            }
            finish(Scheme::DitheredUniform, d, d, 0, w, vec![check_f32(l.step)?])
        }
        (Quantized::Dense(v), QuantizerSpec::Passthrough) => {
            let mut w = BitWriter::new();
            for &x in v.as_slice() {
                w.write_bits(x.to_bits(), 64);
            }
            finish(Scheme::Passthrough, d, d, 0, w, vec![])
        }
        _ => Err(mismatch()),
    }
}

fn variant_name(q: &Quantized) -> &'static str {
    match q {
        Quantized::Sparse(_) => "top-k",
        Quantized::Ternary(_) => "top-k-q",
        Quantized::Sign(_) => "scaled-sign",
        Quantized::Dithered(_) => "dithered",
        Quantized::Dense(_) => "passthrough",
    }
}

/// Decode a frame back to the quantizer output it was built from.
pub fn decode_frame(frame: &CompressedFrame) -> Result<Quantized> {
    let d = frame.dim as usize;
    let k = frame.k as usize;
    if d == 0 {
        return Err(Error::Decode("zero dimension".into()));
    }
    if frame.values.len() != frame.scheme.value_count(k) {
        return Err(Error::Decode("value count does not match scheme".into()));
    }
    let mut r = BitReader::new(&frame.payload, frame.payload_bits)?;
    let q = match frame.scheme {
        Scheme::TopK | Scheme::TopKQ => {
            if k == 0 || k > d {
                return Err(Error::Decode(format!("K={k} out of range for d={d}")));
            }
            let indices = golomb_decode_from(&mut r, k, d, frame.golomb_m as u64)?;
            if frame.scheme == Scheme::TopK {
                let values = frame.values.iter().map(|&v| v as f64).collect();
                Quantized::Sparse(SparseUpdate::new(d, indices, values)?)
            } else {
                let negative = (0..k).map(|_| r.read_bit()).collect::<Result<Vec<_>>>()?;
                Quantized::Ternary(TernaryUpdate {
                    dim: d,
                    indices,
                    negative,
                    positive_level: frame.values[0] as f64,
                    negative_level: frame.values[1] as f64,
                })
            }
        }
        Scheme::ScaledSign => {
            let negative = (0..d).map(|_| r.read_bit()).collect::<Result<Vec<_>>>()?;
            Quantized::Sign(SignUpdate {
                scale: frame.values[0] as f64,
                negative,
            })
        }
        Scheme::DitheredUniform => {
            let levels = (0..d).map(|_| r.read_signed_exp_golomb()).collect::<Result<Vec<_>>>()?;
            Quantized::Dithered(DitheredLevels {
                step: frame.values[0] as f64,
                levels,
            })
        }
        Scheme::Passthrough => {
            let data = (0..d)
                .map(|_| r.read_bits(64).map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            Quantized::Dense(ParamVector::from_vec(data)?)
        }
    };
    if r.remaining() != 0 {
        return Err(Error::Decode(format!("{} trailing payload bits", r.remaining())));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{draw_dither, scaled_sign, top_k, top_k_q};
    use crate::rng::{gaussian_vector, RngStream};

    fn u(seed: u64, d: usize) -> ParamVector {
        gaussian_vector(&mut RngStream::new(seed), d).unwrap()
    }

    #[test]
    fn scaled_sign_frame_size() {
        let q = Quantized::Sign(scaled_sign(&u(1, 8)));
        let f = encode_frame(&q, &QuantizerSpec::ScaledSign).unwrap();
        assert_eq!(f.payload_bits, 8);
        assert_eq!(f.values.len(), 1);
        assert_eq!(f.body_bits(), 8 + 32);
        assert_eq!(f.to_bytes().len(), HEADER_BYTES + 1 + 4);
    }

    #[test]
    fn header_layout() {
        let q = Quantized::Sparse(top_k(&u(2, 100), 3).unwrap()).to_wire();
        let f = encode_frame(&q, &QuantizerSpec::TopK { k: 3 }).unwrap();
        let b = f.to_bytes();
        assert_eq!(&b[0..4], b"GCF1");
        assert_eq!(b[4], 0);
        assert_eq!(&b[5..9], &100u32.to_le_bytes());
        assert_eq!(&b[9..13], &3u32.to_le_bytes());
        assert_eq!(&b[13..17], &(golomb_parameter(3, 100) as u32).to_le_bytes());
        assert_eq!(&b[17..25], &f.payload_bits.to_le_bytes());
        assert_eq!(CompressedFrame::from_bytes(&b).unwrap(), f);
    }

    #[test]
    fn k_zero_is_rejected() {
        let s = SparseUpdate::new(4, vec![], vec![]).unwrap();
        assert!(encode_frame(&Quantized::Sparse(s), &QuantizerSpec::TopK { k: 0 }).is_err());
    }

    #[test]
    fn mismatched_spec_is_invalid_input() {
        let q = Quantized::Sparse(top_k(&u(3, 10), 2).unwrap());
        assert!(matches!(
            encode_frame(&q, &QuantizerSpec::ScaledSign),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            encode_frame(&q, &QuantizerSpec::TopK { k: 3 }),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn corrupted_frames_fail_to_decode() {
        let q = Quantized::Ternary(top_k_q(&u(4, 50), 5).unwrap()).to_wire();
        let bytes = encode_frame(&q, &QuantizerSpec::TopKQ { k: 5 }).unwrap().to_bytes();
        assert!(CompressedFrame::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(CompressedFrame::from_bytes(&bytes[..10]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(CompressedFrame::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(CompressedFrame::from_bytes(&bad).is_err());

        let mut f = CompressedFrame::from_bytes(&bytes).unwrap();
        f.payload_bits -= 2;
        assert!(decode_frame(&f).is_err());
    }

    #[test]
    fn every_scheme_roundtrips() {
        let x = u(6, 64);
        let z = draw_dither(&mut RngStream::new(7), 64);
        let cases = [
            (QuantizerSpec::TopK { k: 9 }, None),
            (QuantizerSpec::TopKQ { k: 9 }, None),
            (QuantizerSpec::ScaledSign, None),
            (QuantizerSpec::DitheredUniform { step: 0.1 }, Some(&z[..])),
            (QuantizerSpec::Passthrough, None),
        ];
        for (spec, dither) in cases {
            let q = spec.quantize(&x, dither).unwrap().to_wire();
            let f = encode_frame(&q, &spec).unwrap();
            let back = CompressedFrame::from_bytes(&f.to_bytes()).unwrap();
            let decoded = decode_frame(&back).unwrap();
            assert_eq!(decoded, q, "{spec:?}");
            assert_eq!(
                decoded.reconstruct(dither).unwrap(),
                q.reconstruct(dither).unwrap()
            );
        }
    }
}
