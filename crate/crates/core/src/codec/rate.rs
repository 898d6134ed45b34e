//! Analytic rate accounting in bits per model component.

use crate::error::{Error, Result};
use crate::quantize::QuantizerSpec;

fn plogp(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

/// `-p log2 p - (1-p) log2 (1-p)`, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability must be in [0, 1], got {p}")));
    }
    Ok(-plogp(p) - plogp(1.0 - p))
}

/// Entropy of a ternary vector with `k_pos` positive, `k_neg` negative and
/// `d - k_pos - k_neg` zero entries, per component.
pub fn ternary_entropy(k_pos: usize, k_neg: usize, d: usize) -> Result<f64> {
    if d == 0 || k_pos + k_neg > d {
        return Err(Error::Domain(format!(
            "invalid ternary counts ({k_pos}, {k_neg}) for dimension {d}"
        )));
    }
    let n = d as f64;
    let (a, b) = (k_pos as f64 / n, k_neg as f64 / n);
    Ok(-plogp(a) - plogp(b) - plogp(1.0 - a - b))
}

/// Top-K cost: index entropy plus 32 bits per kept value.
pub fn top_k_bits(k: usize, d: usize) -> Result<f64> {
    if d == 0 || k > d {
        return Err(Error::Domain(format!("K={k} out of range for d={d}")));
    }
    let p = k as f64 / d as f64;
    Ok(binary_entropy(p)? + 32.0 * p)
}

/// Analytic bits per component of a quantizer at dimension `d`.
///
/// Top-K-Q assumes an even split of the kept entries between the two sign
/// classes; use [`ternary_entropy`] when the actual counts are known. The
/// dithered quantizer has no closed form and yields `None`.
pub fn bits_per_component(spec: &QuantizerSpec, d: usize) -> Result<Option<f64>> {
    match *spec {
        QuantizerSpec::TopK { k } => top_k_bits(k, d).map(Some),
        QuantizerSpec::TopKQ { k } => {
            if k > d {
                return Err(Error::Domain(format!("K={k} out of range for d={d}")));
            }
            ternary_entropy(k - k / 2, k / 2, d).map(Some)
        }
        QuantizerSpec::ScaledSign => Ok(Some(1.0)),
        QuantizerSpec::DitheredUniform { .. } => Ok(None),
        QuantizerSpec::Passthrough => Ok(Some(64.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_and_symmetric() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert!(matches!(binary_entropy(1.1), Err(Error::Domain(_))));
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn entropy_at_one_and_a_half_percent() {
        // Direct evaluation: 0.015*log2(1/0.015) + 0.985*log2(1/0.985).
        let direct = 0.015 * (1.0f64 / 0.015).log2() + 0.985 * (1.0f64 / 0.985).log2();
        let h = binary_entropy(0.015).unwrap();
        assert!((h - direct).abs() < 1e-15);
        assert!((h - 0.1124).abs() < 5e-5, "{h}");
    }

    #[test]
    fn table_values() {
        let d = 1_000_000;
        let low = top_k_bits(15_000, d).unwrap();
        let high = top_k_bits(350_000, d).unwrap();
        assert!((low - 0.592).abs() <= 0.001, "{low}");
        assert!((high - 12.13).abs() <= 0.01, "{high}");
        assert_eq!(bits_per_component(&QuantizerSpec::ScaledSign, d).unwrap(), Some(1.0));
        // Even-split ternary entropy at K = 0.23 d and 0.01 d.
        let q1 = bits_per_component(&QuantizerSpec::TopKQ { k: 230_000 }, d).unwrap().unwrap();
        let q2 = bits_per_component(&QuantizerSpec::TopKQ { k: 10_000 }, d).unwrap().unwrap();
        assert!((q1 - 1.0).abs() < 0.05, "{q1}");
        assert!((q2 - 0.1).abs() < 0.02, "{q2}");
    }

    #[test]
    fn ternary_reduces_to_binary() {
        let t = ternary_entropy(30, 0, 100).unwrap();
        assert!((t - binary_entropy(0.3).unwrap()).abs() < 1e-15);
        assert!(ternary_entropy(60, 50, 100).is_err());
    }

    #[test]
    fn top_k_bits_monotone_in_k() {
        let d = 10_000;
        let mut prev = 0.0;
        for k in (1..=d).step_by(97) {
            let b = top_k_bits(k, d).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }
}
