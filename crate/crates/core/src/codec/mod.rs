//! Lossless coding of quantizer outputs and rate accounting.

pub mod bits;
pub mod frame;
pub mod golomb;
pub mod rate;

pub use frame::{decode_frame, encode_frame, CompressedFrame, Scheme};
pub use golomb::{golomb_decode, golomb_encode, golomb_parameter};
pub use rate::{binary_entropy, bits_per_component, ternary_entropy, top_k_bits};
