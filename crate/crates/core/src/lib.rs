//! List-decoding steganography over autoregressive token distributions.
//!
//! A payload is hidden in a token sequence that is, token by token, an
//! ordinary sample from the model. Encoder and decoder share a secret key
//! and the model; nothing else is transmitted besides the tokens and the
//! payload length.

pub mod alias;
pub mod bitstream;
pub mod cli;
pub mod codec;
pub mod dist;
pub mod metrics;
pub mod prg;
pub mod selftest;

pub use bitstream::{BitString, SecretKey};
pub use codec::{decode, encode, CodecError, CodecParams, StegoTrace, SuffixLength};
pub use dist::{ModelSource, QuantizedDistribution};
