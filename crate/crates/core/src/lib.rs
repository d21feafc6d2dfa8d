//! Link-level simulator for an LTE downlink transmit-diversity chain: two
//! transmit and two receive antennas, Alamouti coding across subcarrier
//! pairs (SFBC), pilot-based channel estimation and Monte-Carlo BER sweeps.
//!
//! The chain, end to end:
//!
//! ```text
//! bits -> QAM -> SFBC pairs -> resource grid + pilots -> channel (2x2, per RE)
//!      -> zero pad -> IFFT + CP -> AWGN -> FFT -> strip padding
//!      -> pilot normalisation + interpolation -> SFBC combiner -> hard QAM -> BER
//! ```
//!
//! Every stage is a pure function of its inputs and an explicit 64-bit seed,
//! so trials can be distributed over worker threads without changing the
//! aggregated results.

pub mod channel;
pub mod config;
pub mod error;
pub mod grid;
pub mod harness;
pub mod modem;
pub mod output;
pub mod pilots;
pub mod rng;
pub mod sfbc;

pub use error::{Error, Result};

/// Complex baseband sample type used throughout the chain.
pub type C64 = num_complex::Complex64;
