//! Second-order Age-of-Information toolkit for random-access networks with
//! Markov-modulated transmitters.

pub mod cli;
pub mod error;
pub mod model;
pub mod moments;
pub mod optimize;
pub mod policies;
pub mod second_order;
pub mod sim;

pub use error::{AoiError, Result};
pub use model::{AoIMoments, ChainParams, NetworkConfig, SecondOrderStats};
