//! Physical-layer simulator for ambient backscatter over frequency-selective
//! channels.
//!
//! The tag reflects only inside the cyclic prefix of the ambient OFDM
//! symbol, so legacy receivers (which drop the CP) never see it. The reader
//! subtracts the CP-periodic direct path, folds the result into a circular
//! convolution, and decides the tag bit from the DFT-domain energy.

pub mod channel;
pub mod cli;
pub mod detector;
pub mod error;
pub mod params;
pub mod reader;
pub mod rng;
pub mod sim;
pub mod waveform;

pub use channel::{draw_channels, ChannelSet};
pub use detector::{DetectionScales, ThresholdKind};
pub use error::{Error, Result};
pub use params::{derive_params, ParamConfig, SystemParams};
pub use sim::{BerRecord, ChannelMode, SweepAxis, TrialOutcome};
pub use waveform::{FrameOrigin, GateSequence, SymbolFrame};
