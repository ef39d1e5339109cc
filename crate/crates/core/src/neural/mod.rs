//! Learnable layers and the classifier: highway pathways over embedding
//! inputs, a two-layer ReLU network with softmax, Adam training and Platt
//! calibration.

pub mod calibrate;
pub mod layers;
pub mod network;
pub mod train;

pub use calibrate::Calibrator;
pub use layers::{Dense, Highway, HighwayCache};
pub use network::{softmax, Input, Network, NetworkConfig, Normalizer, Output, Pathway, Workspace};
pub use train::{train, Adam, Example, TrainConfig, TrainReport};
