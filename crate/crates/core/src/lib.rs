//! Neural estimation of the capacity of memoryless continuous channels.
//!
//! Two small fully-connected networks are trained against each other: a
//! mutual-information estimator (NMIE) that maximizes a variational lower
//! bound on `I(X;Z)`, and a neural input transformer (NIT) that pushes
//! standard Gaussian noise through an MLP and a constraint layer to produce
//! channel inputs. Alternating their updates drives the NIT towards a
//! capacity-approaching input distribution while the NMIE tracks the
//! achieved rate.
//!
//! The crate is organized as:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`nn`] | dense MLP engine: forward, reverse-mode gradients, Adam, clipping |
//! | [`rng`] | seeded, reproducible random source |
//! | [`channels`] | `Z = X + N` channel laws and input constraints |
//! | [`estimators`] | MINE, SMILE, InfoNCE, χ² and entropy-based MI estimators |
//! | [`nit`] | the neural input transformer and learned-input histograms |
//! | [`capacity`] | the alternating optimization loop and multi-round aggregation |
//! | [`reference`] | closed-form capacities, Blahut–Arimoto, published bound table |
//! | [`stats`] | small sample-statistics helpers shared by tests and reports |
//!
//! All information quantities are in nats.

pub mod capacity;
pub mod channels;
mod error;
pub mod estimators;
pub mod nit;
pub mod nn;
pub mod reference;
pub mod rng;
pub mod stats;

pub use capacity::{estimate_capacity, CapacityEstimate, RoundReport, TrainConfig};
pub use channels::{ChannelKind, ChannelSpec, ConstraintSpec};
pub use error::{Error, Result};
pub use estimators::{EstimatorSpec, Method, Nmie, ReferenceDistribution};
pub use nit::{InputHistogram, InputTransformer, Mode};
pub use nn::{AdamState, Gradients, Matrix, Network, SampleBatch};
pub use reference::{awgn_capacity, blahut_arimoto, discretize_channel, published_bounds, DiscreteChannel};
pub use rng::Rng;
