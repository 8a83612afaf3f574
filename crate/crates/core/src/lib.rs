//! Evaluation harness for post-hoc out-of-distribution detection.
//!
//! The pipeline composes five kinds of building blocks:
//!
//! * **adapters** turn image datasets on disk into streams of [`Sample`]s,
//! * **strategies** decide what counts as OoD, either by corrupting
//!   in-distribution images with mask-producing augmentations ([`augment`])
//!   or by declaring a whole second dataset OoD ([`runner`]),
//! * **models** produce logits (and, where supported, input gradients),
//! * **methods** turn model outputs into confidence scores
//!   (max-softmax, energy, ODIN),
//! * **metrics** reduce scores plus OoD ground truth to AuROC numbers,
//!   overall and binned by OoD-pixel fraction.
//!
//! Every random choice flows from one experiment seed through
//! [`rng::derive_stream_seed`], so a run is a pure function of its config and
//! dataset bytes.

pub mod adapters;
pub mod augment;
pub mod error;
pub mod math;
pub mod methods;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod plot;
pub mod rng;
pub mod runner;
pub mod sample;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::{derive_stream_seed, Rng};
pub use sample::{Sample, TaskType};
pub use tensor::Tensor;
