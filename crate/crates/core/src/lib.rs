//! Geometry of genuine and hallucinated LLM responses in embedding space.
//!
//! Given repeated responses per `(model, prompt)` with precomputed embeddings
//! and `G`/`H` labels, this crate
//!
//! * builds intra- and inter-class Euclidean distance distributions
//!   ([`distances`]),
//! * compares them with the closed-form 1-D Wasserstein distance, the
//!   Wilcoxon rank-sum test and a label-permutation null ([`stats`]),
//! * fits a regularized Fisher discriminant and alternative projectors
//!   ([`fisher`]),
//! * propagates labels from a small judged subset by Wasserstein consistency
//!   with each class's internal spread ([`propagation`]),
//! * and reproduces the evaluation protocols around all of the above
//!   ([`evaluation`]).
//!
//! ```
//! use halluscope::synth::{generate, SynthSpec};
//! use halluscope::propagation::fit_propagator;
//! use halluscope::stats::WassersteinOrder;
//!
//! let spec = SynthSpec { dimension: 8, mu_gap: 6.0, seed: 1, ..Default::default() };
//! let collection = generate(&spec).unwrap();
//! let model = fit_propagator(&collection, 1.2, WassersteinOrder::W1).unwrap();
//! let first = &collection.records[0];
//! let prediction = model.classify(&first.embedding).unwrap();
//! assert_eq!(prediction.label, first.label);
//! ```

pub mod cli;
pub mod data;
pub mod distances;
pub mod error;
pub mod evaluation;
pub mod fisher;
pub mod propagation;
pub mod seed;
pub mod stats;
pub mod summary;
pub mod synth;

pub use error::{Error, Result};
