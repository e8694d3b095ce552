//! Statistical style analysis over Gaussian style distributions.
//!
//! The crate fits one multivariate Gaussian per style domain from streamed
//! style vectors ([`model`]), compares domains with closed-form
//! 2-Wasserstein distances ([`distance`]), draws new style vectors from a
//! fitted domain ([`sampler`]), and computes the AdaIN and Gram style
//! statistics those vectors are made of ([`features`]).

mod codec;

pub mod batch_file;
pub mod distance;
pub mod error;
pub mod features;
pub mod fixtures;
pub mod image_io;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sampler;

pub use distance::{
    bhattacharyya, distance_matrix, kl_divergence, nearest_neighbors, w2, w2_squared,
    DistanceMatrix, Metric,
};
pub use error::{Result, UstError};
pub use features::{
    adain_vector, apply_adain, extract_features, gram_matrix, invariance_check, swap_regions,
    ConvNetSpec, FeatureMap, GramMatrix, ImageTensor, InvarianceReport, Rect,
};
pub use linalg::{make_psd, psd_sqrt, sym_eigen, SymEigen, SymMatrix};
pub use model::{
    load_model, save_model, GaussianStyleModel, StreamingEstimator, StyleVector, VectorBatch,
};
pub use sampler::{sample, GaussianSampler};
