//! Fisher vectors for sets of binary local descriptors.
//!
//! A Bernoulli mixture model fitted with EM supplies the generative model;
//! each image's descriptor set is encoded as the normalized gradient of its
//! mean log-likelihood. A bag-of-binary-words baseline, retrieval scoring and
//! the on-disk formats round out the pipeline.

pub mod bitdesc;
pub mod bmm;
pub mod bovw;
pub mod error;
pub mod eval;
pub mod fisher;
pub mod io;
pub mod normalize;

pub use bitdesc::{BinaryDescriptor, FeatureSet};
pub use bmm::{fit_em, BmmModel, EmConfig, EmReport, Occupancy};
pub use bovw::{encode_bow, train_codebook, BinaryCodebook, BowVector};
pub use error::{Error, Result};
pub use eval::{average_precision, evaluate, EvalResult, RelevanceTruth, RetrievalIndex};
pub use fisher::{encode, encode_approx, FisherEncoder, FisherVec, InformationScale, NormState};
pub use normalize::{apply_norm, NormScheme, Normalized};
