//! Re-identification classifier: an RBF-kernel one-vs-rest SVM over gallery
//! embeddings with softmax confidences and a minimum-confidence gate.

mod classifier;
mod kernel;
mod smo;

pub use classifier::{softmax, train_classifier, ClassModel, GallerySample, RbfSvmModel, TrainParams};
pub use kernel::{median_pairwise_distance, rbf_kernel};
