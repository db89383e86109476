//! Evaluation harnesses: cross-lingual retrieval MAP, zero-shot transfer
//! classification, and PCA projection export.

mod projection;
mod retrieval;
mod transfer;

pub use projection::{export_projection, language_separation, projection_csv, ProjectionRow};
pub use retrieval::{
    average_precision, cosine, evaluate_retrieval, rank_candidates, EvalConfig, EvalReport, RankedList, SIMILARITY,
};
pub use transfer::{
    evaluate_transfer, train_logistic, train_logistic_traced, LabeledSet, LogisticConfig, LogisticModel, Placement,
    TransferConfig, TransferReport,
};
