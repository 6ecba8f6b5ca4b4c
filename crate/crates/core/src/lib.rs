//! Explainable recommendation from ratings and a social network.
//!
//! Users and items share one graph: rating edges carry the score, friendship
//! edges a constant weight. Random walks over that graph produce pairs that
//! train a biased factorization model, and the same walks yield co-occurrence
//! counts that back the explanations.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod pairs;
pub mod recommender;
pub mod report;
pub mod synthetic;
pub mod trainer;
pub mod walker;

pub use error::{Error, Result};
pub use graph::{build_unified_graph, UnifiedGraph, WalkKind};
pub use ingest::{
    kfold_split, parse_ratings, parse_trust, DatasetStats, Delimiter, EntityId, EntityIndex, EntityKind, FoldSplit,
    RatingRecord, SocialEdge,
};
pub use model::TrainedModel;
pub use pairs::{ClassifiedPair, CoocCounts, PairSet};
pub use recommender::{predict, similarity, Explainer, Thresholds};
pub use report::ExplanationReport;
pub use trainer::{train, CoocScope, Hyperparams, ModelParams, TrainMode, TrainingSet, TrainingTrace};
pub use walker::{generate_walks, Walk};
