//! Interactive keyphrase harvesting for adding long-tail entities to a
//! knowledge base.
//!
//! A user (or the simulator) names an entity, judges one entity-in-context
//! document at a time and ticks the keyphrases that describe the entity. The
//! ranking strategies in [`strategy`] decide which document to show next:
//! query-likelihood ranking, Rocchio feedback, greedy aspect diversification,
//! and interleavings of a static and a feedback-driven list.
//!
//! Ranking and feedback code is generic over the float type ([`num::Scalar`]);
//! the aliases at the crate root fix it to `f64`.

pub mod corpus;
pub mod disambig;
pub mod diversify;
pub mod error;
pub mod interleave;
pub mod metrics;
pub mod num;
pub mod retrieval;
pub mod session;
pub mod sim;
pub mod strategy;
pub mod text;

pub use corpus::{CorpusIndex, Document, EicSnippet, EntityMention};
pub use diversify::{AspectSpace, CoveredSet};
pub use error::{Error, Result};
pub use metrics::{EngagementTrace, GroundTruth};
pub use session::Judgment;
pub use strategy::{StrategyName, BENCHMARK_STRATEGIES};

/// Double-precision scalar used throughout the binaries.
pub type Real = f64;
pub type QueryVector = retrieval::QueryVector<Real>;
pub type ScoredList = retrieval::ScoredList<Real>;
pub type Session = session::Session<Real>;
pub type SessionState = session::SessionState<Real>;
pub type SessionOptions = session::SessionOptions<Real>;
pub type RocchioParams = session::RocchioParams<Real>;
pub type EntityRepresentation = session::EntityRepresentation<Real>;
pub type CandidateSet = disambig::CandidateSet<Real>;
