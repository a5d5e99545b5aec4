//! Graph-based top-N recommendation from timestamped implicit feedback.
//!
//! A training link stream becomes a recommender graph ([`graph`]), which is
//! optionally enriched with content nodes and time-decayed edge weights
//! ([`enrich`]). Items are ranked for a user by personalized PageRank
//! ([`ppr`]) whose restart distribution can include trusted users
//! ([`trust`]). [`eval`] runs the time-sliced top-N protocol and randomized
//! parameter search; [`cli`] wires it all to files.

pub mod cli;
pub mod enrich;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod ppr;
pub mod recommender;
pub mod stream;
pub mod trust;

pub use enrich::{ContentMode, DecaySpec, EdgeWeights};
pub use error::{Error, Result};
pub use eval::{evaluate, random_search, EvalReport, Metric, Objective, Ranker, SearchSpace};
pub use graph::{GraphKind, NodeRef, RecGraph};
pub use ppr::{DecayKind, PprSettings, RankVector};
pub use recommender::Recommender;
pub use stream::{ContentCatalog, ExplicitTrustNetwork, LinkStream, ReviewTuple};
pub use trust::{TrustKind, TrustModel};
