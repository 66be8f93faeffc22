//! Relationship, path and principal-matching access control.
//!
//! Requests `(subject, object, action)` are decided in two stages. First the
//! subject and object are matched to a list of principals by evaluating path
//! conditions over a typed, labelled multigraph. Then the authorization rules
//! of those principals are combined by a conflict-resolution strategy.
//!
//! Two overlays extend the graph:
//!
//! - caching edges memoize the principal list of a subject/object pair so
//!   later requests skip the matching stage ([`cache`]);
//! - audit edges record decisions and declared interests so that
//!   history-based constraints such as separation of duty and Chinese Wall
//!   can be written as ordinary path conditions ([`audit`], [`constraints`]).

pub mod audit;
pub mod cache;
pub mod constraints;
pub mod engine;
pub mod error;
pub mod formats;
pub mod graph;
pub mod matcher;
pub mod path;
pub mod policy;

pub use engine::{Engine, EngineConfig, EvalOutcome};
pub use error::{Error, Result};
pub use graph::{Edge, EdgeKind, EdgeLabel, SystemGraph, SystemModel};
pub use path::{PathCondition, PathLabel, SimplePath};
pub use policy::{Decision, Request};
