//! Workload-level index advisor.
//!
//! The pipeline extracts index-relevant features from a SQL workload, retrieves
//! similar demonstrations, samples several recommendations from an LLM backend,
//! merges them by index-guided voting, keeps the cheapest option under what-if
//! costing, and iterates with database feedback.
//!
//! Interchangeable strategies (what-if backends, LLM backends, heuristic
//! advisors, demonstration matchers) sit behind traits and are looked up by
//! name through [`registry::Registry`].

pub mod bundled;
pub mod catalog;
pub mod demos;
pub mod error;
pub mod heuristics;
pub mod index;
pub mod llm;
pub mod registry;
pub mod scaling;
pub mod sql;
pub mod whatif;

pub use catalog::{Catalog, ColumnRef, DataType};
pub use index::{IndexAction, IndexDef};
