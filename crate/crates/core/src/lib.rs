//! Training-delay-optimal device/server splitting of profiled models for
//! split learning.
//!
//! A model profile becomes a weighted flow network between a virtual device
//! and a virtual server; the minimum s-t cut of the (restructured) network is
//! the partition with the smallest per-epoch training delay. Repeated blocks
//! whose internal cuts can never win are collapsed to single vertices first.

pub mod blockwise;
pub mod dag;
pub mod edgesim;
pub mod delay;
pub mod error;
pub mod fixtures;
pub mod maxflow;
pub mod oracle;
pub mod profile;
pub mod splitter;

pub use error::{Error, Result};
