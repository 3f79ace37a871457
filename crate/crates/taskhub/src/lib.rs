//! Annotation task service: builds task bundles from a corpus, serves
//! items to contributors one at a time and persists their answers in an
//! append-only log.

pub mod bundle;
pub mod error;
pub mod http;
pub mod hub;
pub mod store;

pub use bundle::{build_bundle, BundleItem, BundleOptions, TaskBundle};
pub use error::{HubError, Result};
pub use hub::{Ack, NextItem, ServedItem, TaskHub};
pub use store::AnnotationStore;
