//! Frame history, persisted through the associative store, plus focus
//! queries.

pub mod focus;
pub mod store;
pub mod triples;

pub use focus::{focus, FocusFields, FocusQuery};
pub use store::{HistoryStore, Retention};
pub use triples::{frame_to_store, store_to_frame};
