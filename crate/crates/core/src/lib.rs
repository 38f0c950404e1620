pub mod corpus;
pub mod error;
pub mod index;
pub mod ranker;
pub mod textproc;
pub mod topics;
pub mod tuner_eval;

pub use error::{Error, Result};
