//! HTTP service and command line over `scatterquery-core`.

pub mod cli;
mod http;

pub use http::{router, HttpError};
