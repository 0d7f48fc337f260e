#![allow(clippy::needless_range_loop)]

pub mod acquisition;
pub mod api;
pub mod coding_rate;
pub mod config;
pub mod error;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod proxy;
pub mod sim;

pub use error::{Error, Result};
