#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod analysis;
pub mod bipolar;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod model;
pub mod mp;
pub mod roots;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use model::{Alpha, CartesianState, Masses, ReducedState};
