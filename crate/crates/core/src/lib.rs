pub mod error;
pub mod damping;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod spectrum;
pub mod verify;
pub mod wave;
pub mod words;

pub use error::{Error, Result};
