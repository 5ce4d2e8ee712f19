pub mod krylov;
pub mod skyline;
pub mod sparse;
