//! Multi-precision quadratic regularization for unconstrained optimization.
pub mod defined;
pub mod errbounds;
pub mod evalmodel;
pub mod expr;
pub mod fpenv;
pub mod harness;
pub mod problems;
pub mod solver;
