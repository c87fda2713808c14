//! Operator learning for Hodgkin-Huxley voltage responses.

pub mod hh;
pub mod dataset;
pub mod autodiff;
pub mod spectral;
pub mod models;
pub mod training;
pub mod cli;
