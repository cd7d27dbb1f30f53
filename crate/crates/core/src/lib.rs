//! Compact traveling waves, propagating terraces and a monotone Cauchy
//! solver for reaction-diffusion equations with discontinuous multistable
//! reactions.

pub mod interp;
pub mod reaction;
pub mod terrace;
pub mod wave;
pub mod cauchy;
pub mod diagnostics;
pub mod config;
pub mod output;
pub mod verify;
