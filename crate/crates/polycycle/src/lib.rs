//! Numerical toolkit for limit cycles bifurcating from persistent
//! hyperbolic polycycles of planar polynomial vector fields.

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod family;
pub mod flow;
pub mod num;
pub mod returnmap;
pub mod saddletools;
