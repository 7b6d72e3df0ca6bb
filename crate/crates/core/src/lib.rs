//! Stochastic production frontiers and technical efficiency for country
//! panels, with the auxiliary bound machinery built around them: Lp
//! frontier distances, horizon polynomial bases, Brownian-driven
//! investigation/development dynamics, Picard convergence certificates and
//! Ex Ante / Ex Post fractal dimension bounds.
//!
//! Each module is usable on its own; [`report`] chains them into the batch
//! pipeline behind the `frontier-lab` binary.

pub mod dynamics;
pub mod fractal;
pub mod frontier;
pub mod lp;
pub mod numerics;
pub mod optim;
pub mod panel;
pub mod picard;
pub mod report;
