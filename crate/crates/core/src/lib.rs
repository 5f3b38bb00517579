//! Ordinal embedding: external and internal unfolding in the point and
//! vector models, ordinal MDS in `Rᵖ` and on the sphere, gauge alignment,
//! and an experiment harness that checks recovery up to the gauge group.

pub mod geometry;
pub mod harness;
pub mod io;
pub mod rankings;
pub mod rng;
pub mod sampling;
pub mod solvers;
