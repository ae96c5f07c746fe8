//! Finite-stage constructions of branched-cover towers: 5-adic square and
//! cube complexes with middle annuli replaced by double covers, deformed
//! embeddings into ℝ^{2n+2}, ℝ⁴ and ℝ^{k+2}, the stage currents, and a
//! prober that searches test surfaces for holes.

pub mod branched_cover;
pub mod cli;
pub mod complex_core;
pub mod currents;
pub mod deformation_maps;
pub mod embedding_hilbert;
pub mod embedding_r4;
pub mod embedding_rk;
pub mod numeric;
pub mod prober;
pub mod radn;
pub mod schedule;
pub mod stage;
