//! File formats: PLY point clouds, PGM grids, trajectory text.

pub mod pgm;
pub mod ply;
pub mod trajectory;
