//! Linear dynamics `∂ₜX = M(t)X`: grids, generators, propagation, P-Q
//! partitioning and frame changes.

mod frame;
mod generator;
mod grid;
mod partition;
mod propagate;

pub use frame::{rotate_generator, FramePath};
pub use generator::{basis_vector, pauli, CMat, CVec, Generator, MaxAbs};
pub(crate) use generator::I;
pub use grid::TimeGrid;
pub use partition::{complete_basis, pq_partition, BlockSample, PQBlocks};
pub(crate) use partition::{check_normalized, split};
pub use propagate::{propagate, propagate_with, time_ordered_propagator, Scheme};
pub(crate) use propagate::rk4_step_matrix;
