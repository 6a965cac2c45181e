//! Control by pulse sequences: rotating and lab-frame leakage elimination
//! operators, bang-bang parity kicks and Zeno projection.

mod kicks;
mod leo;
mod pulse;
mod zeno;

pub use kicks::{block_diagonal_propagator, finite_kick_propagator, parity_kick_propagator, propagator_deviation};
pub use leo::{apply_lab_leo, apply_leo, block_split, eigenprojector, parity_operator, rotating_leo, LeoSpec};
pub use pulse::{PulseKind, PulseSequence, SignPolicy};
pub use zeno::{zeno_evolution, zeno_step, ZenoOutcome, ZenoRun};
