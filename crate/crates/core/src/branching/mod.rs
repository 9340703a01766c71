//! Branching chains: kernels, sampling, stopped runs and first-passage laws.

pub mod chain;
pub mod kernel;
pub mod mgf;
pub mod passage;

pub use chain::{run_chain_to_stop, sample_offspring_sum, ChainKind, ChainState, StopRecord, StopVariant, TildeCrossing};
pub use kernel::{kernel_pi, kernel_rho, KernelKind, KernelProb, KernelRow, KernelTable};
pub use mgf::{offspring_mgf, Sign};
pub use passage::{first_passage_dp, PassageSolution, TildePassage};
