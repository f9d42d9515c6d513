//! Lattice path-integral Monte Carlo for the geometry of quantum paths under
//! modified discrete-time actions.
//!
//! * [`lattice`]: lattice geometry, paths and link actions
//! * [`sampler`]: Metropolis chains
//! * [`observables`]: per-path measurements and blocked error bars
//! * [`renorm`]: the kinetic and potential renormalization functionals
//! * [`analysis`]: power-law fits, fractal dimensions and the transfer-matrix oracle

pub mod analysis;
pub mod error;
pub mod lattice;
pub mod observables;
pub mod quadrature;
pub mod renorm;
pub mod sampler;

pub use analysis::{fit_power_law, theory_df, FitResult, ScalingSeries};
pub use error::{Error, Result};
pub use lattice::{ActionKind, ActionSpec, FKind, LatticeConfig, LinkKernel, Path, Potential};
pub use observables::{Estimate, Observable};
pub use renorm::{renormalize, RenormResult};
pub use sampler::{run_chain, run_chains, ChainOutput, SamplerParams};
