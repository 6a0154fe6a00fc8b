//! Bayesian clustering of fixed-sum count data.
//!
//! Mixture-of-finite-mixtures (and Dirichlet-process) partition priors are
//! combined with collapsed Dirichlet-multinomial or Dirichlet-tree-multinomial
//! component likelihoods. A binary selection vector marks which features
//! (OTUs, or internal tree nodes) carry cluster-specific parameters; all other
//! features share pooled parameters. Inference uses Metropolis moves on the
//! selection and split-merge moves on the partition.
//!
//! The crate is `no_std` (it needs `alloc`). Text formats, file IO and the
//! command-line front end live in the `mfmclust` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod kernel;
pub mod math;
pub mod partition;
pub mod posterior;
pub mod prior;
pub mod sampler;
pub mod selection;
pub mod simgen;
pub mod tree;

pub use data::{rescale_counts, CountMatrix, Scale};
pub use error::{Error, Result};
pub use kernel::{dm::DmHyper, dm::DmKernel, dtm::DtmHyper, dtm::DtmKernel, Kernel};
pub use partition::Partition;
pub use prior::{ComponentPrior, PartitionPrior, PriorSpec, PriorVariant, VnTable};
pub use sampler::{run_mcmc, ChainDraws, McmcConfig, McmcState};
pub use selection::Selection;
pub use tree::{propagate_tree_counts, PhyloTree, TreeBuilder, TreeCounts};
