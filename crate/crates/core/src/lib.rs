//! Mapping search and analytical latency simulation for DNN inference on
//! systems of reconfigurable accelerators.
//!
//! The crate models a system as a weighted accelerator graph, a workload as
//! a chain of convolutions, and a mapping as disjoint accelerator sets, each
//! configured with one design and running a contiguous range of layers under
//! per-layer exclusive/shared sharding strategies. A two-level genetic
//! search picks sets, designs and cuts at the outer level and per-layer
//! strategies at the inner level.

pub mod accel;
pub mod cli;
pub mod comm;
pub mod error;
pub mod evaluator;
pub mod par;
pub mod report;
pub mod search;
pub mod sharding;
pub mod topology;
pub mod units;
pub mod workload;

pub use accel::{builtin_designs, layer_cycles, layer_latency, profile_designs, AcceleratorDesign, DesignKind, FORMULA_VERSION};
pub use comm::{allreduce_cost, p2p_cost, redistribute_cost, ss_ring_cost, CommCost};
pub use error::{Error, Result};
pub use evaluator::{evaluate, evaluate_with, heterogeneous_set_compute, LatencyReport, MappedSet, Mapping};
pub use par::Executor;
pub use search::{run_baseline, run_oracle, run_outer_ga, GAConfig, OracleLimits, SearchOutcome};
pub use sharding::{enumerate_strategies, memory_footprint, shard_layout, Dim, ParallelismStrategy, ShardLayout};
pub use topology::{build_f1_topology, enumerate_accset_candidates, AccSetCandidate, SystemTopology};
pub use workload::{catalog::catalog, ConvLayer, Workload};
