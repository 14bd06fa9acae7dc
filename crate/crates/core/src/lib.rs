//! Steiner forest approximation built on ε-extended moat growing.
//!
//! The pipeline runs one moat-growing pass, then derives three forests: the
//! pruned tight forest, a forest obtained by contracting actively connected
//! sets of large gain, and a forest obtained by contracting connectors of a
//! maximum-profit autarkic collection. The cheapest one wins.

pub mod autarkic;
pub mod error;
pub mod fixtures;
pub mod gain;
pub mod instance;
pub mod moat;
pub mod oracle;
pub mod paths;
pub mod pipeline;
pub mod rational;
pub mod unionfind;

mod contract;

pub use error::{Error, ParseError, Result};
pub use instance::{
    generate_random, Demand, Edge, EdgeId, GenParams, Instance, SolutionForest, VertexId, Violation,
};
pub use moat::{run_extended_moat, run_timed_moat, MoatTrace, SupportSet};
pub use pipeline::{solve, PipelineParams, Report};
pub use rational::Rational;
