#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod markov;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod quadrature;
pub mod queueing;
pub mod report;
pub mod simulator;

pub use error::{Error, Result};

/// Guide chapters, compiled so their snippets run with the doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    struct Quickstart;
    #[doc = include_str!("../../../book/src/channel.md")]
    struct Channel;
    #[doc = include_str!("../../../book/src/queueing.md")]
    struct Queueing;
    #[doc = include_str!("../../../book/src/energy.md")]
    struct Energy;
    #[doc = include_str!("../../../book/src/optimization.md")]
    struct Optimization;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/configuration.md")]
    struct Configuration;
}
