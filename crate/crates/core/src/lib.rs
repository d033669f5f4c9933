//! Traffic signal control benchmark toolkit.
//!
//! A deterministic microscopic simulator ([`sim`]) wrapped as a
//! multi-intersection RL environment ([`env`]), converters between a
//! JSON and an XML scenario format ([`format`]), classical controllers
//! ([`controllers`]), from-scratch DQN agents ([`agent`]), evaluation metrics
//! ([`metrics`]) and the experiment runner behind the `tsc` binary ([`bench`]).
//!
//! ```
//! use tscbench::controllers::{Classical, MaxPressureConfig};
//! use tscbench::env::{EnvConfig, TscEnv};
//!
//! let (net, flows) = tscbench::fixtures::scenario("grid1x1").unwrap();
//! let mut env = TscEnv::new(&net, &flows, EnvConfig::default()).unwrap();
//! let mp = Classical::MaxPressure(MaxPressureConfig::default());
//! let m = tscbench::bench::run_classical_episode(&mut env, &mp).unwrap();
//! assert!(m.throughput > 0);
//! ```

// `!(x > 0.0)` rejects NaN as well; index loops mirror the matrix math
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agent;
pub mod bench;
pub mod controllers;
pub mod env;
pub mod fixtures;
pub mod format;
pub mod metrics;
pub mod model;
pub mod sim;
