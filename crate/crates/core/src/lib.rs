//! Resource allocation for RIS-assisted D2D underlay cellular networks.
//!
//! The crate is organized bottom-up: [`numerics`] holds the interior-point
//! kernels, [`channel`] the scenario and fading model, [`pairing`] the
//! spectrum-sharing assignment, [`se_optimizer`] and [`ee_optimizer`] the
//! alternating optimizers, and [`harness`] the Monte Carlo sweeps and result
//! files.

pub mod channel;
pub mod ee_optimizer;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod pairing;
pub mod se_optimizer;

pub use channel::{default_topology, draw_realization, ChannelRealization, SystemConfig};
pub use ee_optimizer::maximize_ee;
pub use error::{Error, Result};
pub use numerics::{CMat, CVec};
pub use pairing::{rcs_pairing, Pairing};
pub use se_optimizer::{maximize_se, Allocation, FeasibleSet, Metric, SolveReport};
