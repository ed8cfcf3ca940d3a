//! Hybrid beamforming and multiuser detection for waveguide-fed
//! pinching-antenna arrays.
//!
//! The system model: an access point feeds `M` dielectric waveguides, each
//! carrying one RF chain's signal and radiating it through `N` small
//! movable elements pinched onto the guide. The element positions are
//! design variables alongside the digital precoder or detector, which makes
//! beamforming "hybrid" — a digital matrix plus analog degrees of freedom
//! in the element geometry. This crate implements:
//!
//! - the free-space line-of-sight channel model for such arrays
//!   ([`channel`]), including feasibility rules for element placement and
//!   the shared candidate-position machinery ([`grid`]);
//! - a downlink weighted sum-rate maximizer alternating closed-form
//!   fractional-programming updates with per-element grid sweeps
//!   ([`downlink_fp`]);
//! - a downlink zero-forcing design whose placement sweep minimizes the
//!   power penalty `tr((G^T G*)^{-1})` via rank-1 update identities
//!   ([`downlink_zf`]);
//! - an uplink MMSE receiver with a greedy placement sweep driven by a
//!   determinant-free sum-rate ([`uplink`]);
//! - fixed half-wavelength-array baselines sharing the same rate code paths
//!   ([`baseline`]); and
//! - a deterministic Monte-Carlo harness with a CSV-emitting CLI
//!   ([`harness`]).
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory; the `pass-sim` binary exposes the harness.
//!
//! # Example
//!
//! ```
//! use pass_mimo::config::{ScenarioConfig, UserLayout};
//! use pass_mimo::channel::random_feasible_locations;
//! use pass_mimo::downlink_zf::run_zf;
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//!
//! // Four users in a 50 m x 6 m region served by 5 waveguides.
//! let config = ScenarioConfig {
//!     grid_points: 512, // coarse search keeps the example quick
//!     ..ScenarioConfig::default()
//! };
//! let users = UserLayout::from_xy(&[(10.0, 1.0), (40.0, 5.0), (25.0, 3.0), (5.0, 2.0)]);
//! let mut rng = ChaCha8Rng::seed_from_u64(0);
//! let init = random_feasible_locations(&config, &mut rng).unwrap();
//! let run = run_zf(&config, &users, &init).unwrap();
//! let bits = run.trace.last("sum_rate_nats").unwrap() / std::f64::consts::LN_2;
//! assert!(bits > 0.0);
//! ```

pub mod baseline;
pub mod channel;
pub mod config;
pub mod downlink_fp;
pub mod downlink_zf;
pub mod error;
pub mod grid;
pub mod harness;
pub mod trace;
pub mod uplink;

pub use channel::{ChannelMatrix, LocationMatrix};
pub use config::{ScenarioConfig, UserLayout};
pub use downlink_fp::PrecoderMatrix;
pub use error::{PassError, Result};
pub use trace::ConvergenceTrace;
pub use uplink::ReceiverMatrix;
