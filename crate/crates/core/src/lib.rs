//! Cyclic-prefix based symbol time offset (STO) estimation for OFDM.
//!
//! The crate is organized bottom-up:
//!
//! - [`spectral`]: DFT/IDFT pair (radix-2 fast path, direct summation otherwise).
//! - [`txgen`]: bit mapping, OFDM symbol synthesis, cyclic prefix and frame layout.
//! - [`channel`]: timing offset, multipath convolution, AWGN, carrier frequency offset.
//! - [`sync`]: the correlation-based (CBM) and difference-based (DBM) estimators.
//! - [`harness`]: seeded trials, Monte Carlo statistics and channel frequency response.
//!
//! ```
//! use cpsto_core::{channel, sync, txgen::{build_frame, OfdmParams}};
//!
//! let params = OfdmParams::default();
//! let frame = build_frame(&params, 7).unwrap();
//! let rx = channel::apply_sto(frame, 3).unwrap();
//! let cfg = sync::EstimatorConfig::for_stream(sync::Method::Cbm, &params, &rx);
//! let trace = sync::estimate_sto(&rx, &cfg).unwrap();
//! assert_eq!(trace.argopt, 3);
//! ```

pub mod channel;
pub mod error;
pub mod harness;
pub mod spectral;
pub mod sync;
pub mod txgen;

pub use num_complex::Complex64;

pub use channel::{CfoParams, ChannelScenario, CirFixture};
pub use error::{Error, Result};
pub use harness::{ChannelMode, Scenario, ScenarioStats, TrialResult};
pub use spectral::Spectrum;
pub use sync::{EstimatorConfig, Method, MetricTrace};
pub use txgen::{Constellation, OfdmParams, SampleStream};
