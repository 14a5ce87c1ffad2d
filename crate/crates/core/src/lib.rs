//! Pilot-aided channel estimation and nearest-neighbour decoding over
//! stationary, bandlimited MIMO fading channels.
//!
//! - [`spectrum`]: fading PSDs, aliasing, `T → ∞` interpolation errors
//! - [`fading`]: Gaussian fading paths by circulant embedding
//! - [`estimator`]: pilot framing and finite-window LMMSE interpolation
//! - [`codec`]: Gaussian codebooks, the channel, nearest-neighbour decoding
//! - [`sim`]: Monte Carlo estimation and block-error simulations
//! - [`gmi`]: GMI lower bounds and pre-log fits
//! - [`mac`]: two-user MAC bounds, pre-log regions and the JT/TDMA verdict
//! - [`scenario`]: Doppler bandwidth of physical environments
//!
//! Randomness is drawn from counter-based streams ([`rng`]), so every result
//! is a pure function of its inputs and seed regardless of thread count.

pub mod codec;
pub mod error;
pub mod estimator;
pub mod fading;
pub mod gmi;
pub mod mac;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod spectrum;

pub use codec::{Codebook, InputLaw, Received};
pub use error::{Error, Result};
pub use estimator::{build_schedule, EstimationProfile, PilotSchedule};
pub use fading::FadingPath;
pub use gmi::{GmiEstimate, GmiVariant, PreLogFit};
pub use mac::{MacConfig, PreLogRegion, Rational, Threshold, Verdict, VerdictReport};
pub use scenario::Environment;
pub use spectrum::{PsdModel, PsdShape};
