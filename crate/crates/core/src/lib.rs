//! Autoencoder-enabled global optimization.
//!
//! The pipeline has four phases:
//!
//! 1. sample the search box uniformly and push every sample downhill with a
//!    few Adam steps ([`localopt`]),
//! 2. train a dense autoencoder on the optimized samples ([`nn`]),
//! 3. run differential evolution over the latent cube, where every candidate
//!    is decoded and refined by a few more local steps ([`latent`]),
//! 4. post-process the best latent point with a longer local search.
//!
//! [`bench`] holds the four benchmark problems, [`analysis`] the PCA and
//! reconstruction-loss tools used to pick the latent dimension, and
//! [`pipeline`] the orchestration used by the command-line driver.

pub mod adam;
pub mod analysis;
pub mod bench;
pub mod error;
pub mod latent;
pub mod localopt;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod textio;
pub mod trace;

pub use error::{Error, Result};
