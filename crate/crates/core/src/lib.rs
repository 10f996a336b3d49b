//! Retro-directive antenna array (RAA) localization: channel models, the
//! iterative backscatter beamforming loop, closed-form SNR analysis and a
//! multi-anchor simulation engine.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod locengine;
pub mod raa;
pub mod trx;

pub use error::{Error, Result};
