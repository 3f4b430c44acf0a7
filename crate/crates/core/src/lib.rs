//! Asynchronous footstep planning for a linear-inverted-pendulum biped.

pub mod baseline;
pub mod config;
pub mod descent;
pub mod error;
pub mod exchange;
pub mod experiments;
pub mod gradient;
pub mod lip;
pub mod nlp;
pub mod orchestrator;
pub mod problem;
pub mod qp;
pub mod quintic;
pub mod sim;
pub mod warm_start;

pub use error::{ArtoError, Result};
