//! Audio IO, file formats, training driver and command-line front end for
//! the speaker voice similarity network in [`svsnet_core`].

pub mod checkpoint;
pub mod config;
pub mod evaluate;
pub mod manifest;
pub mod predict;
pub mod synth;
pub mod train;
pub mod wav;

pub use svsnet_core as core;
