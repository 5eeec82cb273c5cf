//! Std side of comicweave: image codecs, asset directories, remote model
//! clients, configuration, the HTTP service and the command line.

pub mod assets_io;
pub mod cli;
pub mod codec;
pub mod config;
pub mod output;
pub mod remote;
pub mod service;
