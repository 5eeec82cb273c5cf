//! Core of the comicweave generator.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std`: the attribute-node sequence model, the narrative
//! grammar and tension arc, arousal scoring, the action planner, panel
//! transitions, the layer pipeline, and the software compositor. File IO,
//! PNG encoding, HTTP providers and the service live in the `comicweave`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod affect;
pub mod art;
pub mod assets;
pub mod engine;
pub mod grammar;
pub mod layers;
pub mod model;
pub mod planner;
pub mod providers;
pub mod raster;
pub mod render;
pub mod rng;
pub mod transitions;

pub use engine::{GenerationContext, Generator, Layer, LayerError, LayerRegistry, ModelRegistry};
pub use model::{
    AttributeNode, AttributeType, ModelError, NodeId, SceneDocument, SequenceModel, Value,
};
