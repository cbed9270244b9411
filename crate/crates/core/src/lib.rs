//! Weak ship annotation from AIS reports over georeferenced satellite imagery,
//! together with the tiling, detection-merging and retrieval evaluation used to
//! score ship detectors against the same AIS ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airbus;
pub mod ais;
pub mod catalog;
pub mod correlate;
pub mod detect;
pub mod eval;
pub mod geo;
pub mod geom;
pub mod jsonl;
pub mod raster;
pub mod synth;
