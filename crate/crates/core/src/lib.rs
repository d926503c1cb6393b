//! Synthetic object-detection training data.
//!
//! Each image is three rendered layers: randomly posed background models that
//! fill the frame, foreground models posed along a curriculum schedule, and
//! occluders hiding part of some foreground objects. The layers are fused,
//! noised, blurred and written together with COCO-style annotations.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assets;
pub mod color;
pub mod composer;
pub mod config;
pub mod curriculum;
pub mod dataset;
pub mod geometry;
pub mod postprocess;
pub mod renderer;
pub mod seed;
pub mod viewsphere;
