//! Support library for the `equideco` binary: JSON artifact codecs, SVG
//! rendering, and the disk-to-square demo.

pub mod demo;
pub mod io;
pub mod render;
