pub mod barcode;
pub mod epigeom;
pub mod geometry;
pub mod hull;
pub mod mask;
pub mod seed;
pub mod trellis;
pub mod synth;
pub mod pipeline;
pub mod experiment;
