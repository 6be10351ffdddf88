pub mod annotate;
pub mod dataset;
pub mod font;
pub mod geodata;
pub mod geom;
pub mod metrics;
pub mod pipeline;
pub mod placement;
pub mod raster;
pub mod tiles;
