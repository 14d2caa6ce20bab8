//! Problem instance: areas, adjacency, region statistics and contiguity.

mod graph;
pub mod grid;
pub mod io;
mod partition;

pub use graph::{Area, AreaGraph, RegionStats};
pub use grid::{generate_grid, AttrDist};
pub use io::{load_dataset, Contiguity, DatasetFormat, LoadOptions};
pub use partition::{total_heterogeneity, Partition, RegionId, REANCHOR_INTERVAL, STATS_REL_TOL};
