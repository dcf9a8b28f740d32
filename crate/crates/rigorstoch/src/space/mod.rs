//! Base spaces: Cantor space with the fair-coin measure, and open/closed
//! subsets of R^d under the max metric.

pub mod boxes;
pub mod cantor;
pub mod opens;
pub mod partition;

pub use boxes::{closed_cell_covered, union_volume_in, BoxRegion};
pub use cantor::{
    cylinder_partition, interleave_index, oracle_depth_cap, CantorPoint, ClopenSet, Cylinder,
};
pub use opens::{closed_fatten, inner_shrink, window, ClosedSet, OpenSet};
pub use partition::{boundary_null_partition, dyadic_centers, PartitionOpts, PartitionPiece};
