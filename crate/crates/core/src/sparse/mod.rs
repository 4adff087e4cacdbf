//! Sparse-tensor foundations: coordinate quantization, batched tensor
//! construction, coordinate hashing, and kernel-map generation.

mod coord;
mod kernel;
mod tensor;

pub use coord::{pack_coord, CoordMap, VoxelCoord, MAX_LATTICE_COORD};
pub use kernel::{kernel_offsets, pool_map, KernelMap, KernelOffset};
pub use tensor::{batch, quantize, Point4, SparseTensor, VoxelSite};
