//! Kernel-map generation for strided sparse convolutions and poolings.
//!
//! A kernel map lists, per kernel offset, the `(input_row, output_row)` index
//! pairs that a gather-multiply-scatter kernel consumes. Output coordinates
//! for stride 1 equal the input coordinates; for stride `s` they follow the
//! floor-division-to-coarse-lattice rule, the single source of truth for all
//! strided ops in this crate.

use crate::error::Result;
use crate::scalar::Scalar;
use crate::sparse::coord::{CoordMap, VoxelCoord};
use crate::sparse::tensor::SparseTensor;

/// One kernel offset in lattice steps (multiples of the input stride).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelOffset {
    pub di: i32,
    pub dj: i32,
    pub dk: i32,
}

/// Offset grid for a cubic kernel, in fixed lexicographic order.
/// Size 3 spans `{-1,0,1}`, size 2 spans `{0,1}`, size 1 is the center only.
pub fn kernel_offsets(kernel_size: usize) -> Vec<KernelOffset> {
    let range: &[i32] = match kernel_size {
        1 => &[0],
        2 => &[0, 1],
        3 => &[-1, 0, 1],
        other => panic!("unsupported kernel size {other}"),
    };
    let mut offsets = Vec::with_capacity(range.len().pow(3));
    for &di in range {
        for &dj in range {
            for &dk in range {
                offsets.push(KernelOffset { di, dj, dk });
            }
        }
    }
    offsets
}

/// Precomputed pairing between input and output rows for one (kernel, stride).
#[derive(Debug, Clone)]
pub struct KernelMap {
    pub kernel_size: usize,
    pub stride: usize,
    pub offsets: Vec<KernelOffset>,
    /// Per offset: `(input_row, output_row)` pairs, sorted by output row.
    /// Within one offset, input rows and output rows are each unique.
    pub pairs: Vec<Vec<(u32, u32)>>,
    pub out_coords: Vec<VoxelCoord>,
    pub out_tensor_stride: i32,
    pub in_len: usize,
    by_out_ptr: Vec<u32>,
    by_out: Vec<(u32, u32)>,
    by_in_ptr: Vec<u32>,
    by_in: Vec<(u32, u32)>,
}

impl KernelMap {
    /// Builds the map from input coordinates at `tensor_stride`.
    pub fn build(
        in_coords: &[VoxelCoord],
        tensor_stride: i32,
        kernel_size: usize,
        stride: usize,
    ) -> Result<KernelMap> {
        let t = tensor_stride;
        let offsets = kernel_offsets(kernel_size);

        let out_tensor_stride = t * stride as i32;
        let out_coords = if stride == 1 {
            in_coords.to_vec()
        } else {
            let m = out_tensor_stride;
            let mut coarse: Vec<VoxelCoord> = in_coords
                .iter()
                .map(|c| {
                    VoxelCoord::new(
                        c.b,
                        c.i.div_euclid(m) * m,
                        c.j.div_euclid(m) * m,
                        c.k.div_euclid(m) * m,
                    )
                })
                .collect();
            coarse.sort_unstable();
            coarse.dedup();
            coarse
        };

        let in_map = CoordMap::build(in_coords)?;
        let n_off = offsets.len();
        let mut pairs: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n_off];
        let mut by_out_ptr = Vec::with_capacity(out_coords.len() + 1);
        let mut by_out = Vec::new();
        by_out_ptr.push(0u32);
        for (out_row, oc) in out_coords.iter().enumerate() {
            for (oi, off) in offsets.iter().enumerate() {
                let cand = oc.offset(off.di * t, off.dj * t, off.dk * t);
                if let Some(in_row) = in_map.get(cand) {
                    pairs[oi].push((in_row, out_row as u32));
                    by_out.push((oi as u32, in_row));
                }
            }
            by_out_ptr.push(by_out.len() as u32);
        }

        // Input-major gather index, built by counting sort so the per-row
        // order follows ascending output row (deterministic).
        let mut counts = vec![0u32; in_coords.len() + 1];
        for plist in &pairs {
            for &(in_row, _) in plist {
                counts[in_row as usize + 1] += 1;
            }
        }
        for r in 0..in_coords.len() {
            counts[r + 1] += counts[r];
        }
        let by_in_ptr = counts.clone();
        let mut fill = counts;
        let mut by_in = vec![(0u32, 0u32); by_out.len()];
        for (oi, plist) in pairs.iter().enumerate() {
            for &(in_row, out_row) in plist {
                let slot = fill[in_row as usize] as usize;
                by_in[slot] = (oi as u32, out_row);
                fill[in_row as usize] += 1;
            }
        }

        Ok(KernelMap {
            kernel_size,
            stride,
            offsets,
            pairs,
            out_coords,
            out_tensor_stride,
            in_len: in_coords.len(),
            by_out_ptr,
            by_out,
            by_in_ptr,
            by_in,
        })
    }

    pub fn from_tensor<T: Scalar>(
        input: &SparseTensor<T>,
        kernel_size: usize,
        stride: usize,
    ) -> Result<KernelMap> {
        KernelMap::build(input.coords(), input.tensor_stride(), kernel_size, stride)
    }

    pub fn n_out(&self) -> usize {
        self.out_coords.len()
    }

    pub fn total_pairs(&self) -> usize {
        self.by_out.len()
    }

    /// `(offset_index, input_row)` list feeding output row `out_row`.
    pub fn inputs_of(&self, out_row: usize) -> &[(u32, u32)] {
        &self.by_out[self.by_out_ptr[out_row] as usize..self.by_out_ptr[out_row + 1] as usize]
    }

    /// `(offset_index, output_row)` list fed by input row `in_row`.
    pub fn outputs_of(&self, in_row: usize) -> &[(u32, u32)] {
        &self.by_in[self.by_in_ptr[in_row] as usize..self.by_in_ptr[in_row + 1] as usize]
    }
}

/// Kernel map for the `2^3`, stride-2 sparse max pooling.
pub fn pool_map<T: Scalar>(input: &SparseTensor<T>) -> Result<KernelMap> {
    KernelMap::from_tensor(input, 2, 2)
}
