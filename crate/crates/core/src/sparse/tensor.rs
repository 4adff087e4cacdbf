//! Quantization of raw points and batched sparse tensor construction.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::sparse::coord::VoxelCoord;

/// One raw detector hit: spatial position plus deposited charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point4 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub q: f64,
}

impl Point4 {
    pub fn new(x: f64, y: f64, z: f64, q: f64) -> Self {
        Point4 { x, y, z, q }
    }
}

/// One occupied voxel produced by [`quantize`]: merged charge plus the
/// unweighted centroid of the contributing points.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSite {
    pub cell: (i32, i32, i32),
    pub charge: f64,
    pub centroid: [f64; 3],
    pub n_points: usize,
}

/// Maps points onto the integer lattice at `voxel_size`, merging duplicate
/// sites by summing their charges. Output is sorted lexicographically by
/// `(i, j, k)`, so the result is independent of input point order.
pub fn quantize(points: &[Point4], voxel_size: f64) -> Result<Vec<VoxelSite>> {
    if points.is_empty() {
        return Err(Error::EmptyEvent { context: None });
    }
    if !(voxel_size > 0.0) {
        return Err(Error::Config(format!(
            "voxel_size must be positive, got {voxel_size}"
        )));
    }
    let mut sites: BTreeMap<(i32, i32, i32), VoxelSite> = BTreeMap::new();
    for (index, p) in points.iter().enumerate() {
        for (field, v) in [("x", p.x), ("y", p.y), ("z", p.z), ("q", p.q)] {
            if !v.is_finite() {
                return Err(Error::InvalidPoint { index, field });
            }
        }
        let cell = (
            (p.x / voxel_size).floor() as i32,
            (p.y / voxel_size).floor() as i32,
            (p.z / voxel_size).floor() as i32,
        );
        let site = sites.entry(cell).or_insert(VoxelSite {
            cell,
            charge: 0.0,
            centroid: [0.0; 3],
            n_points: 0,
        });
        site.charge += p.q;
        site.centroid[0] += p.x;
        site.centroid[1] += p.y;
        site.centroid[2] += p.z;
        site.n_points += 1;
    }
    Ok(sites
        .into_values()
        .map(|mut s| {
            let n = s.n_points as f64;
            s.centroid = [s.centroid[0] / n, s.centroid[1] / n, s.centroid[2] / n];
            s
        })
        .collect())
}

/// Batched sparse tensor: unique coordinates paired with feature rows.
///
/// Coordinates are kept sorted lexicographically by `(b, i, j, k)`, so rows
/// of the same event are contiguous and ordering is reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor<T> {
    coords: Vec<VoxelCoord>,
    features: Matrix<T>,
    tensor_stride: i32,
    batch_size: usize,
}

impl<T: Scalar> SparseTensor<T> {
    pub fn new(
        coords: Vec<VoxelCoord>,
        features: Matrix<T>,
        tensor_stride: i32,
        batch_size: usize,
    ) -> Self {
        debug_assert_eq!(coords.len(), features.rows());
        debug_assert!(tensor_stride >= 1);
        debug_assert!(coords.iter().all(|c| {
            c.i % tensor_stride == 0 && c.j % tensor_stride == 0 && c.k % tensor_stride == 0
        }));
        debug_assert!(coords.windows(2).all(|w| w[0] < w[1]), "coords not sorted");
        SparseTensor {
            coords,
            features,
            tensor_stride,
            batch_size,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[VoxelCoord] {
        &self.coords
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn channels(&self) -> usize {
        self.features.cols()
    }

    pub fn tensor_stride(&self) -> i32 {
        self.tensor_stride
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Replaces the features, keeping coordinates and stride.
    pub fn with_features(&self, features: Matrix<T>) -> SparseTensor<T> {
        debug_assert_eq!(features.rows(), self.coords.len());
        SparseTensor {
            coords: self.coords.clone(),
            features,
            tensor_stride: self.tensor_stride,
            batch_size: self.batch_size,
        }
    }

    /// Contiguous row range of each event. Empty ranges mark events that
    /// have no sites (possible only for hand-built tensors).
    pub fn event_ranges(&self) -> Vec<Range<usize>> {
        let mut ranges = vec![0..0; self.batch_size];
        let mut row = 0;
        for b in 0..self.batch_size {
            let start = row;
            while row < self.coords.len() && self.coords[row].b as usize == b {
                row += 1;
            }
            ranges[b] = start..row;
        }
        ranges
    }
}

/// Concatenates per-event `(cells, features)` into one batched tensor at
/// tensor stride 1, prepending the batch index. No padding or truncation.
pub fn batch<T: Scalar>(events: &[(Vec<(i32, i32, i32)>, Matrix<T>)]) -> Result<SparseTensor<T>> {
    if events.is_empty() {
        return Err(Error::EmptyEvent { context: None });
    }
    let width = events[0].1.cols();
    let total: usize = events.iter().map(|(c, _)| c.len()).sum();
    let mut coords = Vec::with_capacity(total);
    let mut data = Vec::with_capacity(total * width);
    for (b, (cells, feats)) in events.iter().enumerate() {
        if cells.is_empty() {
            return Err(Error::empty_event(format!("batch slot {b}")));
        }
        if feats.cols() != width {
            return Err(Error::shape("batch feature width", width, feats.cols()));
        }
        debug_assert_eq!(cells.len(), feats.rows());
        for (r, &(i, j, k)) in cells.iter().enumerate() {
            coords.push(VoxelCoord::new(b as u32, i, j, k));
            data.extend_from_slice(feats.row(r));
        }
    }
    Ok(SparseTensor::new(
        coords,
        Matrix::from_vec(total, width, data),
        1,
        events.len(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_floor_arithmetic() {
        let sites = quantize(&[Point4::new(1.23, 4.56, 7.89, 1.0)], 0.05).unwrap();
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].cell, (24, 91, 157));
        assert_eq!(sites[0].charge, 1.0);
    }

    #[test]
    fn quantize_negative_uses_floor_not_truncate() {
        let sites = quantize(&[Point4::new(-0.01, 0.0, 0.0, 2.0)], 0.05).unwrap();
        assert_eq!(sites[0].cell, (-1, 0, 0));
        assert_eq!(sites[0].charge, 2.0);
    }

    #[test]
    fn quantize_merges_by_charge_sum() {
        let sites = quantize(
            &[
                Point4::new(0.01, 0.02, 0.03, 1.0),
                Point4::new(0.04, 0.01, 0.02, 2.5),
            ],
            0.05,
        )
        .unwrap();
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].cell, (0, 0, 0));
        assert_eq!(sites[0].charge, 3.5);
        assert_eq!(sites[0].n_points, 2);
        assert!((sites[0].centroid[0] - 0.025).abs() < 1e-12);
    }

    #[test]
    fn quantize_rejects_empty_and_non_finite() {
        assert!(matches!(
            quantize(&[], 0.05),
            Err(Error::EmptyEvent { .. })
        ));
        assert!(matches!(
            quantize(&[Point4::new(f64::NAN, 0.0, 0.0, 1.0)], 0.05),
            Err(Error::InvalidPoint { index: 0, field: "x" })
        ));
    }

    #[test]
    fn batch_concatenates_in_event_order() {
        let e0 = (
            vec![(0, 0, 0), (1, 0, 0), (2, 0, 0)],
            Matrix::from_vec(3, 1, vec![1.0f32, 2.0, 3.0]),
        );
        let e1 = (
            vec![(0, 0, 0), (0, 1, 0), (0, 2, 0), (0, 3, 0), (0, 4, 0)],
            Matrix::from_vec(5, 1, vec![4.0, 5.0, 6.0, 7.0, 8.0]),
        );
        let t = batch(&[e0, e1]).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t.batch_size(), 2);
        assert_eq!(t.coords()[0].b, 0);
        assert_eq!(t.coords()[3].b, 1);
        assert_eq!(t.event_ranges(), vec![0..3, 3..8]);
    }

    #[test]
    fn batch_single_event_is_identity_with_b0() {
        let cells = vec![(-1, 2, 3), (0, 0, 0)];
        let t = batch(&[(
            {
                let mut c = cells.clone();
                c.sort_unstable();
                c
            },
            Matrix::from_vec(2, 2, vec![1.0f64, 2.0, 3.0, 4.0]),
        )])
        .unwrap();
        assert!(t.coords().iter().all(|c| c.b == 0));
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn batch_rejects_width_mismatch() {
        let e0 = (vec![(0, 0, 0)], Matrix::<f32>::zeros(1, 2));
        let e1 = (vec![(0, 0, 0)], Matrix::<f32>::zeros(1, 3));
        assert!(matches!(batch(&[e0, e1]), Err(Error::Shape { .. })));
    }

    #[test]
    fn batch_no_padding_for_uneven_events() {
        let small = (vec![(0, 0, 0)], Matrix::<f32>::zeros(1, 1));
        let cells: Vec<_> = (0..1000).map(|i| (i, 0, 0)).collect();
        let big = (cells, Matrix::<f32>::zeros(1000, 1));
        let t = batch(&[small, big]).unwrap();
        assert_eq!(t.len(), 1001);
    }
}
