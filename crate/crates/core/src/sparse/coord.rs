//! Voxel coordinates and the packed-key open-addressing coordinate map.

use crate::error::{Error, Result};

/// Largest absolute lattice coordinate that fits the 16-bit packed encoding.
pub const MAX_LATTICE_COORD: i32 = 32767;

/// One occupied lattice site: batch index plus signed spatial indices.
///
/// Spatial components are expressed in lattice units and are always integer
/// multiples of the owning tensor's stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelCoord {
    pub b: u32,
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl VoxelCoord {
    pub fn new(b: u32, i: i32, j: i32, k: i32) -> Self {
        VoxelCoord { b, i, j, k }
    }

    /// Spatial translation by `(di, dj, dk)`; the batch index is untouched.
    pub fn offset(self, di: i32, dj: i32, dk: i32) -> Self {
        VoxelCoord {
            b: self.b,
            i: self.i + di,
            j: self.j + dj,
            k: self.k + dk,
        }
    }

    pub fn pack(self) -> Result<u64> {
        pack_coord(self.b, self.i, self.j, self.k)
    }
}

fn enc16(x: i32) -> Result<u64> {
    if !(-MAX_LATTICE_COORD..=MAX_LATTICE_COORD).contains(&x) {
        return Err(Error::Range { value: x as i64 });
    }
    Ok(((x + 32768) as u16) as u64)
}

/// Packs `(b, i, j, k)` into a 64-bit key: 16 bits per component, spatial
/// components offset-encoded. Fixed-width keys keep hashing deterministic.
pub fn pack_coord(b: u32, i: i32, j: i32, k: i32) -> Result<u64> {
    // b = 65535 with all-max spatial components would collide with the
    // empty-slot sentinel, so the batch index stops one short.
    if b >= 65535 {
        return Err(Error::Range { value: b as i64 });
    }
    Ok(((b as u64) << 48) | (enc16(i)? << 32) | (enc16(j)? << 16) | enc16(k)?)
}

const EMPTY: u64 = u64::MAX;

fn mix64(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^= x >> 31;
    x
}

/// Open-addressing hash map from packed coordinate keys to row indices.
///
/// Linear probing over a power-of-two table. Immutable after construction.
#[derive(Debug, Clone)]
pub struct CoordMap {
    keys: Vec<u64>,
    values: Vec<u32>,
    mask: usize,
}

impl CoordMap {
    /// Builds a map from unique coordinates; value `r` is the row index of
    /// `coords[r]`.
    pub fn build(coords: &[VoxelCoord]) -> Result<CoordMap> {
        let cap = (coords.len() * 2).next_power_of_two().max(8);
        let mut map = CoordMap {
            keys: vec![EMPTY; cap],
            values: vec![0; cap],
            mask: cap - 1,
        };
        for (row, c) in coords.iter().enumerate() {
            let key = c.pack()?;
            let mut slot = (mix64(key) as usize) & map.mask;
            loop {
                if map.keys[slot] == EMPTY {
                    map.keys[slot] = key;
                    map.values[slot] = row as u32;
                    break;
                }
                debug_assert_ne!(map.keys[slot], key, "duplicate coordinate");
                slot = (slot + 1) & map.mask;
            }
        }
        Ok(map)
    }

    pub fn get(&self, coord: VoxelCoord) -> Option<u32> {
        let key = coord.pack().ok()?;
        let mut slot = (mix64(key) as usize) & self.mask;
        loop {
            let k = self.keys[slot];
            if k == key {
                return Some(self.values[slot]);
            }
            if k == EMPTY {
                return None;
            }
            slot = (slot + 1) & self.mask;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_rejects_out_of_range() {
        assert!(pack_coord(0, 32768, 0, 0).is_err());
        assert!(pack_coord(0, -32768, 0, 0).is_err());
        assert!(pack_coord(0, 32767, -32767, 5).is_ok());
    }

    #[test]
    fn map_lookup() {
        let coords = vec![
            VoxelCoord::new(0, 0, 0, 0),
            VoxelCoord::new(0, -1, 4, 2),
            VoxelCoord::new(1, 7, 7, 7),
        ];
        let map = CoordMap::build(&coords).unwrap();
        for (r, c) in coords.iter().enumerate() {
            assert_eq!(map.get(*c), Some(r as u32));
        }
        assert_eq!(map.get(VoxelCoord::new(0, 1, 1, 1)), None);
        assert_eq!(map.get(VoxelCoord::new(2, 0, 0, 0)), None);
    }

    #[test]
    fn map_handles_many_keys() {
        let mut coords = Vec::new();
        for i in -20..20 {
            for j in -5..5 {
                coords.push(VoxelCoord::new(0, i, j, i ^ j));
            }
        }
        let map = CoordMap::build(&coords).unwrap();
        for (r, c) in coords.iter().enumerate() {
            assert_eq!(map.get(*c), Some(r as u32));
        }
    }
}
