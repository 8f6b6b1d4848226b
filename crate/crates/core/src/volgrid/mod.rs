//! Labeled 3D volumes with voxel geometry.
//!
//! A [`LabelVolume`] is a dense grid of non-negative integer labels stored in
//! x-fastest linear order; label 0 is background. Geometry carries both unit
//! systems used downstream: voxel index space for distances and millimetres
//! for volumes. Orientation fields from NIfTI headers are carried through
//! verbatim but never interpreted — all comparisons assume inputs share a
//! voxel grid.

mod nifti;

pub use nifti::{read_volume, write_volume, write_volume_with, Endianness, NiftiDatatype, Orientation};

use thiserror::Error;

/// Errors from volume construction and I/O.
#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("label buffer has {got} values but geometry holds {want} voxels")]
    LengthMismatch { got: usize, want: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("header/image pair files (magic \"ni1\") are not supported; use single-file volumes")]
    HeaderPairUnsupported,
    #[error("voxel {index} holds {value} which is not within 1e-3 of a non-negative integer")]
    NonIntegerLabel { index: usize, value: f64 },
    #[error("voxel {index} holds negative value {value}")]
    NegativeLabel { index: usize, value: i64 },
    #[error("label {label} does not fit datatype {datatype:?}")]
    LabelOutOfRange { label: u32, datatype: NiftiDatatype },
    #[error("truncated image data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("coordinate {coord:?} outside volume dims {dims:?}")]
    OutOfBounds { coord: [u32; 3], dims: [usize; 3] },
    #[error("duplicate coordinate {0:?}")]
    DuplicateCoordinate([u32; 3]),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Grid shape and physical voxel spacing.
///
/// Spacing is stored at `f32` precision to match the on-disk pixdim field, so
/// write→read round-trips are exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeGeometry {
    dims: [usize; 3],
    spacing: [f32; 3],
}

impl VolumeGeometry {
    pub fn new(dims: [usize; 3], spacing: [f32; 3]) -> Result<Self, VolumeError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidGeometry(format!(
                "all dims must be >= 1, got {dims:?}"
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(VolumeError::InvalidGeometry(format!(
                "all spacings must be positive and finite, got {spacing:?}"
            )));
        }
        let count = dims[0]
            .checked_mul(dims[1])
            .and_then(|p| p.checked_mul(dims[2]));
        match count {
            Some(n) if n <= isize::MAX as usize / 4 => {}
            _ => {
                return Err(VolumeError::InvalidGeometry(format!(
                    "voxel count of {dims:?} exceeds the address space"
                )))
            }
        }
        Ok(Self { dims, spacing })
    }

    /// Unit geometry (1 mm isotropic), handy for index-space work.
    pub fn isotropic(dims: [usize; 3]) -> Result<Self, VolumeError> {
        Self::new(dims, [1.0, 1.0, 1.0])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Physical volume of a single voxel in mm³, computed in f64.
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing[0] as f64 * self.spacing[1] as f64 * self.spacing[2] as f64
    }

    /// Linear index of a coordinate, x fastest.
    #[inline]
    pub fn linear_index(&self, coord: [u32; 3]) -> usize {
        coord[0] as usize + self.dims[0] * (coord[1] as usize + self.dims[1] * coord[2] as usize)
    }

    #[inline]
    pub fn contains(&self, coord: [u32; 3]) -> bool {
        (coord[0] as usize) < self.dims[0]
            && (coord[1] as usize) < self.dims[1]
            && (coord[2] as usize) < self.dims[2]
    }

    /// Coordinate of a linear index (inverse of [`Self::linear_index`]).
    #[inline]
    pub fn coord_of(&self, index: usize) -> [u32; 3] {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        let y = rest % self.dims[1];
        let z = rest / self.dims[1];
        [x as u32, y as u32, z as u32]
    }
}

/// Dense labeled volume. Immutable after construction; safe to share across
/// workers.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    geometry: VolumeGeometry,
    labels: Vec<u32>,
    orientation: Option<Orientation>,
}

impl LabelVolume {
    pub fn new(geometry: VolumeGeometry, labels: Vec<u32>) -> Result<Self, VolumeError> {
        if labels.len() != geometry.voxel_count() {
            return Err(VolumeError::LengthMismatch {
                got: labels.len(),
                want: geometry.voxel_count(),
            });
        }
        Ok(Self {
            geometry,
            labels,
            orientation: None,
        })
    }

    /// All-background volume.
    pub fn zeros(geometry: VolumeGeometry) -> Self {
        let n = geometry.voxel_count();
        Self {
            geometry,
            labels: vec![0; n],
            orientation: None,
        }
    }

    pub fn with_orientation(mut self, orientation: Option<Orientation>) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn orientation(&self) -> Option<&Orientation> {
        self.orientation.as_ref()
    }

    #[inline]
    pub fn label_at(&self, coord: [u32; 3]) -> u32 {
        self.labels[self.geometry.linear_index(coord)]
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Distinct nonzero labels in ascending order.
    pub fn present_labels(&self) -> Vec<u32> {
        let mut seen = std::collections::BTreeSet::new();
        for &v in &self.labels {
            if v != 0 {
                seen.insert(v);
            }
        }
        seen.into_iter().collect()
    }

    /// Replaces the label array, preserving geometry and orientation.
    pub(crate) fn map_labels(&self, f: impl Fn(u32) -> u32) -> Self {
        Self {
            geometry: self.geometry,
            labels: self.labels.iter().map(|&v| f(v)).collect(),
            orientation: self.orientation.clone(),
        }
    }
}

/// The voxels carrying one label, as sorted coordinates.
///
/// Coordinates are kept in ascending linear-index order (x fastest), which
/// downstream code relies on for deterministic summation.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSet {
    geometry: VolumeGeometry,
    coords: Vec<[u32; 3]>,
}

impl VoxelSet {
    /// Builds a set from arbitrary coordinates, validating bounds and
    /// rejecting duplicates. Coordinates are sorted into linear-index order.
    pub fn new(geometry: VolumeGeometry, mut coords: Vec<[u32; 3]>) -> Result<Self, VolumeError> {
        for &c in &coords {
            if !geometry.contains(c) {
                return Err(VolumeError::OutOfBounds {
                    coord: c,
                    dims: geometry.dims(),
                });
            }
        }
        coords.sort_unstable_by_key(|&c| geometry.linear_index(c));
        for w in coords.windows(2) {
            if w[0] == w[1] {
                return Err(VolumeError::DuplicateCoordinate(w[0]));
            }
        }
        Ok(Self { geometry, coords })
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    /// Coordinates in ascending linear-index order.
    pub fn coords(&self) -> &[[u32; 3]] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Extracts the voxel set of one label. The empty set is allowed.
pub fn voxel_set(v: &LabelVolume, label: u32) -> VoxelSet {
    assert!(label > 0, "label must be nonzero (0 is background)");
    let geometry = *v.geometry();
    let mut coords = Vec::new();
    for (i, &value) in v.labels().iter().enumerate() {
        if value == label {
            coords.push(geometry.coord_of(i));
        }
    }
    // scan order == ascending linear index, so no sort is needed
    VoxelSet { geometry, coords }
}

/// Physical volume of one label in mm³: voxel count × voxel volume.
pub fn label_volume_mm3(v: &LabelVolume, label: u32) -> f64 {
    assert!(label > 0, "label must be nonzero (0 is background)");
    let count = v.labels().iter().filter(|&&x| x == label).count();
    count as f64 * v.geometry().voxel_volume_mm3()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_volume() -> LabelVolume {
        // 4x4x4 with a 2x2x2 cube of label 3 at the origin
        let g = VolumeGeometry::isotropic([4, 4, 4]).unwrap();
        let mut labels = vec![0u32; g.voxel_count()];
        for z in 0..2 {
            for y in 0..2 {
                for x in 0..2 {
                    labels[g.linear_index([x, y, z])] = 3;
                }
            }
        }
        LabelVolume::new(g, labels).unwrap()
    }

    #[test]
    fn geometry_rejects_zero_dim_and_nonpositive_spacing() {
        assert!(VolumeGeometry::new([0, 4, 4], [1.0; 3]).is_err());
        assert!(VolumeGeometry::new([4, 4, 4], [0.0, 1.0, 1.0]).is_err());
        assert!(VolumeGeometry::new([4, 4, 4], [-1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn linear_index_is_x_fastest() {
        let g = VolumeGeometry::isotropic([3, 4, 5]).unwrap();
        assert_eq!(g.linear_index([1, 0, 0]), 1);
        assert_eq!(g.linear_index([0, 1, 0]), 3);
        assert_eq!(g.linear_index([0, 0, 1]), 12);
        for i in 0..g.voxel_count() {
            assert_eq!(g.linear_index(g.coord_of(i)), i);
        }
    }

    #[test]
    fn voxel_set_of_absent_label_is_empty() {
        let v = cube_volume();
        assert!(voxel_set(&v, 5).is_empty());
    }

    #[test]
    fn voxel_set_of_cube_has_eight_coords() {
        let v = cube_volume();
        let s = voxel_set(&v, 3);
        assert_eq!(s.len(), 8);
        // sorted ascending by linear index
        let idx: Vec<usize> = s
            .coords()
            .iter()
            .map(|&c| v.geometry().linear_index(c))
            .collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn voxel_set_unions_disjoint_blobs() {
        let g = VolumeGeometry::isotropic([8, 4, 4]).unwrap();
        let mut labels = vec![0u32; g.voxel_count()];
        labels[g.linear_index([0, 0, 0])] = 2;
        labels[g.linear_index([6, 2, 2])] = 2;
        let v = LabelVolume::new(g, labels).unwrap();
        assert_eq!(voxel_set(&v, 2).len(), 2);
    }

    #[test]
    fn volume_mm3_counts_times_voxel_volume() {
        let g = VolumeGeometry::new([10, 1, 1], [1.0, 1.0, 1.0]).unwrap();
        let v = LabelVolume::new(g, vec![7; 10]).unwrap();
        assert_eq!(label_volume_mm3(&v, 7), 10.0);

        let g = VolumeGeometry::new([10, 1, 1], [0.7, 0.7, 0.7]).unwrap();
        let v = LabelVolume::new(g, vec![7; 10]).unwrap();
        let expect = 10.0 * 0.7f32 as f64 * 0.7f32 as f64 * 0.7f32 as f64;
        assert!((label_volume_mm3(&v, 7) - expect).abs() < 1e-12);
        assert!((label_volume_mm3(&v, 7) - 3.43).abs() < 1e-6);
    }

    #[test]
    fn empty_label_has_zero_volume() {
        let v = cube_volume();
        assert_eq!(label_volume_mm3(&v, 9), 0.0);
    }

    #[test]
    fn voxel_set_rejects_out_of_bounds_and_duplicates() {
        let g = VolumeGeometry::isotropic([2, 2, 2]).unwrap();
        assert!(matches!(
            VoxelSet::new(g, vec![[2, 0, 0]]),
            Err(VolumeError::OutOfBounds { .. })
        ));
        assert!(matches!(
            VoxelSet::new(g, vec![[1, 0, 0], [1, 0, 0]]),
            Err(VolumeError::DuplicateCoordinate(_))
        ));
    }
}
