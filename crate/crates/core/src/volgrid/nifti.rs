//! NIfTI-1 single-file reader/writer for label volumes.
//!
//! Supported subset: 348-byte header, magic "n+1", dim[0] >= 3 with singleton
//! trailing dims, datatype codes 2/4/8/16/512, both endiannesses (detected via
//! sizeof_hdr). scl_slope/scl_inter are ignored: stored values are labels, not
//! intensities. Orientation fields (qform/sform and pixdim[0]) are preserved
//! verbatim as bit patterns and never interpreted. No compression, no NIfTI-2,
//! no .hdr/.img pairs.

use super::{LabelVolume, VolumeError, VolumeGeometry};
use byteorder::{BigEndian, ByteOrder, LittleEndian};
use std::fs;
use std::path::Path;

const HEADER_SIZE: usize = 348;
const DEFAULT_VOX_OFFSET: u64 = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

/// Tolerance for accepting float-valued labels: values further than this from
/// an integer are treated as corruption.
const FLOAT_LABEL_TOLERANCE: f64 = 1e-3;

/// On-disk element types supported for label data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiftiDatatype {
    /// code 2
    Uint8,
    /// code 4
    Int16,
    /// code 8
    Int32,
    /// code 16
    Float32,
    /// code 512
    Uint16,
}

impl NiftiDatatype {
    pub const ALL: [NiftiDatatype; 5] = [
        NiftiDatatype::Uint8,
        NiftiDatatype::Int16,
        NiftiDatatype::Int32,
        NiftiDatatype::Float32,
        NiftiDatatype::Uint16,
    ];

    pub fn code(self) -> i16 {
        match self {
            NiftiDatatype::Uint8 => 2,
            NiftiDatatype::Int16 => 4,
            NiftiDatatype::Int32 => 8,
            NiftiDatatype::Float32 => 16,
            NiftiDatatype::Uint16 => 512,
        }
    }

    pub fn from_code(code: i16) -> Option<Self> {
        match code {
            2 => Some(NiftiDatatype::Uint8),
            4 => Some(NiftiDatatype::Int16),
            8 => Some(NiftiDatatype::Int32),
            16 => Some(NiftiDatatype::Float32),
            512 => Some(NiftiDatatype::Uint16),
            _ => None,
        }
    }

    pub fn bytes_per_voxel(self) -> usize {
        match self {
            NiftiDatatype::Uint8 => 1,
            NiftiDatatype::Int16 | NiftiDatatype::Uint16 => 2,
            NiftiDatatype::Int32 | NiftiDatatype::Float32 => 4,
        }
    }

    /// Largest label the type can hold exactly. Float32 is capped at 2^24 so
    /// integer labels survive the representation.
    pub fn max_label(self) -> u32 {
        match self {
            NiftiDatatype::Uint8 => u8::MAX as u32,
            NiftiDatatype::Int16 => i16::MAX as u32,
            NiftiDatatype::Uint16 => u16::MAX as u32,
            NiftiDatatype::Int32 => i32::MAX as u32,
            NiftiDatatype::Float32 => 1 << 24,
        }
    }
}

/// Byte order of the on-disk file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

/// Affine orientation fields carried through verbatim.
///
/// The f32 fields are stored as raw bit patterns: this module never interprets
/// them, it only rewrites them byte-exactly (modulo byte order).
#[derive(Debug, Clone, PartialEq)]
pub struct Orientation {
    pub qform_code: i16,
    pub sform_code: i16,
    /// pixdim[0] (the qfac flag), as bits.
    pub qfac_bits: u32,
    /// quatern_b, quatern_c, quatern_d, qoffset_x, qoffset_y, qoffset_z.
    pub quatern_bits: [u32; 6],
    /// srow_x, srow_y, srow_z — three rows of four f32s.
    pub srow_bits: [u32; 12],
}

impl Default for Orientation {
    fn default() -> Self {
        Orientation {
            qform_code: 0,
            sform_code: 0,
            qfac_bits: 1.0f32.to_bits(),
            quatern_bits: [0; 6],
            srow_bits: [0; 12],
        }
    }
}

struct RawHeader {
    endian: Endianness,
    dims: [usize; 3],
    spacing: [f32; 3],
    datatype: NiftiDatatype,
    vox_offset: u64,
    orientation: Orientation,
}

fn parse_header(bytes: &[u8]) -> Result<RawHeader, VolumeError> {
    if bytes.len() < HEADER_SIZE {
        return Err(VolumeError::MalformedHeader(format!(
            "file holds {} bytes, need at least {HEADER_SIZE}",
            bytes.len()
        )));
    }
    let endian = match LittleEndian::read_i32(&bytes[0..4]) {
        348 => Endianness::Little,
        _ if BigEndian::read_i32(&bytes[0..4]) == 348 => Endianness::Big,
        other => {
            return Err(VolumeError::MalformedHeader(format!(
                "sizeof_hdr is {other}, expected 348 in either byte order"
            )))
        }
    };
    match endian {
        Endianness::Little => parse_header_with::<LittleEndian>(bytes, endian),
        Endianness::Big => parse_header_with::<BigEndian>(bytes, endian),
    }
}

fn parse_header_with<E: ByteOrder>(
    bytes: &[u8],
    endian: Endianness,
) -> Result<RawHeader, VolumeError> {
    let magic = &bytes[344..348];
    if magic == MAGIC_PAIR {
        return Err(VolumeError::HeaderPairUnsupported);
    }
    if magic != MAGIC_SINGLE {
        return Err(VolumeError::MalformedHeader(format!(
            "magic is {magic:?}, expected \"n+1\\0\""
        )));
    }

    let ndim = E::read_i16(&bytes[40..42]);
    if !(3..=7).contains(&ndim) {
        return Err(VolumeError::MalformedHeader(format!(
            "dim[0] is {ndim}, expected 3..=7"
        )));
    }
    let mut dim = [0i16; 7];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = E::read_i16(&bytes[42 + 2 * i..44 + 2 * i]);
    }
    for (i, &d) in dim.iter().enumerate().take(ndim as usize).skip(3) {
        if d != 1 {
            return Err(VolumeError::MalformedHeader(format!(
                "dim[{}] is {d}, trailing dims must be singleton",
                i + 1
            )));
        }
    }
    if dim[0] < 1 || dim[1] < 1 || dim[2] < 1 {
        return Err(VolumeError::MalformedHeader(format!(
            "spatial dims must be >= 1, got {:?}",
            &dim[..3]
        )));
    }
    let dims = [dim[0] as usize, dim[1] as usize, dim[2] as usize];

    let code = E::read_i16(&bytes[70..72]);
    let datatype =
        NiftiDatatype::from_code(code).ok_or(VolumeError::UnsupportedDatatype(code))?;
    let bitpix = E::read_i16(&bytes[72..74]);
    if bitpix as usize != datatype.bytes_per_voxel() * 8 {
        return Err(VolumeError::MalformedHeader(format!(
            "bitpix {bitpix} does not match datatype code {code}"
        )));
    }

    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = f32::from_bits(E::read_u32(&bytes[76 + 4 * i..80 + 4 * i]));
    }
    let spacing = [pixdim[1], pixdim[2], pixdim[3]];
    if spacing.iter().any(|&s| !s.is_finite() || s <= 0.0) {
        return Err(VolumeError::MalformedHeader(format!(
            "pixdim[1..3] must be positive, got {spacing:?}"
        )));
    }

    let vox_offset_f = f32::from_bits(E::read_u32(&bytes[108..112]));
    if !vox_offset_f.is_finite() || vox_offset_f < HEADER_SIZE as f32 || vox_offset_f.fract() != 0.0
    {
        return Err(VolumeError::MalformedHeader(format!(
            "vox_offset {vox_offset_f} is not an integer >= {HEADER_SIZE}"
        )));
    }

    let mut quatern_bits = [0u32; 6];
    for (i, q) in quatern_bits.iter_mut().enumerate() {
        *q = E::read_u32(&bytes[256 + 4 * i..260 + 4 * i]);
    }
    let mut srow_bits = [0u32; 12];
    for (i, s) in srow_bits.iter_mut().enumerate() {
        *s = E::read_u32(&bytes[280 + 4 * i..284 + 4 * i]);
    }
    let orientation = Orientation {
        qform_code: E::read_i16(&bytes[252..254]),
        sform_code: E::read_i16(&bytes[254..256]),
        qfac_bits: pixdim[0].to_bits(),
        quatern_bits,
        srow_bits,
    };

    Ok(RawHeader {
        endian,
        dims,
        spacing,
        datatype,
        vox_offset: vox_offset_f as u64,
        orientation,
    })
}

fn decode_labels<E: ByteOrder>(
    data: &[u8],
    datatype: NiftiDatatype,
    count: usize,
) -> Result<Vec<u32>, VolumeError> {
    let mut labels = Vec::with_capacity(count);
    match datatype {
        NiftiDatatype::Uint8 => {
            labels.extend(data[..count].iter().map(|&b| b as u32));
        }
        NiftiDatatype::Uint16 => {
            for i in 0..count {
                labels.push(E::read_u16(&data[2 * i..2 * i + 2]) as u32);
            }
        }
        NiftiDatatype::Int16 => {
            for i in 0..count {
                let v = E::read_i16(&data[2 * i..2 * i + 2]);
                if v < 0 {
                    return Err(VolumeError::NegativeLabel {
                        index: i,
                        value: v as i64,
                    });
                }
                labels.push(v as u32);
            }
        }
        NiftiDatatype::Int32 => {
            for i in 0..count {
                let v = E::read_i32(&data[4 * i..4 * i + 4]);
                if v < 0 {
                    return Err(VolumeError::NegativeLabel {
                        index: i,
                        value: v as i64,
                    });
                }
                labels.push(v as u32);
            }
        }
        NiftiDatatype::Float32 => {
            for i in 0..count {
                let v = f32::from_bits(E::read_u32(&data[4 * i..4 * i + 4])) as f64;
                let rounded = v.round();
                if !v.is_finite()
                    || (v - rounded).abs() > FLOAT_LABEL_TOLERANCE
                    || rounded < 0.0
                    || rounded > u32::MAX as f64
                {
                    if rounded < 0.0 && (v - rounded).abs() <= FLOAT_LABEL_TOLERANCE {
                        return Err(VolumeError::NegativeLabel {
                            index: i,
                            value: rounded as i64,
                        });
                    }
                    return Err(VolumeError::NonIntegerLabel { index: i, value: v });
                }
                labels.push(rounded as u32);
            }
        }
    }
    Ok(labels)
}

/// Reads a label volume from a NIfTI-1 single file.
pub fn read_volume(path: impl AsRef<Path>) -> Result<LabelVolume, VolumeError> {
    let bytes = fs::read(path)?;
    let hdr = parse_header(&bytes)?;
    let geometry = VolumeGeometry::new(hdr.dims, hdr.spacing)
        .map_err(|e| VolumeError::MalformedHeader(e.to_string()))?;
    let count = geometry.voxel_count();
    let need = count * hdr.datatype.bytes_per_voxel();
    let start = hdr.vox_offset as usize;
    if bytes.len() < start + need {
        return Err(VolumeError::TruncatedData {
            expected: start + need,
            found: bytes.len(),
        });
    }
    let data = &bytes[start..start + need];
    let labels = match hdr.endian {
        Endianness::Little => decode_labels::<LittleEndian>(data, hdr.datatype, count)?,
        Endianness::Big => decode_labels::<BigEndian>(data, hdr.datatype, count)?,
    };
    Ok(LabelVolume::new(geometry, labels)?.with_orientation(Some(hdr.orientation)))
}

/// Writes a volume as uint16 little-endian, the default on-disk form.
pub fn write_volume(v: &LabelVolume, path: impl AsRef<Path>) -> Result<(), VolumeError> {
    write_volume_with(v, path, NiftiDatatype::Uint16, Endianness::Little)
}

/// Writes a volume with an explicit datatype and byte order.
pub fn write_volume_with(
    v: &LabelVolume,
    path: impl AsRef<Path>,
    datatype: NiftiDatatype,
    endian: Endianness,
) -> Result<(), VolumeError> {
    let bytes = match endian {
        Endianness::Little => encode::<LittleEndian>(v, datatype)?,
        Endianness::Big => encode::<BigEndian>(v, datatype)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

fn encode<E: ByteOrder>(v: &LabelVolume, datatype: NiftiDatatype) -> Result<Vec<u8>, VolumeError> {
    let max = v.max_label();
    if max > datatype.max_label() {
        return Err(VolumeError::LabelOutOfRange {
            label: max,
            datatype,
        });
    }
    let dims = v.geometry().dims();
    for &d in &dims {
        if d > i16::MAX as usize {
            return Err(VolumeError::InvalidGeometry(format!(
                "dim {d} exceeds the i16 range of the header"
            )));
        }
    }

    let count = v.geometry().voxel_count();
    let mut out = vec![0u8; DEFAULT_VOX_OFFSET as usize + count * datatype.bytes_per_voxel()];

    E::write_i32(&mut out[0..4], 348);
    out[38] = b'r'; // "regular" flag, carried over from ANALYZE
    let dim: [i16; 8] = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        E::write_i16(&mut out[40 + 2 * i..42 + 2 * i], *d);
    }
    E::write_i16(&mut out[70..72], datatype.code());
    E::write_i16(&mut out[72..74], (datatype.bytes_per_voxel() * 8) as i16);

    let orientation = v.orientation().cloned().unwrap_or_default();
    let spacing = v.geometry().spacing();
    let pixdim_bits: [u32; 8] = [
        orientation.qfac_bits,
        spacing[0].to_bits(),
        spacing[1].to_bits(),
        spacing[2].to_bits(),
        1.0f32.to_bits(),
        1.0f32.to_bits(),
        1.0f32.to_bits(),
        1.0f32.to_bits(),
    ];
    for (i, p) in pixdim_bits.iter().enumerate() {
        E::write_u32(&mut out[76 + 4 * i..80 + 4 * i], *p);
    }
    E::write_u32(&mut out[108..112], (DEFAULT_VOX_OFFSET as f32).to_bits());
    E::write_u32(&mut out[112..116], 1.0f32.to_bits()); // scl_slope (no-op)
    E::write_u32(&mut out[116..120], 0.0f32.to_bits()); // scl_inter
    out[123] = 2; // xyzt_units: millimetres
    let descrip = b"label volume";
    out[148..148 + descrip.len()].copy_from_slice(descrip);
    E::write_i16(&mut out[252..254], orientation.qform_code);
    E::write_i16(&mut out[254..256], orientation.sform_code);
    for (i, q) in orientation.quatern_bits.iter().enumerate() {
        E::write_u32(&mut out[256 + 4 * i..260 + 4 * i], *q);
    }
    for (i, s) in orientation.srow_bits.iter().enumerate() {
        E::write_u32(&mut out[280 + 4 * i..284 + 4 * i], *s);
    }
    out[344..348].copy_from_slice(MAGIC_SINGLE);
    // bytes 348..352 stay zero: no header extensions

    let data = &mut out[DEFAULT_VOX_OFFSET as usize..];
    match datatype {
        NiftiDatatype::Uint8 => {
            for (i, &label) in v.labels().iter().enumerate() {
                data[i] = label as u8;
            }
        }
        NiftiDatatype::Uint16 => {
            for (i, &label) in v.labels().iter().enumerate() {
                E::write_u16(&mut data[2 * i..2 * i + 2], label as u16);
            }
        }
        NiftiDatatype::Int16 => {
            for (i, &label) in v.labels().iter().enumerate() {
                E::write_i16(&mut data[2 * i..2 * i + 2], label as i16);
            }
        }
        NiftiDatatype::Int32 => {
            for (i, &label) in v.labels().iter().enumerate() {
                E::write_i32(&mut data[4 * i..4 * i + 4], label as i32);
            }
        }
        NiftiDatatype::Float32 => {
            for (i, &label) in v.labels().iter().enumerate() {
                E::write_u32(&mut data[4 * i..4 * i + 4], (label as f32).to_bits());
            }
        }
    }
    Ok(out)
}
