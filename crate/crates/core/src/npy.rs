//! Reading and writing the numpy npy format.
//!
//! Only what the dataset layout needs is supported: little-endian `<f4` and
//! `|u1` (plus `|b1` on read) arrays in C order, 2-D or 3-D. Headers are
//! written as version 1.0; versions 2.0 and 3.0 are accepted on read.
//!
//! See <https://numpy.org/neps/nep-0001-npy-format.html>.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, FeatureStack, Grid, ProbabilityMap, UncertaintyMap};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    U8,
    Bool,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::U8 => "|u1",
            Dtype::Bool => "|b1",
        }
    }

    fn parse(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(Dtype::F32),
            "|u1" | "<u1" | ">u1" | "u1" => Ok(Dtype::U8),
            "|b1" => Ok(Dtype::Bool),
            other => Err(Error::NpyDtype(other.to_string())),
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 | Dtype::Bool => 1,
        }
    }
}

/// Decoded payload of an npy file.
#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn dtype_name(&self) -> &'static str {
        match self.data {
            NpyData::F32(_) => "float32",
            NpyData::U8(_) => "uint8",
        }
    }
}

/// Element types that can be written.
pub trait NpyElement: Copy {
    const DTYPE: Dtype;
    fn write_le(self, out: &mut Vec<u8>);
}

impl NpyElement for f32 {
    const DTYPE: Dtype = Dtype::F32;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl NpyElement for u8 {
    const DTYPE: Dtype = Dtype::U8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }
}

struct Header {
    dtype: Dtype,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn header_err(msg: impl Into<String>) -> Error {
    Error::NpyHeader(msg.into())
}

/// Extracts the raw text following `'key':` in the header dict.
fn dict_value<'a>(dict: &'a str, key: &str) -> Result<&'a str> {
    let pattern_single = format!("'{key}'");
    let pattern_double = format!("\"{key}\"");
    let start = dict
        .find(&pattern_single)
        .map(|i| i + pattern_single.len())
        .or_else(|| dict.find(&pattern_double).map(|i| i + pattern_double.len()))
        .ok_or_else(|| header_err(format!("missing key {key:?}")))?;
    let rest = dict[start..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| header_err(format!("expected ':' after {key:?}")))?;
    Ok(rest.trim_start())
}

fn parse_header_dict(dict: &str) -> Result<Header> {
    let dict = dict.trim();
    if !(dict.starts_with('{') && dict.ends_with('}')) {
        return Err(header_err("header is not a dict literal"));
    }

    let descr_raw = dict_value(dict, "descr")?;
    let quote = descr_raw
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| header_err("descr is not a string"))?;
    let descr_end = descr_raw[1..]
        .find(quote)
        .ok_or_else(|| header_err("unterminated descr string"))?;
    let dtype = Dtype::parse(&descr_raw[1..1 + descr_end])?;

    let fortran_raw = dict_value(dict, "fortran_order")?;
    let fortran_order = if fortran_raw.starts_with("False") {
        false
    } else if fortran_raw.starts_with("True") {
        true
    } else {
        return Err(header_err("fortran_order is not a boolean"));
    };

    let shape_raw = dict_value(dict, "shape")?;
    let shape_raw = shape_raw
        .strip_prefix('(')
        .ok_or_else(|| header_err("shape is not a tuple"))?;
    let close = shape_raw
        .find(')')
        .ok_or_else(|| header_err("unterminated shape tuple"))?;
    let shape = shape_raw[..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| header_err(format!("bad shape entry {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Header {
        dtype,
        fortran_order,
        shape,
    })
}

fn read_header<R: Read>(reader: &mut R) -> Result<Header> {
    let mut magic = [0u8; 6];
    reader
        .read_exact(&mut magic)
        .map_err(|_| header_err("file too short for magic string"))?;
    if &magic != MAGIC {
        return Err(header_err("bad magic string"));
    }
    let mut version = [0u8; 2];
    reader
        .read_exact(&mut version)
        .map_err(|_| header_err("missing version"))?;
    let header_len = match version[0] {
        1 => {
            let mut b = [0u8; 2];
            reader.read_exact(&mut b).map_err(|_| header_err("missing header length"))?;
            u16::from_le_bytes(b) as usize
        }
        2 | 3 => {
            let mut b = [0u8; 4];
            reader.read_exact(&mut b).map_err(|_| header_err("missing header length"))?;
            u32::from_le_bytes(b) as usize
        }
        v => return Err(header_err(format!("unsupported format version {v}.{}", version[1]))),
    };
    let mut dict = vec![0u8; header_len];
    reader
        .read_exact(&mut dict)
        .map_err(|_| header_err("header shorter than declared length"))?;
    let dict = String::from_utf8(dict).map_err(|_| header_err("header is not valid text"))?;
    parse_header_dict(&dict)
}

/// Reads an npy array from a reader positioned at the magic string.
pub fn read_npy<R: Read>(reader: &mut R) -> Result<NpyArray> {
    let header = read_header(reader)?;
    if header.fortran_order {
        return Err(header_err("Fortran-order arrays are not supported"));
    }
    let count: usize = header.shape.iter().product();
    let mut bytes = vec![0u8; count * header.dtype.size()];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| header_err(format!("payload shorter than {count} elements")))?;
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing)? != 0 {
        return Err(header_err("trailing bytes after payload"));
    }
    let data = match header.dtype {
        Dtype::F32 => NpyData::F32(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        Dtype::U8 => NpyData::U8(bytes),
        Dtype::Bool => {
            if bytes.iter().any(|&b| b > 1) {
                return Err(Error::Validation("bool array holds a byte other than 0/1".into()));
            }
            NpyData::U8(bytes)
        }
    };
    Ok(NpyArray {
        shape: header.shape,
        data,
    })
}

/// Writes a C-order little-endian version 1.0 npy array.
pub fn write_npy<W: Write, T: NpyElement>(writer: &mut W, shape: &[usize], data: &[T]) -> Result<()> {
    let count: usize = shape.iter().product();
    if count != data.len() {
        return Err(Error::InvalidGrid(format!(
            "{} values do not fill shape {shape:?}",
            data.len()
        )));
    }
    let shape_txt = match shape {
        [n] => format!("({n},)"),
        dims => format!(
            "({})",
            dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {shape_txt}, }}",
        T::DTYPE.descr()
    );
    // magic(6) + version(2) + len(2) + dict + '\n' must be a multiple of ALIGN
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');
    let header_len = u16::try_from(dict.len()).map_err(|_| header_err("header too long"))?;

    let mut buf = Vec::with_capacity(unpadded + pad + count * T::DTYPE.size());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&[1, 0]);
    buf.extend_from_slice(&header_len.to_le_bytes());
    buf.extend_from_slice(dict.as_bytes());
    for &v in data {
        v.write_le(&mut buf);
    }
    writer.write_all(&buf)?;
    Ok(())
}

pub fn read_npy_file(path: &Path) -> Result<NpyArray> {
    let file = File::open(path).map_err(|e| Error::Io(e).in_file(path))?;
    read_npy(&mut BufReader::new(file)).map_err(|e| e.in_file(path))
}

pub fn write_npy_file<T: NpyElement>(path: &Path, shape: &[usize], data: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(e).in_file(path))?;
    let mut w = BufWriter::new(file);
    write_npy(&mut w, shape, data).map_err(|e| e.in_file(path))?;
    w.flush().map_err(|e| Error::Io(e).in_file(path))
}

fn expect_dims(array: &NpyArray, dims: usize) -> Result<()> {
    if array.shape.len() != dims {
        return Err(Error::Dimensionality {
            expected: dims,
            found: array.shape.clone(),
        });
    }
    Ok(())
}

fn into_f32_grid(array: NpyArray) -> Result<Grid<f32>> {
    expect_dims(&array, 2)?;
    match array.data {
        NpyData::F32(v) => Grid::new(array.shape[0], array.shape[1], v),
        NpyData::U8(_) => Err(Error::NpyDtype(format!("{} (expected float32)", array.dtype_name()))),
    }
}

/// 2-D `float32` array as a probability map.
pub fn read_probability_map<R: Read>(reader: &mut R) -> Result<ProbabilityMap> {
    ProbabilityMap::new(into_f32_grid(read_npy(reader)?)?)
}

/// 2-D `float32` array as an uncertainty map.
pub fn read_uncertainty_map<R: Read>(reader: &mut R) -> Result<UncertaintyMap> {
    UncertaintyMap::new(into_f32_grid(read_npy(reader)?)?)
}

/// 2-D `uint8` (or `bool`) array as a binary mask.
pub fn read_mask<R: Read>(reader: &mut R) -> Result<BinaryMask> {
    let array = read_npy(reader)?;
    expect_dims(&array, 2)?;
    match array.data {
        NpyData::U8(v) => BinaryMask::new(Grid::new(array.shape[0], array.shape[1], v)?),
        NpyData::F32(_) => Err(Error::NpyDtype("float32 (expected uint8)".into())),
    }
}

/// 3-D `float32` `(C, H, W)` feature stack.
pub fn read_features<R: Read>(reader: &mut R) -> Result<FeatureStack> {
    let array = read_npy(reader)?;
    expect_dims(&array, 3)?;
    match array.data {
        NpyData::F32(v) => FeatureStack::new(array.shape[0], array.shape[1], array.shape[2], v),
        NpyData::U8(_) => Err(Error::NpyDtype("uint8 (expected float32)".into())),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).map_err(|e| Error::Io(e).in_file(path))?;
    Ok(BufReader::new(f))
}

pub fn load_probability_map(path: &Path) -> Result<ProbabilityMap> {
    read_probability_map(&mut open(path)?).map_err(|e| e.in_file(path))
}

pub fn load_uncertainty_map(path: &Path) -> Result<UncertaintyMap> {
    read_uncertainty_map(&mut open(path)?).map_err(|e| e.in_file(path))
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    read_mask(&mut open(path)?).map_err(|e| e.in_file(path))
}

pub fn load_features(path: &Path) -> Result<FeatureStack> {
    read_features(&mut open(path)?).map_err(|e| e.in_file(path))
}

pub fn save_grid<T: NpyElement>(path: &Path, grid: &Grid<T>) -> Result<()> {
    write_npy_file(path, &[grid.height(), grid.width()], grid.values())
}

pub fn save_features(path: &Path, features: &FeatureStack) -> Result<()> {
    write_npy_file(
        path,
        &[features.channels(), features.height(), features.width()],
        features.values(),
    )
}

/// In-memory encode, mostly for hashing and tests.
pub fn to_bytes<T: NpyElement>(shape: &[usize], data: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    write_npy(&mut out, shape, data).expect("shape checked by caller");
    out
}
