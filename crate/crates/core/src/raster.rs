//! Grid types shared by every stage of the pipeline.
//!
//! All rasters are row-major. Probability and uncertainty maps hold `f32`
//! values (their on-disk dtype); metric code widens to `f64` on read.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 2-D grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T> Grid<T> {
    pub fn new(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::InvalidGrid(format!(
                "{} values do not fill a {height}x{width} grid",
                values.len()
            )));
        }
        Ok(Grid {
            height,
            width,
            values,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Grid::new(height, width, values)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.values[row * self.width + col] = value;
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_shape<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.height, self.width],
                found: vec![other.height, other.width],
            });
        }
        Ok(())
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Grid::new(height, width, vec![value; height * width])
    }

    /// Centered `crop_size` square window.
    ///
    /// The offset on each axis is `floor((dim - crop) / 2)`, so an odd
    /// remainder drops the extra pixel from the bottom/right.
    pub fn center_crop(&self, crop_size: usize) -> Result<Self> {
        if crop_size == 0 {
            return Err(Error::InvalidArgument("crop size must be at least 1".into()));
        }
        if crop_size > self.height {
            return Err(Error::CropTooLarge {
                axis: "height",
                crop: crop_size,
                dim: self.height,
            });
        }
        if crop_size > self.width {
            return Err(Error::CropTooLarge {
                axis: "width",
                crop: crop_size,
                dim: self.width,
            });
        }
        let top = (self.height - crop_size) / 2;
        let left = (self.width - crop_size) / 2;
        let mut values = Vec::with_capacity(crop_size * crop_size);
        for r in top..top + crop_size {
            let start = r * self.width + left;
            values.extend_from_slice(&self.values[start..start + crop_size]);
        }
        Grid::new(crop_size, crop_size, values)
    }
}

fn check_finite_unit(values: &[f32], what: &str) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Validation(format!("{what}: non-finite value at index {i}")));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!(
                "{what}: value {v} at index {i} is outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// Per-pixel fire probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap(Grid<f32>);

impl ProbabilityMap {
    pub fn new(grid: Grid<f32>) -> Result<Self> {
        check_finite_unit(grid.values(), "probability map")?;
        Ok(ProbabilityMap(grid))
    }

    pub fn from_vec(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        ProbabilityMap::new(Grid::new(height, width, values)?)
    }

    pub fn grid(&self) -> &Grid<f32> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f32> {
        self.0
    }

    pub fn center_crop(&self, crop_size: usize) -> Result<Self> {
        Ok(ProbabilityMap(self.0.center_crop(crop_size)?))
    }

    /// Predicted-fire mask: `p >= threshold`.
    pub fn threshold(&self, threshold: f64) -> BinaryMask {
        BinaryMask(self.0.map(|&p| u8::from(f64::from(p) >= threshold)))
    }
}

impl Deref for ProbabilityMap {
    type Target = Grid<f32>;

    fn deref(&self) -> &Grid<f32> {
        &self.0
    }
}

/// Grid of exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask(Grid<u8>);

impl BinaryMask {
    pub fn new(grid: Grid<u8>) -> Result<Self> {
        if let Some((i, v)) = grid.values().iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::Validation(format!(
                "binary mask: value {v} at index {i} is not 0 or 1"
            )));
        }
        Ok(BinaryMask(grid))
    }

    pub fn from_vec(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        BinaryMask::new(Grid::new(height, width, values)?)
    }

    pub fn from_bools(height: usize, width: usize, values: impl IntoIterator<Item = bool>) -> Result<Self> {
        let values = values.into_iter().map(u8::from).collect();
        Ok(BinaryMask(Grid::new(height, width, values)?))
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Ok(BinaryMask(Grid::filled(height, width, 0)?))
    }

    pub fn ones(height: usize, width: usize) -> Result<Self> {
        Ok(BinaryMask(Grid::filled(height, width, 1)?))
    }

    pub fn grid(&self) -> &Grid<u8> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<u8> {
        self.0
    }

    #[inline]
    pub fn is_set(&self, index: usize) -> bool {
        self.0.values()[index] != 0
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> bool {
        *self.0.get(row, col) != 0
    }

    pub fn count(&self) -> usize {
        self.0.values().iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.0.values().iter().all(|&v| v == 0)
    }

    /// Indices of set pixels, row-major.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| i)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.shape() == other.shape()
            && self
                .0
                .values()
                .iter()
                .zip(other.0.values())
                .all(|(&a, &b)| a <= b)
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask(self.0.map(|&v| 1 - v))
    }

    pub fn center_crop(&self, crop_size: usize) -> Result<Self> {
        Ok(BinaryMask(self.0.center_crop(crop_size)?))
    }

    pub fn to_probabilities(&self) -> ProbabilityMap {
        ProbabilityMap(self.0.map(|&v| f32::from(v)))
    }
}

impl Deref for BinaryMask {
    type Target = Grid<u8>;

    fn deref(&self) -> &Grid<u8> {
        &self.0
    }
}

/// Nonnegative per-pixel uncertainty scores.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap(Grid<f32>);

impl UncertaintyMap {
    pub fn new(grid: Grid<f32>) -> Result<Self> {
        for (i, &v) in grid.values().iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "uncertainty map: value {v} at index {i} is not a finite nonnegative number"
                )));
            }
        }
        Ok(UncertaintyMap(grid))
    }

    pub fn from_vec(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        UncertaintyMap::new(Grid::new(height, width, values)?)
    }

    /// Like [`UncertaintyMap::new`] but additionally requires values ≤ 1.
    pub fn normalized(grid: Grid<f32>) -> Result<Self> {
        check_finite_unit(grid.values(), "normalized uncertainty map")?;
        Ok(UncertaintyMap(grid))
    }

    pub fn grid(&self) -> &Grid<f32> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f32> {
        self.0
    }

    pub fn center_crop(&self, crop_size: usize) -> Result<Self> {
        Ok(UncertaintyMap(self.0.center_crop(crop_size)?))
    }
}

impl Deref for UncertaintyMap {
    type Target = Grid<f32>;

    fn deref(&self) -> &Grid<f32> {
        &self.0
    }
}

impl From<BinaryMask> for UncertaintyMap {
    fn from(mask: BinaryMask) -> Self {
        UncertaintyMap(mask.0.map(|&v| f32::from(v)))
    }
}

/// Channel-major `C x H x W` feature stack.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl FeatureStack {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidGrid(format!(
                "feature stack dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if values.len() != channels * height * width {
            return Err(Error::InvalidGrid(format!(
                "{} values do not fill a {channels}x{height}x{width} stack",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("feature stack: non-finite value at index {i}")));
        }
        Ok(FeatureStack {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.pixels();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn center_crop(&self, crop_size: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(self.channels * crop_size * crop_size);
        for c in 0..self.channels {
            let plane = Grid::new(self.height, self.width, self.channel(c).to_vec())?;
            values.extend(plane.center_crop(crop_size)?.into_values());
        }
        FeatureStack::new(self.channels, crop_size, crop_size, values)
    }
}

/// Ground sampling distance and evaluation crop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoConfig {
    pub meters_per_pixel: f64,
    pub crop_size: usize,
}

impl Default for GeoConfig {
    fn default() -> Self {
        GeoConfig {
            meters_per_pixel: 375.0,
            crop_size: 128,
        }
    }
}

impl GeoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.meters_per_pixel.is_finite() && self.meters_per_pixel > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "meters_per_pixel must be positive, got {}",
                self.meters_per_pixel
            )));
        }
        if self.crop_size == 0 {
            return Err(Error::InvalidArgument("crop_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One evaluation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FireEvent {
    pub id: String,
    pub year: i32,
    pub gt: BinaryMask,
    /// Ordered by member index.
    pub members: Vec<ProbabilityMap>,
    pub student_uncertainty: Option<UncertaintyMap>,
    pub features: Option<FeatureStack>,
}

impl FireEvent {
    pub fn shape(&self) -> (usize, usize) {
        self.gt.shape()
    }

    /// Checks that every raster shares the ground-truth shape.
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Validation(format!("fire {}: no ensemble members", self.id)));
        }
        let shape = self.shape();
        let mismatch = |found: (usize, usize)| Error::ShapeMismatch {
            expected: vec![shape.0, shape.1],
            found: vec![found.0, found.1],
        };
        for m in &self.members {
            if m.shape() != shape {
                return Err(mismatch(m.shape()));
            }
        }
        if let Some(u) = &self.student_uncertainty {
            if u.shape() != shape {
                return Err(mismatch(u.shape()));
            }
        }
        if let Some(f) = &self.features {
            if f.shape() != shape {
                return Err(mismatch(f.shape()));
            }
        }
        Ok(())
    }

    pub fn center_crop(&self, crop_size: usize) -> Result<Self> {
        Ok(FireEvent {
            id: self.id.clone(),
            year: self.year,
            gt: self.gt.center_crop(crop_size)?,
            members: self
                .members
                .iter()
                .map(|m| m.center_crop(crop_size))
                .collect::<Result<_>>()?,
            student_uncertainty: self
                .student_uncertainty
                .as_ref()
                .map(|u| u.center_crop(crop_size))
                .transpose()?,
            features: self
                .features
                .as_ref()
                .map(|f| f.center_crop(crop_size))
                .transpose()?,
        })
    }
}
