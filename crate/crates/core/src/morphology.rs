//! Disk dilation, exact Euclidean distance transform and boundary extraction.
//!
//! Dilation is computed by thresholding the exact EDT of the mask, so a
//! single code path backs both region construction and surface distances.

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Grid};

/// Disk structuring element: all integer offsets within `radius_px`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskElement {
    radius_px: f64,
    offsets: Vec<(i64, i64)>,
}

impl DiskElement {
    pub fn new(radius_px: f64) -> Result<Self> {
        check_radius(radius_px)?;
        let reach = radius_px.floor() as i64;
        let mut offsets = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if within(((dy * dy + dx * dx) as u64) as f64, radius_px) {
                    offsets.push((dy, dx));
                }
            }
        }
        Ok(DiskElement { radius_px, offsets })
    }

    pub fn radius_px(&self) -> f64 {
        self.radius_px
    }

    pub fn offsets(&self) -> &[(i64, i64)] {
        &self.offsets
    }
}

fn check_radius(radius_px: f64) -> Result<()> {
    if !radius_px.is_finite() || radius_px < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "dilation radius must be a finite nonnegative number, got {radius_px}"
        )));
    }
    Ok(())
}

#[inline]
fn within(squared_distance: f64, radius_px: f64) -> bool {
    squared_distance.sqrt() <= radius_px
}

const INF: u64 = u64::MAX;

/// Lower envelope of parabolas `(q - p)^2 + f[p]` over the finite entries of
/// `f`, written into `out`. At least one entry must be finite.
fn envelope_1d(f: &[u64], out: &mut [u64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    let key = |p: usize| f[p] as f64 + (p * p) as f64;
    for (q, &fq) in f.iter().enumerate() {
        if fq == INF {
            continue;
        }
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
            continue;
        }
        loop {
            let p = *v.last().unwrap();
            let s = (key(q) - key(p)) / (2.0 * (q as f64 - p as f64));
            if s <= *z.last().unwrap() && v.len() > 1 {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
    }
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q.abs_diff(p) as u64;
        *slot = d * d + f[p];
    }
}

/// Exact squared Euclidean distance (in pixels²) from every pixel to the
/// nearest foreground pixel.
pub fn squared_distance_transform(mask: &BinaryMask) -> Result<Grid<u64>> {
    let (h, w) = mask.shape();
    if mask.is_empty_mask() {
        return Err(Error::EmptyForeground);
    }

    // column pass: 1-D distance along each column
    let mut cols = vec![INF; h * w];
    for c in 0..w {
        let mut last: Option<usize> = None;
        for r in 0..h {
            if mask.at(r, c) {
                last = Some(r);
            }
            if let Some(l) = last {
                let d = (r - l) as u64;
                cols[r * w + c] = d * d;
            }
        }
        let mut next: Option<usize> = None;
        for r in (0..h).rev() {
            if mask.at(r, c) {
                next = Some(r);
            }
            if let Some(n) = next {
                let d = (n - r) as u64;
                cols[r * w + c] = cols[r * w + c].min(d * d);
            }
        }
    }

    // row pass: every row has a finite entry because some column has foreground
    let mut out = vec![0u64; h * w];
    let (mut v, mut z) = (Vec::with_capacity(w), Vec::with_capacity(w));
    for r in 0..h {
        envelope_1d(&cols[r * w..(r + 1) * w], &mut out[r * w..(r + 1) * w], &mut v, &mut z);
    }
    Grid::new(h, w, out)
}

/// Exact Euclidean distance (pixels) to the nearest foreground pixel; zero on
/// the foreground itself.
pub fn euclidean_distance_transform(mask: &BinaryMask) -> Result<Grid<f64>> {
    Ok(squared_distance_transform(mask)?.map(|&d| (d as f64).sqrt()))
}

/// Mask of pixels whose precomputed squared distance is within `radius_px`.
pub fn threshold_distance(squared: &Grid<u64>, radius_px: f64) -> Result<BinaryMask> {
    check_radius(radius_px)?;
    let (h, w) = squared.shape();
    BinaryMask::from_bools(h, w, squared.values().iter().map(|&d| within(d as f64, radius_px)))
}

/// Dilation by a disk of radius `radius_px`: a pixel is set iff some
/// foreground pixel lies within Euclidean distance `radius_px`.
pub fn dilate(mask: &BinaryMask, radius_px: f64) -> Result<BinaryMask> {
    check_radius(radius_px)?;
    if mask.is_empty_mask() {
        return Ok(mask.clone());
    }
    threshold_distance(&squared_distance_transform(mask)?, radius_px)
}

/// Foreground pixels with at least one 4-neighbour that is background or
/// outside the image.
pub fn extract_boundary(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = mask.shape();
    let bg = |r: isize, c: isize| {
        r < 0 || c < 0 || r >= h as isize || c >= w as isize || !mask.at(r as usize, c as usize)
    };
    let values = (0..h * w).map(|i| {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        mask.is_set(i) && (bg(r - 1, c) || bg(r + 1, c) || bg(r, c - 1) || bg(r, c + 1))
    });
    BinaryMask::from_bools(h, w, values).expect("shape preserved")
}
