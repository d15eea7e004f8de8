//! On-disk dataset layout:
//!
//! ```text
//! <root>/<year>/<fire_id>/gt.npy
//!                         member_<k>.npy      k = 0..n-1
//!                         features.npy        optional, (C, H, W) float32
//!                         student_unc.npy     optional
//! ```
//!
//! Years are visited in ascending order and fires in lexicographic order, so
//! the event list is stable across runs and platforms.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::npy;
use crate::raster::{FireEvent, GeoConfig};

pub const GT_FILE: &str = "gt.npy";
pub const FEATURES_FILE: &str = "features.npy";
pub const STUDENT_UNC_FILE: &str = "student_unc.npy";

pub fn member_file(k: usize) -> String {
    format!("member_{k}.npy")
}

/// Directory of one fire inside a dataset root.
pub fn fire_dir(root: &Path, year: i32, id: &str) -> PathBuf {
    root.join(year.to_string()).join(id)
}

fn layout_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Layout {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::Io(e).in_file(dir))? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            let name = entry
                .file_name()
                .into_string()
                .map_err(|_| layout_err(&entry.path(), "directory name is not valid UTF-8"))?;
            out.push((name, entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

/// `(year, fire_id, path)` for every fire directory under `root`.
pub fn discover(root: &Path) -> Result<Vec<(i32, String, PathBuf)>> {
    if !root.is_dir() {
        return Err(layout_err(root, "dataset root is not a directory"));
    }
    let mut years = Vec::new();
    for (name, path) in sorted_subdirs(root)? {
        let year: i32 = name
            .parse()
            .map_err(|_| layout_err(&path, "year directory name is not an integer"))?;
        years.push((year, path));
    }
    years.sort_by_key(|(y, _)| *y);

    let mut fires = Vec::new();
    for (year, path) in years {
        for (id, fire_path) in sorted_subdirs(&path)? {
            fires.push((year, id, fire_path));
        }
    }
    if fires.is_empty() {
        return Err(layout_err(root, "no fire directories found"));
    }
    Ok(fires)
}

/// Loads one fire directory and applies the center crop.
pub fn load_fire(dir: &Path, year: i32, id: &str, geo: &GeoConfig) -> Result<FireEvent> {
    let gt_path = dir.join(GT_FILE);
    if !gt_path.is_file() {
        return Err(layout_err(dir, "missing gt.npy"));
    }
    let gt = npy::load_mask(&gt_path)?;

    let mut members = Vec::new();
    loop {
        let p = dir.join(member_file(members.len()));
        if !p.is_file() {
            break;
        }
        members.push(npy::load_probability_map(&p)?);
    }
    if members.is_empty() {
        return Err(layout_err(dir, "no member_0.npy"));
    }
    // a gap in the numbering would silently drop members
    let stray = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with("member_") && n.ends_with(".npy"))
        .count();
    if stray != members.len() {
        return Err(layout_err(dir, "member files are not numbered contiguously from 0"));
    }

    let features_path = dir.join(FEATURES_FILE);
    let features = features_path
        .is_file()
        .then(|| npy::load_features(&features_path))
        .transpose()?;
    let unc_path = dir.join(STUDENT_UNC_FILE);
    let student_uncertainty = unc_path
        .is_file()
        .then(|| npy::load_uncertainty_map(&unc_path))
        .transpose()?;

    let event = FireEvent {
        id: id.to_string(),
        year,
        gt,
        members,
        student_uncertainty,
        features,
    };
    event.validate().map_err(|e| e.in_file(dir))?;
    event.center_crop(geo.crop_size).map_err(|e| e.in_file(dir))
}

/// Loads every fire under `root`. Files are read in parallel; the result is
/// ordered by (year, fire id).
pub fn load_dataset(root: &Path, geo: &GeoConfig) -> Result<Vec<FireEvent>> {
    geo.validate()?;
    let fires = discover(root)?;
    let events = fires
        .par_iter()
        .map(|(year, id, path)| load_fire(path, *year, id, geo))
        .collect::<Result<Vec<_>>>()?;
    let n = events[0].members.len();
    if let Some(e) = events.iter().find(|e| e.members.len() != n) {
        return Err(layout_err(
            &fire_dir(root, e.year, &e.id),
            format!("has {} members, expected {n}", e.members.len()),
        ));
    }
    Ok(events)
}

/// Writes one event in the dataset layout (no cropping).
pub fn write_fire(root: &Path, event: &FireEvent) -> Result<()> {
    let dir = fire_dir(root, event.year, &event.id);
    fs::create_dir_all(&dir).map_err(|e| Error::Io(e).in_file(&dir))?;
    npy::save_grid(&dir.join(GT_FILE), event.gt.grid())?;
    for (k, m) in event.members.iter().enumerate() {
        npy::save_grid(&dir.join(member_file(k)), m.grid())?;
    }
    if let Some(f) = &event.features {
        npy::save_features(&dir.join(FEATURES_FILE), f)?;
    }
    if let Some(u) = &event.student_uncertainty {
        npy::save_grid(&dir.join(STUDENT_UNC_FILE), u.grid())?;
    }
    Ok(())
}
