//! Model specifications: `ensemble:<dir>`, `student:<dir>:<head.json>` or
//! `student:<dir>`.
//!
//! `<dir>` is a dataset root. An ensemble fuses the member maps. A student
//! uses the middle-AP member as its probability map and takes uncertainty
//! from a trained head applied to `features.npy`, or from precomputed
//! `student_unc.npy` files when no head is given.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use fcer_core::dataset::load_dataset;
use fcer_core::distill::{apply_head, fuse_ensemble, HeadCheckpoint};
use fcer_core::fcer::ModelOutput;
use fcer_core::{FireEvent, GeoConfig, ProbabilityMap};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Ensemble { root: PathBuf },
    Student { root: PathBuf, head: Option<PathBuf> },
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("model spec '{s}' must start with 'ensemble:' or 'student:'"))?;
        if rest.is_empty() {
            return Err(format!("model spec '{s}' has no dataset directory"));
        }
        match kind {
            "ensemble" => Ok(ModelSpec::Ensemble { root: rest.into() }),
            "student" => match rest.split_once(':') {
                Some((root, head)) if !root.is_empty() && !head.is_empty() => Ok(ModelSpec::Student {
                    root: root.into(),
                    head: Some(head.into()),
                }),
                Some(_) => Err(format!("model spec '{s}' has an empty path")),
                None => Ok(ModelSpec::Student {
                    root: rest.into(),
                    head: None,
                }),
            },
            other => Err(format!("unknown model kind '{other}' (expected ensemble or student)")),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Ensemble { root } => write!(f, "ensemble:{}", root.display()),
            ModelSpec::Student { root, head: None } => write!(f, "student:{}", root.display()),
            ModelSpec::Student { root, head: Some(h) } => {
                write!(f, "student:{}:{}", root.display(), h.display())
            }
        }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl ModelSpec {
    pub fn root(&self) -> &Path {
        match self {
            ModelSpec::Ensemble { root } | ModelSpec::Student { root, .. } => root,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Ensemble { .. } => "ensemble",
            ModelSpec::Student { .. } => "student",
        }
    }

    /// Files this spec reads besides the dataset root.
    pub fn extra_inputs(&self) -> Vec<&Path> {
        match self {
            ModelSpec::Student { head: Some(h), .. } => vec![h.as_path()],
            _ => Vec::new(),
        }
    }

    pub fn load(&self, geo: &GeoConfig) -> Result<Vec<FireEvent>> {
        load_dataset(self.root(), geo).with_context(|| format!("loading dataset for {self}"))
    }

    /// Per-fire outputs for `events`; `references` are the middle-AP member
    /// maps used as the student's probability.
    pub fn outputs(&self, events: &[FireEvent], references: &[ProbabilityMap]) -> Result<Vec<ModelOutput>> {
        match self {
            ModelSpec::Ensemble { .. } => events
                .par_iter()
                .map(|e| {
                    let t = fuse_ensemble(&e.members).with_context(|| format!("fire {}", e.id))?;
                    Ok(ModelOutput {
                        prob: t.mean_prob,
                        unc: t.uncertainty,
                    })
                })
                .collect(),
            ModelSpec::Student { head: Some(path), .. } => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let head = HeadCheckpoint::from_json(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
                    .head()?;
                events
                    .par_iter()
                    .zip(references.par_iter())
                    .map(|(e, r)| {
                        let features = e
                            .features
                            .as_ref()
                            .ok_or_else(|| anyhow!("fire {}: no features.npy for the student head", e.id))?;
                        Ok(ModelOutput {
                            prob: r.clone(),
                            unc: apply_head(&head, features).with_context(|| format!("fire {}", e.id))?,
                        })
                    })
                    .collect()
            }
            ModelSpec::Student { head: None, .. } => events
                .iter()
                .zip(references)
                .map(|(e, r)| {
                    let unc = e
                        .student_uncertainty
                        .clone()
                        .ok_or_else(|| anyhow!("fire {}: no student_unc.npy", e.id))?;
                    Ok(ModelOutput { prob: r.clone(), unc })
                })
                .collect(),
        }
    }
}

/// Checks that two datasets hold the same fires with the same ground truth.
pub fn ensure_same_fires(a: &[FireEvent], b: &[FireEvent]) -> Result<()> {
    if a.len() != b.len() {
        bail!("datasets hold {} and {} fires", a.len(), b.len());
    }
    for (x, y) in a.iter().zip(b) {
        if (x.year, &x.id) != (y.year, &y.id) {
            bail!("fire mismatch: {}/{} vs {}/{}", x.year, x.id, y.year, y.id);
        }
        if x.gt != y.gt {
            bail!("fire {}/{}: ground truth differs between datasets", x.year, x.id);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        assert_eq!(
            "ensemble:/d".parse::<ModelSpec>().unwrap(),
            ModelSpec::Ensemble { root: "/d".into() }
        );
        assert_eq!(
            "student:/d:/h.json".parse::<ModelSpec>().unwrap(),
            ModelSpec::Student {
                root: "/d".into(),
                head: Some("/h.json".into())
            }
        );
        assert_eq!(
            "student:/d".parse::<ModelSpec>().unwrap(),
            ModelSpec::Student {
                root: "/d".into(),
                head: None
            }
        );
        for bad in ["", "ensemble:", "teacher:/d", "student::/h", "/d"] {
            assert!(bad.parse::<ModelSpec>().is_err(), "{bad}");
        }
        let s = "student:/a:/b.json";
        assert_eq!(s.parse::<ModelSpec>().unwrap().to_string(), s);
    }
}
