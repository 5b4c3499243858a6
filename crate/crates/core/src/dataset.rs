//! Oracle datasets on disk: one LF4 light field and one depth LF4 per scene
//! plus a tab-separated manifest.
//!
//! ```text
//! # lfsynth dataset
//! extents	8x8x64x64
//! scene_0000	<seed>	<difficulty>	<sha256 of scene_0000.lf4>
//! ```
//!
//! Scene seeds are recorded so that per-ray masks can be regenerated
//! instead of stored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{io_err, LfError, Result};
use crate::io::{load_depth_lf4, load_lf4, store_depth_lf4, store_lf4};
use crate::lightfield::{Extents, LightField, RayDepthField};
use crate::scene::{generate_scene, random_scene_spec, scene_seed, Difficulty};
use crate::train::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.tsv";
const HEADER: &str = "# lfsynth dataset";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub stem: String,
    pub seed: u64,
    pub difficulty: Difficulty,
    /// SHA-256 of the light-field file.
    pub sha256: String,
}

impl DatasetEntry {
    pub fn light_field_file(&self) -> String {
        format!("{}.lf4", self.stem)
    }

    pub fn depth_file(&self) -> String {
        format!("{}_depth.lf4", self.stem)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub extents: Extents,
    pub entries: Vec<DatasetEntry>,
}

/// A scene loaded back from disk, with its regenerated texture mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetScene {
    pub light_field: LightField,
    pub depths: RayDepthField,
    pub textured: Vec<bool>,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\nextents\t{}\n", self.extents);
        for e in &self.entries {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", e.stem, e.seed, e.difficulty, e.sha256);
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, detail: String| LfError::Format {
            path: path.to_path_buf(),
            detail: format!("line {line}: {detail}"),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            _ => return Err(bad(1, format!("expected `{HEADER}`"))),
        }
        let extents = match lines.next() {
            Some((n, l)) => match l.split_once('\t') {
                Some(("extents", e)) => e.parse().map_err(|e: LfError| bad(n + 1, e.to_string()))?,
                _ => return Err(bad(n + 1, "expected `extents\\t<VxUxYxX>`".into())),
            },
            None => return Err(bad(2, "missing extents line".into())),
        };
        let mut entries = Vec::new();
        for (n, l) in lines {
            let f: Vec<&str> = l.split('\t').collect();
            let [stem, seed, difficulty, sha256] = f[..] else {
                return Err(bad(n + 1, format!("expected 4 tab-separated fields, got {}", f.len())));
            };
            entries.push(DatasetEntry {
                stem: stem.to_string(),
                seed: seed.parse().map_err(|_| bad(n + 1, format!("bad seed `{seed}`")))?,
                difficulty: difficulty.parse().map_err(|e: LfError| bad(n + 1, e.to_string()))?,
                sha256: sha256.to_string(),
            });
        }
        if entries.is_empty() {
            return Err(bad(3, "dataset lists no scenes".into()));
        }
        Ok(Self { extents, entries })
    }

    /// SHA-256 of the manifest text; covers the scene file hashes.
    pub fn id(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(io_err(path))?, path)
    }
}

/// Generates `n` scenes into `dir` and writes the manifest.
pub fn write_dataset(dir: &Path, n: usize, seed: u64, extents: Extents, difficulty: Difficulty) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(LfError::Scene("dataset size must be >= 1".into()));
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let s = scene_seed(seed, i);
        let oracle = generate_scene(&random_scene_spec(difficulty, s, extents, None))?;
        let stem = format!("scene_{i:04}");
        let lf_path = dir.join(format!("{stem}.lf4"));
        store_lf4(&lf_path, &oracle.light_field)?;
        store_depth_lf4(&dir.join(format!("{stem}_depth.lf4")), &oracle.ray_depths)?;
        let bytes = std::fs::read(&lf_path).map_err(io_err(&lf_path))?;
        entries.push(DatasetEntry {
            stem,
            seed: s,
            difficulty,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = DatasetManifest { extents, entries };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_text()).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Resolves `path` to the manifest file and its directory.
pub fn manifest_location(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.join(MANIFEST_FILE), path.to_path_buf())
    } else {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (path.to_path_buf(), dir)
    }
}

/// Loads the light fields listed in a manifest, checking hashes and extents.
pub fn load_light_fields(path: &Path) -> Result<(DatasetManifest, Vec<LightField>)> {
    let (file, dir) = manifest_location(path);
    let manifest = DatasetManifest::load(&file)?;
    let mut out = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let p = dir.join(e.light_field_file());
        let bytes = std::fs::read(&p).map_err(io_err(&p))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(LfError::Format {
                path: p,
                detail: "content does not match the manifest hash".into(),
            });
        }
        let lf = load_lf4(&p)?;
        if lf.extents() != manifest.extents {
            return Err(LfError::ExtentMismatch(format!(
                "{} is {}, manifest says {}",
                p.display(),
                lf.extents(),
                manifest.extents
            )));
        }
        out.push(lf);
    }
    Ok((manifest, out))
}

/// Loads light fields and depths, regenerating texture masks from the seeds.
pub fn load_scenes(path: &Path) -> Result<(DatasetManifest, Vec<DatasetScene>)> {
    let (manifest, lfs) = load_light_fields(path)?;
    let (_, dir) = manifest_location(path);
    let mut out = Vec::with_capacity(lfs.len());
    for (e, light_field) in manifest.entries.iter().zip(lfs) {
        let depths = load_depth_lf4(&dir.join(e.depth_file()))?;
        let oracle = generate_scene(&random_scene_spec(e.difficulty, e.seed, manifest.extents, None))?;
        if oracle.light_field != light_field || oracle.ray_depths != depths {
            return Err(LfError::Format {
                path: dir.join(e.light_field_file()),
                detail: "scene does not match its recorded seed".into(),
            });
        }
        out.push(DatasetScene {
            light_field,
            depths,
            textured: oracle.textured,
        });
    }
    Ok((manifest, out))
}
