//! Procedural layered Lambertian scenes with exact ground truth.
//!
//! Every layer is a fronto-parallel plane at a fixed disparity. Its color is
//! defined on the integer lattice of reference-view coordinates and
//! interpolated bilinearly in between, so a view rendered by bilinear
//! warping of the reference view reproduces the oracle exactly wherever the
//! warped sample only touches pixels of the same layer.
//!
//! Layer colors carry a disparity-dependent tint (red for near, blue for
//! far). That tint is the monocular cue a single-image depth network can
//! learn from; flat patches in textureless scenes carry no cue at all.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LfError, Result};
use crate::lightfield::{Extents, LightField, RayDepthField, CHANNELS, MAX_DISPARITY};

/// Largest |disparity| the dataset generator emits.
pub const GENERATED_DISPARITY: f32 = 4.0;
/// Smallest disparity gap between consecutive generated layers.
const MIN_LAYER_GAP: f32 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Difficulty {
    /// One full-frame textured layer.
    Easy,
    /// Two or three layers with blob or half-plane occluders.
    Occlusions,
    /// One or two layers with large flat patches.
    Textureless,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Occlusions, Difficulty::Textureless];

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Occlusions => "occlusions",
            Difficulty::Textureless => "textureless",
        }
    }
}

impl std::fmt::Display for Difficulty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Difficulty {
    type Err = LfError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| LfError::Scene(format!("unknown difficulty `{s}` (easy|occlusions|textureless)")))
    }
}

/// Disk in reference-view pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TextureKind {
    /// Bilinear value noise on a coarse grid of `cell` pixels.
    ValueNoise { cell: f64 },
    /// Sinusoidal stripes; `angle` in radians.
    Stripes { period: f64, angle: f64 },
    /// Squares of `period` pixels.
    Checker { period: i64 },
    Flat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub kind: TextureKind,
    /// Peak-to-peak luminance swing added to the layer tint.
    pub contrast: f64,
    /// Regions painted with [`Texture::flat_color`] and no depth tint.
    pub flat_patches: Vec<Disk>,
    pub flat_color: f64,
    pub seed: u64,
}

impl Texture {
    pub fn flat() -> Self {
        Self {
            kind: TextureKind::Flat,
            contrast: 0.0,
            flat_patches: Vec::new(),
            flat_color: 0.0,
            seed: 0,
        }
    }

    pub fn textured(kind: TextureKind, contrast: f64, seed: u64) -> Self {
        Self {
            kind,
            contrast,
            flat_patches: Vec::new(),
            flat_color: 0.0,
            seed,
        }
    }

    fn in_flat_patch(&self, i: i64, j: i64) -> bool {
        self.flat_patches.iter().any(|d| d.contains(i as f64, j as f64))
    }

    /// Pattern value in `[0, 1]` at lattice point `(i, j)` = `(x, y)`.
    fn pattern(&self, i: i64, j: i64) -> f64 {
        match self.kind {
            TextureKind::ValueNoise { cell } => {
                let (gx, gy) = (i as f64 / cell, j as f64 / cell);
                let (ix, iy) = (gx.floor(), gy.floor());
                let (wx, wy) = (gx - ix, gy - iy);
                let (ix, iy) = (ix as i64, iy as i64);
                let n = |a: i64, b: i64| unit_hash(self.seed, a, b);
                let top = (1.0 - wx) * n(ix, iy) + wx * n(ix + 1, iy);
                let bottom = (1.0 - wx) * n(ix, iy + 1) + wx * n(ix + 1, iy + 1);
                (1.0 - wy) * top + wy * bottom
            }
            TextureKind::Stripes { period, angle } => {
                let t = (i as f64 * angle.cos() + j as f64 * angle.sin()) / period;
                0.5 + 0.5 * (std::f64::consts::TAU * t).sin()
            }
            TextureKind::Checker { period } => ((i.div_euclid(period) + j.div_euclid(period)).rem_euclid(2)) as f64,
            TextureKind::Flat => 0.5,
        }
    }

    fn has_variation(&self) -> bool {
        self.kind != TextureKind::Flat && self.contrast > 0.0
    }
}

/// Tint of a layer at disparity `d`: red grows and blue shrinks with `d`.
pub fn depth_tint(d: f32) -> [f64; 3] {
    let t = ((d as f64 + 8.0) / 16.0).clamp(0.0, 1.0);
    [-0.45 + 0.9 * t, 0.0, 0.45 - 0.9 * t]
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit_hash(seed: u64, a: i64, b: i64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(a as u64 ^ splitmix64(b as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Seed of scene `index` in a dataset seeded with `seed`.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

/// Binary opacity of a layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Opacity {
    Full,
    Blob(Disk),
    /// Opaque where `nx·x + ny·y >= offset`.
    HalfPlane { nx: f64, ny: f64, offset: f64 },
}

impl Opacity {
    pub fn covers(&self, x: f64, y: f64) -> bool {
        match self {
            Opacity::Full => true,
            Opacity::Blob(d) => d.contains(x, y),
            Opacity::HalfPlane { nx, ny, offset } => nx * x + ny * y >= *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub texture: Texture,
    pub disparity: f32,
    pub mask: Opacity,
}

impl Layer {
    /// Color at lattice point `(i, j)` of the reference view.
    fn lattice_color(&self, i: i64, j: i64) -> [f64; 3] {
        let t = &self.texture;
        if t.in_flat_patch(i, j) {
            return [t.flat_color; 3];
        }
        let tint = depth_tint(self.disparity);
        let swing = t.contrast * (t.pattern(i, j) - 0.5);
        [tint[0] + swing, tint[1] + swing, tint[2] + swing]
    }

    /// Bilinear interpolation of the lattice colors.
    pub fn color_at(&self, x: f64, y: f64) -> [f64; 3] {
        let (fx, fy) = (x.floor(), y.floor());
        let (wx, wy) = (x - fx, y - fy);
        let (i, j) = (fx as i64, fy as i64);
        let c00 = self.lattice_color(i, j);
        let c01 = self.lattice_color(i + 1, j);
        let c10 = self.lattice_color(i, j + 1);
        let c11 = self.lattice_color(i + 1, j + 1);
        std::array::from_fn(|c| {
            let top = (1.0 - wx) * c00[c] + wx * c01[c];
            let bottom = (1.0 - wx) * c10[c] + wx * c11[c];
            (1.0 - wy) * top + wy * bottom
        })
    }

    fn textured_at(&self, points: &[(i64, i64)]) -> bool {
        self.texture.has_variation() && points.iter().all(|&(i, j)| !self.texture.in_flat_patch(i, j))
    }
}

/// Back-to-front list of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub layers: Vec<Layer>,
    pub seed: u64,
    pub extents: Extents,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| LfError::Scene("scene has no layers".into()))?;
        if first.mask != Opacity::Full {
            return Err(LfError::Scene("backmost layer must be fully opaque".into()));
        }
        for w in self.layers.windows(2) {
            if !(w[1].disparity > w[0].disparity) {
                return Err(LfError::Scene(format!(
                    "disparities must increase back to front, got {} then {}",
                    w[0].disparity, w[1].disparity
                )));
            }
        }
        if let Some(l) = self
            .layers
            .iter()
            .find(|l| !l.disparity.is_finite() || l.disparity.abs() > MAX_DISPARITY)
        {
            return Err(LfError::Scene(format!("layer disparity {} out of range", l.disparity)));
        }
        Ok(())
    }

    /// Single full-frame layer.
    pub fn single_plane(extents: Extents, texture: Texture, disparity: f32) -> Self {
        Self {
            layers: vec![Layer {
                texture,
                disparity,
                mask: Opacity::Full,
            }],
            seed: 0,
            extents,
        }
    }

    /// Index of the nearest layer covering reference-view point `(x, y)`
    /// after shifting by the ray's angular offset.
    fn hit(&self, x: f32, y: f32, ou: i32, ov: i32) -> (usize, f32, f32) {
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let qx = x + ou as f32 * layer.disparity;
            let qy = y + ov as f32 * layer.disparity;
            if layer.mask.covers(qx as f64, qy as f64) {
                return (li, qx, qy);
            }
        }
        unreachable!("validated scenes have a full backmost layer")
    }
}

/// Ground truth for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    pub light_field: LightField,
    pub ray_depths: RayDepthField,
    /// Ray reconstructible from the reference view by bilinear warping:
    /// its surface point lies inside the image and every pixel of its
    /// bilinear footprint in the reference view shows the same layer.
    pub visibility: Vec<bool>,
    /// Ray's hit point lies on textured (non-flat) surface.
    pub textured: Vec<bool>,
    /// Index of the layer each ray hits.
    pub hit_layer: Vec<u8>,
}

/// Lattice points with nonzero bilinear weight at `(x, y)`.
fn footprint(x: f32, y: f32) -> Vec<(i64, i64)> {
    let (fx, fy) = (x.floor(), y.floor());
    let (i, j) = (fx as i64, fy as i64);
    let mut pts = vec![(i, j)];
    if x > fx {
        pts.push((i + 1, j));
    }
    if y > fy {
        pts.push((i, j + 1));
        if x > fx {
            pts.push((i + 1, j + 1));
        }
    }
    pts
}

/// Renders the light field, ray depths and masks of a scene.
pub fn generate_scene(spec: &SceneSpec) -> Result<OracleOutput> {
    spec.validate()?;
    let e = spec.extents;
    let mut front = Vec::with_capacity(e.pixels());
    for y in 0..e.y {
        for x in 0..e.x {
            front.push(spec.hit(x as f32, y as f32, 0, 0).0);
        }
    }
    let rays = e.rays();
    let mut samples = Vec::with_capacity(rays * CHANNELS);
    let mut depths = Vec::with_capacity(rays);
    let mut visibility = Vec::with_capacity(rays);
    let mut textured = Vec::with_capacity(rays);
    let mut hit_layer = Vec::with_capacity(rays);
    for iv in 0..e.v {
        for iu in 0..e.u {
            let (ov, ou) = e.offset(iv, iu);
            for y in 0..e.y {
                for x in 0..e.x {
                    let (li, qx, qy) = spec.hit(x as f32, y as f32, ou, ov);
                    let layer = &spec.layers[li];
                    let color = layer.color_at(qx as f64, qy as f64);
                    samples.extend(color.iter().map(|&c| c as f32));
                    depths.push(layer.disparity);
                    let pts = footprint(qx, qy);
                    let visible = pts.iter().all(|&(i, j)| {
                        i >= 0
                            && j >= 0
                            && (i as usize) < e.x
                            && (j as usize) < e.y
                            && front[j as usize * e.x + i as usize] == li
                    });
                    visibility.push(visible);
                    textured.push(layer.textured_at(&pts));
                    hit_layer.push(li as u8);
                }
            }
        }
    }
    Ok(OracleOutput {
        light_field: LightField::new(e, samples)?,
        ray_depths: RayDepthField::new(e, depths)?,
        visibility,
        textured,
        hit_layer,
    })
}

fn random_texture(rng: &mut ChaCha8Rng, scale: f64, contrast: (f64, f64)) -> Texture {
    let kind = match rng.random_range(0..3) {
        0 => TextureKind::ValueNoise {
            cell: rng.random_range(5.0..10.0) * scale,
        },
        1 => TextureKind::Stripes {
            period: rng.random_range(6.0..12.0) * scale,
            angle: rng.random_range(0.0..std::f64::consts::PI),
        },
        _ => TextureKind::Checker {
            period: ((rng.random_range(4.0..8.0) * scale).round() as i64).max(2),
        },
    };
    let c = rng.random_range(contrast.0..contrast.1);
    Texture::textured(kind, c, rng.random())
}

/// Sorted disparities in `[-GENERATED_DISPARITY, GENERATED_DISPARITY]`
/// separated by at least [`MIN_LAYER_GAP`].
fn random_disparities(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    let lo = -GENERATED_DISPARITY;
    let slack = 2.0 * GENERATED_DISPARITY - MIN_LAYER_GAP * (n as f32 - 1.0);
    // Sorted uniform spacings plus the mandatory gaps.
    let mut cuts: Vec<f32> = (0..n).map(|_| rng.random_range(0.0..=slack)).collect();
    cuts.sort_by(f32::total_cmp);
    cuts.iter()
        .enumerate()
        .map(|(i, c)| lo + c + MIN_LAYER_GAP * i as f32)
        .collect()
}

fn random_occluder(rng: &mut ChaCha8Rng, e: Extents) -> Opacity {
    let (w, h) = (e.x as f64, e.y as f64);
    let size = w.min(h);
    if rng.random_bool(0.6) {
        Opacity::Blob(Disk {
            cx: rng.random_range(0.3..0.7) * w,
            cy: rng.random_range(0.3..0.7) * h,
            radius: rng.random_range(0.15..0.3) * size,
        })
    } else {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let (nx, ny) = (angle.cos(), angle.sin());
        let (px, py) = (rng.random_range(0.35..0.65) * w, rng.random_range(0.35..0.65) * h);
        Opacity::HalfPlane {
            nx,
            ny,
            offset: nx * px + ny * py,
        }
    }
}

/// Random scene of the given difficulty. `layers` overrides the layer count.
pub fn random_scene_spec(difficulty: Difficulty, seed: u64, extents: Extents, layers: Option<usize>) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = extents.y.min(extents.x) as f64 / 64.0;
    let n = layers.unwrap_or_else(|| match difficulty {
        Difficulty::Easy => 1,
        Difficulty::Occlusions => rng.random_range(2..=3),
        Difficulty::Textureless => rng.random_range(1..=2),
    });
    let contrast = match difficulty {
        Difficulty::Textureless => (0.3, 0.6),
        _ => (0.6, 0.9),
    };
    let disparities = random_disparities(&mut rng, n);
    let mut out = Vec::with_capacity(n);
    for (i, &d) in disparities.iter().enumerate() {
        let mut texture = random_texture(&mut rng, scale, contrast);
        if difficulty == Difficulty::Textureless {
            let count = rng.random_range(1..=2);
            let (w, h) = (extents.x as f64, extents.y as f64);
            for _ in 0..count {
                texture.flat_patches.push(Disk {
                    cx: rng.random_range(0.25..0.75) * w,
                    cy: rng.random_range(0.25..0.75) * h,
                    radius: rng.random_range(0.2..0.35) * w.min(h),
                });
            }
            texture.flat_color = rng.random_range(-0.3..0.3);
        }
        let mask = if i == 0 { Opacity::Full } else { random_occluder(&mut rng, extents) };
        out.push(Layer {
            texture,
            disparity: d,
            mask,
        });
    }
    SceneSpec {
        layers: out,
        seed,
        extents,
    }
}

/// `n` scenes, each a pure function of `(seed, index)`.
pub fn generate_dataset(n: usize, seed: u64, extents: Extents, difficulty: Difficulty) -> Result<Vec<OracleOutput>> {
    if n == 0 {
        return Err(LfError::Scene("dataset size must be >= 1".into()));
    }
    (0..n)
        .map(|i| generate_scene(&random_scene_spec(difficulty, scene_seed(seed, i), extents, None)))
        .collect()
}

/// Counts of ray depths in `bins` equal bins over `[-16, 16]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_left(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / self.counts.len() as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Bin index of `value` among `bins` bins over `[lo, hi]`; the top edge
/// belongs to the last bin and values outside are clamped.
pub(crate) fn bin_of(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (value - lo) / (hi - lo) * bins as f64;
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

pub fn disparity_histogram(depths: &RayDepthField, bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(LfError::Invalid(format!("histogram needs >= 2 bins, got {bins}")));
    }
    let (lo, hi) = (-(MAX_DISPARITY as f64), MAX_DISPARITY as f64);
    let mut counts = vec![0u64; bins];
    for &d in depths.depths() {
        counts[bin_of(d as f64, lo, hi, bins)] += 1;
    }
    Ok(Histogram { lo, hi, counts })
}
