//! Independent reference implementations and fixtures shared by the
//! integration tests. Oracles here are plain f64 loops and do not call into
//! the library's sampling or loss code.
#![allow(dead_code)]

use lfsynth_core::lightfield::{Extents, LightField, RayDepthField, View, CHANNELS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_view(h: usize, w: usize, seed: u64) -> View {
    let mut r = rng(seed);
    View::from_fn(h, w, |_, _, _| r.random_range(-1.0..1.0)).unwrap()
}

pub fn random_light_field(e: Extents, seed: u64) -> LightField {
    let mut r = rng(seed);
    LightField::from_fn(e, |_, _, _, _, _| r.random_range(-1.0..1.0)).unwrap()
}

pub fn random_depths(e: Extents, max: f32, seed: u64) -> RayDepthField {
    let mut r = rng(seed);
    RayDepthField::from_fn(e, |_, _, _, _| r.random_range(-max..max)).unwrap()
}

/// Bilinear sample of `plane[y][x]` with coordinates clamped to the image.
pub fn bilinear(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let at = |yy: usize, xx: usize| plane[yy * w + xx];
    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1))
}

/// Angular offset of view index `i` in a grid of `n`: `i - n/2`.
pub fn offset(i: usize, n: usize) -> f64 {
    i as f64 - (n / 2) as f64
}

/// Lambertian rendering by direct loops: view `(v, u)` at `(y, x)` samples
/// the input at `(y + v·D, x + u·D)`.
pub fn render_oracle(view: &View, depths: &RayDepthField) -> Vec<f64> {
    let e = depths.extents();
    let (h, w) = (e.y, e.x);
    let planes: Vec<Vec<f64>> = (0..CHANNELS)
        .map(|c| (0..h * w).map(|i| view.get(i / w, i % w, c) as f64).collect())
        .collect();
    let mut out = vec![0.0; e.rays() * CHANNELS];
    for iv in 0..e.v {
        for iu in 0..e.u {
            for y in 0..h {
                for x in 0..w {
                    let d = depths.get(iv, iu, y, x) as f64;
                    let (sy, sx) = (y as f64 + offset(iv, e.v) * d, x as f64 + offset(iu, e.u) * d);
                    for c in 0..CHANNELS {
                        out[(e.ray_index(iv, iu, y, x)) * CHANNELS + c] = bilinear(&planes[c], h, w, sy, sx);
                    }
                }
            }
        }
    }
    out
}

/// Ray-depth consistency by direct loops over both unit shears.
/// Returns `(sum of |D - D_sheared|, number of valid pairs)` per ray, as
/// well as the pooled mean.
pub struct ConsistencyOracle {
    pub per_ray: Vec<f64>,
    pub pairs: usize,
    pub mean: f64,
}

pub fn consistency_oracle(depths: &RayDepthField) -> ConsistencyOracle {
    let e = depths.extents();
    let (h, w) = (e.y, e.x);
    let mut per_ray = vec![0.0; e.rays()];
    let mut pairs = 0;
    for (kv, ku) in [(1usize, 0usize), (0, 1)] {
        for iv in kv..e.v {
            for iu in ku..e.u {
                let src: Vec<f64> = depths.view_depths(iv - kv, iu - ku).iter().map(|&d| d as f64).collect();
                for y in 0..h {
                    for x in 0..w {
                        let d = depths.get(iv, iu, y, x) as f64;
                        let s = bilinear(&src, h, w, y as f64 + kv as f64 * d, x as f64 + ku as f64 * d);
                        per_ray[e.ray_index(iv, iu, y, x)] += (d - s).abs();
                        pairs += 1;
                    }
                }
            }
        }
    }
    let mean = if pairs == 0 { 0.0 } else { per_ray.iter().sum::<f64>() / pairs as f64 };
    ConsistencyOracle { per_ray, pairs, mean }
}

/// Total variation by direct loops: mean |forward difference| along x plus
/// the same along y.
pub fn tv_oracle(depths: &RayDepthField) -> f64 {
    let e = depths.extents();
    let (mut sx, mut nx, mut sy, mut ny) = (0.0, 0usize, 0.0, 0usize);
    for iv in 0..e.v {
        for iu in 0..e.u {
            for y in 0..e.y {
                for x in 0..e.x {
                    let d = depths.get(iv, iu, y, x) as f64;
                    if x + 1 < e.x {
                        sx += (depths.get(iv, iu, y, x + 1) as f64 - d).abs();
                        nx += 1;
                    }
                    if y + 1 < e.y {
                        sy += (depths.get(iv, iu, y + 1, x) as f64 - d).abs();
                        ny += 1;
                    }
                }
            }
        }
    }
    let part = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    part(sx, nx) + part(sy, ny)
}

/// Shift-and-add refocus by direct loops with uniform weights over the
/// views where `include(iv, iu)` holds.
pub fn refocus_oracle(lf: &LightField, d: f64, include: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let e = lf.extents();
    let mut acc = vec![0.0; e.pixels() * CHANNELS];
    let mut n = 0.0;
    for iv in 0..e.v {
        for iu in 0..e.u {
            if !include(iv, iu) {
                continue;
            }
            n += 1.0;
            for c in 0..CHANNELS {
                let plane: Vec<f64> = (0..e.pixels()).map(|i| lf.get(iv, iu, i / e.x, i % e.x, c) as f64).collect();
                for y in 0..e.y {
                    for x in 0..e.x {
                        let (sy, sx) = (y as f64 - offset(iv, e.v) * d, x as f64 - offset(iu, e.u) * d);
                        acc[(y * e.x + x) * CHANNELS + c] += bilinear(&plane, e.y, e.x, sy, sx);
                    }
                }
            }
        }
    }
    acc.iter().map(|a| a / n).collect()
}
