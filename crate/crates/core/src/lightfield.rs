//! Light field containers and coordinate conventions.
//!
//! Samples are stored `[v][u][y][x][c]` with `v` the slower (vertical)
//! angular axis. The reference view sits at index `(V/2, U/2)` and has
//! angular coordinate 0, so an 8×8 grid spans offsets `-4..=3` on each axis.
//! A scene point at disparity `d` seen at `(x, y)` in the reference view
//! appears at `(x - u·d, y - v·d)` in view `(v, u)`; equivalently, ray
//! `(x, u)` sees the reference-view point `x + u·d`.

use crate::error::{LfError, Result};

/// Color channels of every light field and view.
pub const CHANNELS: usize = 3;

/// Bound on ray depths, in pixels of disparity per angular step.
pub const MAX_DISPARITY: f32 = 16.0;

/// Angular and spatial extents `(V, U, Y, X)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Extents {
    pub v: usize,
    pub u: usize,
    pub y: usize,
    pub x: usize,
}

impl Extents {
    pub fn new(v: usize, u: usize, y: usize, x: usize) -> Result<Self> {
        let e = Self { v, u, y, x };
        if v == 0 || u == 0 || y == 0 || x == 0 {
            return Err(LfError::Invalid(format!("zero extent in {e}")));
        }
        Ok(e)
    }

    pub fn views(&self) -> usize {
        self.v * self.u
    }

    pub fn pixels(&self) -> usize {
        self.y * self.x
    }

    pub fn rays(&self) -> usize {
        self.views() * self.pixels()
    }

    /// Index of the view with angular coordinate `(0, 0)`.
    pub fn reference(&self) -> (usize, usize) {
        (self.v / 2, self.u / 2)
    }

    /// Angular coordinate of view index `(iv, iu)`.
    pub fn offset(&self, iv: usize, iu: usize) -> (i32, i32) {
        let (rv, ru) = self.reference();
        (iv as i32 - rv as i32, iu as i32 - ru as i32)
    }

    /// Flat index of a ray in `[v][u][y][x]` order.
    pub fn ray_index(&self, iv: usize, iu: usize, y: usize, x: usize) -> usize {
        ((iv * self.u + iu) * self.y + y) * self.x + x
    }

    pub fn with_spatial(&self, y: usize, x: usize) -> Self {
        Self { y, x, ..*self }
    }
}

impl std::fmt::Display for Extents {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.v, self.u, self.y, self.x)
    }
}

impl std::str::FromStr for Extents {
    type Err = LfError;

    /// Parses the `VxUxYxX` form printed by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let dims: Vec<usize> = s
            .split('x')
            .map(|p| p.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| LfError::Invalid(format!("bad extents `{s}`, expected VxUxYxX")))?;
        match dims[..] {
            [v, u, y, x] => Extents::new(v, u, y, x),
            _ => Err(LfError::Invalid(format!("bad extents `{s}`, expected VxUxYxX"))),
        }
    }
}

fn check_finite(data: &[f32], what: &str) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(LfError::Invalid(format!("non-finite {what} at element {i}"))),
        None => Ok(()),
    }
}

/// Bilinear sample of channel `c` of an interleaved `[y][x][channels]`
/// plane, neighbors clamped to the border. Same arithmetic as the graph's
/// sampler so value-level and graph-level rendering agree bit for bit.
#[inline]
pub(crate) fn sample_bilinear(
    plane: &[f32],
    height: usize,
    width: usize,
    channels: usize,
    c: usize,
    y: f32,
    x: f32,
) -> f32 {
    let fy = y.floor();
    let fx = x.floor();
    let (wy, wx) = (y - fy, x - fx);
    let clamp = |v: f32, n: usize| -> usize {
        if v <= 0.0 {
            0
        } else if v >= (n - 1) as f32 {
            n - 1
        } else {
            v as usize
        }
    };
    let (y0, y1) = (clamp(fy, height), clamp(fy + 1.0, height));
    let (x0, x1) = (clamp(fx, width), clamp(fx + 1.0, width));
    let at = |yy: usize, xx: usize| plane[(yy * width + xx) * channels + c];
    let top = (1.0 - wx) * at(y0, x0) + wx * at(y0, x1);
    let bottom = (1.0 - wx) * at(y1, x0) + wx * at(y1, x1);
    (1.0 - wy) * top + wy * bottom
}

/// One sub-aperture image, `[y][x][c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

impl View {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(LfError::Invalid(format!("empty view {height}x{width}")));
        }
        if pixels.len() != height * width * CHANNELS {
            return Err(LfError::ExtentMismatch(format!(
                "view {height}x{width} needs {} samples, got {}",
                height * width * CHANNELS,
                pixels.len()
            )));
        }
        check_finite(&pixels, "pixel")?;
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    pixels.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[(y * self.width + x) * CHANNELS + c]
    }

    /// Channel-major copy `[c][y][x]`, the layout the networks consume.
    pub fn to_planar(&self) -> Vec<f32> {
        let n = self.height * self.width;
        let mut out = vec![0.0; n * CHANNELS];
        for (i, px) in self.pixels.chunks_exact(CHANNELS).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                out[c * n + i] = v;
            }
        }
        out
    }

    pub fn from_planar(height: usize, width: usize, planar: &[f32]) -> Result<Self> {
        let n = height * width;
        if planar.len() != n * CHANNELS {
            return Err(LfError::ExtentMismatch(format!(
                "planar buffer of {} for a {height}x{width} view",
                planar.len()
            )));
        }
        Self::from_fn(height, width, |y, x, c| planar[c * n + y * width + x])
    }
}

/// Which angular axis an epipolar slice runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpiAxis {
    /// Rows are `u`, columns are `x`; `v` and `y` are fixed.
    U,
    /// Rows are `v`, columns are `y`; `u` and `x` are fixed.
    V,
}

impl std::str::FromStr for EpiAxis {
    type Err = LfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" | "U" => Ok(EpiAxis::U),
            "v" | "V" => Ok(EpiAxis::V),
            _ => Err(LfError::Invalid(format!("epi axis must be u or v, got `{s}`"))),
        }
    }
}

/// Epipolar plane image: `rows` angular samples by `cols` spatial samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Epi {
    pub rows: usize,
    pub cols: usize,
    /// `[row][col][c]`
    pub pixels: Vec<f32>,
}

impl Epi {
    pub fn get(&self, row: usize, col: usize, c: usize) -> f32 {
        self.pixels[(row * self.cols + col) * CHANNELS + c]
    }

    /// The slice as a view, for export.
    pub fn to_view(&self) -> Result<View> {
        View::new(self.rows, self.cols, self.pixels.clone())
    }
}

/// Nonnegative per-view weights for shift-and-add refocusing.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureMask {
    v: usize,
    u: usize,
    weights: Vec<f32>,
}

impl ApertureMask {
    pub fn new(v: usize, u: usize, weights: Vec<f32>) -> Result<Self> {
        if weights.len() != v * u {
            return Err(LfError::ExtentMismatch(format!(
                "aperture {v}x{u} needs {} weights, got {}",
                v * u,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(LfError::Invalid("aperture weights must be finite and >= 0".into()));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(LfError::Invalid("aperture mask is all zero".into()));
        }
        Ok(Self { v, u, weights })
    }

    /// Equal weight on every view.
    pub fn full(extents: Extents) -> Self {
        Self::square(extents, usize::MAX)
    }

    /// Only the reference view.
    pub fn central(extents: Extents) -> Self {
        Self::square(extents, 0)
    }

    /// Equal weight on views whose angular offsets are both within `radius`.
    pub fn square(extents: Extents, radius: usize) -> Self {
        let mut weights = Vec::with_capacity(extents.views());
        for iv in 0..extents.v {
            for iu in 0..extents.u {
                let (ov, ou) = extents.offset(iv, iu);
                let inside = ov.unsigned_abs() as usize <= radius && ou.unsigned_abs() as usize <= radius;
                weights.push(if inside { 1.0 } else { 0.0 });
            }
        }
        Self {
            v: extents.v,
            u: extents.u,
            weights,
        }
    }

    pub fn weight(&self, iv: usize, iu: usize) -> f32 {
        self.weights[iv * self.u + iu]
    }

    /// Weights scaled to sum to one.
    pub fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().map(|&w| w as f64).sum();
        self.weights.iter().map(|&w| w as f64 / total).collect()
    }
}

/// RGB light field, `[v][u][y][x][c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LightField {
    extents: Extents,
    samples: Vec<f32>,
}

impl LightField {
    pub fn new(extents: Extents, samples: Vec<f32>) -> Result<Self> {
        Extents::new(extents.v, extents.u, extents.y, extents.x)?;
        let expected = extents.rays() * CHANNELS;
        if samples.len() != expected {
            return Err(LfError::ExtentMismatch(format!(
                "light field {extents} needs {expected} samples, got {}",
                samples.len()
            )));
        }
        check_finite(&samples, "sample")?;
        Ok(Self { extents, samples })
    }

    pub fn filled(extents: Extents, value: f32) -> Result<Self> {
        Self::new(extents, vec![value; extents.rays() * CHANNELS])
    }

    /// Builds a light field from `f(iv, iu, y, x, c)`.
    pub fn from_fn(
        extents: Extents,
        mut f: impl FnMut(usize, usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(extents.rays() * CHANNELS);
        for iv in 0..extents.v {
            for iu in 0..extents.u {
                for y in 0..extents.y {
                    for x in 0..extents.x {
                        for c in 0..CHANNELS {
                            samples.push(f(iv, iu, y, x, c));
                        }
                    }
                }
            }
        }
        Self::new(extents, samples)
    }

    /// Stacks views given in `[v][u]` order.
    pub fn from_views(v: usize, u: usize, views: &[View]) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| LfError::Invalid("no views".into()))?;
        if views.len() != v * u {
            return Err(LfError::ExtentMismatch(format!(
                "{v}x{u} grid needs {} views, got {}",
                v * u,
                views.len()
            )));
        }
        let extents = Extents::new(v, u, first.height, first.width)?;
        let mut samples = Vec::with_capacity(extents.rays() * CHANNELS);
        for view in views {
            if (view.height, view.width) != (first.height, first.width) {
                return Err(LfError::ExtentMismatch(format!(
                    "view {}x{} differs from {}x{}",
                    view.height, view.width, first.height, first.width
                )));
            }
            samples.extend_from_slice(&view.pixels);
        }
        Self::new(extents, samples)
    }

    pub fn extents(&self) -> Extents {
        self.extents
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn get(&self, iv: usize, iu: usize, y: usize, x: usize, c: usize) -> f32 {
        self.samples[self.extents.ray_index(iv, iu, y, x) * CHANNELS + c]
    }

    fn check_view_index(&self, iv: usize, iu: usize) -> Result<()> {
        if iv >= self.extents.v || iu >= self.extents.u {
            return Err(LfError::OutOfRange(format!(
                "view ({iv}, {iu}) outside {}x{} grid",
                self.extents.v, self.extents.u
            )));
        }
        Ok(())
    }

    /// Interleaved `[y][x][c]` samples of one view.
    pub fn view_samples(&self, iv: usize, iu: usize) -> &[f32] {
        let n = self.extents.pixels() * CHANNELS;
        let start = (iv * self.extents.u + iu) * n;
        &self.samples[start..start + n]
    }

    pub fn view(&self, iv: usize, iu: usize) -> Result<View> {
        self.check_view_index(iv, iu)?;
        Ok(View {
            height: self.extents.y,
            width: self.extents.x,
            pixels: self.view_samples(iv, iu).to_vec(),
        })
    }

    /// The input view `L(x, 0)`.
    pub fn central_view(&self) -> View {
        let (rv, ru) = self.extents.reference();
        View {
            height: self.extents.y,
            width: self.extents.x,
            pixels: self.view_samples(rv, ru).to_vec(),
        }
    }

    pub fn set_view(&mut self, iv: usize, iu: usize, view: &View) -> Result<()> {
        self.check_view_index(iv, iu)?;
        if (view.height, view.width) != (self.extents.y, self.extents.x) {
            return Err(LfError::ExtentMismatch(format!(
                "view {}x{} into light field {}",
                view.height, view.width, self.extents
            )));
        }
        let n = self.extents.pixels() * CHANNELS;
        let start = (iv * self.extents.u + iu) * n;
        self.samples[start..start + n].copy_from_slice(&view.pixels);
        Ok(())
    }

    /// Whether every sample lies in `[-1, 1]`.
    pub fn is_normalized(&self) -> bool {
        self.samples.iter().all(|v| (-1.0..=1.0).contains(v))
    }

    /// Copy with every sample clamped to `[-1, 1]`.
    pub fn clamped(&self) -> Self {
        Self {
            extents: self.extents,
            samples: self.samples.iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        }
    }

    /// Epipolar slice through `fixed_angular` (the other angular index) and
    /// `fixed_spatial` (`y` for [`EpiAxis::U`], `x` for [`EpiAxis::V`]).
    pub fn epi_slice(&self, axis: EpiAxis, fixed_spatial: usize, fixed_angular: usize) -> Result<Epi> {
        let e = self.extents;
        let (angular_len, spatial_len, spatial_fixed_len) = match axis {
            EpiAxis::U => (e.v, e.y, e.u),
            EpiAxis::V => (e.u, e.x, e.v),
        };
        if fixed_angular >= angular_len || fixed_spatial >= spatial_len {
            return Err(LfError::OutOfRange(format!(
                "epi indices (spatial {fixed_spatial}, angular {fixed_angular}) outside {e}"
            )));
        }
        let (rows, cols) = match axis {
            EpiAxis::U => (spatial_fixed_len, e.x),
            EpiAxis::V => (spatial_fixed_len, e.y),
        };
        let mut pixels = Vec::with_capacity(rows * cols * CHANNELS);
        for r in 0..rows {
            for col in 0..cols {
                for c in 0..CHANNELS {
                    pixels.push(match axis {
                        EpiAxis::U => self.get(fixed_angular, r, fixed_spatial, col, c),
                        EpiAxis::V => self.get(r, fixed_angular, col, fixed_spatial, c),
                    });
                }
            }
        }
        Ok(Epi { rows, cols, pixels })
    }

    /// Shift-and-add refocus at disparity `d` over the views selected by `mask`:
    /// view `(v, u)` is sampled at `(y - v·d, x - u·d)`, which lines up every
    /// ray of a surface whose ray depth is `d`.
    ///
    /// Samples outside a view repeat its border, so a band about `|d|`
    /// pixels per angular step wide along the edges is not a true refocus.
    pub fn refocus(&self, d: f32, mask: &ApertureMask) -> Result<View> {
        if !d.is_finite() || d.abs() > MAX_DISPARITY {
            return Err(LfError::Invalid(format!(
                "refocus disparity {d} outside [-{MAX_DISPARITY}, {MAX_DISPARITY}]"
            )));
        }
        let e = self.extents;
        if (mask.v, mask.u) != (e.v, e.u) {
            return Err(LfError::ExtentMismatch(format!(
                "aperture {}x{} for a {}x{} grid",
                mask.v, mask.u, e.v, e.u
            )));
        }
        let weights = mask.normalized();
        let mut acc = vec![0.0f64; e.pixels() * CHANNELS];
        for iv in 0..e.v {
            for iu in 0..e.u {
                let w = weights[iv * e.u + iu];
                if w == 0.0 {
                    continue;
                }
                let (ov, ou) = e.offset(iv, iu);
                let plane = self.view_samples(iv, iu);
                for y in 0..e.y {
                    let sy = y as f32 - ov as f32 * d;
                    for x in 0..e.x {
                        let sx = x as f32 - ou as f32 * d;
                        for c in 0..CHANNELS {
                            let s = sample_bilinear(plane, e.y, e.x, CHANNELS, c, sy, sx);
                            acc[(y * e.x + x) * CHANNELS + c] += w * s as f64;
                        }
                    }
                }
            }
        }
        View::new(e.y, e.x, acc.into_iter().map(|v| v as f32).collect())
    }
}

/// Ray depths `D(x, u)`, `[v][u][y][x]`, in pixels of disparity per angular step.
#[derive(Debug, Clone, PartialEq)]
pub struct RayDepthField {
    extents: Extents,
    depths: Vec<f32>,
}

impl RayDepthField {
    /// Rejects non-finite values and values outside `[-16, 16]`.
    pub fn new(extents: Extents, depths: Vec<f32>) -> Result<Self> {
        Extents::new(extents.v, extents.u, extents.y, extents.x)?;
        if depths.len() != extents.rays() {
            return Err(LfError::ExtentMismatch(format!(
                "depth field {extents} needs {} values, got {}",
                extents.rays(),
                depths.len()
            )));
        }
        check_finite(&depths, "depth")?;
        if let Some(i) = depths.iter().position(|d| d.abs() > MAX_DISPARITY) {
            return Err(LfError::Invalid(format!(
                "depth {} at element {i} outside [-{MAX_DISPARITY}, {MAX_DISPARITY}]",
                depths[i]
            )));
        }
        Ok(Self { extents, depths })
    }

    pub fn constant(extents: Extents, d: f32) -> Result<Self> {
        Self::new(extents, vec![d; extents.rays()])
    }

    pub fn from_fn(extents: Extents, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Result<Self> {
        let mut depths = Vec::with_capacity(extents.rays());
        for iv in 0..extents.v {
            for iu in 0..extents.u {
                for y in 0..extents.y {
                    for x in 0..extents.x {
                        depths.push(f(iv, iu, y, x));
                    }
                }
            }
        }
        Self::new(extents, depths)
    }

    pub fn extents(&self) -> Extents {
        self.extents
    }

    pub fn depths(&self) -> &[f32] {
        &self.depths
    }

    pub fn into_depths(self) -> Vec<f32> {
        self.depths
    }

    pub fn get(&self, iv: usize, iu: usize, y: usize, x: usize) -> f32 {
        self.depths[self.extents.ray_index(iv, iu, y, x)]
    }

    /// `[y][x]` depths of one view.
    pub fn view_depths(&self, iv: usize, iu: usize) -> &[f32] {
        let n = self.extents.pixels();
        let start = (iv * self.extents.u + iu) * n;
        &self.depths[start..start + n]
    }

    pub fn central_depths(&self) -> &[f32] {
        let (rv, ru) = self.extents.reference();
        self.view_depths(rv, ru)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_lf(e: Extents) -> LightField {
        LightField::from_fn(e, |iv, iu, y, x, c| {
            ((iv * 7 + iu * 5 + y * 3 + x + c) % 17) as f32 / 17.0 - 0.5
        })
        .unwrap()
    }

    #[test]
    fn reference_view_of_even_grid_is_past_center() {
        let e = Extents::new(8, 8, 4, 4).unwrap();
        assert_eq!(e.reference(), (4, 4));
        assert_eq!(e.offset(0, 7), (-4, 3));
        let e = Extents::new(3, 5, 4, 4).unwrap();
        assert_eq!(e.reference(), (1, 2));
    }

    #[test]
    fn central_view_reads_reference_slice() {
        let e = Extents::new(8, 8, 3, 2).unwrap();
        let lf = LightField::from_fn(e, |iv, iu, _, _, _| (iv * 8 + iu) as f32 / 64.0).unwrap();
        let view = lf.central_view();
        assert!(view.pixels().iter().all(|&p| p == 36.0 / 64.0));
    }

    #[test]
    fn embedding_and_extracting_the_central_view_is_exact() {
        let e = Extents::new(5, 4, 3, 6).unwrap();
        let mut lf = LightField::filled(e, 0.0).unwrap();
        let view = View::from_fn(3, 6, |y, x, c| (y as f32 * 0.1 - x as f32 * 0.07 + c as f32).sin()).unwrap();
        let (rv, ru) = e.reference();
        lf.set_view(rv, ru, &view).unwrap();
        assert_eq!(lf.central_view(), view);
    }

    #[test]
    fn epi_row_at_reference_matches_central_row() {
        let e = Extents::new(4, 6, 5, 7).unwrap();
        let lf = ramp_lf(e);
        let (rv, ru) = e.reference();
        let epi = lf.epi_slice(EpiAxis::U, 2, rv).unwrap();
        assert_eq!((epi.rows, epi.cols), (6, 7));
        let central = lf.central_view();
        for x in 0..7 {
            for c in 0..3 {
                assert_eq!(epi.get(ru, x, c), central.get(2, x, c));
            }
        }
        let epi_v = lf.epi_slice(EpiAxis::V, 3, ru).unwrap();
        assert_eq!((epi_v.rows, epi_v.cols), (4, 5));
        for y in 0..5 {
            assert_eq!(epi_v.get(rv, y, 1), central.get(y, 3, 1));
        }
        assert!(lf.epi_slice(EpiAxis::U, 5, 0).is_err());
        assert!(lf.epi_slice(EpiAxis::U, 0, 4).is_err());
    }

    #[test]
    fn refocus_with_central_aperture_returns_central_view() {
        let e = Extents::new(8, 8, 6, 6).unwrap();
        let lf = ramp_lf(e);
        let out = lf.refocus(3.7, &ApertureMask::central(e)).unwrap();
        assert_eq!(out, lf.central_view());
    }

    #[test]
    fn refocus_at_zero_is_weighted_average() {
        let e = Extents::new(2, 2, 3, 3).unwrap();
        let lf = ramp_lf(e);
        let mask = ApertureMask::new(2, 2, vec![1.0, 3.0, 0.0, 4.0]).unwrap();
        let out = lf.refocus(0.0, &mask).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                for c in 0..3 {
                    let want = (lf.get(0, 0, y, x, c) as f64 * 1.0
                        + lf.get(0, 1, y, x, c) as f64 * 3.0
                        + lf.get(1, 1, y, x, c) as f64 * 4.0)
                        / 8.0;
                    assert!((out.get(y, x, c) as f64 - want).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn refocus_rejects_bad_inputs() {
        let e = Extents::new(2, 2, 3, 3).unwrap();
        let lf = ramp_lf(e);
        assert!(ApertureMask::new(2, 2, vec![0.0; 4]).is_err());
        assert!(ApertureMask::new(2, 2, vec![1.0, -1.0, 0.0, 0.0]).is_err());
        assert!(lf.refocus(16.5, &ApertureMask::full(e)).is_err());
        let wrong = ApertureMask::full(Extents::new(3, 3, 1, 1).unwrap());
        assert!(lf.refocus(0.0, &wrong).is_err());
    }

    #[test]
    fn constructors_validate() {
        let e = Extents::new(1, 1, 2, 2).unwrap();
        assert!(Extents::new(0, 1, 2, 2).is_err());
        assert!(LightField::new(e, vec![0.0; 11]).is_err());
        let mut bad = vec![0.0; 12];
        bad[5] = f32::NAN;
        assert!(LightField::new(e, bad).is_err());
        assert!(RayDepthField::new(e, vec![0.0, 0.0, 16.5, 0.0]).is_err());
        assert!(RayDepthField::new(e, vec![0.0, 0.0, -16.0, 16.0]).is_ok());
    }

    #[test]
    fn planar_round_trip() {
        let v = View::from_fn(3, 4, |y, x, c| (y * 12 + x * 3 + c) as f32 / 36.0).unwrap();
        let p = v.to_planar();
        assert_eq!(p[12], v.get(0, 0, 1));
        assert_eq!(View::from_planar(3, 4, &p).unwrap(), v);
    }
}
