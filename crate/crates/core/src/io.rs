//! LF4 containers, PNG view grids and 16-bit depth previews.
//!
//! LF4 layout, all little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `LF4D` |
//! | 2     | version, u16 = 1 |
//! | 20    | `V, U, Y, X, C` as u32 |
//! | 1     | dtype, 1 = f32 |
//! | 1     | reserved, 0 |
//! | 4·N   | samples `[v][u][y][x][c]` as f32 |
//!
//! Depth fields use the same container with `C = 1`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{io_err, LfError, Result};
use crate::lightfield::{Extents, LightField, RayDepthField, View, CHANNELS, MAX_DISPARITY};

pub const LF4_MAGIC: &[u8; 4] = b"LF4D";
pub const LF4_VERSION: u16 = 1;
pub const LF4_DTYPE_F32: u8 = 1;
const LF4_HEADER_LEN: usize = 4 + 2 + 5 * 4 + 2;

/// Raw contents of an LF4 file.
#[derive(Debug, Clone, PartialEq)]
pub struct Lf4 {
    pub extents: Extents,
    pub channels: usize,
    pub samples: Vec<f32>,
}

fn format_err(path: &Path, detail: impl Into<String>) -> LfError {
    LfError::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

pub fn encode_lf4(lf4: &Lf4) -> Vec<u8> {
    let e = lf4.extents;
    let mut out = Vec::with_capacity(LF4_HEADER_LEN + lf4.samples.len() * 4);
    out.extend_from_slice(LF4_MAGIC);
    out.extend_from_slice(&LF4_VERSION.to_le_bytes());
    for d in [e.v, e.u, e.y, e.x, lf4.channels] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(LF4_DTYPE_F32);
    out.push(0);
    for s in &lf4.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Parses an LF4 byte buffer; `path` only labels errors.
pub fn decode_lf4(bytes: &[u8], path: &Path) -> Result<Lf4> {
    if bytes.len() < LF4_HEADER_LEN {
        return Err(LfError::Truncated {
            path: path.to_path_buf(),
            expected: LF4_HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[..4] != LF4_MAGIC {
        return Err(format_err(path, format!("bad magic {:?}, expected \"LF4D\"", &bytes[..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != LF4_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let dim = |i: usize| {
        let o = 6 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
    };
    let (v, u, y, x, c) = (dim(0), dim(1), dim(2), dim(3), dim(4));
    if [v, u, y, x, c].contains(&0) {
        return Err(format_err(path, format!("zero dimension in V={v} U={u} Y={y} X={x} C={c}")));
    }
    let dtype = bytes[26];
    if dtype != LF4_DTYPE_F32 {
        return Err(format_err(path, format!("unsupported dtype tag {dtype}")));
    }
    if bytes[27] != 0 {
        return Err(format_err(path, format!("reserved byte is {}, expected 0", bytes[27])));
    }
    let count = [v, u, y, x, c]
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .ok_or_else(|| format_err(path, "dimensions overflow"))?;
    let expected = LF4_HEADER_LEN as u64 + count * 4;
    if bytes.len() as u64 != expected {
        return Err(LfError::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let samples: Vec<f32> = bytes[LF4_HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        let (ci, ray) = (i % c, i / c);
        let (xi, r) = (ray % x, ray / x);
        let (yi, r) = (r % y, r / y);
        let (ui, vi) = (r % u, r / u);
        return Err(LfError::NonFiniteSample {
            path: path.to_path_buf(),
            v: vi,
            u: ui,
            y: yi,
            x: xi,
            c: ci,
        });
    }
    Ok(Lf4 {
        extents: Extents { v, u, y, x },
        channels: c,
        samples,
    })
}

pub fn read_lf4(path: &Path) -> Result<Lf4> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode_lf4(&bytes, path)
}

pub fn write_lf4(path: &Path, lf4: &Lf4) -> Result<()> {
    std::fs::write(path, encode_lf4(lf4)).map_err(io_err(path))
}

pub fn store_lf4(path: &Path, lf: &LightField) -> Result<()> {
    write_lf4(
        path,
        &Lf4 {
            extents: lf.extents(),
            channels: CHANNELS,
            samples: lf.samples().to_vec(),
        },
    )
}

pub fn load_lf4(path: &Path) -> Result<LightField> {
    let raw = read_lf4(path)?;
    if raw.channels != CHANNELS {
        return Err(format_err(path, format!("expected {CHANNELS} channels, found {}", raw.channels)));
    }
    LightField::new(raw.extents, raw.samples)
}

pub fn store_depth_lf4(path: &Path, depths: &RayDepthField) -> Result<()> {
    write_lf4(
        path,
        &Lf4 {
            extents: depths.extents(),
            channels: 1,
            samples: depths.depths().to_vec(),
        },
    )
}

pub fn load_depth_lf4(path: &Path) -> Result<RayDepthField> {
    let raw = read_lf4(path)?;
    if raw.channels != 1 {
        return Err(format_err(path, format!("depth file has {} channels, expected 1", raw.channels)));
    }
    RayDepthField::new(raw.extents, raw.samples)
}

/// `view_{v:02}_{u:02}.png`
pub fn view_file_name(iv: usize, iu: usize) -> String {
    format!("view_{iv:02}_{iu:02}.png")
}

/// 8-bit value to `[-1, 1]`.
pub fn unit_from_u8(p: u8) -> f32 {
    2.0 * p as f32 / 255.0 - 1.0
}

/// `[-1, 1]` to 8-bit, clamping first and rounding half away from zero.
pub fn u8_from_unit(v: f32) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) * 0.5 * 255.0).round() as u8
}

fn png_err(path: &Path, e: impl std::fmt::Display) -> LfError {
    LfError::Png(format!("{}: {e}", path.display()))
}

fn read_png(path: &Path) -> Result<(png::ColorType, png::BitDepth, u32, u32, Vec<u8>)> {
    let file = File::open(path).map_err(io_err(path))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    buf.truncate(info.buffer_size());
    Ok((info.color_type, info.bit_depth, info.height, info.width, buf))
}

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(depth);
    let mut writer = encoder.write_header().map_err(|e| png_err(path, e))?;
    writer.write_image_data(data).map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}

/// Reads one 8-bit RGB PNG into a view.
pub fn read_view_png(path: &Path) -> Result<View> {
    let (color, depth, height, width, buf) = read_png(path)?;
    if color != png::ColorType::Rgb || depth != png::BitDepth::Eight {
        return Err(png_err(path, format!("expected 8-bit RGB, found {color:?} {depth:?}")));
    }
    View::new(height as usize, width as usize, buf.into_iter().map(unit_from_u8).collect())
}

/// Writes a view as 8-bit RGB; values are clamped to `[-1, 1]` first.
pub fn write_view_png(path: &Path, view: &View) -> Result<()> {
    let data: Vec<u8> = view.pixels().iter().map(|&v| u8_from_unit(v)).collect();
    write_png(path, view.width(), view.height(), png::ColorType::Rgb, png::BitDepth::Eight, &data)
}

/// Imports a directory of `view_{v:02}_{u:02}.png` files. The grid extent is
/// taken from the largest indices present; every view in it must exist.
pub fn import_png_grid(dir: &Path) -> Result<LightField> {
    let entries = std::fs::read_dir(dir).map_err(io_err(dir))?;
    let (mut v, mut u) = (0usize, 0usize);
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some((iv, iu)) = parse_view_name(name) {
            v = v.max(iv + 1);
            u = u.max(iu + 1);
        }
    }
    if v == 0 {
        return Err(LfError::MissingView(dir.join(view_file_name(0, 0))));
    }
    let mut views = Vec::with_capacity(v * u);
    for iv in 0..v {
        for iu in 0..u {
            let path = dir.join(view_file_name(iv, iu));
            if !path.is_file() {
                return Err(LfError::MissingView(path));
            }
            let view = read_view_png(&path)?;
            if let Some(first) = views.first().map(|f: &View| (f.height(), f.width())) {
                if first != (view.height(), view.width()) {
                    return Err(LfError::ExtentMismatch(format!(
                        "{} is {}x{}, earlier views are {}x{}",
                        path.display(),
                        view.height(),
                        view.width(),
                        first.0,
                        first.1
                    )));
                }
            }
            views.push(view);
        }
    }
    LightField::from_views(v, u, &views)
}

fn parse_view_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("view_")?.strip_suffix(".png")?;
    let (a, b) = rest.split_once('_')?;
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Writes every view as `view_{v:02}_{u:02}.png`, creating `dir` if needed.
pub fn export_png_grid(dir: &Path, lf: &LightField) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let e = lf.extents();
    let mut written = Vec::with_capacity(e.views());
    for iv in 0..e.v {
        for iu in 0..e.u {
            let path = dir.join(view_file_name(iv, iu));
            write_view_png(&path, &lf.view(iv, iu)?)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Disparity to 16-bit: `[-16, 16]` maps affinely onto `[0, 65535]`.
pub fn u16_from_disparity(d: f32) -> u16 {
    let t = (d.clamp(-MAX_DISPARITY, MAX_DISPARITY) + MAX_DISPARITY) / (2.0 * MAX_DISPARITY);
    (t * 65535.0).round() as u16
}

pub fn disparity_from_u16(p: u16) -> f32 {
    p as f32 / 65535.0 * (2.0 * MAX_DISPARITY) - MAX_DISPARITY
}

/// Path of the text file describing a depth PNG's value mapping.
pub fn depth_sidecar_path(png_path: &Path) -> PathBuf {
    png_path.with_extension("txt")
}

/// Writes a `height × width` disparity map as 16-bit grayscale plus a sidecar
/// describing the mapping. Returns the sidecar path.
pub fn write_depth_png(path: &Path, height: usize, width: usize, depths: &[f32]) -> Result<PathBuf> {
    if depths.len() != height * width {
        return Err(LfError::ExtentMismatch(format!(
            "{} depths for a {height}x{width} map",
            depths.len()
        )));
    }
    let mut data = Vec::with_capacity(depths.len() * 2);
    for &d in depths {
        data.extend_from_slice(&u16_from_disparity(d).to_be_bytes());
    }
    write_png(path, width, height, png::ColorType::Grayscale, png::BitDepth::Sixteen, &data)?;
    let sidecar = depth_sidecar_path(path);
    let mut f = File::create(&sidecar).map_err(io_err(&sidecar))?;
    writeln!(
        f,
        "format = 16-bit grayscale png\nunits = pixels of disparity per angular step\n\
         min_disparity = {lo}\nmax_disparity = {hi}\n\
         disparity = value / 65535 * {span} - {hi}",
        lo = -MAX_DISPARITY,
        hi = MAX_DISPARITY,
        span = 2.0 * MAX_DISPARITY
    )
    .map_err(io_err(&sidecar))?;
    Ok(sidecar)
}

/// Reads a 16-bit depth PNG back to disparities.
pub fn read_depth_png(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let (color, depth, height, width, buf) = read_png(path)?;
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Sixteen {
        return Err(png_err(path, format!("expected 16-bit grayscale, found {color:?} {depth:?}")));
    }
    let values = buf
        .chunks_exact(2)
        .map(|b| disparity_from_u16(u16::from_be_bytes([b[0], b[1]])))
        .collect();
    Ok((height as usize, width as usize, values))
}

/// Reads an input image: a `.lf4` file contributes its central view,
/// anything else is decoded as an 8-bit RGB PNG.
pub fn read_input_view(path: &Path) -> Result<View> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("lf4")) {
        Ok(load_lf4(path)?.central_view())
    } else {
        read_view_png(path)
    }
}
