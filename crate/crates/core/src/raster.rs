//! Deterministic rasterization and image-space comparisons.

use std::fmt;
use std::path::Path;

use resvg::tiny_skia;
use resvg::usvg;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svg::SvgDocument;

pub const DEFAULT_RENDER_SIZE: u32 = 384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Background {
    #[default]
    White,
    /// Rendered onto transparency; comparisons composite onto white.
    Transparent,
}

impl fmt::Display for Background {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Background::White => "white",
            Background::Transparent => "transparent",
        })
    }
}

impl std::str::FromStr for Background {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(Background::White),
            "transparent" => Ok(Background::Transparent),
            _ => Err(Error::Config(format!("unknown background `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub size: u32,
    pub background: Background,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            size: DEFAULT_RENDER_SIZE,
            background: Background::White,
        }
    }
}

impl RenderSettings {
    pub fn new(size: u32) -> Self {
        RenderSettings {
            size,
            ..Default::default()
        }
    }

    pub fn render(&self, doc: &SvgDocument) -> Result<Raster> {
        render(doc, self.size, self.background)
    }
}

/// An RGBA8 image. Buffers rendered onto transparency are premultiplied.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<u8>,
    premultiplied: bool,
    background: Background,
}

impl fmt::Debug for Raster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("premultiplied", &self.premultiplied)
            .field("background", &self.background)
            .finish_non_exhaustive()
    }
}

impl Raster {
    /// Wraps straight (non-premultiplied) RGBA8 data.
    pub fn from_rgba(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) * 4 {
            return Err(Error::Render(format!(
                "buffer of {} bytes does not hold {width}x{height} RGBA pixels",
                data.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            data,
            premultiplied: false,
            background: Background::White,
        })
    }

    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        let data = rgba
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 4)
            .collect();
        Raster {
            width,
            height,
            data,
            premultiplied: false,
            background: Background::White,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_premultiplied(&self) -> bool {
        self.premultiplied
    }

    pub fn background(&self) -> Background {
        self.background
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = ((y * self.width + x) * 4) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }

    /// RGB8 after compositing onto opaque white.
    pub fn opaque_rgb(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() / 4 * 3);
        for px in self.data.chunks_exact(4) {
            let a = px[3] as u32;
            for &c in &px[..3] {
                let c = c as u32;
                let v = if a == 255 {
                    c
                } else if self.premultiplied {
                    (c + 255 - a).min(255)
                } else {
                    (c * a + 255 * (255 - a) + 127) / 255
                };
                out.push(v as u8);
            }
        }
        out
    }

    /// Straight-alpha RGBA8, suitable for encoding.
    pub fn straight_rgba(&self) -> Vec<u8> {
        if !self.premultiplied {
            return self.data.clone();
        }
        let mut out = self.data.clone();
        for px in out.chunks_exact_mut(4) {
            let a = px[3] as u32;
            if a > 0 && a < 255 {
                for c in &mut px[..3] {
                    *c = ((*c as u32 * 255 + a / 2) / a).min(255) as u8;
                }
            }
        }
        out
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut bytes = Vec::new();
        image::RgbaImage::from_raw(self.width, self.height, self.straight_rgba())
            .expect("buffer size checked at construction")
            .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
            .map_err(|e| Error::Image {
                path: "<memory>".into(),
                message: e.to_string(),
            })?;
        Ok(bytes)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load_png(path: &Path) -> Result<Raster> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = image::load_from_memory(&bytes).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let rgba = img.to_rgba8();
        let (w, h) = rgba.dimensions();
        Raster::from_rgba(w, h, rgba.into_raw())
    }

    fn check_same_size(&self, other: &Raster) -> Result<()> {
        if self.dimensions() != other.dimensions() {
            return Err(Error::DimensionMismatch {
                left: self.dimensions(),
                right: other.dimensions(),
            });
        }
        Ok(())
    }
}

pub(crate) fn parse_tree(doc: &SvgDocument) -> Result<usvg::Tree> {
    let text = doc.to_svg_string();
    usvg::Tree::from_str(&text, &usvg::Options::default()).map_err(|e| Error::Render(e.to_string()))
}

/// Renders a document into a `size`×`size` canvas, scaled uniformly and centered.
pub fn render(doc: &SvgDocument, size: u32, background: Background) -> Result<Raster> {
    if doc.viewbox().is_empty() {
        return Err(Error::Render("empty viewBox".into()));
    }
    let tree = parse_tree(doc)?;
    let mut pixmap =
        tiny_skia::Pixmap::new(size, size).ok_or_else(|| Error::Render(format!("invalid render size {size}")))?;
    if background == Background::White {
        pixmap.fill(tiny_skia::Color::WHITE);
    }
    let tree_size = tree.size();
    let (w, h) = (tree_size.width(), tree_size.height());
    let scale = size as f32 / w.max(h);
    let tx = (size as f32 - w * scale) / 2.0;
    let ty = (size as f32 - h * scale) / 2.0;
    resvg::render(
        &tree,
        tiny_skia::Transform::from_row(scale, 0.0, 0.0, scale, tx, ty),
        &mut pixmap.as_mut(),
    );
    Ok(Raster {
        width: size,
        height: size,
        data: pixmap.take(),
        premultiplied: background == Background::Transparent,
        background,
    })
}

/// Per-pixel scalar map in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct DiffMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl DiffMap {
    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                left: (width, height),
                right: (values.len() as u32, 1),
            });
        }
        Ok(DiffMap { width, height, values })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        DiffMap {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[(y * self.width + x) as usize]
    }

    /// Sum of all values.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.mass() / self.values.len() as f64
        }
    }

    /// Pixels with a nonzero value.
    pub fn support(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v > 0.0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Grayscale PNG with values scaled to 0..=255.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        image::GrayImage::from_raw(self.width, self.height, bytes)
            .expect("length checked at construction")
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }
}

/// Mean absolute RGB difference per pixel, after compositing onto white, in [0, 1].
pub fn abs_diff(a: &Raster, b: &Raster) -> Result<DiffMap> {
    a.check_same_size(b)?;
    let (pa, pb) = (a.opaque_rgb(), b.opaque_rgb());
    let values = pa
        .chunks_exact(3)
        .zip(pb.chunks_exact(3))
        .map(|(x, y)| {
            let sum: u32 = x
                .iter()
                .zip(y)
                .map(|(&p, &q)| (p as i32 - q as i32).unsigned_abs())
                .sum();
            sum as f64 / 765.0
        })
        .collect();
    Ok(DiffMap {
        width: a.width,
        height: a.height,
        values,
    })
}

/// Negative mean squared RGB error with channels scaled to [0, 1]; in [-1, 0].
pub fn neg_mse(a: &Raster, b: &Raster) -> Result<f64> {
    a.check_same_size(b)?;
    let (pa, pb) = (a.opaque_rgb(), b.opaque_rgb());
    let sq: u64 = pa
        .iter()
        .zip(&pb)
        .map(|(&p, &q)| {
            let d = p as i64 - q as i64;
            (d * d) as u64
        })
        .sum();
    let n = pa.len() as f64;
    Ok(-(sq as f64) / (n * 65025.0))
}

pub const SSIM_WINDOW: u32 = 8;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// BT.601 luma scaled by 1000 so window sums stay exact in integers.
fn luma_milli(rgb: &[u8]) -> Vec<i64> {
    rgb.chunks_exact(3)
        .map(|p| 299 * p[0] as i64 + 587 * p[1] as i64 + 114 * p[2] as i64)
        .collect()
}

struct SummedArea {
    stride: usize,
    table: Vec<i64>,
}

impl SummedArea {
    fn new(width: usize, height: usize, value: impl Fn(usize) -> i64) -> Self {
        let stride = width + 1;
        let mut table = vec![0i64; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0i64;
            for x in 0..width {
                row += value(y * width + x);
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        SummedArea { stride, table }
    }

    fn window(&self, x: usize, y: usize, w: usize, h: usize) -> i64 {
        let s = self.stride;
        self.table[(y + h) * s + x + w] - self.table[y * s + x + w] - self.table[(y + h) * s + x]
            + self.table[y * s + x]
    }
}

/// Mean SSIM over all 8×8 luma windows at stride 1 (population statistics,
/// C1 = (0.01·255)², C2 = (0.03·255)²). Images smaller than the window use a
/// single window covering the whole image.
pub fn ssim(a: &Raster, b: &Raster) -> Result<f64> {
    a.check_same_size(b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w == 0 || h == 0 {
        return Ok(1.0);
    }
    let ya = luma_milli(&a.opaque_rgb());
    let yb = luma_milli(&b.opaque_rgb());
    let sa = SummedArea::new(w, h, |i| ya[i]);
    let sb = SummedArea::new(w, h, |i| yb[i]);
    let saa = SummedArea::new(w, h, |i| ya[i] * ya[i]);
    let sbb = SummedArea::new(w, h, |i| yb[i] * yb[i]);
    let sab = SummedArea::new(w, h, |i| ya[i] * yb[i]);

    let ww = (SSIM_WINDOW as usize).min(w);
    let wh = (SSIM_WINDOW as usize).min(h);
    let n = (ww * wh) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=(h - wh) {
        for x in 0..=(w - ww) {
            let mu_a = sa.window(x, y, ww, wh) as f64 / n / 1000.0;
            let mu_b = sb.window(x, y, ww, wh) as f64 / n / 1000.0;
            let var_a = saa.window(x, y, ww, wh) as f64 / n / 1e6 - mu_a * mu_a;
            let var_b = sbb.window(x, y, ww, wh) as f64 / n / 1e6 - mu_b * mu_b;
            let cov = sab.window(x, y, ww, wh) as f64 / n / 1e6 - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}
