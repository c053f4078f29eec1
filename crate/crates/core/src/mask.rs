//! Binary silhouette masks, sequences of them, and their on-disk format.
//!
//! A sequence directory holds numbered frames (`frame_000001.pgm`, ...) and a
//! `manifest.txt` listing the frame files in playback order, one per line.
//! Frames may be 8-bit PGM (P5) or PNG; gray values above 127 are foreground.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat, Luma};
use thiserror::Error;

pub const MANIFEST_NAME: &str = "manifest.txt";
const FOREGROUND_THRESHOLD: u8 = 127;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        index: usize,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("bit buffer has {got} entries, expected {want}")]
    BadBuffer { got: usize, want: usize },
}

/// Row-major binary occupancy image. Pixel `(x, y)` has its center at `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilhouetteMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl SilhouetteMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, MaskError> {
        if bits.len() != width * height {
            return Err(MaskError::BadBuffer {
                got: bits.len(),
                want: width * height,
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`get`](Self::get) but treats everything outside the image as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Foreground pixel with at least one background (or out-of-image) 4-neighbor.
    pub fn is_boundary(&self, x: i64, y: i64) -> bool {
        self.get_signed(x, y)
            && (!self.get_signed(x - 1, y)
                || !self.get_signed(x + 1, y)
                || !self.get_signed(x, y - 1)
                || !self.get_signed(x, y + 1))
    }

    pub fn foreground_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Leftmost and rightmost foreground column of every non-empty row.
    pub fn row_extremes(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            if let Some(lo) = row.iter().position(|&b| b) {
                let hi = row.iter().rposition(|&b| b).unwrap();
                out.push((y, lo, hi));
            }
        }
        out
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the foreground.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let rows = self.row_extremes();
        let first = rows.first()?;
        let last = rows.last()?;
        let x0 = rows.iter().map(|r| r.1).min()?;
        let x1 = rows.iter().map(|r| r.2).max()?;
        Some((x0, first.0, x1, last.0))
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(x as usize, y as usize) { 255 } else { 0 }])
        })
    }

    pub fn from_gray_image(img: &GrayImage) -> Self {
        let (w, h) = img.dimensions();
        Self::from_fn(w as usize, h as usize, |x, y| {
            img.get_pixel(x as u32, y as u32)[0] > FOREGROUND_THRESHOLD
        })
    }

    /// Reads a PGM or PNG file, thresholding gray values at `> 127`.
    pub fn load(path: &Path) -> Result<Self, MaskError> {
        let img = image::open(path).map_err(|source| MaskError::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_gray_image(&img.to_luma8()))
    }

    /// Writes the mask; the format follows the extension (`.pgm` is binary P5).
    pub fn save(&self, path: &Path) -> Result<(), MaskError> {
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("png") => ImageFormat::Png,
            _ => ImageFormat::Pnm,
        };
        if format == ImageFormat::Pnm {
            // P5 by hand: the pnm encoder picks the subtype from the extension inconsistently.
            let mut data = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
            data.extend(self.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
            return fs::write(path, data).map_err(|source| MaskError::Io {
                path: path.to_path_buf(),
                source,
            });
        }
        self.to_gray_image()
            .save_with_format(path, format)
            .map_err(|source| MaskError::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// Per-frame masks from one camera, all of the same size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilhouetteSequence {
    frames: Vec<SilhouetteMask>,
}

impl SilhouetteSequence {
    pub fn new(frames: Vec<SilhouetteMask>) -> Result<Self, MaskError> {
        let first = frames.first().ok_or(MaskError::EmptySequence)?;
        let (w, h) = (first.width, first.height);
        for (index, f) in frames.iter().enumerate() {
            if f.width != w || f.height != h {
                return Err(MaskError::DimensionMismatch {
                    index,
                    got_w: f.width,
                    got_h: f.height,
                    want_w: w,
                    want_h: h,
                });
            }
        }
        Ok(Self { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[SilhouetteMask] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &SilhouetteMask {
        &self.frames[t]
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    /// Loads a sequence directory. Uses `manifest.txt` when present, otherwise
    /// every `frame_*.pgm` / `frame_*.png` in lexicographic order.
    pub fn load_dir(dir: &Path) -> Result<Self, MaskError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| MaskError::Io { path, source }
        };
        let manifest = dir.join(MANIFEST_NAME);
        let files: Vec<PathBuf> = if manifest.exists() {
            fs::read_to_string(&manifest)
                .map_err(io_err(&manifest))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| dir.join(l))
                .collect()
        } else {
            let mut v: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(io_err(dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    name.starts_with("frame_") && (name.ends_with(".pgm") || name.ends_with(".png"))
                })
                .collect();
            v.sort();
            v
        };
        let frames = files
            .iter()
            .map(|p| SilhouetteMask::load(p))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(frames)
    }

    /// Writes `frame_000001.<ext>` ... and the manifest into `dir`.
    pub fn save_dir(&self, dir: &Path, ext: &str) -> Result<(), MaskError> {
        fs::create_dir_all(dir).map_err(|source| MaskError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut manifest = String::new();
        for (i, f) in self.frames.iter().enumerate() {
            let name = format!("frame_{:06}.{ext}", i + 1);
            f.save(&dir.join(&name))?;
            manifest.push_str(&name);
            manifest.push('\n');
        }
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, manifest).map_err(|source| MaskError::Io { path, source })
    }
}
