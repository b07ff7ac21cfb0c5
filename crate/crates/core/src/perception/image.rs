//! Depth images, boolean masks, and grayscale dumps.

use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder};
use serde::{Deserialize, Serialize};

/// Per-pixel depth along the camera z axis, meters; 0 = no return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub fn zeros(width: u32, height: u32) -> Self {
        DepthImage {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.data[v as usize * self.width as usize + u as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            data: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut m = Mask::empty(width, height);
        for v in 0..height {
            for u in 0..width {
                m.data[(v * width + u) as usize] = f(u, v);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> bool {
        self.data[v as usize * self.width as usize + u as usize]
    }

    /// Out-of-bounds coordinates read as unset.
    #[inline]
    pub fn get_signed(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as u32) < self.width && (v as u32) < self.height && self.get(u as u32, v as u32)
    }

    pub fn set(&mut self, u: u32, v: u32, on: bool) {
        let i = v as usize * self.width as usize + u as usize;
        self.data[i] = on;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|b| *b)
    }

    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }

    /// Inclusive pixel bounds (u0, v0, u1, v1).
    pub fn bbox(&self) -> Option<(u32, u32, u32, u32)> {
        self.pixels().fold(None, |acc, (u, v)| match acc {
            None => Some((u, v, u, v)),
            Some((a, b, c, d)) => Some((a.min(u), b.min(v), c.max(u), d.max(v))),
        })
    }

    pub fn intersection(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn iou(&self, other: &Mask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.data.iter().zip(&other.data) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data.iter().zip(&other.data).all(|(a, b)| !*a || *b)
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|b| if *b { 255 } else { 0 }).collect(),
        )
        .expect("buffer matches dimensions")
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Mask {
            width: img.width(),
            height: img.height(),
            data: img.as_raw().iter().map(|p| *p >= 128).collect(),
        }
    }

    pub fn save_pgm(&self, path: &Path) -> std::io::Result<()> {
        write_pgm(path, self.width, self.height, &self.to_gray().into_raw())
    }

    pub fn load_pgm(path: &Path) -> Result<Self, image::ImageError> {
        Ok(Mask::from_gray(&image::open(path)?.to_luma8()))
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self, image::ImageError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Pnm)?;
        Ok(Mask::from_gray(&img.to_luma8()))
    }
}

/// Binary PGM (P5) writer.
pub fn write_pgm(path: &Path, width: u32, height: u32, pixels: &[u8]) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(pixels, width, height, ExtendedColorType::L8)
        .map_err(std::io::Error::other)?;
    out.flush()
}

/// Scale non-negative values to 0..=255 and write them as a PGM.
pub fn write_heatmap(path: &Path, width: u32, height: u32, values: &[f64]) -> std::io::Result<()> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let px: Vec<u8> = values
        .iter()
        .map(|v| if max > 0.0 { (v / max * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 })
        .collect();
    write_pgm(path, width, height, &px)
}
