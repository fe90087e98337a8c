//! Image and raw-field files.
//!
//! Raw fields (`.tfd`): magic `TFD1`, then height, width and channels as
//! little-endian `u32`, then row-major channel-interleaved little-endian
//! `f32` values. PNGs carry 8-bit optical RGB, 16-bit grayscale thermal,
//! 8-bit region labels (16-bit once a scene has more than 255 regions) and
//! 1-bit boundary masks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thermsr_core::loss::RegionMasks;
use thermsr_core::{FeatureMap, Scalar};

use crate::error::{Error, Result};

pub const TFD_MAGIC: &[u8; 4] = b"TFD1";

pub fn encode_tfd<T: Scalar>(map: &FeatureMap<T>) -> Vec<u8> {
    let (h, w, c) = map.shape();
    let mut out = Vec::with_capacity(16 + 4 * map.data().len());
    out.extend_from_slice(TFD_MAGIC);
    for d in [h, w, c] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in map.data() {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn decode_tfd<T: Scalar>(bytes: &[u8], path: &Path) -> Result<FeatureMap<T>> {
    if bytes.len() < 16 || &bytes[..4] != TFD_MAGIC {
        return Err(Error::format(path, "missing TFD1 header"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let n = h.checked_mul(w).and_then(|v| v.checked_mul(c)).ok_or_else(|| Error::format(path, "dimensions overflow"))?;
    if bytes.len() != 16 + 4 * n {
        return Err(Error::format(path, format!("{h}x{w}x{c} field needs {} payload bytes, found {}", 4 * n, bytes.len() - 16)));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|b| T::lit(f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64))
        .collect();
    FeatureMap::new(h, w, c, data).map_err(|e| Error::format(path, e))
}

pub fn write_tfd<T: Scalar>(path: &Path, map: &FeatureMap<T>) -> Result<()> {
    std::fs::write(path, encode_tfd(map)).map_err(|e| Error::io(path, e))
}

pub fn read_tfd<T: Scalar>(path: &Path) -> Result<FeatureMap<T>> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    decode_tfd(&bytes, path)
}

fn write_png(path: &Path, w: usize, h: usize, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    let mut writer = enc.write_header().map_err(|e| Error::io(path, e))?;
    writer.write_image_data(data).map_err(|e| Error::io(path, e))?;
    writer.finish().map_err(|e| Error::io(path, e))
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// 8-bit RGB of a 3-channel map with values on `[0, 1]`.
pub fn write_png_rgb8<T: Scalar>(path: &Path, map: &FeatureMap<T>) -> Result<()> {
    let (h, w, c) = map.shape();
    if c != 3 {
        return Err(Error::format(path, format!("RGB PNG needs 3 channels, got {c}")));
    }
    let data: Vec<u8> = map.data().iter().map(|v| to_u8(v.as_f64())).collect();
    write_png(path, w, h, png::ColorType::Rgb, png::BitDepth::Eight, &data)
}

/// 16-bit grayscale of the luminance (channel mean) on `[0, 1]`.
pub fn write_png_gray16<T: Scalar>(path: &Path, map: &FeatureMap<T>) -> Result<()> {
    let (h, w, _) = map.shape();
    let lum = map.luminance();
    let data: Vec<u8> = lum.data().iter().flat_map(|v| to_u16(v.as_f64()).to_be_bytes()).collect();
    write_png(path, w, h, png::ColorType::Grayscale, png::BitDepth::Sixteen, &data)
}

/// Region labels: 0 unassigned, `1..=K` region id.
pub fn write_label_png(path: &Path, masks: &RegionMasks) -> Result<()> {
    let (h, w) = (masks.height(), masks.width());
    if masks.region_count() <= u8::MAX as usize {
        let data: Vec<u8> = masks.labels().iter().map(|&l| l as u8).collect();
        write_png(path, w, h, png::ColorType::Grayscale, png::BitDepth::Eight, &data)
    } else {
        let data: Vec<u8> = masks.labels().iter().flat_map(|l| l.to_be_bytes()).collect();
        write_png(path, w, h, png::ColorType::Grayscale, png::BitDepth::Sixteen, &data)
    }
}

pub fn write_boundary_png(path: &Path, masks: &RegionMasks) -> Result<()> {
    let (h, w) = (masks.height(), masks.width());
    let stride = w.div_ceil(8);
    let mut data = vec![0u8; stride * h];
    for (i, &b) in masks.boundary().iter().enumerate() {
        if b {
            let (y, x) = (i / w, i % w);
            data[y * stride + x / 8] |= 0x80 >> (x % 8);
        }
    }
    write_png(path, w, h, png::ColorType::Grayscale, png::BitDepth::One, &data)
}

/// A decoded grayscale or RGB PNG, expanded to samples on `[0, 1]`.
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Sample values in `[0, max]`.
    pub samples: Vec<u32>,
    pub max: u32,
}

pub fn read_png(path: &Path) -> Result<Image> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(|e| Error::format(path, e))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(Error::format(path, format!("unsupported PNG colour type {other:?}"))),
    };
    let bits = info.bit_depth as u32;
    let per_row = w * channels;
    let mut samples = Vec::with_capacity(per_row * h);
    for y in 0..h {
        let row = &buf[y * info.line_size..(y + 1) * info.line_size];
        for i in 0..per_row {
            let s = match bits {
                16 => u16::from_be_bytes([row[2 * i], row[2 * i + 1]]) as u32,
                8 => row[i] as u32,
                _ => {
                    let bit = i * bits as usize;
                    ((row[bit / 8] >> (8 - bits as usize - bit % 8)) & ((1u16 << bits) - 1) as u8) as u32
                }
            };
            samples.push(s);
        }
    }
    Ok(Image { width: w, height: h, channels, samples, max: (1u32 << bits) - 1 })
}

impl Image {
    /// Values scaled to `[0, 1]`; grayscale is replicated to 3 channels.
    pub fn to_rgb_map<T: Scalar>(&self) -> FeatureMap<T> {
        let scale = 1.0 / self.max as f64;
        FeatureMap::from_fn(self.height, self.width, 3, |y, x, c| {
            let ch = if self.channels == 1 { 0 } else { c };
            T::lit(self.samples[(y * self.width + x) * self.channels + ch] as f64 * scale)
        })
    }
}

pub fn read_masks(labels: &Path, boundary: &Path, source_id: &str) -> Result<RegionMasks> {
    let l = read_png(labels)?;
    let b = read_png(boundary)?;
    if l.channels != 1 || b.channels != 1 || (l.width, l.height) != (b.width, b.height) {
        return Err(Error::format(labels, "label and boundary images must be single-channel and the same size"));
    }
    let lab: Vec<u16> = l.samples.iter().map(|&s| s as u16).collect();
    let bnd: Vec<bool> = b.samples.iter().map(|&s| s != 0).collect();
    RegionMasks::new(l.height, l.width, lab, bnd, source_id).map_err(|e| Error::format(labels, e))
}

/// Loads a raw field or a PNG as a 3-channel map.
pub fn read_image<T: Scalar>(path: &Path) -> Result<FeatureMap<T>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tfd") => read_tfd(path),
        Some("png") => Ok(read_png(path)?.to_rgb_map()),
        _ => Err(Error::format(path, "expected a .tfd or .png file")),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
