//! Frame directories of 8-bit PNGs.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::tensor::VideoTensor;
use crate::error::{Error, Result};

fn ingest(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Sorted list of `*.png` files in `dir`.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(ingest(dir, "not a directory"));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ingest(dir, "no PNG frames found"));
    }
    Ok(files)
}

struct Image {
    width: usize,
    height: usize,
    channels: usize,
    bytes: Vec<u8>,
}

fn read_png(path: &Path) -> Result<Image> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(std::io::BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| ingest(path, e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ingest(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| ingest(path, e.to_string()))?;
    buf.truncate(info.buffer_size());
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(ingest(path, "unexpanded palette image")),
    };
    Ok(Image {
        width: info.width as usize,
        height: info.height as usize,
        channels,
        bytes: buf,
    })
}

/// Pixel `i` of `img` converted to `channels` output values in `[0, 1]`.
fn convert_pixel(img: &Image, i: usize, channels: usize, out: &mut Vec<f64>) {
    let px = &img.bytes[i * img.channels..(i + 1) * img.channels];
    let f = |b: u8| b as f64 / 255.0;
    match (img.channels, channels) {
        (1 | 2, 1) => out.push(f(px[0])),
        (1 | 2, 3) => out.extend([f(px[0]); 3]),
        (3 | 4, 3) => out.extend(px[..3].iter().map(|&b| f(b))),
        (3 | 4, 1) => out.push(0.299 * f(px[0]) + 0.587 * f(px[1]) + 0.114 * f(px[2])),
        _ => unreachable!("channel counts are validated"),
    }
}

/// Loads every PNG in `dir` (lexicographic order) as one frame.
pub fn load_frames(dir: &Path, channels: usize) -> Result<VideoTensor> {
    if channels != 1 && channels != 3 {
        return Err(Error::Config(format!("expected 1 or 3 channels, got {channels}")));
    }
    let files = list_pngs(dir)?;
    let mut dims = None;
    let mut data = Vec::new();
    for path in &files {
        let img = read_png(path)?;
        match dims {
            None => dims = Some((img.height, img.width)),
            Some(d) if d != (img.height, img.width) => {
                return Err(ingest(
                    path,
                    format!(
                        "frame is {}×{} but earlier frames are {}×{}",
                        img.height, img.width, d.0, d.1
                    ),
                ));
            }
            Some(_) => {}
        }
        for i in 0..img.width * img.height {
            convert_pixel(&img, i, channels, &mut data);
        }
    }
    let (h, w) = dims.expect("at least one frame");
    VideoTensor::new(files.len(), h, w, channels, data)
}

/// Loads single-channel mask PNGs (0 = unobserved, nonzero = observed).
pub fn load_mask(dir: &Path, video: &VideoTensor) -> Result<Vec<bool>> {
    let mask = load_frames(dir, 1)?;
    if (mask.frames(), mask.height(), mask.width()) != (video.frames(), video.height(), video.width()) {
        return Err(ingest(dir, "mask dimensions do not match the video"));
    }
    Ok(mask.data().iter().map(|&v| v > 0.0).collect())
}

pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn write_png(path: &Path, width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(if channels == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_compression(png::Compression::Balanced);
    encoder.set_filter(png::Filter::NoFilter);
    let mut writer = encoder.write_header().map_err(|e| ingest(path, e.to_string()))?;
    writer
        .write_image_data(bytes)
        .map_err(|e| ingest(path, e.to_string()))?;
    writer.finish().map_err(|e| ingest(path, e.to_string()))
}

/// Writes frames as `00000.png`, `00001.png`, … into `dir`.
pub fn save_frames(video: &VideoTensor, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for t in 0..video.frames() {
        let bytes: Vec<u8> = video.frame(t).iter().map(|&v| to_byte(v)).collect();
        let path = dir.join(format!("{t:05}.png"));
        write_png(&path, video.width(), video.height(), video.channels(), &bytes)?;
    }
    Ok(())
}

/// Writes a `[T × H × W]` mask as single-channel PNGs (255 = observed).
pub fn save_mask(mask: &[bool], frames: usize, height: usize, width: usize, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = height * width;
    for t in 0..frames {
        let bytes: Vec<u8> = mask[t * n..(t + 1) * n]
            .iter()
            .map(|&m| if m { 255 } else { 0 })
            .collect();
        write_png(&dir.join(format!("{t:05}.png")), width, height, 1, &bytes)?;
    }
    Ok(())
}
