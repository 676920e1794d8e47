//! Frame ingestion, grayscale conversion, raster output and the binary
//! tensor checkpoint format.
//!
//! Binary tensor layout (all integers and reals little-endian):
//!
//! ```text
//! magic    8 bytes   "DTENSOR1"
//! order    u64       number of modes
//! extents  u64 × order
//! values   f64 × product(extents), row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use rayon::prelude::*;

use crate::engine::BackgroundFrame;
use crate::error::{Error, Result};
use crate::mrf::ForegroundMask;
use crate::tensor::{DenseTensor, Matrix};

pub const TENSOR_MAGIC: &[u8; 8] = b"DTENSOR1";

/// BT.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

const IMAGE_EXTENSIONS: &[&str] = &["png", "ppm", "pgm", "pbm", "pnm"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceSource {
    /// Every raster file in the directory, sorted by file name.
    Directory(PathBuf),
    /// Text file listing one image path per line. Relative paths resolve
    /// against the manifest's directory; blank lines and `#` comments are
    /// skipped.
    Manifest(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequenceSpec {
    pub source: SequenceSource,
    pub max_frames: Option<usize>,
}

impl FrameSequenceSpec {
    pub fn directory(dir: impl Into<PathBuf>) -> Self {
        Self {
            source: SequenceSource::Directory(dir.into()),
            max_frames: None,
        }
    }

    pub fn manifest(file: impl Into<PathBuf>) -> Self {
        Self {
            source: SequenceSource::Manifest(file.into()),
            max_frames: None,
        }
    }

    /// Picks a manifest when `path` is a file and a directory otherwise.
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        if path.is_file() {
            Self::manifest(path)
        } else {
            Self::directory(path)
        }
    }

    pub fn with_max_frames(mut self, max_frames: Option<usize>) -> Self {
        self.max_frames = max_frames;
        self
    }

    /// Resolves the ordered list of frame files.
    pub fn resolve(&self) -> Result<Vec<PathBuf>> {
        let mut paths = match &self.source {
            SequenceSource::Directory(dir) => list_images(dir)?,
            SequenceSource::Manifest(file) => read_manifest(file)?,
        };
        if let Some(cap) = self.max_frames {
            paths.truncate(cap);
        }
        if paths.is_empty() {
            let origin = match &self.source {
                SequenceSource::Directory(p) | SequenceSource::Manifest(p) => p.clone(),
            };
            return Err(Error::Ingestion {
                path: origin,
                reason: "no frames found".into(),
            });
        }
        Ok(paths)
    }
}

/// Lists raster files of a directory in file-name order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Ingestion {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false);
        if is_image && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

fn read_manifest(file: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(file).map_err(|e| Error::Ingestion {
        path: file.to_path_buf(),
        reason: e.to_string(),
    })?;
    let base = file.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = PathBuf::from(l);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        })
        .collect())
}

struct DecodedFrame {
    width: usize,
    height: usize,
    /// Interleaved RGB in [0, 1].
    rgb: Vec<f64>,
}

fn decode(path: &Path) -> Result<DecodedFrame> {
    let img = image::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let rgb = match &img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => img
            .to_luma8()
            .into_raw()
            .into_iter()
            .flat_map(|v| [f64::from(v) / 255.0; 3])
            .collect(),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => img
            .to_luma16()
            .into_raw()
            .into_iter()
            .flat_map(|v| [f64::from(v) / 65535.0; 3])
            .collect(),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => img
            .to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 65535.0)
            .collect(),
        _ => img
            .to_rgb8()
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 255.0)
            .collect(),
    };
    Ok(DecodedFrame { width, height, rgb })
}

/// Loads an ordered image sequence as a `(height, width, 3, frames)` tensor.
pub fn load_sequence(spec: &FrameSequenceSpec) -> Result<DenseTensor> {
    let paths = spec.resolve()?;
    load_frames(&paths)
}

pub fn load_frames(paths: &[PathBuf]) -> Result<DenseTensor> {
    if paths.is_empty() {
        return Err(Error::invalid("no frame files given"));
    }
    let decoded: Vec<DecodedFrame> = paths
        .par_iter()
        .map(|p| decode(p))
        .collect::<Result<_>>()?;
    let (h, w) = (decoded[0].height, decoded[0].width);
    for (frame, path) in decoded.iter().zip(paths) {
        if frame.height != h || frame.width != w {
            return Err(Error::Ingestion {
                path: path.clone(),
                reason: format!(
                    "frame is {}x{}, expected {}x{} like {}",
                    frame.width,
                    frame.height,
                    w,
                    h,
                    paths[0].display()
                ),
            });
        }
    }
    let n = decoded.len();
    let mut data = vec![0.0; h * w * 3 * n];
    data.par_chunks_mut(3 * n).enumerate().for_each(|(px, out)| {
        for (k, frame) in decoded.iter().enumerate() {
            for c in 0..3 {
                out[c * n + k] = frame.rgb[px * 3 + c];
            }
        }
    });
    DenseTensor::new(vec![h, w, 3, n], data)
}

/// Grayscale frame stack of shape `(height, width, frames)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayStack(DenseTensor);

impl GrayStack {
    pub fn new(tensor: DenseTensor) -> Result<Self> {
        if tensor.order() != 3 {
            return Err(Error::invalid(format!(
                "gray stack must be 3-order, got shape {:?}",
                tensor.shape()
            )));
        }
        Ok(Self(tensor))
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.0
    }

    pub fn height(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn frames(&self) -> usize {
        self.0.shape()[2]
    }

    /// Frame `k` as a contiguous vector in row-major pixel order.
    pub fn frame_vector(&self, k: usize) -> Vec<f64> {
        let n = self.frames();
        self.0.data().iter().skip(k).step_by(n).copied().collect()
    }

    /// All frames as contiguous vectors, `frames × pixels`.
    pub fn frame_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.frames()).map(|k| self.frame_vector(k)).collect()
    }
}

fn check_channels(t: &DenseTensor, order: usize) -> Result<()> {
    if t.order() != order || t.shape()[2] != 3 {
        return Err(Error::invalid(format!(
            "expected {order}-order tensor with 3 channels in mode 3, got shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

#[inline]
fn luma(r: f64, g: f64, b: f64) -> f64 {
    LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
}

/// Converts a `(h, w, 3, N)` video to its `(h, w, N)` luma stack.
pub fn to_gray(frames: &DenseTensor) -> Result<GrayStack> {
    check_channels(frames, 4)?;
    let s = frames.shape();
    let (h, w, n) = (s[0], s[1], s[3]);
    let src = frames.data();
    let mut data = vec![0.0; h * w * n];
    data.par_chunks_mut(n).enumerate().for_each(|(px, out)| {
        let base = px * 3 * n;
        for (k, o) in out.iter_mut().enumerate() {
            *o = luma(src[base + k], src[base + n + k], src[base + 2 * n + k]);
        }
    });
    GrayStack::new(DenseTensor::new(vec![h, w, n], data)?)
}

/// Luma of a single `(h, w, 3)` frame as an `h × w` matrix.
pub fn frame_to_gray(frame: &DenseTensor) -> Result<Matrix> {
    check_channels(frame, 3)?;
    let s = frame.shape();
    let d = frame.data();
    let data = d.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect();
    Matrix::new(s[0], s[1], data)
}

/// Copies frame `k` of a `(h, w, C, N)` tensor into a `(h, w, C)` tensor.
pub fn frame_slice(frames: &DenseTensor, k: usize) -> Result<DenseTensor> {
    if frames.order() != 4 || k >= frames.shape()[3] {
        return Err(Error::invalid(format!(
            "frame {k} not available in shape {:?}",
            frames.shape()
        )));
    }
    let s = frames.shape();
    let data = frames.data().iter().skip(k).step_by(s[3]).copied().collect();
    DenseTensor::new(vec![s[0], s[1], s[2]], data)
}

/// Builds a `(h, w, C, indices.len())` tensor from the listed frames, in
/// the given order.
pub fn gather_frames(frames: &DenseTensor, indices: &[usize]) -> Result<DenseTensor> {
    if frames.order() != 4 {
        return Err(Error::invalid("gather_frames needs a 4-order tensor"));
    }
    let s = frames.shape();
    let n = s[3];
    if indices.is_empty() || indices.iter().any(|&i| i >= n) {
        return Err(Error::invalid(format!(
            "frame indices {indices:?} invalid for {n} frames"
        )));
    }
    let m = indices.len();
    let src = frames.data();
    let mut data = vec![0.0; s[0] * s[1] * s[2] * m];
    data.par_chunks_mut(m).enumerate().for_each(|(p, out)| {
        for (o, &i) in out.iter_mut().zip(indices) {
            *o = src[p * n + i];
        }
    });
    DenseTensor::new(vec![s[0], s[1], s[2], m], data)
}

/// Something that can be written as a lossless raster image.
pub enum FrameRef<'a> {
    Background(&'a BackgroundFrame),
    Mask(&'a ForegroundMask),
}

impl<'a> From<&'a BackgroundFrame> for FrameRef<'a> {
    fn from(b: &'a BackgroundFrame) -> Self {
        FrameRef::Background(b)
    }
}

impl<'a> From<&'a ForegroundMask> for FrameRef<'a> {
    fn from(m: &'a ForegroundMask) -> Self {
        FrameRef::Mask(m)
    }
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes an RGB `(h, w, 3)` tensor as 8-bit image.
pub fn rgb_image(frame: &DenseTensor) -> Result<RgbImage> {
    check_channels(frame, 3)?;
    let s = frame.shape();
    let raw: Vec<u8> = frame.data().iter().map(|&v| quantize(v)).collect();
    Ok(ImageBuffer::<Rgb<u8>, _>::from_raw(s[1] as u32, s[0] as u32, raw)
        .expect("buffer length matches dimensions"))
}

pub fn mask_image(mask: &ForegroundMask) -> GrayImage {
    let raw = mask
        .labels()
        .iter()
        .map(|&on| if on { 255 } else { 0 })
        .collect();
    ImageBuffer::<Luma<u8>, _>::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer length matches dimensions")
}

/// Writes a background frame or a mask as PNG. Masks are black/white.
/// The file appears atomically.
pub fn save_frame<'a>(frame: impl Into<FrameRef<'a>>, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    let mut cursor = std::io::Cursor::new(&mut bytes);
    let encoded = match frame.into() {
        FrameRef::Background(b) => {
            rgb_image(b.tensor())?.write_to(&mut cursor, image::ImageFormat::Png)
        }
        FrameRef::Mask(m) => mask_image(m).write_to(&mut cursor, image::ImageFormat::Png),
    };
    encoded.map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    write_atomic(path, &bytes)
}

/// Reads an image as a `(h, w, 3)` background frame.
pub fn load_background(path: &Path) -> Result<BackgroundFrame> {
    let f = decode(path)?;
    BackgroundFrame::new(DenseTensor::new(vec![f.height, f.width, 3], f.rgb)?)
}

/// Reads a black/white mask image; any pixel whose luma exceeds 0.5 is
/// foreground.
pub fn load_mask(path: &Path) -> Result<ForegroundMask> {
    let f = decode(path)?;
    let labels = f
        .rgb
        .chunks_exact(3)
        .map(|p| luma(p[0], p[1], p[2]) > 0.5)
        .collect();
    ForegroundMask::new(f.height, f.width, labels)
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn encode_tensor(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * t.order() + 8 * t.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(t.order() as u64).to_le_bytes());
    for &e in t.shape() {
        out.extend_from_slice(&(e as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    let bad = |msg: &str| Error::Data(format!("malformed tensor file: {msg}"));
    if bytes.len() < 16 || &bytes[..8] != TENSOR_MAGIC {
        return Err(bad("missing magic"));
    }
    let word = |i: usize| -> Option<u64> {
        bytes
            .get(i..i + 8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
    };
    let order = word(8).ok_or_else(|| bad("truncated header"))? as usize;
    if order == 0 || order > crate::tensor::MAX_ORDER {
        return Err(bad("unsupported order"));
    }
    let mut shape = Vec::with_capacity(order);
    for m in 0..order {
        let e = word(16 + 8 * m).ok_or_else(|| bad("truncated extents"))?;
        shape.push(usize::try_from(e).map_err(|_| bad("extent overflow"))?);
    }
    let start = 16 + 8 * order;
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| bad("extent overflow"))?;
    if bytes.len() != start + 8 * len {
        return Err(bad("payload length does not match extents"));
    }
    let data = bytes[start..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    DenseTensor::new(shape, data)
}

pub fn write_tensor(t: &DenseTensor, path: &Path) -> Result<()> {
    write_atomic(path, &encode_tensor(t))
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(h: usize, w: usize, n: usize, rgb: [f64; 3]) -> DenseTensor {
        DenseTensor::from_fn(vec![h, w, 3, n], |i| rgb[i[2]]).unwrap()
    }

    #[test]
    fn gray_of_white_and_red() {
        let g = to_gray(&solid(2, 3, 2, [1.0, 1.0, 1.0])).unwrap();
        assert_eq!(g.tensor().shape(), &[2, 3, 2]);
        assert!(g.tensor().data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let g = to_gray(&solid(2, 2, 1, [1.0, 0.0, 0.0])).unwrap();
        assert!(g.tensor().data().iter().all(|&v| v == 0.299));
    }

    #[test]
    fn gray_of_equal_channels_is_identity() {
        let t = DenseTensor::from_fn(vec![3, 2, 3, 4], |i| ((i[0] * 7 + i[1] * 3 + i[3]) % 11) as f64 / 10.0)
            .unwrap();
        let g = to_gray(&t).unwrap();
        for y in 0..3 {
            for x in 0..2 {
                for k in 0..4 {
                    let v = t.get(&[y, x, 0, k]);
                    assert!((g.tensor().get(&[y, x, k]) - v).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn gray_rejects_wrong_channel_count() {
        let t = DenseTensor::zeros(vec![2, 2, 4, 1]).unwrap();
        assert!(to_gray(&t).is_err());
        assert!(to_gray(&DenseTensor::zeros(vec![2, 2, 3]).unwrap()).is_err());
    }

    #[test]
    fn tensor_codec_layout() {
        let t = DenseTensor::new(vec![1, 2], vec![1.5, -2.0]).unwrap();
        let b = encode_tensor(&t);
        assert_eq!(&b[..8], b"DTENSOR1");
        assert_eq!(&b[8..16], &2u64.to_le_bytes());
        assert_eq!(&b[16..24], &1u64.to_le_bytes());
        assert_eq!(&b[24..32], &2u64.to_le_bytes());
        assert_eq!(&b[32..40], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 48);
        assert_eq!(decode_tensor(&b).unwrap(), t);
        assert!(decode_tensor(&b[..47]).is_err());
        assert!(decode_tensor(b"NOTATENSOR000000").is_err());
    }

    #[test]
    fn gather_and_slice() {
        let t = DenseTensor::from_fn(vec![2, 2, 3, 4], |i| i[3] as f64 * 10.0 + i[2] as f64).unwrap();
        let g = gather_frames(&t, &[3, 1]).unwrap();
        assert_eq!(g.shape(), &[2, 2, 3, 2]);
        assert_eq!(g.get(&[1, 0, 2, 0]), 32.0);
        assert_eq!(g.get(&[1, 0, 2, 1]), 12.0);
        let s = frame_slice(&t, 2).unwrap();
        assert_eq!(s.get(&[0, 1, 1]), 21.0);
        assert!(gather_frames(&t, &[4]).is_err());
        assert!(frame_slice(&t, 4).is_err());
    }
}
