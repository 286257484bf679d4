use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use super::{srgb_decode, ImageError, LinearImage, SrgbImage};

fn decode_err(path: &Path, reason: impl Into<String>) -> ImageError {
    ImageError::Decode { path: path.to_path_buf(), reason: reason.into() }
}

fn io_err(path: &Path, source: std::io::Error) -> ImageError {
    ImageError::Io { path: path.to_path_buf(), source }
}

/// Load an image as linear radiance.
///
/// PNG and JPEG are treated as sRGB-encoded 8-bit data and decoded through the
/// sRGB EOTF. Radiance `.hdr` files are already linear and are taken as is.
pub fn load_image(path: impl AsRef<Path>) -> Result<LinearImage, ImageError> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| io_err(path, e))?
        .with_guessed_format()
        .map_err(|e| io_err(path, e))?;
    let format = reader.format().ok_or_else(|| {
        decode_err(path, "unrecognized image format (expected PNG, JPEG or Radiance HDR)")
    })?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg | ImageFormat::Hdr) {
        return Err(decode_err(
            path,
            format!("unsupported format {format:?} (expected PNG, JPEG or Radiance HDR)"),
        ));
    }
    let decoded = reader
        .decode()
        .map_err(|e| decode_err(path, format!("{format:?} decode failed: {e}")))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match format {
        ImageFormat::Hdr => {
            let rgb = match decoded {
                DynamicImage::ImageRgb32F(buf) => buf,
                other => other.into_rgb32f(),
            };
            LinearImage::new(w, h, rgb.into_raw())
                .map_err(|e| decode_err(path, format!("invalid radiance data: {e}")))
        }
        _ => {
            let srgb = SrgbImage::new(w, h, decoded.into_rgb8().into_raw())
                .map_err(|e| decode_err(path, e.to_string()))?;
            Ok(srgb_decode(&srgb))
        }
    }
}

/// Load an 8-bit image without linearization.
pub fn load_srgb(path: impl AsRef<Path>) -> Result<SrgbImage, ImageError> {
    let path = path.as_ref();
    let decoded = ImageReader::open(path)
        .map_err(|e| io_err(path, e))?
        .with_guessed_format()
        .map_err(|e| io_err(path, e))?
        .decode()
        .map_err(|e| decode_err(path, e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    SrgbImage::new(w, h, decoded.into_rgb8().into_raw()).map_err(|e| decode_err(path, e.to_string()))
}

pub fn save_png(img: &SrgbImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::Rgb8,
        ImageFormat::Png,
    )
    .map_err(|e| decode_err(path, format!("PNG encode failed: {e}")))
}

/// Write the flat debug layout: `u32` width, `u32` height, then row-major RGB
/// `f32` values, all little-endian.
pub fn write_raw(img: &LinearImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |bytes: &[u8]| out.write_all(bytes).map_err(|e| io_err(path, e));
    write(&(img.width() as u32).to_le_bytes())?;
    write(&(img.height() as u32).to_le_bytes())?;
    for v in img.data() {
        write(&v.to_le_bytes())?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<LinearImage, ImageError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;
    if bytes.len() < 8 {
        return Err(decode_err(path, "raw dump shorter than its 8-byte header"));
    }
    let w = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != w * h * 12 {
        return Err(decode_err(path, format!("raw dump body is {} bytes, expected {}", body.len(), w * h * 12)));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LinearImage::new(w, h, data).map_err(|e| decode_err(path, e.to_string()))
}
