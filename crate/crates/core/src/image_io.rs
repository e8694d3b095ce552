//! Image ingestion: binary PPM (`P6`, 8-bit) and the raw `USTI` float
//! format, plus the centre-crop / area-resize used before extraction.

use std::fs;
use std::path::Path;

use crate::codec::{put_u32, put_u64, ByteReader};
use crate::error::{Result, UstError};
use crate::features::ImageTensor;

const USTI_MAGIC: &[u8; 4] = b"USTI";
const USTI_VERSION: u32 = 1;

/// `USTI`: magic, version `u32`, height/width/channels `u64`, then planar
/// little-endian `f32` values.
pub fn encode_usti(img: &ImageTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 4 * img.values().len());
    out.extend_from_slice(USTI_MAGIC);
    put_u32(&mut out, USTI_VERSION);
    put_u64(&mut out, img.height() as u64);
    put_u64(&mut out, img.width() as u64);
    put_u64(&mut out, img.channels() as u64);
    for v in img.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_usti(buf: &[u8]) -> Result<ImageTensor> {
    let mut r = ByteReader::new(buf, "USTI image");
    r.expect_magic(USTI_MAGIC)?;
    r.expect_version(USTI_VERSION)?;
    let h = r.len()?;
    let w = r.len()?;
    let c = r.len()?;
    let count = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| r.overflow())?;
    let values = r.f32_vec(count)?;
    r.finish()?;
    ImageTensor::new(h, w, c, values.into_iter().map(f64::from).collect())
        .map_err(|e| UstError::Format(format!("USTI image: {e}")))
}

/// Binary PPM with maxval 255.
pub fn encode_ppm(img: &ImageTensor) -> Result<Vec<u8>> {
    if img.channels() != 3 {
        return Err(UstError::InvalidInput(format!(
            "PPM needs 3 channels, image has {}",
            img.channels()
        )));
    }
    let (h, w) = (img.height(), img.width());
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * h * w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out.push((img.get(c, y, x) * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}

fn ppm_token<'a>(buf: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < buf.len() && buf[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < buf.len() && buf[*pos] == b'#' {
            while *pos < buf.len() && buf[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < buf.len() && !buf[*pos].is_ascii_whitespace() && buf[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(UstError::Format("PPM: truncated header".into()));
    }
    Ok(&buf[start..*pos])
}

fn ppm_number(buf: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = ppm_token(buf, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            UstError::Format(format!(
                "PPM: bad header field {:?}",
                String::from_utf8_lossy(tok)
            ))
        })
}

pub fn decode_ppm(buf: &[u8]) -> Result<ImageTensor> {
    let mut pos = 0;
    if ppm_token(buf, &mut pos)? != b"P6" {
        return Err(UstError::Format("PPM: only binary P6 is supported".into()));
    }
    let w = ppm_number(buf, &mut pos)?;
    let h = ppm_number(buf, &mut pos)?;
    let maxval = ppm_number(buf, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(UstError::Format(format!(
            "PPM: maxval {maxval} is not 8-bit"
        )));
    }
    if w == 0 || h == 0 {
        return Err(UstError::Format("PPM: empty image".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(3))
        .ok_or_else(|| UstError::Format("PPM: size overflow".into()))?;
    let raster = buf
        .get(pos..)
        .filter(|r| r.len() >= n)
        .ok_or_else(|| UstError::Format("PPM: truncated raster".into()))?;
    let scale = maxval as f64;
    let plane = h * w;
    let mut values = vec![0.0; 3 * plane];
    for (i, px) in raster[..n].chunks_exact(3).enumerate() {
        for c in 0..3 {
            values[c * plane + i] = (px[c] as f64 / scale).min(1.0);
        }
    }
    ImageTensor::new(h, w, 3, values)
}

/// Reads a PPM or USTI image, chosen by magic bytes.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let buf = fs::read(path)?;
    if buf.starts_with(USTI_MAGIC) {
        decode_usti(&buf)
    } else if buf.starts_with(b"P6") {
        decode_ppm(&buf)
    } else {
        Err(UstError::Format(
            "unrecognised image format (expected P6 PPM or USTI)".into(),
        ))
    }
}

/// Writes `.ppm` paths as PPM and anything else as USTI.
pub fn save_image(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
    {
        encode_ppm(img)?
    } else {
        encode_usti(img)
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Largest centred square.
pub fn center_crop_square(img: &ImageTensor) -> ImageTensor {
    let side = img.height().min(img.width());
    let y0 = (img.height() - side) / 2;
    let x0 = (img.width() - side) / 2;
    let mut values = Vec::with_capacity(side * side * img.channels());
    for c in 0..img.channels() {
        for y in 0..side {
            for x in 0..side {
                values.push(img.get(c, y0 + y, x0 + x));
            }
        }
    }
    ImageTensor::new(side, side, img.channels(), values).expect("crop of a valid image")
}

/// For each output cell, the input cells it overlaps and their fractional
/// weights (summing to 1).
fn area_weights(input: usize, output: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(input);
            (first..last)
                .filter_map(|i| {
                    let overlap = hi.min((i + 1) as f64) - lo.max(i as f64);
                    (overlap > 0.0).then_some((i, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Area-averaging resize (box filter with fractional coverage).
pub fn resize_area(img: &ImageTensor, out_h: usize, out_w: usize) -> Result<ImageTensor> {
    if out_h == 0 || out_w == 0 {
        return Err(UstError::InvalidInput(
            "resize target must be positive".into(),
        ));
    }
    let rows = area_weights(img.height(), out_h);
    let cols = area_weights(img.width(), out_w);
    let mut values = Vec::with_capacity(out_h * out_w * img.channels());
    for c in 0..img.channels() {
        for ry in &rows {
            for cx in &cols {
                let mut acc = 0.0;
                for &(y, wy) in ry {
                    for &(x, wx) in cx {
                        acc += wy * wx * img.get(c, y, x);
                    }
                }
                values.push(acc.clamp(0.0, 1.0));
            }
        }
    }
    ImageTensor::new(out_h, out_w, img.channels(), values)
}

/// Centre-crop to a square, then area-resize to `side x side`.
pub fn crop_and_resize(img: &ImageTensor, side: usize) -> Result<ImageTensor> {
    let square = center_crop_square(img);
    if square.height() == side {
        return Ok(square);
    }
    resize_area(&square, side, side)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(h: usize, w: usize) -> ImageTensor {
        let mut values = Vec::new();
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    values.push(((c * 7 + y * 3 + x) % 256) as f64 / 255.0);
                }
            }
        }
        ImageTensor::new(h, w, 3, values).unwrap()
    }

    #[test]
    fn ppm_round_trip_is_exact_for_8bit_values() {
        let img = gradient(5, 9);
        let back = decode_ppm(&encode_ppm(&img).unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn ppm_header_with_comments() {
        let mut bytes = b"P6 # made by hand\n2 1\n# depth\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!((img.height(), img.width()), (1, 2));
        assert_eq!(img.get(0, 0, 0), 1.0);
        assert_eq!(img.get(2, 0, 1), 1.0);
        assert_eq!(img.get(1, 0, 1), 0.0);
    }

    #[test]
    fn ppm_rejects_bad_input() {
        assert!(decode_ppm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(decode_ppm(b"P6\n2 2\n255\n\x00\x00").is_err());
        assert!(decode_ppm(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00").is_err());
        assert!(decode_ppm(b"P6\n1").is_err());
    }

    #[test]
    fn usti_round_trip_for_f32_values() {
        let img = ImageTensor::new(2, 2, 1, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let bytes = encode_usti(&img);
        assert_eq!(&bytes[..4], b"USTI");
        assert_eq!(bytes.len(), 4 + 4 + 24 + 16);
        assert_eq!(decode_usti(&bytes).unwrap(), img);
        assert!(decode_usti(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn usti_rejects_out_of_range() {
        let mut bytes = encode_usti(&ImageTensor::new(1, 1, 1, vec![0.5]).unwrap());
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(decode_usti(&bytes), Err(UstError::Format(_))));
    }

    #[test]
    fn crop_takes_the_centre() {
        let img = gradient(4, 8);
        let sq = center_crop_square(&img);
        assert_eq!((sq.height(), sq.width()), (4, 4));
        assert_eq!(sq.get(1, 2, 0), img.get(1, 2, 2));
    }

    #[test]
    fn area_resize_averages_blocks() {
        let img = ImageTensor::new(2, 2, 1, vec![0.0, 1.0, 0.5, 0.5]).unwrap();
        let one = resize_area(&img, 1, 1).unwrap();
        assert_eq!(one.values(), &[0.5]);
        let up = resize_area(&img, 4, 4).unwrap();
        assert_eq!(up.get(0, 0, 0), 0.0);
        assert_eq!(up.get(0, 0, 3), 1.0);
        assert_eq!(up.get(0, 3, 3), 0.5);
    }

    #[test]
    fn area_resize_preserves_mean() {
        let img = gradient(9, 9);
        let small = resize_area(&img, 4, 4).unwrap();
        let mean = |im: &ImageTensor| im.values().iter().sum::<f64>() / im.values().len() as f64;
        assert!((mean(&img) - mean(&small)).abs() < 1e-12);
    }
}
