// SPDX-License-Identifier: Apache-2.0

//! IDX (MNIST-style) and binary PGM (P5) readers and writers.

use super::quality::GrayImage;
use crate::error::NnError;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, image-major.
    pub data: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.data.len() / (self.rows * self.cols).max(1)
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.data[i * n..(i + 1) * n]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, NnError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| NnError::Idx(format!("truncated header at byte {at}")))
}

fn payload(bytes: &[u8], header: usize, len: usize) -> Result<&[u8], NnError> {
    let got = bytes.len().saturating_sub(header);
    if got != len {
        return Err(NnError::Idx(format!(
            "expected {len} payload bytes, got {got}"
        )));
    }
    Ok(&bytes[header..])
}

pub fn read_idx_images(bytes: &[u8]) -> Result<IdxImages, NnError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(NnError::Idx(format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let data = payload(bytes, 16, n * rows * cols)?.to_vec();
    Ok(IdxImages { rows, cols, data })
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, NnError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(NnError::Idx(format!("bad label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, n)?.to_vec())
}

pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.data.len());
    for v in [
        IDX_IMAGES_MAGIC,
        images.count() as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.data);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn pgm_token(bytes: &[u8], pos: &mut usize) -> Result<usize, NnError> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(NnError::Pgm("truncated header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| NnError::Pgm(format!("expected a number at byte {start}")))
}

pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, NnError> {
    if !bytes.starts_with(b"P5") {
        return Err(NnError::Pgm("only binary P5 is supported".into()));
    }
    let mut pos = 2;
    let width = pgm_token(bytes, &mut pos)?;
    let height = pgm_token(bytes, &mut pos)?;
    let maxval = pgm_token(bytes, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(NnError::Pgm(format!("unsupported maxval {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(NnError::Pgm("missing separator after maxval".into()));
    }
    let data = &bytes[pos + 1..];
    if data.len() < width * height {
        return Err(NnError::Pgm(format!(
            "expected {} pixel bytes, got {}",
            width * height,
            data.len()
        )));
    }
    GrayImage::new(width, height, data[..width * height].to_vec())
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_images_layout() {
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3];
        bytes.extend(0..12u8);
        let imgs = read_idx_images(&bytes).unwrap();
        assert_eq!((imgs.count(), imgs.rows, imgs.cols), (2, 2, 3));
        assert_eq!(imgs.image(1), &[6, 7, 8, 9, 10, 11]);
        assert_eq!(write_idx_images(&imgs), bytes);
    }

    #[test]
    fn idx_labels_round_trip() {
        let labels = vec![7, 2, 1, 0, 4];
        let bytes = write_idx_labels(&labels);
        assert_eq!(&bytes[..8], &[0, 0, 8, 1, 0, 0, 0, 5]);
        assert_eq!(read_idx_labels(&bytes).unwrap(), labels);
    }

    #[test]
    fn idx_rejects_bad_input() {
        let labels = write_idx_labels(&[1, 2]);
        assert!(read_idx_images(&labels).is_err());
        assert!(read_idx_labels(&labels[..9]).is_err());
        assert!(read_idx_labels(&labels[..3]).is_err());
    }

    #[test]
    fn pgm_round_trip_and_comments() {
        let img = GrayImage::new(3, 2, vec![0, 1, 2, 253, 254, 255]).unwrap();
        let bytes = write_pgm(&img);
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(read_pgm(&bytes).unwrap(), img);

        let mut commented = b"P5\n# made by hand\n3 # width\n2\n255\n".to_vec();
        commented.extend_from_slice(&img.pixels);
        assert_eq!(read_pgm(&commented).unwrap(), img);
    }

    #[test]
    fn pgm_rejects_bad_input() {
        assert!(read_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(read_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(read_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(read_pgm(b"P5\n1").is_err());
    }
}
