//! IDX image and label files (the MNIST distribution format).
//!
//! Header: a big-endian `u32` magic (`0x00000803` for 3-d unsigned-byte
//! image arrays, `0x00000801` for 1-d label arrays) followed by one big-endian
//! `u32` per dimension, then the unsigned bytes in row-major order.

use std::path::Path;

use shellvae_core::Matrix;

use crate::error::{io_err, Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    match bytes.get(at..at + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: (at + 4) as u64,
            actual: bytes.len() as u64,
        }),
    }
}

fn header(bytes: &[u8], magic: u32, ndims: usize, path: &Path) -> Result<Vec<usize>> {
    let actual = read_u32(bytes, 0, path)?;
    if actual != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            actual,
        });
    }
    (0..ndims)
        .map(|k| read_u32(bytes, 4 + 4 * k, path).map(|v| v as usize))
        .collect()
}

fn body<'a>(bytes: &'a [u8], offset: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    let end = offset + len;
    if bytes.len() < end {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: end as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(&bytes[offset..end])
}

/// Images flattened row-major, one per row, scaled by 1/255.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let dims = header(bytes, IMAGE_MAGIC, 3, path)?;
    let (count, pixels) = (dims[0], dims[1] * dims[2]);
    let raw = body(bytes, 16, count * pixels, path)?;
    let values = raw.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Matrix::new(count, pixels, values)?)
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let count = header(bytes, LABEL_MAGIC, 1, path)?[0];
    Ok(body(bytes, 8, count, path)?.to_vec())
}

/// Reads an image file and, optionally, its label file.
pub fn load_idx(images: &Path, labels: Option<&Path>) -> Result<(Matrix, Option<Vec<u8>>)> {
    let data = parse_images(&std::fs::read(images).map_err(io_err(images))?, images)?;
    let labels = match labels {
        None => None,
        Some(p) => {
            let l = parse_labels(&std::fs::read(p).map_err(io_err(p))?, p)?;
            if l.len() != data.rows() {
                return Err(Error::CountMismatch {
                    images: data.rows(),
                    labels: l.len(),
                });
            }
            Some(l)
        }
    };
    Ok((data, labels))
}

#[cfg(test)]
pub(crate) fn encode_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for v in [IMAGE_MAGIC, count, rows, cols] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("fixture")
    }

    #[test]
    fn two_image_fixture() {
        let bytes = encode_images(2, 2, 2, &[0, 255, 128, 64, 0, 255, 128, 64]);
        let m = parse_images(&bytes, p()).unwrap();
        assert_eq!(m.shape(), (2, 4));
        for r in m.iter_rows() {
            assert_eq!(r, &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        }
        assert!((m.get(0, 2) - 0.50196).abs() < 1e-5);
        assert!((m.get(0, 3) - 0.25098).abs() < 1e-5);
    }

    #[test]
    fn wrong_magic_names_both_values() {
        let mut bytes = encode_images(1, 1, 1, &[7]);
        bytes[3] = 0x01;
        match parse_images(&bytes, p()) {
            Err(Error::BadMagic { expected, actual, .. }) => {
                assert_eq!(expected, IMAGE_MAGIC);
                assert_eq!(actual, LABEL_MAGIC);
            }
            other => panic!("{other:?}"),
        }
        let msg = parse_images(&bytes, p()).unwrap_err().to_string();
        assert!(msg.contains("0x00000803") && msg.contains("0x00000801"), "{msg}");
    }

    #[test]
    fn truncation_is_its_own_error() {
        let bytes = encode_images(2, 2, 2, &[1, 2, 3]);
        assert!(matches!(
            parse_images(&bytes, p()),
            Err(Error::Truncated { expected: 24, actual: 19, .. })
        ));
        assert!(matches!(parse_images(&[0, 0], p()), Err(Error::Truncated { .. })));
        assert!(matches!(parse_images(&[], p()), Err(Error::Truncated { .. })));
    }

    #[test]
    fn zero_images_is_empty_matrix() {
        let m = parse_images(&encode_images(0, 28, 28, &[]), p()).unwrap();
        assert_eq!(m.shape(), (0, 784));
    }

    #[test]
    fn values_in_unit_interval() {
        let pixels: Vec<u8> = (0..=255).collect();
        let m = parse_images(&encode_images(4, 8, 8, &pixels), p()).unwrap();
        assert!(m.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn label_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        std::fs::write(&img, encode_images(2, 1, 1, &[1, 2])).unwrap();
        let mut l = Vec::new();
        for v in [LABEL_MAGIC, 3] {
            l.extend_from_slice(&v.to_be_bytes());
        }
        l.extend_from_slice(&[0, 1, 2]);
        std::fs::write(&lab, &l).unwrap();
        assert!(matches!(
            load_idx(&img, Some(&lab)),
            Err(Error::CountMismatch { images: 2, labels: 3 })
        ));
        l.truncate(10);
        l[7] = 2;
        std::fs::write(&lab, &l).unwrap();
        let (m, labels) = load_idx(&img, Some(&lab)).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(labels.unwrap(), vec![0, 1]);
    }
}
