//! Grayscale PFM depth maps.
//!
//! Background pixels are written as `0.0`, so a lone PFM carries its own
//! mask (non-positive = background). A second PFM may carry an explicit
//! mask where values `> 0.5` are foreground.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::DepthMap;

/// Encode a single-channel image, rows stored bottom-to-top as PFM requires.
pub fn encode_pfm(width: usize, height: usize, data: &[f32]) -> Vec<u8> {
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(data.len() * 4);
    for row in (0..height).rev() {
        for x in &data[row * width..(row + 1) * width] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Decode a single-channel PFM into top-to-bottom row-major data.
pub fn decode_pfm(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    // Header: three whitespace-separated tokens, then one whitespace byte.
    let mut tokens = Vec::with_capacity(4);
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("truncated PFM header"));
        }
        tokens.push(
            std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| Error::format("non-ASCII PFM header"))?,
        );
    }
    pos += 1;
    match tokens[0] {
        "Pf" => {}
        "PF" => return Err(Error::format("color PFM is not a depth map")),
        other => return Err(Error::format(format!("bad PFM magic {other:?}"))),
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(format!("bad PFM dimension {s:?}")))
    };
    let width = parse_dim(tokens[1])?;
    let height = parse_dim(tokens[2])?;
    let scale: f32 = tokens[3]
        .parse()
        .map_err(|_| Error::format(format!("bad PFM scale {:?}", tokens[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format("PFM scale must be non-zero"));
    }
    let little = scale < 0.0;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::corruption("PFM dimensions overflow"))?;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() != n * 4 {
        return Err(Error::corruption(format!(
            "PFM {width}x{height} needs {} payload bytes, found {}",
            n * 4,
            payload.len()
        )));
    }
    let mut data = vec![0.0f32; n];
    for (k, c) in payload.chunks_exact(4).enumerate() {
        let raw = [c[0], c[1], c[2], c[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let file_row = k / width;
        let col = k % width;
        data[(height - 1 - file_row) * width + col] = v;
    }
    Ok((width, height, data))
}

pub fn write_depth_pfm(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let data: Vec<f32> = depth
        .values()
        .iter()
        .zip(depth.mask())
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    std::fs::write(path, encode_pfm(depth.width(), depth.height(), &data))?;
    Ok(())
}

pub fn write_mask_pfm(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let data: Vec<f32> = depth.mask().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    std::fs::write(path, encode_pfm(depth.width(), depth.height(), &data))?;
    Ok(())
}

pub fn read_depth_pfm(path: impl AsRef<Path>, mask_path: Option<&Path>) -> Result<DepthMap> {
    let (w, h, values) = decode_pfm(&std::fs::read(path)?)?;
    let map_err = |e: Error| match e {
        Error::Contract(m) => Error::format(format!("invalid depth map: {m}")),
        other => other,
    };
    match mask_path {
        None => DepthMap::from_values(w, h, values).map_err(map_err),
        Some(mp) => {
            let (mw, mh, mvals) = decode_pfm(&std::fs::read(mp)?)?;
            if (mw, mh) != (w, h) {
                return Err(Error::format(format!(
                    "mask is {mw}x{mh} but depth is {w}x{h}"
                )));
            }
            let mask: Vec<bool> = mvals.iter().map(|&m| m > 0.5).collect();
            let values = values
                .into_iter()
                .zip(&mask)
                .map(|(v, &m)| if m { v } else { 0.0 })
                .collect();
            DepthMap::new(w, h, values, mask).map_err(map_err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_orientation_and_mask() {
        let d = DepthMap::new(3, 2, vec![1.0, 2.0, 0.0, 4.0, 5.0, 6.5], vec![
            true, true, false, true, true, true,
        ])
        .unwrap();
        let bytes = encode_pfm(3, 2, &[1.0, 2.0, 0.0, 4.0, 5.0, 6.5]);
        let (w, h, data) = decode_pfm(&bytes).unwrap();
        assert_eq!((w, h), (3, 2));
        let back = DepthMap::from_values(w, h, data).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn big_endian_payload() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-1.0f32).to_be_bytes());
        let (_, _, data) = decode_pfm(&bytes).unwrap();
        assert_eq!(data, vec![1.5, -1.0]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(decode_pfm(b"P6\n1 1\n-1\n0000"), Err(Error::Format(_))));
        assert!(matches!(decode_pfm(b"PF\n1 1\n-1\n000000000000"), Err(Error::Format(_))));
        assert!(matches!(decode_pfm(b"Pf\n2 2\n-1\n0000"), Err(Error::Corruption(_))));
        assert!(matches!(decode_pfm(b"Pf\n2"), Err(Error::Format(_))));
    }
}
