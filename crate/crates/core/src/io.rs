//! 8-bit PGM images and one-value-per-line CSV vectors.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// `P2`
    Ascii,
    /// `P5`
    Binary,
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Malformed {
        what: "PGM",
        reason: reason.into(),
    }
}

/// Header tokens, skipping `#` comments. Returns the byte offset after the
/// last header token.
fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if i >= bytes.len() {
            return Err(malformed("truncated header"));
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
            i += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    Ok((tokens, i))
}

fn parse_dim(tok: &str, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| malformed(format!("bad {what} `{tok}`")))
}

/// Decode a P2 or P5 image with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let (tok, end) = header_tokens(bytes, 4)?;
    let format = match tok[0].as_str() {
        "P2" => PgmFormat::Ascii,
        "P5" => PgmFormat::Binary,
        other => return Err(Error::Unsupported(format!("PGM magic `{other}`"))),
    };
    let width = parse_dim(&tok[1], "width")?;
    let height = parse_dim(&tok[2], "height")?;
    let maxval = parse_dim(&tok[3], "maxval")?;
    if maxval != 255 {
        return Err(Error::Unsupported(format!("PGM maxval {maxval}, only 255 is supported")));
    }
    let count = width * height;
    let data: Vec<f64> = match format {
        PgmFormat::Binary => {
            // Exactly one whitespace byte separates maxval from the raster.
            let start = end + 1;
            let raster = bytes
                .get(start..start + count)
                .ok_or_else(|| malformed(format!("expected {count} raster bytes")))?;
            raster.iter().map(|&b| f64::from(b)).collect()
        }
        PgmFormat::Ascii => {
            let text = std::str::from_utf8(&bytes[end..])
                .map_err(|_| malformed("non-UTF-8 ASCII raster"))?;
            let mut out = Vec::with_capacity(count);
            for line in text.lines() {
                let line = line.split('#').next().unwrap_or("");
                for t in line.split_ascii_whitespace() {
                    let v: u32 = t.parse().map_err(|_| malformed(format!("bad sample `{t}`")))?;
                    if v > 255 {
                        return Err(malformed(format!("sample {v} exceeds maxval 255")));
                    }
                    out.push(f64::from(v));
                }
            }
            if out.len() != count {
                return Err(malformed(format!("expected {count} samples, found {}", out.len())));
            }
            out
        }
    };
    Image::new(width, height, data)
}

/// Encode `image` rounded and clamped to 8 bits.
pub fn encode_pgm(image: &Image, format: PgmFormat) -> Vec<u8> {
    let px = image.to_u8();
    match format {
        PgmFormat::Binary => {
            let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
            out.extend_from_slice(&px);
            out
        }
        PgmFormat::Ascii => {
            let mut out = format!("P2\n{} {}\n255\n", image.width, image.height);
            for row in px.chunks(image.width) {
                let line: Vec<String> = row.iter().map(u8::to_string).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn save_pgm(path: impl AsRef<Path>, image: &Image, format: PgmFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image, format)).map_err(|e| Error::io(path, e))
}

/// One value per line. Blank lines are skipped.
pub fn parse_csv_vector(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>().map_err(|_| Error::Malformed {
                what: "CSV vector",
                reason: format!("bad value `{l}`"),
            })
        })
        .collect()
}

/// Shortest round-trip representation, LF line endings.
pub fn format_csv_vector(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 20);
    for v in values {
        out.push_str(&format!("{v:?}\n"));
    }
    out
}

pub fn load_csv_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_vector(&text)
}

pub fn save_csv_vector(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_csv_vector(values)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h).map(|_| f64::from(rng.random::<u8>())).collect();
        Image::new(w, h, data).unwrap()
    }

    #[test]
    fn binary_and_ascii_round_trip() {
        let img = random_image(13, 7, 1);
        for fmt in [PgmFormat::Binary, PgmFormat::Ascii] {
            assert_eq!(decode_pgm(&encode_pgm(&img, fmt)).unwrap(), img);
        }
    }

    #[test]
    fn both_encodings_agree() {
        let img = random_image(5, 9, 2);
        let a = decode_pgm(&encode_pgm(&img, PgmFormat::Ascii)).unwrap();
        let b = decode_pgm(&encode_pgm(&img, PgmFormat::Binary)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = random_image(8, 8, 3);
        let path = dir.path().join("x.pgm");
        save_pgm(&path, &img, PgmFormat::Binary).unwrap();
        assert_eq!(load_pgm(&path).unwrap(), img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = decode_pgm(b"P2\n# made by hand\n2 1 # dims\n255\n0 255\n").unwrap();
        assert_eq!(img.data, vec![0.0, 255.0]);
        let mut p5 = b"P5 # c\n2 1\n255\n".to_vec();
        p5.extend_from_slice(&[10, 20]);
        assert_eq!(decode_pgm(&p5).unwrap().data, vec![10.0, 20.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(decode_pgm(b"P2\n2 1\n65535\n0 1\n"), Err(Error::Unsupported(_))));
        assert!(matches!(decode_pgm(b"P6\n2 1\n255\n"), Err(Error::Unsupported(_))));
        assert!(matches!(decode_pgm(b"P2\n2 1\n255\n0 256\n"), Err(Error::Malformed { .. })));
        assert!(matches!(decode_pgm(b"P2\n2 2\n255\n0 1\n"), Err(Error::Malformed { .. })));
        assert!(matches!(decode_pgm(b"P5\n2 2\n255\n\x01"), Err(Error::Malformed { .. })));
        assert!(matches!(decode_pgm(b"P2\n2"), Err(Error::Malformed { .. })));
        assert!(matches!(decode_pgm(b"P2\n0 2\n255\n"), Err(Error::Malformed { .. })));
    }

    #[test]
    fn csv_round_trip_full_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..200)
            .map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-300..300)))
            .chain([0.0, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE, f64::MAX])
            .collect();
        let back = parse_csv_vector(&format_csv_vector(&v)).unwrap();
        assert_eq!(back.len(), v.len());
        for (a, b) in v.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        save_csv_vector(&path, &v).unwrap();
        assert_eq!(load_csv_vector(&path).unwrap(), v);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(parse_csv_vector("1.0\nabc\n").is_err());
        assert_eq!(parse_csv_vector("1\n\n2\n").unwrap(), vec![1.0, 2.0]);
    }
}
