//! Grayscale PGM input/output, PSNR, seeded noise and synthetic test images.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::forward::InpaintingMask;
use crate::linop::VecImage;

/// `10 log10(1 / MSE)` for intensities on `[0, 1]`; `+inf` when equal.
pub fn psnr(x: &[f64], reference: &[f64]) -> Result<f64> {
    Error::check_len("PSNR", reference.len(), x.len())?;
    if x.is_empty() {
        return Err(Error::invalid("PSNR of an empty image"));
    }
    let mse = x
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

/// Adds i.i.d. Gaussian noise of standard deviation `sigma`.
pub fn add_noise(x: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise level must be nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(x.to_vec());
    }
    let normal =
        Normal::new(0.0, sigma).map_err(|e| Error::invalid(format!("noise level {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(x.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

/// Uniform random intensities on `[0, 1)`.
pub fn random_image(width: usize, height: usize, seed: u64) -> VecImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height).map(|_| rng.random::<f64>()).collect();
    VecImage::new(data, width, height).expect("dimensions match by construction")
}

/// Piecewise-smooth test image: a shaded background, a bright disc, a dark
/// square and a sinusoidal stripe band.
pub fn phantom(width: usize, height: usize) -> VecImage {
    let (w, h) = (width as f64, height as f64);
    let data = (0..width * height)
        .map(|k| {
            let (x, y) = ((k % width) as f64 / w, (k / width) as f64 / h);
            let mut v = 0.2 + 0.3 * x;
            if (x - 0.35).powi(2) + (y - 0.4).powi(2) < 0.04 {
                v = 0.9;
            }
            if (0.6..0.85).contains(&x) && (0.55..0.8).contains(&y) {
                v = 0.1;
            }
            if (0.15..0.3).contains(&y) && x > 0.55 {
                v = 0.5 + 0.3 * (x * 40.0).sin();
            }
            v
        })
        .collect();
    VecImage::new(data, width, height).expect("dimensions match by construction")
}

/// Box-averages by the smallest integer factor that brings both sides to
/// at most `max_side`.
pub fn downscale_to(img: &VecImage, max_side: usize) -> Result<VecImage> {
    if max_side == 0 {
        return Err(Error::invalid("max_side must be positive"));
    }
    let factor = img.width().max(img.height()).div_ceil(max_side);
    if factor <= 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width() / factor, img.height() / factor);
    if w == 0 || h == 0 {
        return Err(Error::invalid("image too elongated to downscale"));
    }
    let data = (0..w * h)
        .map(|k| {
            let (r, c) = (k / w, k % w);
            let mut total = 0.0;
            for i in 0..factor {
                for j in 0..factor {
                    total += img.get(c * factor + j, r * factor + i);
                }
            }
            total / (factor * factor) as f64
        })
        .collect();
    VecImage::new(data, w, h)
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Tokens<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("PGM: bad or missing {what}")))
    }
}

/// Parses a binary (P5) or ASCII (P2) PGM into `[0, 1]` intensities.
pub fn parse_pgm(bytes: &[u8]) -> Result<VecImage> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'2') {
        return Err(Error::Format("PGM: expected magic P5 or P2".into()));
    }
    let binary = bytes[1] == b'5';
    let mut t = Tokens { bytes, pos: 2 };
    let width = t.number("width")?;
    let height = t.number("height")?;
    let maxval = t.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM: zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM: unsupported maxval {maxval}")));
    }
    let n = width * height;
    let scale = maxval as f64;
    let data: Vec<f64> = if binary {
        let start = t.pos + 1;
        let bpp = if maxval > 255 { 2 } else { 1 };
        let raw = bytes
            .get(start..start + n * bpp)
            .ok_or_else(|| Error::Format("PGM: truncated pixel data".into()))?;
        if bpp == 1 {
            raw.iter().map(|b| f64::from(*b) / scale).collect()
        } else {
            raw.chunks(2)
                .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / scale)
                .collect()
        }
    } else {
        (0..n)
            .map(|_| t.number("pixel").map(|v| v as f64 / scale))
            .collect::<Result<_>>()?
    };
    VecImage::new(data, width, height)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<VecImage> {
    parse_pgm(&std::fs::read(path)?)
}

/// Encodes as 8-bit P5, clipping to `[0, 1]` and rounding.
pub fn encode_pgm(img: &VecImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.as_slice()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &VecImage) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_pgm(img))?;
    Ok(())
}

/// Mask from a PGM: nonzero pixels are observed.
pub fn read_mask(path: impl AsRef<Path>, width: usize, height: usize) -> Result<InpaintingMask> {
    let img = read_pgm(path)?;
    if (img.width(), img.height()) != (width, height) {
        return Err(Error::Format(format!(
            "mask is {}x{}, image is {width}x{height}",
            img.width(),
            img.height()
        )));
    }
    InpaintingMask::new(img.as_slice().iter().map(|v| *v != 0.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_examples() {
        let r = vec![0.5; 16];
        assert_eq!(psnr(&r, &r).unwrap(), f64::INFINITY);
        assert!((psnr(&[0.0; 16], &r).unwrap() - 6.020599913279624).abs() < 1e-12);
        assert_eq!(psnr(&[0.0; 4], &[1.0; 4]).unwrap(), 0.0);
        assert!(psnr(&[0.0; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn pgm_round_trip_is_exact_on_8bit_values() {
        let data: Vec<f64> = (0..12).map(|i| (i * 20) as f64 / 255.0).collect();
        let img = VecImage::new(data, 4, 3).unwrap();
        let back = parse_pgm(&encode_pgm(&img)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn ascii_pgm_with_comments() {
        let text = b"P2\n# comment\n3 1\n# another\n255\n0 255 51\n";
        let img = parse_pgm(text).unwrap();
        assert_eq!(img.as_slice(), &[0.0, 1.0, 0.2]);
    }

    #[test]
    fn malformed_pgm_rejected() {
        assert!(matches!(
            parse_pgm(b"P6\n1 1\n255\n\0"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_pgm(b"P5\n4 4\n255\n\0\0"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_pgm(b"P2\n2 1\n255\n3"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn noise_is_seeded() {
        let x = vec![0.5; 100];
        let a = add_noise(&x, 0.03, 7).unwrap();
        assert_eq!(a, add_noise(&x, 0.03, 7).unwrap());
        assert_ne!(a, add_noise(&x, 0.03, 8).unwrap());
        assert_eq!(add_noise(&x, 0.0, 7).unwrap(), x);
        assert!(add_noise(&x, -1.0, 7).is_err());
    }

    #[test]
    fn downscale_averages_blocks() {
        let img = VecImage::new((0..16).map(f64::from).collect(), 4, 4).unwrap();
        let small = downscale_to(&img, 2).unwrap();
        assert_eq!(small.as_slice(), &[2.5, 4.5, 10.5, 12.5]);
        assert_eq!(downscale_to(&img, 8).unwrap(), img);
    }

    #[test]
    fn phantom_in_unit_range() {
        assert!(phantom(32, 24).in_unit_range());
    }
}
