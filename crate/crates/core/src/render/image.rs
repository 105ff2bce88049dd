use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

const MAX_ITER: usize = 2000;
const ESCAPE: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::Precondition("empty window".into()));
        }
        Ok(Window { x_min, x_max, y_min, y_max })
    }
}

/// Row-major 8-bit image, row 0 at the top.
#[derive(Clone, Debug)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
    f.write_all(&img.to_pgm()).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))
}

/// Black for the filled Julia set and for escaping points within one pixel
/// of it by the distance estimate; escaping points are shaded by escape time.
fn shade(c: Complex64, z0: Complex64, pixel: f64) -> u8 {
    let (mut z, mut d) = (z0, Complex64::new(1.0, 0.0));
    for n in 0..MAX_ITER {
        let r = z.norm();
        if r > ESCAPE {
            let dist = 0.5 * r * r.ln() / d.norm();
            if dist < pixel {
                return 0;
            }
            return 255 - (n.min(190) as u8);
        }
        d = 2.0 * z * d;
        z = z * z + c;
    }
    0
}

pub fn julia_image(c: Complex64, window: Window, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::Precondition("resolution must be positive".into()));
    }
    let dx = (window.x_max - window.x_min) / width as f64;
    let dy = (window.y_max - window.y_min) / height as f64;
    let pixel = dx.max(dy);
    let pixels = (0..height)
        .into_par_iter()
        .flat_map_iter(|row| {
            let y = window.y_max - (row as f64 + 0.5) * dy;
            (0..width).map(move |col| shade(c, Complex64::new(window.x_min + (col as f64 + 0.5) * dx, y), pixel))
        })
        .collect();
    Ok(GrayImage { width, height, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disk_and_segment() {
        let w = Window::new(-2.5, 2.5, -2.5, 2.5).unwrap();
        let img = julia_image(Complex64::new(0.0, 0.0), w, 101, 101).unwrap();
        assert_eq!(img.pixels.len(), 101 * 101);
        let px = 5.0 / 101.0;
        for row in 0..101 {
            for col in 0..101 {
                let (x, y) = (-2.5 + (col as f64 + 0.5) * px, 2.5 - (row as f64 + 0.5) * px);
                let r = x.hypot(y);
                if r < 1.0 - px {
                    assert_eq!(img.get(col, row), 0);
                } else if r > 1.0 + 2.0 * px {
                    assert_ne!(img.get(col, row), 0);
                }
            }
        }
        let img = julia_image(Complex64::new(-2.0, 0.0), w, 101, 101).unwrap();
        for row in 0..101 {
            for col in 0..101 {
                let (x, y) = (-2.5 + (col as f64 + 0.5) * px, 2.5 - (row as f64 + 0.5) * px);
                let black = img.get(col, row) == 0;
                if x.abs() < 1.9 && y.abs() < 0.5 * px {
                    assert!(black);
                }
                if y.abs() > 2.0 * px || x.abs() > 2.0 + 2.0 * px {
                    assert!(!black, "({x}, {y})");
                }
            }
        }
        let pgm = img.to_pgm();
        assert!(pgm.starts_with(b"P5\n101 101\n255\n"));
        assert_eq!(pgm.len(), 15 + 101 * 101);
        let img = julia_image(Complex64::new(-1.0, 0.2), w, 37, 13).unwrap();
        assert_eq!((img.width, img.height, img.pixels.len()), (37, 13, 481));
    }
}
