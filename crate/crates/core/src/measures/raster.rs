use ndarray::{Array1, Array2};

use super::{DiscreteMeasure, WeightPolicy};
use crate::error::{EgwError, Result};

/// Grayscale image, row-major, nonnegative intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height || width == 0 || height == 0 {
            return Err(EgwError::InvalidArgument(format!(
                "raster {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(EgwError::InvalidArgument(
                "raster intensities must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Surround the image with `border` zero pixels on every side.
    pub fn pad(&self, border: usize) -> Self {
        let w = self.width + 2 * border;
        let h = self.height + 2 * border;
        let mut pixels = vec![0.0; w * h];
        for r in 0..self.height {
            for c in 0..self.width {
                pixels[(r + border) * w + c + border] = self.get(r, c);
            }
        }
        Self {
            width: w,
            height: h,
            pixels,
        }
    }

    /// Point cloud with one atom per nonzero pixel. Pixel centers sit on an
    /// integer grid whose origin is the center of the image, multiplied by
    /// `pixel_size`; intensities are renormalized into weights.
    pub fn to_measure(&self, pixel_size: f64) -> Result<DiscreteMeasure> {
        let cx = (self.width as f64 - 1.0) / 2.0;
        let cy = (self.height as f64 - 1.0) / 2.0;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                let v = self.get(r, c);
                if v > 0.0 {
                    coords.push((c as f64 - cx) * pixel_size);
                    coords.push((cy - r as f64) * pixel_size);
                    weights.push(v);
                }
            }
        }
        if weights.is_empty() {
            return Err(EgwError::InvalidMeasure("raster has no mass".into()));
        }
        let points = Array2::from_shape_vec((weights.len(), 2), coords)
            .map_err(|e| EgwError::InvalidMeasure(e.to_string()))?;
        DiscreteMeasure::with_policy(
            points,
            Array1::from(weights),
            WeightPolicy {
                renormalize: true,
                drop_zero_mass: true,
            },
        )
    }
}

/// Rotate an image counterclockwise about its center. Multiples of 90 degrees
/// permute pixels exactly (square images only); other angles resample with
/// bilinear interpolation onto the same grid, so mass falling outside is lost.
pub fn rotate_grid(img: &Raster, degrees: f64) -> Raster {
    let turns = degrees / 90.0;
    if (turns - turns.round()).abs() < 1e-12 && img.width == img.height {
        let mut out = img.clone();
        for _ in 0..(turns.round() as i64).rem_euclid(4) {
            out = quarter_turn(&out);
        }
        return out;
    }
    let (s, c) = degrees.to_radians().sin_cos();
    let cx = (img.width as f64 - 1.0) / 2.0;
    let cy = (img.height as f64 - 1.0) / 2.0;
    let mut pixels = vec![0.0; img.width * img.height];
    for r in 0..img.height {
        for col in 0..img.width {
            // Inverse-rotate the destination pixel center into the source frame.
            let x = col as f64 - cx;
            let y = cy - r as f64;
            let sx = c * x + s * y;
            let sy = -s * x + c * y;
            pixels[r * img.width + col] = bilinear(img, sx + cx, cy - sy);
        }
    }
    Raster {
        width: img.width,
        height: img.height,
        pixels,
    }
}

fn quarter_turn(img: &Raster) -> Raster {
    let n = img.width;
    let mut pixels = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            // (x, y) -> (-y, x) in centered coordinates.
            pixels[(n - 1 - c) * n + r] = img.get(r, c);
        }
    }
    Raster {
        width: n,
        height: n,
        pixels,
    }
}

fn bilinear(img: &Raster, col: f64, row: f64) -> f64 {
    let c0 = col.floor();
    let r0 = row.floor();
    let fc = col - c0;
    let fr = row - r0;
    let sample = |r: f64, c: f64| -> f64 {
        if r < 0.0 || c < 0.0 || r >= img.height as f64 || c >= img.width as f64 {
            0.0
        } else {
            img.get(r as usize, c as usize)
        }
    };
    (1.0 - fr) * ((1.0 - fc) * sample(r0, c0) + fc * sample(r0, c0 + 1.0))
        + fr * ((1.0 - fc) * sample(r0 + 1.0, c0) + fc * sample(r0 + 1.0, c0 + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AffineMap;

    fn toy() -> Raster {
        Raster::new(
            4,
            4,
            vec![
                0.0, 1.0, 0.0, 0.0, //
                0.0, 2.0, 3.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
        )
        .unwrap()
    }

    #[test]
    fn drops_zero_pixels() {
        let mu = toy().to_measure(1.0).unwrap();
        assert_eq!(mu.len(), 4);
        assert!((mu.weights().sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_turn_is_point_rotation() {
        let img = toy();
        let rotated = rotate_grid(&img, 90.0).to_measure(0.5).unwrap();
        let direct = img
            .to_measure(0.5)
            .unwrap()
            .transform(&AffineMap::rotation_2d(90.0))
            .unwrap();
        // Same atoms, possibly reordered.
        let key = |mu: &DiscreteMeasure| {
            let mut v: Vec<(i64, i64, i64)> = mu
                .points()
                .outer_iter()
                .zip(mu.weights())
                .map(|(p, w)| {
                    (
                        (p[0] * 1e6).round() as i64,
                        (p[1] * 1e6).round() as i64,
                        (w * 1e9).round() as i64,
                    )
                })
                .collect();
            v.sort();
            v
        };
        assert_eq!(key(&rotated), key(&direct));
        assert_eq!(rotate_grid(&rotate_grid(&img, 180.0), 180.0), img);
    }

    #[test]
    fn interpolated_rotation_keeps_most_mass() {
        let img = toy().pad(2);
        let r = rotate_grid(&img, 45.0);
        let before: f64 = img.pixels.iter().sum();
        let after: f64 = r.pixels.iter().sum();
        assert!((after - before).abs() / before < 0.5);
        assert_ne!(r, img);
    }
}
