//! Deterministic rasterization of a normalized feature vector into a square
//! grayscale radar-chart image.
//!
//! Geometry conventions (fixed, documented, and relied on by tests):
//! axis 0 points at 12 o'clock and axes proceed clockwise; vertices are
//! connected in axis order and the polygon is filled with the even-odd rule
//! evaluated at pixel centers; ink is binary (0.0) on a white (1.0)
//! background, with no anti-aliasing, labels, gridlines, or spokes. The one
//! pixel containing the chart center is always inked, so an idle day (all
//! features zero) remains distinguishable from the all-white padding chart.

use rayon::prelude::*;

use crate::{Error, Result};

/// Default chart resolution.
pub const DEFAULT_SIZE: usize = 32;

/// A rendered radar chart: `height × width` grayscale pixels in [0,1],
/// row-major, 1.0 = white background, 0.0 = ink.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
}

impl RadarImage {
    pub fn white(height: usize, width: usize) -> Self {
        RadarImage {
            height,
            width,
            pixels: vec![1.0; height * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    /// Number of ink (non-background) pixels.
    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p < 1.0).count()
    }

    /// Total ink mass, `sum(1 - pixel)`.
    pub fn ink_mass(&self) -> f64 {
        self.pixels.iter().map(|&p| 1.0 - f64::from(p)).sum()
    }
}

/// Placement of the radar axes on the pixel grid.
#[derive(Debug, Clone)]
pub struct RadarGeometry {
    /// Number of axes (one per feature).
    pub d: usize,
    pub height: usize,
    pub width: usize,
    /// Chart center in continuous pixel coordinates.
    pub cx: f64,
    pub cy: f64,
    /// Vertex distance from center for a feature value of 1.0.
    pub max_radius: f64,
    /// Axis directions: `angles[k] = π/2 − 2πk/d`.
    pub axis_angles: Vec<f64>,
}

impl RadarGeometry {
    /// Geometry for a `size × size` chart with `d` axes: centered, with a
    /// one-pixel margin so a full polygon never clips the border.
    pub fn square(d: usize, size: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::invalid("radar chart needs at least 3 axes"));
        }
        if size < 4 {
            return Err(Error::invalid("chart size too small"));
        }
        let center = size as f64 / 2.0;
        let max_radius = center - 1.0;
        let axis_angles = (0..d)
            .map(|k| std::f64::consts::FRAC_PI_2 - 2.0 * std::f64::consts::PI * k as f64 / d as f64)
            .collect();
        Ok(RadarGeometry {
            d,
            height: size,
            width: size,
            cx: center,
            cy: center,
            max_radius,
            axis_angles,
        })
    }

    /// The default 14-axis 32×32 geometry.
    pub fn default_chart() -> Self {
        RadarGeometry::square(crate::domain::FEATURE_COUNT, DEFAULT_SIZE).expect("valid default")
    }

    /// Polygon vertices for a normalized feature vector, in axis order.
    /// Screen coordinates: x grows rightwards, y grows downwards.
    pub fn vertices(&self, values: &[f64]) -> Vec<(f64, f64)> {
        values
            .iter()
            .zip(&self.axis_angles)
            .map(|(&v, &angle)| {
                (
                    self.cx + v * self.max_radius * angle.cos(),
                    self.cy - v * self.max_radius * angle.sin(),
                )
            })
            .collect()
    }

    /// Angular sector index of a pixel: sector `k` spans clockwise from axis
    /// `k` to axis `k+1`.
    pub fn sector_of_pixel(&self, row: usize, col: usize) -> usize {
        let dx = (col as f64 + 0.5) - self.cx;
        let dy = self.cy - (row as f64 + 0.5);
        let angle = dy.atan2(dx);
        let turn = (std::f64::consts::FRAC_PI_2 - angle).rem_euclid(2.0 * std::f64::consts::PI);
        let sector = (turn / (2.0 * std::f64::consts::PI / self.d as f64)).floor() as usize;
        sector.min(self.d - 1)
    }
}

/// Render one normalized feature vector as a filled radar polygon.
///
/// Every component must already be in [0,1]; normalization is upstream's job.
pub fn render_chart(values: &[f64], geometry: &RadarGeometry) -> Result<RadarImage> {
    if values.len() != geometry.d {
        return Err(Error::ShapeMismatch {
            op: "render_chart",
            lhs: vec![values.len()],
            rhs: vec![geometry.d],
        });
    }
    for (k, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "radar component {k} = {v} outside [0,1]"
            )));
        }
    }

    let vertices = geometry.vertices(values);
    let mut image = RadarImage::white(geometry.height, geometry.width);
    let mut crossings: Vec<f64> = Vec::with_capacity(geometry.d);

    for row in 0..geometry.height {
        let py = row as f64 + 0.5;
        crossings.clear();
        for k in 0..vertices.len() {
            let (x1, y1) = vertices[k];
            let (x2, y2) = vertices[(k + 1) % vertices.len()];
            if (y1 > py) != (y2 > py) {
                crossings.push(x1 + (py - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite crossing"));

        // A pixel center is inside iff an odd number of crossings lie
        // strictly to its right.
        let total = crossings.len();
        let mut at_or_left = 0usize;
        let row_base = row * geometry.width;
        for col in 0..geometry.width {
            let px = col as f64 + 0.5;
            while at_or_left < total && crossings[at_or_left] <= px {
                at_or_left += 1;
            }
            if (total - at_or_left) % 2 == 1 {
                image.pixels[row_base + col] = 0.0;
            }
        }
    }

    // Center marker: keeps collapsed polygons visible.
    let center_row = geometry.cy as usize;
    let center_col = geometry.cx as usize;
    if center_row < geometry.height && center_col < geometry.width {
        image.pixels[center_row * geometry.width + center_col] = 0.0;
    }

    Ok(image)
}

/// The canonical padding chart: pure white, no ink at all. Prepended when a
/// courier's history is shorter than the window length.
pub fn render_padding(geometry: &RadarGeometry) -> RadarImage {
    RadarImage::white(geometry.height, geometry.width)
}

/// Render a batch of vectors. Elementwise identical to [`render_chart`];
/// work fans out across the rayon pool. Per-item failures carry the item
/// index.
pub fn render_batch(vectors: &[Vec<f64>], geometry: &RadarGeometry) -> Result<Vec<RadarImage>> {
    vectors
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            render_chart(v, geometry)
                .map_err(|e| Error::invalid(format!("batch item {i}: {e}")))
        })
        .collect()
}

/// Ink mass per angular sector, `sum(1 - pixel)` binned by [`RadarGeometry::sector_of_pixel`].
pub fn sector_ink(image: &RadarImage, geometry: &RadarGeometry) -> Vec<f64> {
    sector_sums(&image.pixels.iter().map(|&p| 1.0 - f64::from(p)).collect::<Vec<_>>(), geometry)
}

/// Bin arbitrary per-pixel weights (e.g. Grad-CAM heat) by angular sector.
pub fn sector_sums(weights: &[f64], geometry: &RadarGeometry) -> Vec<f64> {
    let mut sums = vec![0.0; geometry.d];
    for row in 0..geometry.height {
        for col in 0..geometry.width {
            sums[geometry.sector_of_pixel(row, col)] += weights[row * geometry.width + col];
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zeros_collapses_to_center_dot() {
        let geometry = RadarGeometry::default_chart();
        let image = render_chart(&[0.0; 14], &geometry).unwrap();
        assert_eq!(image.ink_count(), 1);
        assert_eq!(image.get(16, 16), 0.0);
    }

    #[test]
    fn padding_is_pure_white() {
        let geometry = RadarGeometry::default_chart();
        let padding = render_padding(&geometry);
        assert_eq!(padding.ink_mass(), 0.0);
        assert_eq!(padding.pixels.len(), 32 * 32);
        assert!(padding.pixels.iter().all(|&p| p == 1.0));
        // Distinguishable from a rendered all-zero chart by the missing
        // center marker.
        let zero_chart = render_chart(&[0.0; 14], &geometry).unwrap();
        assert_ne!(padding, zero_chart);
        assert_eq!(zero_chart.get(16, 16), 0.0);
        assert_eq!(padding.get(16, 16), 1.0);
    }

    #[test]
    fn out_of_range_component_rejected() {
        let geometry = RadarGeometry::default_chart();
        let mut v = [0.5; 14];
        v[3] = 1.2;
        assert!(render_chart(&v, &geometry).is_err());
        v[3] = -0.1;
        assert!(render_chart(&v, &geometry).is_err());
    }

    #[test]
    fn deterministic_across_calls() {
        use rand::{Rng, SeedableRng};
        let geometry = RadarGeometry::default_chart();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v: Vec<f64> = (0..14).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let a = render_chart(&v, &geometry).unwrap();
            let b = render_chart(&v, &geometry).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn batch_matches_serial_loop() {
        use rand::{Rng, SeedableRng};
        let geometry = RadarGeometry::default_chart();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let vectors: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..14).map(|_| rng.gen_range(0.0..=1.0)).collect())
            .collect();
        let batched = render_batch(&vectors, &geometry).unwrap();
        for (v, image) in vectors.iter().zip(&batched) {
            assert_eq!(*image, render_chart(v, &geometry).unwrap());
        }
        assert!(render_batch(&[], &geometry).unwrap().is_empty());
        let single = render_batch(&vectors[..1], &geometry).unwrap();
        assert_eq!(single[0], render_chart(&vectors[0], &geometry).unwrap());
    }

    #[test]
    fn batch_error_carries_index() {
        let geometry = RadarGeometry::default_chart();
        let vectors = vec![vec![0.5; 14], vec![2.0; 14]];
        let err = render_batch(&vectors, &geometry).unwrap_err();
        assert!(err.to_string().contains("batch item 1"));
    }

    #[test]
    fn dominant_axis_concentrates_sector_ink() {
        let geometry = RadarGeometry::default_chart();
        for dominant in 0..14 {
            let mut v = [0.1; 14];
            v[dominant] = 1.0;
            let image = render_chart(&v, &geometry).unwrap();
            let masses = sector_ink(&image, &geometry);
            // The spike's ink straddles the axis, spreading over the two
            // adjacent sectors; the heavier of the two must beat every
            // other sector.
            let prev = (dominant + 13) % 14;
            let spike = masses[dominant].max(masses[prev]);
            for k in 0..14 {
                if k == dominant || k == prev {
                    continue;
                }
                assert!(
                    spike > masses[k],
                    "axis {dominant}: spike ink {spike} not above sector {k} ({})",
                    masses[k]
                );
            }
        }
    }

    #[test]
    fn radial_scaling_grows_ink() {
        use rand::{Rng, SeedableRng};
        let geometry = RadarGeometry::default_chart();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let v: Vec<f64> = (0..14).map(|_| rng.gen_range(0.0..=0.5)).collect();
            let s = rng.gen_range(1.0..=2.0);
            let w: Vec<f64> = v.iter().map(|x| x * s).collect();
            let ink_v = render_chart(&v, &geometry).unwrap().ink_count();
            let ink_w = render_chart(&w, &geometry).unwrap().ink_count();
            assert!(ink_v <= ink_w, "scaling by {s} shrank ink: {ink_v} > {ink_w}");
        }
    }

    #[test]
    fn rotating_axes_rotates_sector_profile() {
        use rand::{Rng, SeedableRng};
        let geometry = RadarGeometry::default_chart();
        // Moderate radii: jagged full-radius polygons have long oblique
        // edges whose boundary pixels exceed the stated tolerance.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let v: Vec<f64> = (0..14).map(|_| rng.gen_range(0.3..=0.5)).collect();
            let mut rotated = v.clone();
            rotated.rotate_right(1);
            let base = sector_ink(&render_chart(&v, &geometry).unwrap(), &geometry);
            let turned = sector_ink(&render_chart(&rotated, &geometry).unwrap(), &geometry);
            for k in 0..14 {
                let diff = (turned[(k + 1) % 14] - base[k]).abs();
                assert!(diff <= 2.0, "sector {k}: rotation moved mass by {diff}");
            }
        }
    }

    #[test]
    fn large_resolution_supported() {
        let geometry = RadarGeometry::square(14, 224).unwrap();
        assert_eq!(geometry.cx, 112.0);
        assert_eq!(geometry.max_radius, 111.0);
        let image = render_chart(&[1.0; 14], &geometry).unwrap();
        assert_eq!(image.pixels.len(), 224 * 224);
        assert!(image.ink_count() > 30_000); // most of the inscribed disc
    }
}
