use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{GridSpec, OpticalField};
use crate::error::{Error, Result};
use crate::mub::exact_sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrangement {
    /// `sqrt(d) x sqrt(d)` grid, modes numbered row-major like `GridIndex`.
    Square,
    /// `1 x d` row along `x`.
    Line,
}

/// Circular apertures of a binary amplitude mask; each aperture is one mode
/// of the pixel-entangled state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureLayout {
    pub count: usize,
    pub radius: f64,
    /// Centre-to-centre distance between neighbouring apertures.
    pub spacing: f64,
    pub arrangement: Arrangement,
}

impl ApertureLayout {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Geometry("aperture count must be >= 1".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Geometry(format!(
                "aperture radius must be positive, got {}",
                self.radius
            )));
        }
        if self.count > 1 && (self.spacing.is_nan() || self.spacing < 2.0 * self.radius) {
            return Err(Error::Geometry(format!(
                "apertures overlap: spacing {} m is less than the diameter {} m",
                self.spacing,
                2.0 * self.radius
            )));
        }
        if self.arrangement == Arrangement::Square && exact_sqrt(self.count).is_none() {
            return Err(Error::Geometry(format!(
                "square arrangement needs a perfect-square count, got {}",
                self.count
            )));
        }
        Ok(())
    }

    /// Aperture centres in metres, relative to the optical axis.
    pub fn centres(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let (rows, cols) = match self.arrangement {
            Arrangement::Square => {
                let s = exact_sqrt(self.count).unwrap_or(1);
                (s, s)
            }
            Arrangement::Line => (1, self.count),
        };
        let mut out = Vec::with_capacity(self.count);
        for r in 0..rows {
            for c in 0..cols {
                let x = (c as f64 - (cols as f64 - 1.0) / 2.0) * self.spacing;
                let y = (r as f64 - (rows as f64 - 1.0) / 2.0) * self.spacing;
                out.push((x, y));
            }
        }
        Ok(out)
    }
}

/// One unit-power uniform disk per aperture.
pub fn make_aperture_modes(layout: &ApertureLayout, grid: &GridSpec) -> Result<Vec<OpticalField>> {
    disk_modes_at(grid, &layout.centres()?, layout.radius)
}

/// Unit-power disks of a common radius at the given centres. Disks must sit
/// at least two pixels inside the window.
pub fn disk_modes_at(grid: &GridSpec, centres: &[(f64, f64)], radius: f64) -> Result<Vec<OpticalField>> {
    grid.validate()?;
    let margin = 2.0 * grid.pitch;
    let half_x = grid.x(grid.nx - 1);
    let half_y = grid.y(grid.ny - 1);
    centres
        .iter()
        .enumerate()
        .map(|(i, &(cx, cy))| {
            let fits = cx - radius >= -half_x + margin
                && cx + radius <= half_x - margin
                && cy - radius >= -half_y + margin
                && cy + radius <= half_y - margin;
            if !fits {
                return Err(Error::Geometry(format!(
                    "aperture {} at ({cx:.3e}, {cy:.3e}) m with radius {radius:.3e} m does not fit \
                     inside the {}x{} grid (pitch {:.3e} m) with a 2-pixel margin",
                    i + 1,
                    grid.nx,
                    grid.ny,
                    grid.pitch
                )));
            }
            let r2 = radius * radius;
            let disk = OpticalField::from_fn(*grid, |x, y| {
                if (x - cx).powi(2) + (y - cy).powi(2) < r2 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            if disk.power() == 0.0 {
                return Err(Error::Geometry(format!(
                    "aperture {} covers no pixel centre (radius {radius:.3e} m, pitch {:.3e} m)",
                    i + 1,
                    grid.pitch
                )));
            }
            disk.normalized()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(256, 256, 10e-6, 810e-9).unwrap()
    }

    #[test]
    fn single_centred_disk() {
        let layout = ApertureLayout {
            count: 1,
            radius: 100e-6,
            spacing: 300e-6,
            arrangement: Arrangement::Square,
        };
        let modes = make_aperture_modes(&layout, &grid()).unwrap();
        assert_eq!(modes.len(), 1);
        assert!((modes[0].power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twenty_five_disjoint_modes() {
        let g = GridSpec::new(180, 180, 10e-6, 810e-9).unwrap();
        let layout = ApertureLayout {
            count: 25,
            radius: 100e-6,
            spacing: 300e-6,
            arrangement: Arrangement::Square,
        };
        let modes = make_aperture_modes(&layout, &g).unwrap();
        assert_eq!(modes.len(), 25);
        for i in 0..25 {
            for j in 0..25 {
                let o = modes[i].inner(&modes[j]).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((o - want).norm() < 1e-12, "({i},{j}) -> {o}");
            }
        }
        // Row-major numbering: mode 2 is to the right of mode 1.
        let c = layout.centres().unwrap();
        assert!(c[1].0 > c[0].0 && c[1].1 == c[0].1);
        assert!(c[5].1 > c[0].1 && c[5].0 == c[0].0);
    }

    #[test]
    fn geometry_errors() {
        let overlapping = ApertureLayout {
            count: 4,
            radius: 200e-6,
            spacing: 300e-6,
            arrangement: Arrangement::Square,
        };
        assert!(matches!(
            make_aperture_modes(&overlapping, &grid()),
            Err(Error::Geometry(_))
        ));

        let too_wide = ApertureLayout {
            count: 25,
            radius: 100e-6,
            spacing: 300e-6,
            arrangement: Arrangement::Line,
        };
        assert!(matches!(
            make_aperture_modes(&too_wide, &grid()),
            Err(Error::Geometry(_))
        ));

        let not_square = ApertureLayout {
            count: 5,
            radius: 100e-6,
            spacing: 300e-6,
            arrangement: Arrangement::Square,
        };
        assert!(not_square.validate().is_err());
    }
}
