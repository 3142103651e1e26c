use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Metres per pixel.
    pub pitch: f64,
    /// Metres.
    pub wavelength: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        let grid = Self {
            nx,
            ny,
            pitch,
            wavelength,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 || self.ny < 8 {
            return Err(Error::Geometry(format!(
                "grid must be at least 8x8 pixels, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::Geometry(format!("pitch must be positive, got {}", self.pitch)));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::Geometry(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn pixel_area(&self) -> f64 {
        self.pitch * self.pitch
    }

    pub fn x(&self, ix: usize) -> f64 {
        (ix as f64 - (self.nx as f64 - 1.0) / 2.0) * self.pitch
    }

    pub fn y(&self, iy: usize) -> f64 {
        (iy as f64 - (self.ny as f64 - 1.0) / 2.0) * self.pitch
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalField {
    grid: GridSpec,
    amplitude: Array2<Complex64>,
}

impl OpticalField {
    pub fn new(grid: GridSpec, amplitude: Array2<Complex64>) -> Result<Self> {
        grid.validate()?;
        if amplitude.dim() != grid.shape() {
            return Err(Error::Geometry(format!(
                "field shape {:?} does not match grid {:?}",
                amplitude.dim(),
                grid.shape()
            )));
        }
        Ok(Self {
            grid,
            amplitude: amplitude.as_standard_layout().into_owned(),
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            amplitude: Array2::zeros(grid.shape()),
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let amplitude = Array2::from_shape_fn(grid.shape(), |(iy, ix)| f(grid.x(ix), grid.y(iy)));
        Self { grid, amplitude }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitude(&self) -> &Array2<Complex64> {
        &self.amplitude
    }

    pub fn amplitude_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.amplitude
    }

    pub fn into_amplitude(self) -> Array2<Complex64> {
        self.amplitude
    }

    /// `sum |u|^2 * pitch^2`.
    pub fn power(&self) -> f64 {
        self.amplitude.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.pixel_area()
    }

    /// Overlap integral `<self|other> = sum conj(self) * other * pitch^2`.
    pub fn inner(&self, other: &OpticalField) -> Result<Complex64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .amplitude
            .iter()
            .zip(other.amplitude.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.pixel_area())
    }

    pub fn normalized(&self) -> Result<Self> {
        let p = self.power();
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidModeSet(format!("field has non-positive power {p}")));
        }
        let s = 1.0 / p.sqrt();
        Ok(Self {
            grid: self.grid,
            amplitude: self.amplitude.mapv(|z| z * s),
        })
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            amplitude: self.amplitude.mapv(|z| z * factor),
        }
    }

    pub(crate) fn ensure_same_grid(&self, other: &OpticalField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Geometry(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// `max |self - other| / max |other|`.
    #[cfg(test)]
    pub(crate) fn relative_distance(&self, other: &OpticalField) -> f64 {
        let scale = other.amplitude.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let diff = self
            .amplitude
            .iter()
            .zip(other.amplitude.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        diff / scale
    }
}
