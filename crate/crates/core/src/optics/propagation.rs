//! Angular-spectrum propagation with the exact (non-paraxial) transfer
//! function `exp(i z sqrt(k^2 - kx^2 - ky^2))`.
//!
//! The field is zero-padded by `padding` along each axis before the FFT so the
//! circular convolution does not wrap light around the window, and cropped
//! back afterwards. Evanescent spatial frequencies are set to zero.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{GridSpec, OpticalField};
use crate::error::{Error, Result};

pub const DEFAULT_PADDING: usize = 2;

#[derive(Clone)]
pub struct Propagator {
    grid: GridSpec,
    padding: usize,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("grid", &self.grid)
            .field("padding", &self.padding)
            .finish()
    }
}

/// Sampled transfer function for one distance, stored column-major
/// (`padded_nx` rows of length `padded_ny`) to match the propagation layout.
#[derive(Debug, Clone)]
pub struct TransferFunction {
    distance: f64,
    values: Vec<Complex64>,
    evanescent: Vec<bool>,
    has_evanescent: bool,
}

impl TransferFunction {
    pub fn distance(&self) -> f64 {
        self.distance
    }
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub field: OpticalField,
    /// Share of the padded spectrum's power that sat on evanescent frequencies.
    pub evanescent_fraction: f64,
    /// Output power over input power after cropping to the window.
    pub retained_fraction: f64,
}

impl Propagator {
    pub fn new(grid: GridSpec) -> Result<Self> {
        Self::with_padding(grid, DEFAULT_PADDING)
    }

    pub fn with_padding(grid: GridSpec, padding: usize) -> Result<Self> {
        grid.validate()?;
        if padding == 0 {
            return Err(Error::InvalidConfig("padding factor must be >= 1".into()));
        }
        let mut planner = FftPlanner::new();
        let (px, py) = (grid.nx * padding, grid.ny * padding);
        Ok(Self {
            grid,
            padding,
            fft_x: planner.plan_fft_forward(px),
            ifft_x: planner.plan_fft_inverse(px),
            fft_y: planner.plan_fft_forward(py),
            ifft_y: planner.plan_fft_inverse(py),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    fn padded(&self) -> (usize, usize) {
        (self.grid.nx * self.padding, self.grid.ny * self.padding)
    }

    /// Longest distance for which the transfer-function phase is sampled at
    /// or above Nyquist on the padded grid:
    /// `|z| <= N_pad dx sqrt(1 - (lambda f_max)^2) / (2 lambda f_max)` with
    /// `f_max = 1 / (2 dx)`.
    pub fn max_distance(&self) -> f64 {
        let (px, py) = self.padded();
        let n = px.min(py) as f64;
        let dx = self.grid.pitch;
        let lf = self.grid.wavelength / (2.0 * dx);
        if lf >= 1.0 {
            return 0.0;
        }
        n * dx * (1.0 - lf * lf).sqrt() / (2.0 * self.grid.wavelength / (2.0 * dx))
    }

    fn check_sampling(&self, distance: f64) -> Result<()> {
        if !distance.is_finite() {
            return Err(Error::InvalidInput(format!("distance must be finite, got {distance}")));
        }
        let limit = self.max_distance();
        if distance.abs() <= limit * (1.0 + 1e-12) {
            return Ok(());
        }
        let dx = self.grid.pitch;
        let lf = self.grid.wavelength / (2.0 * dx);
        let min_pixels = if lf >= 1.0 {
            usize::MAX
        } else {
            let padded = 2.0 * distance.abs() * lf / (dx * (1.0 - lf * lf).sqrt());
            (padded / self.padding as f64).ceil() as usize
        };
        Err(Error::Sampling {
            distance,
            limit,
            min_pixels,
        })
    }

    pub fn transfer_function(&self, distance: f64) -> Result<TransferFunction> {
        self.check_sampling(distance)?;
        let (px, py) = self.padded();
        let k = self.grid.wavenumber();
        let k2 = k * k;
        let fx: Vec<f64> = (0..px).map(|i| angular_frequency(i, px, self.grid.pitch)).collect();
        let fy: Vec<f64> = (0..py).map(|j| angular_frequency(j, py, self.grid.pitch)).collect();
        let mut values = Vec::with_capacity(px * py);
        let mut evanescent = Vec::with_capacity(px * py);
        for &kx in &fx {
            for &ky in &fy {
                let kz2 = k2 - kx * kx - ky * ky;
                if kz2 > 0.0 {
                    values.push(Complex64::from_polar(1.0, distance * kz2.sqrt()));
                    evanescent.push(false);
                } else {
                    values.push(Complex64::new(0.0, 0.0));
                    evanescent.push(true);
                }
            }
        }
        let has_evanescent = evanescent.iter().any(|e| *e);
        Ok(TransferFunction {
            distance,
            values,
            evanescent,
            has_evanescent,
        })
    }

    pub fn propagate(&self, field: &OpticalField, distance: f64) -> Result<OpticalField> {
        let tf = self.transfer_function(distance)?;
        self.apply(field, &tf)
    }

    /// Propagates and reports evanescent clipping and window losses.
    pub fn propagate_with_report(&self, field: &OpticalField, distance: f64) -> Result<Propagation> {
        let tf = self.transfer_function(distance)?;
        let (out, evanescent_fraction) = self.apply_inner(field, &tf, true)?;
        let p_in = field.power();
        let retained_fraction = if p_in > 0.0 { out.power() / p_in } else { 1.0 };
        Ok(Propagation {
            field: out,
            evanescent_fraction,
            retained_fraction,
        })
    }

    pub fn apply(&self, field: &OpticalField, tf: &TransferFunction) -> Result<OpticalField> {
        Ok(self.apply_inner(field, tf, false)?.0)
    }

    fn apply_inner(
        &self,
        field: &OpticalField,
        tf: &TransferFunction,
        measure_clipping: bool,
    ) -> Result<(OpticalField, f64)> {
        if field.grid() != &self.grid {
            return Err(Error::Geometry(format!(
                "field grid {:?} does not match propagator grid {:?}",
                field.grid(),
                self.grid
            )));
        }
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (px, py) = self.padded();
        if tf.values.len() != px * py {
            return Err(Error::InvalidInput("transfer function built for another grid".into()));
        }
        let src = field.amplitude();

        // Row transforms of the ny occupied rows; padded rows stay zero.
        let mut rows = vec![Complex64::new(0.0, 0.0); ny * px];
        for (iy, row) in rows.chunks_exact_mut(px).enumerate() {
            for ix in 0..nx {
                row[ix] = src[[iy, ix]];
            }
        }
        self.fft_x.process(&mut rows);

        // Transpose so that each padded column is contiguous.
        let mut cols = vec![Complex64::new(0.0, 0.0); px * py];
        for iy in 0..ny {
            for ix in 0..px {
                cols[ix * py + iy] = rows[iy * px + ix];
            }
        }
        self.fft_y.process(&mut cols);

        let mut clipped = 0.0;
        let mut total = 0.0;
        if measure_clipping {
            for (v, &ev) in cols.iter().zip(&tf.evanescent) {
                let p = v.norm_sqr();
                total += p;
                if ev {
                    clipped += p;
                }
            }
        }
        for (v, h) in cols.iter_mut().zip(&tf.values) {
            *v *= h;
        }
        self.ifft_y.process(&mut cols);

        for iy in 0..ny {
            for ix in 0..px {
                rows[iy * px + ix] = cols[ix * py + iy];
            }
        }
        self.ifft_x.process(&mut rows);

        let scale = 1.0 / (px * py) as f64;
        let out = Array2::from_shape_fn((ny, nx), |(iy, ix)| rows[iy * px + ix] * scale);
        let fraction = if measure_clipping && tf.has_evanescent && total > 0.0 {
            clipped / total
        } else {
            0.0
        };
        Ok((OpticalField::new(self.grid, out)?, fraction))
    }
}

/// Angular spatial frequency of FFT bin `i` out of `n` at sample spacing `dx`.
fn angular_frequency(i: usize, n: usize, dx: f64) -> f64 {
    let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    2.0 * PI * m / (n as f64 * dx)
}
