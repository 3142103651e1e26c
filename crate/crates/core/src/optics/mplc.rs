//! Phase-mask stacks, the forward model of a multi-plane light converter and
//! wavefront-matching design.
//!
//! Forward model: the input field sits at plane 1. For each mask `p = 1..=P`
//! the field is multiplied by `exp(i phi_p)` and propagated one plane spacing;
//! one further spacing reaches the detection plane, so an all-zero stack is
//! free space over `(P + 1)` spacings.

use std::f64::consts::TAU;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;

use super::field::{GridSpec, OpticalField};
use super::propagation::{Propagator, TransferFunction};
use crate::error::{Error, Result};

/// Tolerance on `|<u_i|u_j>|` for unit-power mode sets to count as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMaskStack {
    grid: GridSpec,
    masks: Vec<Array2<f64>>,
    plane_spacing: f64,
}

impl PhaseMaskStack {
    /// Validates shapes and wraps every phase into `[0, 2 pi)`.
    pub fn new(grid: GridSpec, masks: Vec<Array2<f64>>, plane_spacing: f64) -> Result<Self> {
        grid.validate()?;
        if masks.is_empty() {
            return Err(Error::InvalidConfig("a mask stack needs at least one plane".into()));
        }
        if !plane_spacing.is_finite() {
            return Err(Error::InvalidConfig("plane spacing must be finite".into()));
        }
        let mut wrapped = Vec::with_capacity(masks.len());
        for (p, m) in masks.into_iter().enumerate() {
            if m.dim() != grid.shape() {
                return Err(Error::Geometry(format!(
                    "mask {} has shape {:?}, grid is {:?}",
                    p + 1,
                    m.dim(),
                    grid.shape()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "mask {} contains non-finite phases",
                    p + 1
                )));
            }
            wrapped.push(m.mapv(wrap_phase));
        }
        Ok(Self {
            grid,
            masks: wrapped,
            plane_spacing,
        })
    }

    pub fn zeros(grid: GridSpec, planes: usize, plane_spacing: f64) -> Result<Self> {
        Self::new(grid, vec![Array2::zeros(grid.shape()); planes], plane_spacing)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn masks(&self) -> &[Array2<f64>] {
        &self.masks
    }

    pub fn planes(&self) -> usize {
        self.masks.len()
    }

    pub fn plane_spacing(&self) -> f64 {
        self.plane_spacing
    }
}

/// Maps any real phase into `[0, 2 pi)`.
pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Pointwise multiplication by `exp(i phase)`.
pub fn apply_mask(field: &OpticalField, phase: &Array2<f64>) -> Result<OpticalField> {
    if phase.dim() != field.grid().shape() {
        return Err(Error::Geometry(format!(
            "mask shape {:?} does not match field shape {:?}",
            phase.dim(),
            field.grid().shape()
        )));
    }
    let mut out = field.clone();
    Zip::from(out.amplitude_mut())
        .and(phase)
        .for_each(|u, &phi| *u *= Complex64::from_polar(1.0, phi));
    Ok(out)
}

fn apply_phase_in_place(field: &mut OpticalField, phase: &Array2<f64>, sign: f64) {
    Zip::from(field.amplitude_mut())
        .and(phase)
        .for_each(|u, &phi| *u *= Complex64::from_polar(1.0, sign * phi));
}

/// Transfer functions for one and minus one plane spacing.
struct Steps {
    forward: TransferFunction,
    backward: TransferFunction,
}

impl Steps {
    fn new(prop: &Propagator, spacing: f64) -> Result<Self> {
        Ok(Self {
            forward: prop.transfer_function(spacing)?,
            backward: prop.transfer_function(-spacing)?,
        })
    }
}

fn run_forward(prop: &Propagator, steps: &Steps, stack: &PhaseMaskStack, field: &OpticalField) -> Result<OpticalField> {
    let mut u = field.clone();
    for mask in &stack.masks {
        apply_phase_in_place(&mut u, mask, 1.0);
        u = prop.apply(&u, &steps.forward)?;
    }
    prop.apply(&u, &steps.forward)
}

fn check_stack_grid(stack: &PhaseMaskStack, field: &OpticalField) -> Result<()> {
    if stack.grid != *field.grid() {
        return Err(Error::Geometry(format!(
            "stack grid {:?} does not match field grid {:?}",
            stack.grid,
            field.grid()
        )));
    }
    Ok(())
}

/// Field at the detection plane for one input.
pub fn forward_pass(stack: &PhaseMaskStack, field: &OpticalField) -> Result<OpticalField> {
    check_stack_grid(stack, field)?;
    let prop = Propagator::new(stack.grid)?;
    let steps = Steps::new(&prop, stack.plane_spacing)?;
    run_forward(&prop, &steps, stack, field)
}

/// Forward passes of several inputs, evaluated in parallel.
pub(crate) fn forward_all(stack: &PhaseMaskStack, fields: &[OpticalField]) -> Result<Vec<OpticalField>> {
    for f in fields {
        check_stack_grid(stack, f)?;
    }
    let prop = Propagator::new(stack.grid)?;
    let steps = Steps::new(&prop, stack.plane_spacing)?;
    fields
        .par_iter()
        .map(|f| run_forward(&prop, &steps, stack, f))
        .collect()
}

/// `sum_k coeffs[k] * modes[k]`.
pub fn superpose_modes(modes: &[OpticalField], coeffs: &[Complex64]) -> Result<OpticalField> {
    let Some(first) = modes.first() else {
        return Err(Error::InvalidModeSet("no modes to superpose".into()));
    };
    if modes.len() != coeffs.len() {
        return Err(Error::InvalidInput(format!(
            "{} modes but {} coefficients",
            modes.len(),
            coeffs.len()
        )));
    }
    let mut acc = OpticalField::zeros(*first.grid());
    for (m, &c) in modes.iter().zip(coeffs) {
        acc.ensure_same_grid(m)?;
        Zip::from(acc.amplitude_mut())
            .and(m.amplitude())
            .for_each(|a, &b| *a += c * b);
    }
    Ok(acc)
}

/// Normalises every field and checks pairwise orthogonality.
fn orthonormal_copy(fields: &[OpticalField], what: &str) -> Result<Vec<OpticalField>> {
    let normed = fields
        .iter()
        .map(|f| f.normalized())
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::InvalidModeSet(format!("{what}: {e}")))?;
    for i in 0..normed.len() {
        normed[i].ensure_same_grid(&normed[0])?;
        for j in i + 1..normed.len() {
            let o = normed[i].inner(&normed[j])?.norm();
            if o > ORTHOGONALITY_TOL {
                return Err(Error::InvalidModeSet(format!(
                    "{what} {} and {} overlap by {o:.3e}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(normed)
}

/// `T[i][j] = <output_i | forward_pass(stack, input_j)>` with every mode
/// normalised to unit power.
pub fn transfer_matrix(
    stack: &PhaseMaskStack,
    inputs: &[OpticalField],
    output_modes: &[OpticalField],
) -> Result<Array2<Complex64>> {
    let inputs = inputs.iter().map(|f| f.normalized()).collect::<Result<Vec<_>>>()?;
    let outputs = orthonormal_copy(output_modes, "output mode")?;
    let propagated = forward_all(stack, &inputs)?;
    let mut t = Array2::zeros((outputs.len(), inputs.len()));
    for (j, out) in propagated.iter().enumerate() {
        for (i, mode) in outputs.iter().enumerate() {
            t[[i, j]] = mode.inner(out)?;
        }
    }
    Ok(t)
}

/// Mean of `|<target_m | forward_pass(stack, input_m)>|^2` over modes.
pub fn mean_fidelity(stack: &PhaseMaskStack, inputs: &[OpticalField], targets: &[OpticalField]) -> Result<f64> {
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(Error::InvalidModeSet(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let inputs = inputs.iter().map(|f| f.normalized()).collect::<Result<Vec<_>>>()?;
    let targets = targets.iter().map(|f| f.normalized()).collect::<Result<Vec<_>>>()?;
    let outs = forward_all(stack, &inputs)?;
    objective(&targets, &outs)
}

fn objective(targets: &[OpticalField], outputs: &[OpticalField]) -> Result<f64> {
    let mut sum = 0.0;
    for (t, o) in targets.iter().zip(outputs) {
        sum += t.inner(o)?.norm_sqr();
    }
    Ok(sum / targets.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavefrontMatchConfig {
    pub planes: usize,
    pub plane_spacing: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct WavefrontMatch {
    pub stack: PhaseMaskStack,
    /// Matching objective (mean mode fidelity) of the all-zero starting stack
    /// followed by its value after every sweep.
    pub history: Vec<f64>,
}

impl WavefrontMatch {
    pub fn initial_fidelity(&self) -> f64 {
        self.history[0]
    }

    pub fn final_fidelity(&self) -> f64 {
        *self.history.last().unwrap_or(&0.0)
    }
}

/// Designs a `planes`-mask stack mapping each input to its target at the
/// detection plane.
///
/// Every iteration first back-propagates all targets through the current
/// masks, storing the field just after each mask, then sweeps masks
/// `1..=P` in order, setting `phi_p = -arg(sum_m F_m conj(B_m))` from the
/// freshly forward-propagated inputs `F_m` and the stored backward fields
/// `B_m`. The per-pixel sum runs over modes in a fixed order, so the result
/// does not depend on thread scheduling.
pub fn wavefront_match(
    inputs: &[OpticalField],
    targets: &[OpticalField],
    config: &WavefrontMatchConfig,
) -> Result<WavefrontMatch> {
    if config.planes < 1 || config.iterations < 1 {
        return Err(Error::InvalidConfig(format!(
            "need planes >= 1 and iterations >= 1, got {} and {}",
            config.planes, config.iterations
        )));
    }
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidModeSet(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let inputs = orthonormal_copy(inputs, "input")?;
    let targets = orthonormal_copy(targets, "target")?;
    let grid = *inputs[0].grid();
    targets[0].ensure_same_grid(&inputs[0])?;

    let prop = Propagator::new(grid)?;
    let steps = Steps::new(&prop, config.plane_spacing)?;
    let mut stack = PhaseMaskStack::zeros(grid, config.planes, config.plane_spacing)?;
    let planes = config.planes;

    let initial = {
        let outs: Vec<OpticalField> = inputs
            .par_iter()
            .map(|f| run_forward(&prop, &steps, &stack, f))
            .collect::<Result<_>>()?;
        objective(&targets, &outs)?
    };
    let mut history = vec![initial];

    for _ in 0..config.iterations {
        // backward[m][p]: target m just after mask p, under the current masks.
        let backward: Vec<Vec<OpticalField>> = targets
            .par_iter()
            .map(|t| -> Result<Vec<OpticalField>> {
                let mut fields = vec![OpticalField::zeros(grid); planes];
                let mut u = prop.apply(t, &steps.backward)?;
                u = prop.apply(&u, &steps.backward)?;
                fields[planes - 1] = u.clone();
                for p in (0..planes - 1).rev() {
                    apply_phase_in_place(&mut u, &stack.masks[p + 1], -1.0);
                    u = prop.apply(&u, &steps.backward)?;
                    fields[p] = u.clone();
                }
                Ok(fields)
            })
            .collect::<Result<_>>()?;

        let mut forward: Vec<OpticalField> = inputs.clone();
        for p in 0..planes {
            let new_mask = matched_phase(&forward, &backward, p, grid);
            stack.masks[p] = new_mask;
            let mask = &stack.masks[p];
            forward = forward
                .into_par_iter()
                .map(|mut u| {
                    apply_phase_in_place(&mut u, mask, 1.0);
                    prop.apply(&u, &steps.forward)
                })
                .collect::<Result<_>>()?;
        }
        let outs: Vec<OpticalField> = forward
            .par_iter()
            .map(|u| prop.apply(u, &steps.forward))
            .collect::<Result<_>>()?;
        history.push(objective(&targets, &outs)?);
    }

    Ok(WavefrontMatch { stack, history })
}

fn matched_phase(
    forward: &[OpticalField],
    backward: &[Vec<OpticalField>],
    plane: usize,
    grid: GridSpec,
) -> Array2<f64> {
    let nx = grid.nx;
    let mut mask = Array2::<f64>::zeros(grid.shape());
    mask.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(nx)
        .enumerate()
        .for_each(|(iy, row)| {
            for (ix, out) in row.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (f, b) in forward.iter().zip(backward) {
                    acc += f.amplitude()[[iy, ix]] * b[plane].amplitude()[[iy, ix]].conj();
                }
                *out = wrap_phase(-acc.arg());
            }
        });
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::modes::{make_aperture_modes, ApertureLayout, Arrangement};

    fn grid() -> GridSpec {
        GridSpec::new(32, 32, 10e-6, 810e-9).unwrap()
    }

    fn gaussian(grid: GridSpec, x0: f64, w: f64) -> OpticalField {
        OpticalField::from_fn(grid, |x, y| {
            Complex64::new((-((x - x0).powi(2) + y * y) / (w * w)).exp(), 0.0)
        })
        .normalized()
        .unwrap()
    }

    #[test]
    fn wrap_phase_range() {
        for phi in [-7.0, -TAU, -1e-18, 0.0, 3.0, TAU, 12.0] {
            let w = wrap_phase(phi);
            assert!((0.0..TAU).contains(&w), "{phi} -> {w}");
        }
    }

    #[test]
    fn mask_identities() {
        let g = grid();
        let f = gaussian(g, 0.0, 50e-6);
        let zero = Array2::zeros(g.shape());
        assert_eq!(apply_mask(&f, &zero).unwrap(), f);

        let phi = 1.234;
        let constant = Array2::from_elem(g.shape(), phi);
        let out = apply_mask(&f, &constant).unwrap();
        let rot = Complex64::from_polar(1.0, phi);
        assert!(out.relative_distance(&f.scaled(rot)) < 1e-15);

        let mask = Array2::from_shape_fn(g.shape(), |(i, j)| (i * 7 + j * 3) as f64 * 0.37);
        let back = apply_mask(&apply_mask(&f, &mask).unwrap(), &mask.mapv(|v| -v)).unwrap();
        assert!(back.relative_distance(&f) < 1e-14);
        assert!(apply_mask(&f, &Array2::zeros((3, 3))).is_err());
    }

    #[test]
    fn stack_validation_and_wrapping() {
        let g = grid();
        assert!(PhaseMaskStack::new(g, vec![], 1e-3).is_err());
        assert!(PhaseMaskStack::new(g, vec![Array2::zeros((4, 4))], 1e-3).is_err());
        let s = PhaseMaskStack::new(g, vec![Array2::from_elem(g.shape(), -1.0)], 1e-3).unwrap();
        assert!((s.masks()[0][[0, 0]] - (TAU - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_stack_is_free_space() {
        let g = grid();
        let f = gaussian(g, 20e-6, 40e-6);
        let stack = PhaseMaskStack::zeros(g, 3, 1e-3).unwrap();
        let out = forward_pass(&stack, &f).unwrap();
        let prop = Propagator::new(g).unwrap();
        let mut reference = f.clone();
        for _ in 0..4 {
            reference = prop.propagate(&reference, 1e-3).unwrap();
        }
        assert!(out.relative_distance(&reference) < 1e-12);
        assert!((out.power() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn single_plane_is_screen_then_propagation() {
        let g = grid();
        let f = gaussian(g, 0.0, 40e-6);
        let mask = Array2::from_shape_fn(g.shape(), |(i, j)| 0.1 * (i as f64) - 0.05 * j as f64);
        let stack = PhaseMaskStack::new(g, vec![mask.clone()], 2e-3).unwrap();
        let prop = Propagator::new(g).unwrap();
        let expected = prop
            .propagate(&prop.propagate(&apply_mask(&f, &mask).unwrap(), 2e-3).unwrap(), 2e-3)
            .unwrap();
        let got = forward_pass(&stack, &f).unwrap();
        assert!(got.relative_distance(&expected) < 1e-12);
    }

    #[test]
    fn wavefront_match_rejects_bad_input() {
        let g = grid();
        let a = gaussian(g, 0.0, 40e-6);
        let b = gaussian(g, 5e-6, 40e-6);
        let cfg = WavefrontMatchConfig {
            planes: 2,
            plane_spacing: 1e-3,
            iterations: 1,
        };
        assert!(matches!(
            wavefront_match(&[a.clone(), b.clone()], &[a.clone(), b.clone()], &cfg),
            Err(Error::InvalidModeSet(_))
        ));
        let bad = WavefrontMatchConfig { planes: 0, ..cfg };
        assert!(matches!(
            wavefront_match(std::slice::from_ref(&a), std::slice::from_ref(&a), &bad),
            Err(Error::InvalidConfig(_))
        ));
        let bad = WavefrontMatchConfig { iterations: 0, ..cfg };
        assert!(matches!(
            wavefront_match(std::slice::from_ref(&a), std::slice::from_ref(&a), &bad),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn identity_transfer_for_short_free_space() {
        let g = GridSpec::new(64, 64, 10e-6, 810e-9).unwrap();
        let layout = ApertureLayout {
            count: 4,
            radius: 60e-6,
            spacing: 200e-6,
            arrangement: Arrangement::Square,
        };
        let modes = make_aperture_modes(&layout, &g).unwrap();
        let stack = PhaseMaskStack::zeros(g, 2, 50e-6).unwrap();
        let prop = Propagator::new(g).unwrap();
        let outputs: Vec<OpticalField> = modes
            .iter()
            .map(|m| {
                let mut u = m.clone();
                for _ in 0..3 {
                    u = prop.propagate(&u, 50e-6).unwrap();
                }
                u
            })
            .collect();
        let t = transfer_matrix(&stack, &modes, &outputs).unwrap();
        for i in 0..4 {
            assert!((t[[i, i]].norm() - 1.0).abs() < 1e-6, "{}", t[[i, i]]);
        }
    }
}
