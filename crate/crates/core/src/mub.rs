//! Mutually unbiased bases.
//!
//! Bases are stored as `d x d` complex matrices whose column `k` is basis
//! state `k` written in the computational basis. Public accessors that take
//! state or mode indices are 1-based (`1..=d`); the raw `ndarray` views are
//! 0-based like any other array.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum entry-wise deviation of `B^H B` from the identity accepted for a basis.
pub const UNITARITY_TOL: f64 = 1e-12;
/// Maximum deviation of a cross-basis squared overlap from `1/d`.
pub const UNBIASED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    label: String,
    amplitudes: Array2<Complex64>,
}

impl Basis {
    /// Builds a basis after checking that `amplitudes` is square and unitary
    /// within [`UNITARITY_TOL`].
    pub fn new(label: impl Into<String>, amplitudes: Array2<Complex64>) -> Result<Self> {
        let basis = Self::from_matrix_unchecked(label, amplitudes)?;
        let deviation = basis.unitarity_deviation();
        if deviation > UNITARITY_TOL {
            return Err(Error::InvalidInput(format!(
                "basis '{}' is not unitary: max |B^H B - I| = {deviation:.3e}",
                basis.label
            )));
        }
        Ok(basis)
    }

    /// Wraps a square matrix without the unitarity check. Used when loading
    /// files whose deviation is to be reported rather than rejected.
    pub fn from_matrix_unchecked(label: impl Into<String>, amplitudes: Array2<Complex64>) -> Result<Self> {
        let (rows, cols) = amplitudes.dim();
        if rows == 0 || rows != cols {
            return Err(Error::InvalidDimension(format!(
                "basis matrix must be square and non-empty, got {rows}x{cols}"
            )));
        }
        Ok(Self {
            label: label.into(),
            amplitudes: amplitudes.as_standard_layout().into_owned(),
        })
    }

    pub fn computational(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("dimension must be >= 1".into()));
        }
        let eye = Array2::from_shape_fn((dim, dim), |(n, k)| {
            if n == k {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok(Self {
            label: "computational".into(),
            amplitudes: eye,
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn amplitudes(&self) -> ArrayView2<'_, Complex64> {
        self.amplitudes.view()
    }

    /// Amplitude of state `k` on computational mode `n`, both 1-based.
    pub fn amplitude(&self, n: usize, k: usize) -> Complex64 {
        self.amplitudes[[n - 1, k - 1]]
    }

    /// State `k` (1-based) as a column of computational amplitudes.
    pub fn state(&self, k: usize) -> ArrayView1<'_, Complex64> {
        self.amplitudes.column(k - 1)
    }

    /// Entry-wise complex conjugate. Bob measures in the conjugate of
    /// Alice's basis to see perfect correlations on the pixel-entangled state.
    pub fn conjugate(&self) -> Self {
        Self {
            label: format!("conj({})", self.label),
            amplitudes: self.amplitudes.mapv(|z| z.conj()),
        }
    }

    /// Max entry-wise `|B^H B - I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        let a = &self.amplitudes;
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..d {
                    acc += a[[n, i]].conj() * a[[n, j]];
                }
                if i == j {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// Largest deviation of a column norm from one.
    pub fn column_norm_deviation(&self) -> f64 {
        self.amplitudes
            .columns()
            .into_iter()
            .map(|c| (c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_document(&self) -> BasisDocument {
        BasisDocument {
            dim: self.dim(),
            label: self.label.clone(),
            re: self
                .amplitudes
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|z| z.re).collect())
                .collect(),
            im: self
                .amplitudes
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|z| z.im).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    /// Parses and validates a basis document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BasisDocument = serde_json::from_str(text)?;
        doc.into_basis()
    }
}

/// On-disk form of a [`Basis`]: row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDocument {
    pub dim: usize,
    pub label: String,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl BasisDocument {
    /// Rebuilds the matrix, checking only the shape.
    pub fn into_unchecked(self) -> Result<Basis> {
        let d = self.dim;
        let shape_ok = self.re.len() == d
            && self.im.len() == d
            && self.re.iter().all(|r| r.len() == d)
            && self.im.iter().all(|r| r.len() == d);
        if !shape_ok {
            return Err(Error::Format(format!(
                "basis '{}' declares dim {d} but the re/im arrays are not {d}x{d}",
                self.label
            )));
        }
        let m = Array2::from_shape_fn((d, d), |(n, k)| Complex64::new(self.re[n][k], self.im[n][k]));
        Basis::from_matrix_unchecked(self.label, m)
    }

    pub fn into_basis(self) -> Result<Basis> {
        let b = self.into_unchecked()?;
        Basis::new(b.label, b.amplitudes)
    }
}

/// An ordered family of pairwise mutually unbiased bases; the first entry is
/// the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MubSet {
    bases: Vec<Basis>,
}

impl MubSet {
    pub fn new(bases: Vec<Basis>) -> Result<Self> {
        let Some(first) = bases.first() else {
            return Err(Error::InvalidInput("a MUB set needs at least one basis".into()));
        };
        let d = first.dim();
        if bases.iter().any(|b| b.dim() != d) {
            return Err(Error::InvalidInput(
                "bases in a MUB set must share one dimension".into(),
            ));
        }
        for i in 0..bases.len() {
            for j in i + 1..bases.len() {
                let check = check_mub_pair(&bases[i], &bases[j], UNBIASED_TOL)?;
                if !check.unbiased {
                    return Err(Error::InvalidInput(format!(
                        "bases '{}' and '{}' are not mutually unbiased (max deviation {:.3e})",
                        bases[i].label(),
                        bases[j].label(),
                        check.max_deviation
                    )));
                }
            }
        }
        Ok(Self { bases })
    }

    pub fn dim(&self) -> usize {
        self.bases[0].dim()
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn into_bases(self) -> Vec<Basis> {
        self.bases
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = MubSetDocument {
            dim: self.dim(),
            bases: self.bases.iter().map(Basis::to_document).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MubSetDocument = serde_json::from_str(text)?;
        let bases = doc
            .bases
            .into_iter()
            .map(BasisDocument::into_basis)
            .collect::<Result<Vec<_>>>()?;
        if bases.iter().any(|b| b.dim() != doc.dim) {
            return Err(Error::Format("basis dimension disagrees with set dimension".into()));
        }
        Self::new(bases)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MubSetDocument {
    dim: usize,
    bases: Vec<BasisDocument>,
}

/// Row/column labelling of `d = s^2` modes on an `s x s` grid, 1-based:
/// `flat = (row - 1) * s + col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridIndex {
    side: usize,
}

impl GridIndex {
    pub fn new(dim: usize) -> Result<Self> {
        let side = exact_sqrt(dim).ok_or_else(|| Error::InvalidDimension(format!("{dim} is not a perfect square")))?;
        if side == 0 {
            return Err(Error::InvalidDimension("dimension must be >= 1".into()));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.side * self.side
    }

    pub fn flat(&self, row: usize, col: usize) -> usize {
        debug_assert!((1..=self.side).contains(&row) && (1..=self.side).contains(&col));
        (row - 1) * self.side + col
    }

    pub fn coords(&self, flat: usize) -> (usize, usize) {
        debug_assert!((1..=self.dim()).contains(&flat));
        ((flat - 1) / self.side + 1, (flat - 1) % self.side + 1)
    }
}

/// Integer square root when `n` is a perfect square.
pub fn exact_sqrt(n: usize) -> Option<usize> {
    let mut r = (n as f64).sqrt().round() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    (r * r == n).then_some(r)
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut f = 2;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return false;
        }
        f += 1;
    }
    true
}

/// `exp(2 pi i num / den)` with `num` already reduced modulo `den`.
fn root_of_unity(num: usize, den: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * num as f64 / den as f64)
}

/// The `d`-point DFT basis, `B[n][k] = exp(2 pi i (k-1)(n-1) / d) / sqrt(d)`.
pub fn dft_basis(dim: usize) -> Result<Basis> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dimension must be >= 1".into()));
    }
    let norm = 1.0 / (dim as f64).sqrt();
    let m = Array2::from_shape_fn((dim, dim), |(n, k)| root_of_unity((n * k) % dim, dim) * norm);
    Ok(Basis {
        label: "DFT".into(),
        amplitudes: m,
    })
}

/// Basis `r` (2..=d+1) of the Wootters-Fields family for prime `d`:
/// `B[n][k] = exp((2 pi i / d) [(k-1)(n-1) + (r-2)(n-1)^2]) / sqrt(d)`.
///
/// For `d = 2` the quadratic phase uses the fourth root of unity, giving the
/// usual qubit triple (computational, `(1, +-1)`, `(1, +-i)`).
pub fn wh_basis(dim: usize, r: usize) -> Result<Basis> {
    if !is_prime(dim) {
        return Err(Error::InvalidDimension(format!("{dim} is not prime")));
    }
    if !(2..=dim + 1).contains(&r) {
        return Err(Error::InvalidBasisIndex { r, dim, max: dim + 1 });
    }
    let norm = 1.0 / (dim as f64).sqrt();
    let q = r - 2;
    let m = if dim == 2 {
        Array2::from_shape_fn((2, 2), |(n, k)| root_of_unity((2 * k * n + q * n * n) % 4, 4) * norm)
    } else {
        Array2::from_shape_fn((dim, dim), |(n, k)| {
            root_of_unity((k * n + q * ((n * n) % dim)) % dim, dim) * norm
        })
    };
    let label = if r == 2 { "DFT".to_string() } else { format!("WH:r={r}") };
    Ok(Basis { label, amplitudes: m })
}

/// Computational basis followed by `wh_basis(d, r)` for `r = 2..=d+1`.
pub fn full_mub_set(dim: usize) -> Result<MubSet> {
    if !is_prime(dim) {
        return Err(Error::InvalidDimension(format!("{dim} is not prime")));
    }
    let mut bases = Vec::with_capacity(dim + 1);
    bases.push(Basis::computational(dim)?);
    for r in 2..=dim + 1 {
        bases.push(wh_basis(dim, r)?);
    }
    MubSet::new(bases)
}

/// Row-DFT and column-DFT bases on an `s x s` mode grid (`d = s^2`).
///
/// State `(a, b)` sits in column `(a-1) s + b`. The row basis superposes the
/// modes of grid row `a` with DFT phases indexed by `b`; the column basis
/// superposes the modes of grid column `b` with phases indexed by `a`.
pub fn sqrt_mub_pair(dim: usize) -> Result<(Basis, Basis)> {
    let grid = GridIndex::new(dim)?;
    let s = grid.side();
    if s < 2 {
        return Err(Error::InvalidDimension(format!(
            "{dim} is too small; need a perfect square >= 4"
        )));
    }
    let amp = 1.0 / (s as f64).sqrt();
    let mut rows = Array2::zeros((dim, dim));
    let mut cols = Array2::zeros((dim, dim));
    for a in 1..=s {
        for b in 1..=s {
            let state = grid.flat(a, b) - 1;
            for t in 1..=s {
                rows[[grid.flat(a, t) - 1, state]] = root_of_unity(((b - 1) * (t - 1)) % s, s) * amp;
                cols[[grid.flat(t, b) - 1, state]] = root_of_unity(((a - 1) * (t - 1)) % s, s) * amp;
            }
        }
    }
    let row_basis = Basis::new("row-DFT", rows)?;
    let col_basis = Basis::new("column-DFT", cols)?;
    let check = check_mub_pair(&row_basis, &col_basis, UNBIASED_TOL)?;
    if !check.unbiased {
        return Err(Error::InvalidDimension(format!(
            "row/column DFT bases at d={dim} failed the unbiasedness check ({:.3e})",
            check.max_deviation
        )));
    }
    Ok((row_basis, col_basis))
}

/// `|<b1_i | b2_j>|^2` for all state pairs.
pub fn overlap_table(b1: &Basis, b2: &Basis) -> Result<Array2<f64>> {
    if b1.dim() != b2.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            b1.dim(),
            b2.dim()
        )));
    }
    let d = b1.dim();
    let (x, y) = (&b1.amplitudes, &b2.amplitudes);
    Ok(Array2::from_shape_fn((d, d), |(i, j)| {
        (0..d)
            .map(|n| x[[n, i]].conj() * y[[n, j]])
            .sum::<Complex64>()
            .norm_sqr()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCheck {
    pub unbiased: bool,
    pub max_deviation: f64,
}

pub fn check_mub_pair(b1: &Basis, b2: &Basis, tol: f64) -> Result<PairCheck> {
    let table = overlap_table(b1, b2)?;
    let target = 1.0 / b1.dim() as f64;
    let max_deviation = table.iter().map(|p| (p - target).abs()).fold(0.0, f64::max);
    Ok(PairCheck {
        unbiased: max_deviation <= tol,
        max_deviation,
    })
}
