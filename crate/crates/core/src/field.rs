//! Vector fields on the periodic box, their transforms, multipliers, and the
//! norms used by the energy estimates.
//!
//! `forward_transform` discretizes `F(f)(xi) = int e^{-2 pi i xi . x} f(x) dx`
//! by the rectangle rule, so a constant `c` transforms to `c * volume` at
//! `xi = 0` and `inverse_transform` divides the raw inverse DFT by the box
//! volume.

use crate::error::{Result, SnseError};
use crate::fft::dft_nd;
use crate::grid::Grid;
use num_complex::Complex64;

/// d-component real field sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVectorField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

/// Complex Fourier coefficients of a d-component field, indexed by lattice
/// frequency in the same row-major layout as the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField {
    grid: Grid,
    components: Vec<Vec<Complex64>>,
}

/// Finite stand-in for an l^2(H)-valued field: K member fields sharing a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LtwoSequenceField {
    modes: Vec<RealVectorField>,
}

impl RealVectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(SnseError::DimensionMismatch(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for c in &components {
            if c.len() != grid.points() {
                return Err(SnseError::DimensionMismatch(format!(
                    "component has {} samples, grid has {} points",
                    c.len(),
                    grid.points()
                )));
            }
            if !c.iter().all(|v| v.is_finite()) {
                return Err(SnseError::NonFinite("field sample".into()));
            }
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.points();
        let d = grid.dim();
        Self { grid, components: vec![vec![0.0; n]; d] }
    }

    /// Build a field from a closure of (component, coordinates).
    pub fn from_fn(grid: Grid, f: impl Fn(usize, &[f64]) -> f64) -> Self {
        let d = grid.dim();
        let n = grid.points();
        let mut components = vec![vec![0.0; n]; d];
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        for flat in 0..n {
            grid.unravel(flat, &mut idx);
            for a in 0..d {
                x[a] = grid.coord(a, idx[a]);
            }
            for (j, comp) in components.iter_mut().enumerate() {
                comp[flat] = f(j, &x);
            }
        }
        Self { grid, components }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.components[j]
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Pointwise Euclidean length of the d-vector at flat index `i`.
    pub fn magnitude_at(&self, i: usize) -> f64 {
        self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.components {
            for v in c.iter_mut() {
                *v *= a;
            }
        }
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (c, o) in self.components.iter_mut().zip(&other.components) {
            for (v, w) in c.iter_mut().zip(o) {
                *v += a * w;
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Spatial mean of each component.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.grid.points() as f64;
        self.components.iter().map(|c| c.iter().sum::<f64>() / n).collect()
    }
}

impl SpectralVectorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, j: usize) -> &[Complex64] {
        &self.components[j]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.components[j]
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.points();
        let d = grid.dim();
        Self { grid, components: vec![vec![Complex64::default(); n]; d] }
    }

    pub fn from_components(grid: Grid, components: Vec<Vec<Complex64>>) -> Result<Self> {
        if components.len() != grid.dim()
            || components.iter().any(|c| c.len() != grid.points())
        {
            return Err(SnseError::DimensionMismatch("spectral components vs grid".into()));
        }
        Ok(Self { grid, components })
    }

    /// Apply a scalar Fourier multiplier `m(xi)` to every component.
    pub fn apply_multiplier(&self, m: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let table = multiplier_table(&self.grid, m)?;
        Ok(self.apply_table(&table))
    }

    /// Apply a precomputed multiplier table (one entry per lattice point).
    pub fn apply_table(&self, table: &[Complex64]) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| c.iter().zip(table).map(|(v, m)| v * m).collect())
            .collect();
        Self { grid: self.grid.clone(), components }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.components {
            for v in c.iter_mut() {
                *v *= a;
            }
        }
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (c, o) in self.components.iter_mut().zip(&other.components) {
            for (v, w) in c.iter_mut().zip(o) {
                *v += a * w;
            }
        }
    }

    /// Relative spectral divergence: max_xi |xi . u^(xi)| normalized by
    /// max_xi |xi| |u^(xi)|, with the Nyquist-zeroed derivative frequencies.
    /// Zero for divergence-free coefficients.
    pub fn divergence_rel(&self) -> f64 {
        let d = self.grid.dim();
        let mut idx = vec![0usize; d];
        let mut xi = vec![0.0; d];
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for flat in 0..self.grid.points() {
            self.grid.freq_deriv_at(flat, &mut idx, &mut xi);
            let mut dot = Complex64::default();
            let mut mag2 = 0.0;
            for j in 0..d {
                dot += xi[j] * self.components[j][flat];
                mag2 += self.components[j][flat].norm_sqr();
            }
            let xinorm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            num = num.max(dot.norm());
            den = den.max(xinorm * mag2.sqrt());
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Max deviation from Hermitian symmetry, relative to the largest
    /// coefficient magnitude.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.grid.dim();
        let dims = self.grid.dims().to_vec();
        let mut idx = vec![0usize; d];
        let mut neg = vec![0usize; d];
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for flat in 0..self.grid.points() {
            self.grid.unravel(flat, &mut idx);
            for a in 0..d {
                neg[a] = (dims[a] - idx[a]) % dims[a];
            }
            let nflat = self.grid.ravel(&neg);
            for c in &self.components {
                worst = worst.max((c[flat] - c[nflat].conj()).norm());
                scale = scale.max(c[flat].norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

/// Tabulate a multiplier over the lattice, rejecting non-finite values.
pub fn multiplier_table(
    grid: &Grid,
    m: impl Fn(&[f64]) -> Complex64,
) -> Result<Vec<Complex64>> {
    let d = grid.dim();
    let mut idx = vec![0usize; d];
    let mut xi = vec![0.0; d];
    let mut table = Vec::with_capacity(grid.points());
    for flat in 0..grid.points() {
        grid.freq_at(flat, &mut idx, &mut xi);
        let v = m(&xi);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(SnseError::NonFinite(format!("multiplier at xi={xi:?}")));
        }
        table.push(v);
    }
    Ok(table)
}

/// Forward transform: `f^(m/L) = volume_element * DFT(f)`.
pub fn forward_transform(f: &RealVectorField) -> Result<SpectralVectorField> {
    if !f.is_finite() {
        return Err(SnseError::NonFinite("forward_transform input".into()));
    }
    let grid = f.grid().clone();
    let h = grid.volume_element();
    let dims = grid.dims().to_vec();
    let components = f
        .components
        .iter()
        .map(|c| {
            let mut buf: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v * h, 0.0)).collect();
            dft_nd(&mut buf, &dims, true);
            buf
        })
        .collect();
    SpectralVectorField::from_components(grid, components)
}

/// Inverse transform back to real samples (imaginary parts are dropped; they
/// vanish for Hermitian-symmetric coefficients).
pub fn inverse_transform(fh: &SpectralVectorField) -> Result<RealVectorField> {
    let grid = fh.grid().clone();
    let vol = grid.volume();
    let dims = grid.dims().to_vec();
    let components: Vec<Vec<f64>> = fh
        .components
        .iter()
        .map(|c| {
            let mut buf = c.clone();
            dft_nd(&mut buf, &dims, false);
            buf.iter().map(|v| v.re / vol).collect()
        })
        .collect();
    RealVectorField::new(grid, components)
}

/// L^p norm of the Euclidean magnitude, rectangle-rule quadrature.
pub fn lp_norm(f: &RealVectorField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(SnseError::InvalidParameter { name: "p", reason: format!("need p >= 1, got {p}") });
    }
    let h = f.grid().volume_element();
    let mut acc = 0.0;
    for i in 0..f.grid().points() {
        acc += f.magnitude_at(i).powf(p);
    }
    Ok((acc * h).powf(1.0 / p))
}

/// L^p norm of a scalar sample array on `grid`.
pub fn lp_norm_scalar(grid: &Grid, data: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(SnseError::InvalidParameter { name: "p", reason: format!("need p >= 1, got {p}") });
    }
    let h = grid.volume_element();
    let acc: f64 = data.iter().map(|v| v.abs().powf(p)).sum();
    Ok((acc * h).powf(1.0 / p))
}

impl LtwoSequenceField {
    pub fn new(modes: Vec<RealVectorField>) -> Result<Self> {
        if modes.is_empty() {
            return Err(SnseError::InvalidParameter { name: "modes", reason: "need K >= 1".into() });
        }
        let g = modes[0].grid().clone();
        if modes.iter().any(|m| *m.grid() != g) {
            return Err(SnseError::DimensionMismatch("mixed grids among modes".into()));
        }
        Ok(Self { modes })
    }

    pub fn modes(&self) -> &[RealVectorField] {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> &RealVectorField {
        &self.modes[k]
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        self.modes[0].grid()
    }

    /// Apply `op` to every member field.
    pub fn map(&self, op: impl Fn(&RealVectorField) -> Result<RealVectorField>) -> Result<Self> {
        let modes = self.modes.iter().map(op).collect::<Result<Vec<_>>>()?;
        Self::new(modes)
    }
}

/// Mixed norm: pointwise l^2 over the K modes (and the d components), then
/// the L^p quadrature over the box.
pub fn hs_lp_norm(g: &LtwoSequenceField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(SnseError::InvalidParameter { name: "p", reason: format!("need p >= 1, got {p}") });
    }
    let grid = g.grid();
    let h = grid.volume_element();
    let mut acc = 0.0;
    for i in 0..grid.points() {
        let mut s = 0.0;
        for m in &g.modes {
            for c in &m.components {
                s += c[i] * c[i];
            }
        }
        acc += s.powf(p / 2.0);
    }
    Ok((acc * h).powf(1.0 / p))
}

/// Centered second-order periodic finite difference of a scalar array.
pub fn gradient_fd(grid: &Grid, data: &[f64], axis: usize) -> Vec<f64> {
    let d = grid.dim();
    let n_axis = grid.dims()[axis];
    let two_h = 2.0 * grid.spacing(axis);
    let mut out = vec![0.0; data.len()];
    let mut idx = vec![0usize; d];
    for flat in 0..data.len() {
        grid.unravel(flat, &mut idx);
        let i = idx[axis];
        idx[axis] = (i + 1) % n_axis;
        let up = grid.ravel(&idx);
        idx[axis] = (i + n_axis - 1) % n_axis;
        let dn = grid.ravel(&idx);
        idx[axis] = i;
        out[flat] = (data[up] - data[dn]) / two_h;
    }
    out
}
