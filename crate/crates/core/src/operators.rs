//! Fourier multiplier operators on the box: the Gaussian low-pass projector
//! (FFT path and its direct-convolution oracle), Leray projection, the Bessel
//! potential, a compactly supported mollifier, and the truncation cutoff.

use crate::error::{Result, SnseError};
use crate::field::{
    forward_transform, inverse_transform, multiplier_table, LtwoSequenceField, RealVectorField,
    SpectralVectorField,
};
use crate::grid::Grid;
use num_complex::Complex64;

/// Guard for the O(N^2) direct convolution oracle.
pub const DIRECT_CONV_MAX_POINTS: usize = 32 * 32 * 32;

/// Gaussian projector `P_{<= n}`: multiplier `e^{-|xi/n|^2}`.
pub fn gaussian_projector(f: &RealVectorField, n: f64) -> Result<RealVectorField> {
    let fh = forward_transform(f)?;
    inverse_transform(&gaussian_projector_spectral(&fh, n)?)
}

pub fn gaussian_projector_spectral(fh: &SpectralVectorField, n: f64) -> Result<SpectralVectorField> {
    if !(n > 0.0) {
        return Err(SnseError::InvalidParameter { name: "n", reason: format!("need n > 0, got {n}") });
    }
    fh.apply_multiplier(|xi| {
        let s: f64 = xi.iter().map(|v| v * v).sum();
        Complex64::new((-s / (n * n)).exp(), 0.0)
    })
}

/// Multiplier table for `P_{<= n}` (real, cached by callers in hot loops).
pub fn gaussian_multiplier_table(grid: &Grid, n: f64) -> Result<Vec<Complex64>> {
    if !(n > 0.0) {
        return Err(SnseError::InvalidParameter { name: "n", reason: format!("need n > 0, got {n}") });
    }
    multiplier_table(grid, |xi| {
        let s: f64 = xi.iter().map(|v| v * v).sum();
        Complex64::new((-s / (n * n)).exp(), 0.0)
    })
}

pub fn gaussian_projector_seq(g: &LtwoSequenceField, n: f64) -> Result<LtwoSequenceField> {
    g.map(|m| gaussian_projector(m, n))
}

/// Lattice samples of the periodized, mass-renormalized projector kernel
/// `n^d pi^{d/2} e^{-pi^2 n^2 |x|^2}`; the periodic image range per axis is
/// widened until the discarded tail is below roundoff.
pub fn gaussian_kernel_samples(grid: &Grid, n: f64) -> Vec<f64> {
    let d = grid.dim();
    let pts = grid.points();
    let amp = n.powi(d as i32) * std::f64::consts::PI.powf(d as f64 / 2.0);
    let mut idx = vec![0usize; d];
    let mut kernel = vec![0.0; pts];
    // e^{-pi^2 n^2 ((jmax - 1) L)^2} < e^{-50} per discarded image
    let jmax: Vec<i64> = grid
        .extent()
        .iter()
        .map(|&l| (50.0f64.sqrt() / (std::f64::consts::PI * n * l)).ceil() as i64 + 1)
        .collect();

    fn image_sum(axis: usize, grid: &Grid, idx: &[usize], jmax: &[i64], r2: f64, amp: f64, n: f64) -> f64 {
        if axis == grid.dim() {
            return amp * (-std::f64::consts::PI.powi(2) * n * n * r2).exp();
        }
        let x = grid.coord(axis, idx[axis]);
        let l = grid.extent()[axis];
        let mut acc = 0.0;
        for j in -jmax[axis]..=jmax[axis] {
            let pos = x + j as f64 * l;
            acc += image_sum(axis + 1, grid, idx, jmax, r2 + pos * pos, amp, n);
        }
        acc
    }

    for flat in 0..pts {
        grid.unravel(flat, &mut idx);
        kernel[flat] = image_sum(0, grid, &idx, &jmax, 0.0, amp, n);
    }
    let mass: f64 = kernel.iter().sum::<f64>() * grid.volume_element();
    for v in &mut kernel {
        *v /= mass;
    }
    kernel
}

/// Direct-space oracle for `gaussian_projector`: circular convolution with
/// the periodized kernel, O(points^2) per component.
pub fn gaussian_projector_direct(f: &RealVectorField, n: f64) -> Result<RealVectorField> {
    if !(n > 0.0) {
        return Err(SnseError::InvalidParameter { name: "n", reason: format!("need n > 0, got {n}") });
    }
    let grid = f.grid();
    if grid.points() > DIRECT_CONV_MAX_POINTS {
        return Err(SnseError::GridTooLarge { points: grid.points(), limit: DIRECT_CONV_MAX_POINTS });
    }
    let kernel = gaussian_kernel_samples(grid, n);
    circular_convolve(f, &kernel)
}

/// Circular convolution of every component with scalar kernel samples
/// (kernel indexed by lattice offset), rectangle-rule weighted.
pub fn circular_convolve(f: &RealVectorField, kernel: &[f64]) -> Result<RealVectorField> {
    let grid = f.grid().clone();
    let d = grid.dim();
    let dims = grid.dims().to_vec();
    let h = grid.volume_element();
    let pts = grid.points();
    let mut out = RealVectorField::zeros(grid.clone());
    let mut xi_idx = vec![0usize; d];
    let mut yi_idx = vec![0usize; d];
    let mut oi_idx = vec![0usize; d];
    for x in 0..pts {
        grid.unravel(x, &mut xi_idx);
        for y in 0..pts {
            grid.unravel(y, &mut yi_idx);
            for a in 0..d {
                oi_idx[a] = (xi_idx[a] + dims[a] - yi_idx[a]) % dims[a];
            }
            let k = kernel[grid.ravel(&oi_idx)] * h;
            for j in 0..d {
                out.component_mut(j)[x] += k * f.component(j)[y];
            }
        }
    }
    Ok(out)
}

/// Leray projection: multiplier matrix `delta_jk - xi_j xi_k / |xi|^2` for
/// `xi != 0`; the mean mode is left unchanged.
pub fn leray_project(f: &RealVectorField) -> Result<RealVectorField> {
    let fh = forward_transform(f)?;
    inverse_transform(&leray_project_spectral(&fh))
}

pub fn leray_project_spectral(fh: &SpectralVectorField) -> SpectralVectorField {
    let grid = fh.grid().clone();
    let d = grid.dim();
    let mut out = fh.clone();
    let mut idx = vec![0usize; d];
    let mut xi = vec![0.0; d];
    for flat in 0..grid.points() {
        // Nyquist-zeroed frequencies keep the matrix even-symmetric
        grid.freq_deriv_at(flat, &mut idx, &mut xi);
        let xi2: f64 = xi.iter().map(|v| v * v).sum();
        if xi2 == 0.0 {
            continue;
        }
        let mut dot = Complex64::default();
        for j in 0..d {
            dot += xi[j] * fh.component(j)[flat];
        }
        let dot = dot / xi2;
        for j in 0..d {
            out.component_mut(j)[flat] -= xi[j] * dot;
        }
    }
    out
}

/// Bessel potential `J^s`: multiplier `(1 + 4 pi^2 |xi|^2)^{s/2}`.
pub fn bessel_potential(f: &RealVectorField, s: f64) -> Result<RealVectorField> {
    let fh = forward_transform(f)?;
    let out = fh.apply_multiplier(|xi| {
        let q: f64 = xi.iter().map(|v| v * v).sum();
        Complex64::new((1.0 + 4.0 * std::f64::consts::PI.powi(2) * q).powf(s / 2.0), 0.0)
    })?;
    inverse_transform(&out)
}

/// Lattice samples of the mollifier bump `rho_eps`, min-image distances,
/// mass-renormalized.  `rho(x) ~ exp(-1/(1-4|x|^2))` on `|x| < 1/2`.
pub fn mollifier_kernel_samples(grid: &Grid, eps: f64) -> Result<Vec<f64>> {
    let lmin = grid.extent().iter().cloned().fold(f64::INFINITY, f64::min);
    if !(eps > 0.0 && eps < lmin / 2.0) {
        return Err(SnseError::InvalidParameter {
            name: "eps",
            reason: format!("need 0 < eps < L/2 = {}, got {eps}", lmin / 2.0),
        });
    }
    let d = grid.dim();
    let pts = grid.points();
    let mut idx = vec![0usize; d];
    let mut kernel = vec![0.0; pts];
    for flat in 0..pts {
        grid.unravel(flat, &mut idx);
        let mut r2 = 0.0;
        for a in 0..d {
            let x = grid.coord(a, idx[a]);
            let l = grid.extent()[a];
            let dist = x.min(l - x); // min-image; support fits since eps < L/2
            r2 += (dist / eps) * (dist / eps);
        }
        kernel[flat] = if 4.0 * r2 < 1.0 { (-1.0 / (1.0 - 4.0 * r2)).exp() } else { 0.0 };
    }
    let mass: f64 = kernel.iter().sum::<f64>() * grid.volume_element();
    if mass <= 0.0 {
        // support narrower than one cell: only the origin sample survives
        kernel.iter_mut().for_each(|v| *v = 0.0);
        kernel[0] = 1.0 / grid.volume_element();
        return Ok(kernel);
    }
    for v in &mut kernel {
        *v /= mass;
    }
    Ok(kernel)
}

/// Mollify by circular convolution with the unit-mass bump, via FFT.
pub fn mollify(f: &RealVectorField, eps: f64) -> Result<RealVectorField> {
    let grid = f.grid().clone();
    let kernel = mollifier_kernel_samples(&grid, eps)?;
    let kernel_field = RealVectorField::new(grid.clone(), vec![kernel; grid.dim()])?;
    // spectral product: with f^ = h^d DFT(f), conv^ = f^ * k^ where k^ carries
    // the same quadrature factor
    let fh = forward_transform(f)?;
    let kh = forward_transform(&kernel_field)?;
    let mut out = fh.clone();
    for j in 0..grid.dim() {
        let k = kh.component(0);
        let c = out.component_mut(j);
        for (v, m) in c.iter_mut().zip(k) {
            *v *= m;
        }
    }
    inverse_transform(&out)
}

pub fn mollify_seq(g: &LtwoSequenceField, eps: f64) -> Result<LtwoSequenceField> {
    g.map(|m| mollify(m, eps))
}

/// Truncation cutoff: 1 on [0, 2N], 0 on [4N, inf), quintic smoothstep bridge
/// in between.  Lipschitz constant 15/(16 N).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    level: f64,
}

impl CutoffSpec {
    pub fn new(level: f64) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(SnseError::InvalidParameter {
                name: "N",
                reason: format!("need N > 0, got {level}"),
            });
        }
        Ok(Self { level })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Documented Lipschitz bound of the bridge.
    pub fn lipschitz_constant(&self) -> f64 {
        15.0 / (16.0 * self.level)
    }

    /// Evaluate the cutoff at `t >= 0`.
    pub fn phi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(SnseError::InvalidParameter {
                name: "t",
                reason: format!("cutoff argument must be >= 0, got {t}"),
            });
        }
        let n = self.level;
        Ok(if t <= 2.0 * n {
            1.0
        } else if t >= 4.0 * n {
            0.0
        } else {
            let s = (t - 2.0 * n) / (2.0 * n);
            1.0 - smoothstep5(s)
        })
    }
}

fn smoothstep5(s: f64) -> f64 {
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}
