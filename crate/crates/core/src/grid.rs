//! Periodic box geometry and the lattice-frequency map.
//!
//! The box is `[0, L_a)` per axis with `dims[a]` equispaced samples.  The
//! Fourier convention pairs lattice index `m` (symmetric range) with the
//! frequency `xi = m / L`, matching the kernel `e^{-2 pi i xi . x}`.

use crate::error::{Result, SnseError};
use serde::{Deserialize, Serialize};

/// Default box side length used by the CLI and most tests.
pub const DEFAULT_EXTENT: f64 = 8.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dims: Vec<usize>,
    extent: Vec<f64>,
}

impl Grid {
    pub fn new(dims: &[usize], extent: &[f64]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(SnseError::InvalidGrid(format!(
                "dimension must be 1..=3, got {}",
                dims.len()
            )));
        }
        if dims.len() != extent.len() {
            return Err(SnseError::InvalidGrid(format!(
                "dims/extent length mismatch: {} vs {}",
                dims.len(),
                extent.len()
            )));
        }
        for &n in dims {
            if n < 4 || n % 2 != 0 {
                return Err(SnseError::InvalidGrid(format!(
                    "lattice size must be >= 4 and even, got {n}"
                )));
            }
        }
        for &l in extent {
            if !(l > 0.0 && l.is_finite()) {
                return Err(SnseError::InvalidGrid(format!("extent must be positive, got {l}")));
            }
        }
        Ok(Self { dims: dims.to_vec(), extent: extent.to_vec() })
    }

    /// Cubic grid with `n` points per axis and side length `l`.
    pub fn cube(dim: usize, n: usize, l: f64) -> Result<Self> {
        Self::new(&vec![n; dim], &vec![l; dim])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    /// Total number of lattice points.
    pub fn points(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    /// Lattice spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.dims[axis] as f64
    }

    /// Quadrature weight of one lattice point; `volume_element * points == volume`.
    pub fn volume_element(&self) -> f64 {
        self.volume() / self.points() as f64
    }

    /// Signed lattice index for position `i` along `axis`, in the symmetric
    /// range `-n/2+1 ..= n/2` (the Nyquist index maps to `+n/2`).
    pub fn signed_index(&self, axis: usize, i: usize) -> i64 {
        let n = self.dims[axis];
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Frequency `xi = m / L` of lattice position `i` along `axis`.
    pub fn freq(&self, axis: usize, i: usize) -> f64 {
        self.signed_index(axis, i) as f64 / self.extent[axis]
    }

    /// True if position `i` along `axis` is the Nyquist index.
    pub fn is_nyquist(&self, axis: usize, i: usize) -> bool {
        i == self.dims[axis] / 2
    }

    /// Frequency used by odd multipliers (derivatives, Leray): the Nyquist
    /// component is zeroed so the symbol stays odd-symmetric on the lattice
    /// and real fields map to real fields.
    pub fn freq_deriv(&self, axis: usize, i: usize) -> f64 {
        if self.is_nyquist(axis, i) {
            0.0
        } else {
            self.freq(axis, i)
        }
    }

    /// Fill `xi` with the Nyquist-zeroed frequency vector of the flat index.
    pub fn freq_deriv_at(&self, flat: usize, idx_buf: &mut [usize], xi: &mut [f64]) {
        self.unravel(flat, idx_buf);
        for axis in 0..self.dims.len() {
            xi[axis] = self.freq_deriv(axis, idx_buf[axis]);
        }
    }

    /// Physical coordinate of lattice position `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        i as f64 * self.spacing(axis)
    }

    /// Decompose a flat (row-major) index into per-axis positions.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dims.len()).rev() {
            out[axis] = flat % self.dims[axis];
            flat /= self.dims[axis];
        }
    }

    /// Flat index of per-axis positions.
    pub fn ravel(&self, idx: &[usize]) -> usize {
        let mut flat = 0usize;
        for (axis, &i) in idx.iter().enumerate() {
            flat = flat * self.dims[axis] + i;
        }
        flat
    }

    /// Fill `xi` with the frequency vector of the flat index.
    pub fn freq_at(&self, flat: usize, idx_buf: &mut [usize], xi: &mut [f64]) {
        self.unravel(flat, idx_buf);
        for axis in 0..self.dims.len() {
            xi[axis] = self.freq(axis, idx_buf[axis]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_tiny_lattices() {
        assert!(Grid::new(&[3, 4], &[1.0, 1.0]).is_err());
        assert!(Grid::new(&[5, 8], &[1.0, 1.0]).is_err());
        assert!(Grid::new(&[2, 8], &[1.0, 1.0]).is_err());
        assert!(Grid::new(&[8, 8], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn volume_element_times_points_is_volume() {
        let g = Grid::new(&[8, 16, 4], &[1.0, 2.0, 0.5]).unwrap();
        let v = g.volume_element() * g.points() as f64;
        assert!((v - g.volume()).abs() < 1e-14 * g.volume());
    }

    #[test]
    fn frequencies_are_symmetric_lattice_over_extent() {
        let g = Grid::cube(1, 8, 2.0).unwrap();
        let freqs: Vec<f64> = (0..8).map(|i| g.freq(0, i)).collect();
        assert_eq!(freqs, vec![0.0, 0.5, 1.0, 1.5, 2.0, -1.5, -1.0, -0.5]);
        assert!(g.is_nyquist(0, 4));
    }

    #[test]
    fn ravel_unravel_round_trip() {
        let g = Grid::new(&[4, 6, 8], &[1.0, 1.0, 1.0]).unwrap();
        let mut idx = [0usize; 3];
        for flat in 0..g.points() {
            g.unravel(flat, &mut idx);
            assert_eq!(g.ravel(&idx), flat);
        }
    }
}
