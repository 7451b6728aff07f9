//! Deterministic random and analytic test fields.
//!
//! The property suites and the `verify-operators` command both draw their
//! inputs from here, so every sample is a pure function of (grid, seed).

use crate::field::{forward_transform, inverse_transform, RealVectorField};
use crate::grid::Grid;
use crate::operators;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

/// Uniform samples in [-1, 1) per point and component.
pub fn random_field(grid: &Grid, seed: u64) -> RealVectorField {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut f = RealVectorField::zeros(grid.clone());
    for j in 0..grid.dim() {
        for v in f.component_mut(j) {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    f
}

/// Random field with spectral content only on lattice modes |m_a| <= max_mode
/// per axis (Nyquist excluded).  Smooth by construction.
pub fn band_limited_random(grid: &Grid, seed: u64, max_mode: usize) -> RealVectorField {
    let f = random_field(grid, seed);
    let fh = forward_transform(&f).expect("finite sample");
    let dims = grid.dims().to_vec();
    let mut idx = vec![0usize; grid.dim()];
    let table: Vec<Complex64> = (0..grid.points())
        .map(|flat| {
            grid.unravel(flat, &mut idx);
            let keep = idx.iter().enumerate().all(|(a, &i)| {
                let m = grid.signed_index(a, i).unsigned_abs() as usize;
                m <= max_mode && !grid.is_nyquist(a, i)
            });
            if keep { Complex64::new(1.0, 0.0) } else { Complex64::default() }
        })
        .collect();
    // dims unused beyond the closure; keep the borrow checker quiet
    let _ = dims;
    inverse_transform(&fh.apply_table(&table)).expect("finite")
}

/// Band-limited random field made divergence-free by Leray projection.
pub fn divergence_free_random(grid: &Grid, seed: u64, max_mode: usize) -> RealVectorField {
    let f = band_limited_random(grid, seed, max_mode);
    operators::leray_project(&f).expect("leray on finite field")
}

/// Taylor-Green-type divergence-free initial data (first two components; any
/// third component zero).
pub fn taylor_green(grid: &Grid, amplitude: f64) -> RealVectorField {
    let l0 = grid.extent()[0];
    let l1 = grid.extent()[1];
    let t0 = 2.0 * std::f64::consts::PI / l0;
    let t1 = 2.0 * std::f64::consts::PI / l1;
    RealVectorField::from_fn(grid.clone(), |j, x| match j {
        0 => amplitude * (t0 * x[0]).sin() * (t1 * x[1]).cos(),
        1 => -amplitude * (t0 / t1) * (t0 * x[0]).cos() * (t1 * x[1]).sin(),
        _ => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_limited_field_has_no_high_modes() {
        let grid = Grid::cube(2, 16, 1.0).unwrap();
        let f = band_limited_random(&grid, 5, 2);
        let fh = forward_transform(&f).unwrap();
        let mut idx = [0usize; 2];
        for flat in 0..grid.points() {
            grid.unravel(flat, &mut idx);
            let high = idx
                .iter()
                .enumerate()
                .any(|(a, &i)| grid.signed_index(a, i).unsigned_abs() > 2);
            if high {
                for j in 0..2 {
                    assert!(fh.component(j)[flat].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn taylor_green_is_divergence_free() {
        let grid = Grid::cube(3, 16, 2.0).unwrap();
        let f = taylor_green(&grid, 1.0);
        let fh = forward_transform(&f).unwrap();
        assert!(fh.divergence_rel() < 1e-12);
    }

    #[test]
    fn divergence_free_random_is_divergence_free() {
        let grid = Grid::cube(3, 8, 1.0).unwrap();
        let f = divergence_free_random(&grid, 9, 2);
        let fh = forward_transform(&f).unwrap();
        assert!(fh.divergence_rel() < 1e-12);
    }
}
