//! Stochastic heat equation `du = (Lap u + drift) dt + sum_k g_k dW_k` with an
//! exponential (integrating-factor) Euler-Maruyama stepper, the L^p energy
//! ledger, and the dissipation-identity cross check.
//!
//! The drift argument is the vector field already equal to the divergence-form
//! source (the caller computes any gradient).

use crate::error::{Result, SnseError};
use crate::field::{
    forward_transform, gradient_fd, inverse_transform, lp_norm, multiplier_table,
    LtwoSequenceField, RealVectorField,
};
use crate::grid::Grid;
use crate::noise::{wiener_increment, WienerIncrement};
use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
pub struct HeatState {
    pub t: f64,
    pub step_index: usize,
    pub u: RealVectorField,
}

impl HeatState {
    pub fn initial(u: RealVectorField) -> Self {
        Self { t: 0.0, step_index: 0, u }
    }
}

/// One sampled row of the energy ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    /// |u(t)|_p^p
    pub lp_p: f64,
    /// running max of lp_p
    pub sup_lp_p: f64,
    /// sum_j int_0^t int |grad |u_j|^{p/2}|^2 dx ds (trapezoid in time, FD in space)
    pub grad_energy_cum: f64,
    /// int_0^t |u(s)|_{3p}^p ds
    pub l3p_cum: f64,
    pub phi_value: f64,
    pub stopped_flag: bool,
}

#[derive(Debug, Clone, Default)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub fn last(&self) -> Option<&LedgerRow> {
        self.rows.last()
    }

    /// The stopping functional sup_s<=t |u|_p^p + int_0^t |u|_{3p}^p ds at row i.
    pub fn stopping_functional(&self, i: usize) -> f64 {
        self.rows[i].sup_lp_p + self.rows[i].l3p_cum
    }
}

/// Incremental ledger accumulation along a trajectory.
#[derive(Debug, Clone)]
pub struct LedgerBuilder {
    p: f64,
    ledger: EnergyLedger,
    prev_t: f64,
    prev_grad: f64,
    prev_l3p: f64,
}

impl LedgerBuilder {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(SnseError::InvalidParameter { name: "p", reason: format!("need p >= 1, got {p}") });
        }
        Ok(Self { p, ledger: EnergyLedger::default(), prev_t: 0.0, prev_grad: 0.0, prev_l3p: 0.0 })
    }

    pub fn push(&mut self, t: f64, u: &RealVectorField, phi_value: f64, stopped: bool) -> Result<()> {
        let p = self.p;
        let lp_p = lp_norm(u, p)?.powf(p);
        let l3p_integrand = lp_norm(u, 3.0 * p)?.powf(p);
        let grad_integrand = grad_power_energy(u, p);
        let (sup_prev, grad_cum_prev, l3p_cum_prev) = match self.ledger.rows.last() {
            Some(r) => (r.sup_lp_p, r.grad_energy_cum, r.l3p_cum),
            None => (0.0, 0.0, 0.0),
        };
        let dt = if self.ledger.rows.is_empty() { 0.0 } else { t - self.prev_t };
        let row = LedgerRow {
            t,
            lp_p,
            sup_lp_p: sup_prev.max(lp_p),
            grad_energy_cum: grad_cum_prev + 0.5 * dt * (self.prev_grad + grad_integrand),
            l3p_cum: l3p_cum_prev + 0.5 * dt * (self.prev_l3p + l3p_integrand),
            phi_value,
            stopped_flag: stopped,
        };
        self.prev_t = t;
        self.prev_grad = grad_integrand;
        self.prev_l3p = l3p_integrand;
        self.ledger.rows.push(row);
        Ok(())
    }

    pub fn finish(self) -> EnergyLedger {
        self.ledger
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }
}

/// sum_j int |grad_fd |u_j|^{p/2}|^2 dx.
pub fn grad_power_energy(u: &RealVectorField, p: f64) -> f64 {
    let grid = u.grid();
    let h = grid.volume_element();
    let mut total = 0.0;
    for j in 0..grid.dim() {
        let power: Vec<f64> =
            u.component(j).iter().map(|v| v.abs().powf(p / 2.0)).collect();
        for axis in 0..grid.dim() {
            let g = gradient_fd(grid, &power, axis);
            total += g.iter().map(|v| v * v).sum::<f64>() * h;
        }
    }
    total
}

/// Heat semigroup multiplier table `e^{-|2 pi xi|^2 dt}`.
pub fn heat_semigroup_table(grid: &Grid, dt: f64) -> Vec<Complex64> {
    multiplier_table(grid, |xi| {
        let q: f64 = xi.iter().map(|v| v * v).sum();
        Complex64::new((-4.0 * std::f64::consts::PI.powi(2) * q * dt).exp(), 0.0)
    })
    .expect("heat multiplier is finite")
}

/// One exponential Euler-Maruyama step in spectral space.
pub fn heat_step(
    state: &HeatState,
    drift: Option<&RealVectorField>,
    g: Option<&LtwoSequenceField>,
    dw: &WienerIncrement,
    dt: f64,
) -> Result<HeatState> {
    if !(dt > 0.0) {
        return Err(SnseError::InvalidParameter { name: "dt", reason: format!("need dt > 0, got {dt}") });
    }
    if let Some(g) = g {
        if g.len() != dw.len() {
            return Err(SnseError::DimensionMismatch(format!(
                "noise has {} modes, increment has {}",
                g.len(),
                dw.len()
            )));
        }
    }
    let grid = state.u.grid().clone();
    let mut uh = forward_transform(&state.u)?;
    if let Some(f) = drift {
        uh.axpy(dt, &forward_transform(f)?);
    }
    if let Some(g) = g {
        for (mode, &dwk) in g.modes().iter().zip(dw.values()) {
            if dwk != 0.0 {
                uh.axpy(dwk, &forward_transform(mode)?);
            }
        }
    }
    let table = heat_semigroup_table(&grid, dt);
    let uh = uh.apply_table(&table);
    let u = inverse_transform(&uh)?;
    if !u.is_finite() {
        return Err(SnseError::NonFiniteState {
            step: state.step_index + 1,
            context: "heat_step".into(),
        });
    }
    Ok(HeatState { t: state.t + dt, step_index: state.step_index + 1, u })
}

/// Number of steps for horizon `t_end` at step `dt`; `dt` must divide `t_end`
/// within rounding.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(SnseError::InvalidParameter {
            name: "t_end/dt",
            reason: format!("need positive horizon and step, got {t_end}, {dt}"),
        });
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(1.0) || n < 1.0 {
        return Err(SnseError::InvalidParameter {
            name: "dt",
            reason: format!("dt = {dt} does not divide t_end = {t_end}"),
        });
    }
    Ok(n as usize)
}

/// Run the heat equation from `u0`, drawing K-mode increments from `rng`.
/// Returns the trajectory and the sampled ledger.
#[allow(clippy::too_many_arguments)]
pub fn heat_solve(
    u0: RealVectorField,
    drift: Option<&dyn Fn(f64) -> RealVectorField>,
    diffusion: Option<&dyn Fn(f64) -> LtwoSequenceField>,
    k_modes: usize,
    t_end: f64,
    dt: f64,
    rng: &mut ChaCha20Rng,
    p: f64,
) -> Result<(Vec<HeatState>, EnergyLedger)> {
    let steps = step_count(t_end, dt)?;
    let mut ledger = LedgerBuilder::new(p)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut state = HeatState::initial(u0);
    ledger.push(state.t, &state.u, 1.0, false)?;
    for _ in 0..steps {
        let dw = if diffusion.is_some() {
            wiener_increment(rng, dt, k_modes)?
        } else {
            WienerIncrement::zeros(k_modes)
        };
        let f = drift.map(|d| d(state.t));
        let g = diffusion.map(|d| d(state.t));
        let next = heat_step(&state, f.as_ref(), g.as_ref(), &dw, dt)?;
        ledger.push(next.t, &next.u, 1.0, false)?;
        states.push(std::mem::replace(&mut state, next));
    }
    states.push(state);
    Ok((states, ledger.finish()))
}

#[derive(Debug, Clone, Copy)]
pub struct DissipationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
}

/// Sixth-order centered periodic difference; the identity check needs a
/// sharper stencil than the second-order ledger gradient to resolve the
/// right-hand side at desk-scale grids.
fn gradient_fd6(grid: &Grid, data: &[f64], axis: usize) -> Vec<f64> {
    let d = grid.dim();
    let n_axis = grid.dims()[axis];
    let h = grid.spacing(axis);
    let mut out = vec![0.0; data.len()];
    let mut idx = vec![0usize; d];
    let mut nb = vec![0usize; d];
    for (flat, slot) in out.iter_mut().enumerate() {
        grid.unravel(flat, &mut idx);
        nb.copy_from_slice(&idx);
        let mut shifted = |off: i64| -> f64 {
            nb[axis] = ((idx[axis] as i64 + off).rem_euclid(n_axis as i64)) as usize;
            data[grid.ravel(&nb)]
        };
        *slot = (45.0 * (shifted(1) - shifted(-1)) - 9.0 * (shifted(2) - shifted(-2))
            + (shifted(3) - shifted(-3)))
            / (60.0 * h);
    }
    out
}

/// Cross-check of `p int |u_j|^{p-2} u_j Lap u_j dx` against
/// `-(4(p-1)/p) int |grad |u_j|^{p/2}|^2 dx` (spectral Laplacian vs FD gradient).
pub fn dissipation_identity_check(u: &RealVectorField, p: f64) -> Result<DissipationCheck> {
    if !(p > 2.0) {
        return Err(SnseError::InvalidParameter { name: "p", reason: format!("need p > 2, got {p}") });
    }
    let grid = u.grid();
    let uh = forward_transform(u)?;
    let lap = inverse_transform(&uh.apply_multiplier(|xi| {
        let q: f64 = xi.iter().map(|v| v * v).sum();
        Complex64::new(-4.0 * std::f64::consts::PI.powi(2) * q, 0.0)
    })?)?;
    let h = grid.volume_element();
    let mut lhs = 0.0;
    for j in 0..grid.dim() {
        for (v, l) in u.component(j).iter().zip(lap.component(j)) {
            lhs += v.abs().powf(p - 2.0) * v * l;
        }
    }
    lhs *= p * h;
    let mut grad_energy = 0.0;
    for j in 0..grid.dim() {
        let power: Vec<f64> = u.component(j).iter().map(|v| v.abs().powf(p / 2.0)).collect();
        for axis in 0..grid.dim() {
            let g = gradient_fd6(grid, &power, axis);
            grad_energy += g.iter().map(|v| v * v).sum::<f64>() * h;
        }
    }
    let rhs = -(4.0 * (p - 1.0) / p) * grad_energy;
    let scale = lhs.abs().max(rhs.abs());
    let relative_error = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    Ok(DissipationCheck { lhs, rhs, relative_error })
}

/// Interpolation exponent `alpha = d (p - q) / (p q - 2 q)` on the admissible
/// window `d p / (p + d - 2) < q <= p`.
pub fn interpolation_exponent(p: f64, q: f64, d: usize) -> Result<f64> {
    let d_f = d as f64;
    let lower = d_f * p / (p + d_f - 2.0);
    if !(q > lower && q <= p) {
        return Err(SnseError::InvalidParameter {
            name: "q",
            reason: format!("q = {q} outside admissible window ({lower}, {p}]"),
        });
    }
    let alpha = d_f * (p - q) / (p * q - 2.0 * q);
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SnseError::Other(format!(
            "interpolation exponent {alpha} escaped [0,1] inside the window"
        )));
    }
    Ok(alpha)
}
