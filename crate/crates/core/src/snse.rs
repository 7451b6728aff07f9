//! Doubly-truncated stochastic Navier-Stokes system: the cutoff
//! `phi(|u|_p)^2` gates both the divergence-form convective term
//! `P_{<=k} P(d_i(u_i P_{<=k} u))` and the projected noise
//! `P_{<=k} sigma(P_{<=k} u)`, evolved by the exponential Euler-Maruyama
//! stepper.  The Picard iteration of the construction is implemented as a
//! fidelity test path next to the direct stepper.

use crate::error::{Result, SnseError};
use crate::field::{
    forward_transform, inverse_transform, lp_norm, lp_norm_scalar, multiplier_table,
    RealVectorField, SpectralVectorField,
};
use crate::grid::Grid;
use crate::heat::{heat_semigroup_table, step_count, EnergyLedger, HeatState, LedgerBuilder};
use crate::monitors::{StoppingRecord, StoppingSpec};
use crate::noise::{sigma_base, wiener_increment, NoiseModel, WienerIncrement};
use crate::operators::{
    gaussian_multiplier_table, gaussian_projector, leray_project, leray_project_spectral,
    CutoffSpec,
};
use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
pub struct SnseConfig {
    pub grid: Grid,
    /// L^p exponent of the cutoff norm (> 2; headline runs use p > 3, d = 3).
    pub p: f64,
    /// Level k of the Gaussian projector `P_{<= k}`.
    pub projector_level: f64,
    /// Cutoff level N of phi.
    pub cutoff: CutoffSpec,
    pub noise: Option<NoiseModel>,
    pub dt: f64,
    pub t_end: f64,
    /// Optional 2/3-rule mask on top of the Gaussian projector (stress tests).
    pub dealias_two_thirds: bool,
}

impl SnseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0) {
            return Err(SnseError::InvalidParameter {
                name: "p",
                reason: format!("solver requires p > 2, got {}", self.p),
            });
        }
        if !(self.projector_level >= 1.0) {
            return Err(SnseError::InvalidParameter {
                name: "k",
                reason: format!("need projector level >= 1, got {}", self.projector_level),
            });
        }
        step_count(self.t_end, self.dt)?;
        Ok(())
    }
}

/// Per-run precomputed multiplier tables.
pub struct SnseStepper {
    cfg: SnseConfig,
    heat_table: Vec<Complex64>,
    proj_table: Vec<Complex64>,
    /// `2 pi i xi_a`, zeroed at the Nyquist index of axis a.
    deriv_tables: Vec<Vec<Complex64>>,
    mask: Option<Vec<Complex64>>,
}

impl SnseStepper {
    pub fn new(cfg: &SnseConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = &cfg.grid;
        let heat_table = heat_semigroup_table(grid, cfg.dt);
        let proj_table = gaussian_multiplier_table(grid, cfg.projector_level)?;
        let d = grid.dim();
        let mut deriv_tables = Vec::with_capacity(d);
        for axis in 0..d {
            let mut idx = vec![0usize; d];
            let table: Vec<Complex64> = (0..grid.points())
                .map(|flat| {
                    grid.unravel(flat, &mut idx);
                    if grid.is_nyquist(axis, idx[axis]) {
                        Complex64::default()
                    } else {
                        Complex64::new(0.0, 2.0 * std::f64::consts::PI * grid.freq(axis, idx[axis]))
                    }
                })
                .collect();
            deriv_tables.push(table);
        }
        let mask = if cfg.dealias_two_thirds {
            Some(multiplier_table(grid, |_| Complex64::new(1.0, 0.0))?)
                .map(|mut t| {
                    let mut idx = vec![0usize; d];
                    for flat in 0..grid.points() {
                        grid.unravel(flat, &mut idx);
                        let keep = (0..d).all(|a| {
                            let m = grid.signed_index(a, idx[a]).unsigned_abs() as usize;
                            3 * m <= grid.dims()[a]
                        });
                        if !keep {
                            t[flat] = Complex64::default();
                        }
                    }
                    t
                })
        } else {
            None
        };
        Ok(Self { cfg: cfg.clone(), heat_table, proj_table, deriv_tables, mask })
    }

    pub fn cfg(&self) -> &SnseConfig {
        &self.cfg
    }

    fn project(&self, fh: &SpectralVectorField) -> SpectralVectorField {
        let mut out = fh.apply_table(&self.proj_table);
        if let Some(mask) = &self.mask {
            out = out.apply_table(mask);
        }
        out
    }

    /// `P_{<= k} P( sum_i d_i (u_i v_j) )` in spectral space, from physical
    /// inputs `u` and `v`.
    fn bilinear_spectral(
        &self,
        u: &RealVectorField,
        v: &RealVectorField,
    ) -> Result<SpectralVectorField> {
        let grid = &self.cfg.grid;
        let d = grid.dim();
        let pts = grid.points();
        let mut term = SpectralVectorField::zeros(grid.clone());
        let mut prod = RealVectorField::zeros(grid.clone());
        for i in 0..d {
            for j in 0..d {
                let pj = prod.component_mut(j);
                for x in 0..pts {
                    pj[x] = u.component(i)[x] * v.component(j)[x];
                }
            }
            let ph = forward_transform(&prod)?;
            let dph = ph.apply_table(&self.deriv_tables[i]);
            term.axpy(1.0, &dph);
        }
        let term = leray_project_spectral(&term);
        Ok(self.project(&term))
    }

    /// Full gated convective term `phi(|u|_p)^2 P_{<=k} P(d_i(u_i P_{<=k} u))`.
    pub fn nonlinear_term(&self, u: &RealVectorField) -> Result<RealVectorField> {
        if !u.is_finite() {
            return Err(SnseError::NonFinite("nonlinear_term input".into()));
        }
        let phi = self.cfg.cutoff.phi(lp_norm(u, self.cfg.p)?)?;
        if phi == 0.0 {
            return Ok(RealVectorField::zeros(self.cfg.grid.clone()));
        }
        let uh = forward_transform(u)?;
        let v = inverse_transform(&self.project(&uh))?;
        let mut term = self.bilinear_spectral(u, &v)?;
        term.scale(phi * phi);
        inverse_transform(&term)
    }

    /// Gated noise coefficients `phi^2 P_{<=k} sigma(P_{<=k} u)` in spectral
    /// space: the shared base field plus the per-mode weights.
    fn noise_coeff(&self, u: &RealVectorField, phi: f64) -> Result<Option<SpectralVectorField>> {
        let Some(model) = &self.cfg.noise else { return Ok(None) };
        let _ = model;
        if phi == 0.0 {
            return Ok(Some(SpectralVectorField::zeros(self.cfg.grid.clone())));
        }
        let model = self.cfg.noise.as_ref().unwrap();
        let uh = forward_transform(u)?;
        let pu = inverse_transform(&self.project(&uh))?;
        let base = sigma_base(model, &pu)?;
        let mut bh = self.project(&forward_transform(&base)?);
        bh.scale(phi * phi);
        Ok(Some(bh))
    }

    /// One exponential Euler-Maruyama step of the truncated system.
    pub fn step(&self, state: &HeatState, dw: &WienerIncrement) -> Result<HeatState> {
        let cfg = &self.cfg;
        if let Some(model) = &cfg.noise {
            if dw.len() != model.modes() {
                return Err(SnseError::DimensionMismatch(format!(
                    "noise model has {} modes, increment has {}",
                    model.modes(),
                    dw.len()
                )));
            }
        }
        let phi = cfg.cutoff.phi(lp_norm(&state.u, cfg.p)?)?;
        let mut uh = forward_transform(&state.u)?;
        if phi > 0.0 {
            let uhp = self.project(&uh);
            let v = inverse_transform(&uhp)?;
            let mut drift = self.bilinear_spectral(&state.u, &v)?;
            drift.scale(phi * phi);
            uh.axpy(-cfg.dt, &drift);
        }
        if let Some(base_h) = self.noise_coeff(&state.u, phi)? {
            let model = cfg.noise.as_ref().unwrap();
            let amp: f64 =
                model.weights().iter().zip(dw.values()).map(|(a, w)| a * w).sum();
            uh.axpy(amp, &base_h);
        }
        let uh = uh.apply_table(&self.heat_table);
        let u = inverse_transform(&uh)?;
        if !u.is_finite() {
            return Err(SnseError::NonFiniteState {
                step: state.step_index + 1,
                context: "snse_step".into(),
            });
        }
        Ok(HeatState { t: state.t + cfg.dt, step_index: state.step_index + 1, u })
    }
}

/// Raw divergence-form convective term `P( sum_i d_i (u_i v_j) )` with no
/// cutoff and no projector; the bilinear building block of the energy checks.
pub fn convective_term(u: &RealVectorField, v: &RealVectorField) -> Result<RealVectorField> {
    let grid = u.grid().clone();
    let d = grid.dim();
    let pts = grid.points();
    let mut term = SpectralVectorField::zeros(grid.clone());
    let mut prod = RealVectorField::zeros(grid.clone());
    for i in 0..d {
        for j in 0..d {
            let pj = prod.component_mut(j);
            for x in 0..pts {
                pj[x] = u.component(i)[x] * v.component(j)[x];
            }
        }
        let ph = forward_transform(&prod)?;
        let mut idx = vec![0usize; d];
        let table: Vec<Complex64> = (0..pts)
            .map(|flat| {
                grid.unravel(flat, &mut idx);
                if grid.is_nyquist(i, idx[i]) {
                    Complex64::default()
                } else {
                    Complex64::new(0.0, 2.0 * std::f64::consts::PI * grid.freq(i, idx[i]))
                }
            })
            .collect();
        term.axpy(1.0, &ph.apply_table(&table));
    }
    inverse_transform(&leray_project_spectral(&term))
}

/// Convenience wrapper over [`SnseStepper::nonlinear_term`].
pub fn nonlinear_term(u: &RealVectorField, cfg: &SnseConfig) -> Result<RealVectorField> {
    SnseStepper::new(cfg)?.nonlinear_term(u)
}

/// Convenience wrapper over [`SnseStepper::step`].
pub fn snse_step(state: &HeatState, cfg: &SnseConfig, dw: &WienerIncrement) -> Result<HeatState> {
    SnseStepper::new(cfg)?.step(state, dw)
}

/// Initial-data preparation: radial cutoff `phi(|x - x_c| / n)` (unit-level
/// profile), Leray projection, then `P_{<= k}`.
pub fn prepare_initial_data(
    u0_raw: &RealVectorField,
    n_level: f64,
    projector_level: f64,
) -> Result<RealVectorField> {
    if !(n_level >= 1.0) {
        return Err(SnseError::InvalidParameter {
            name: "n",
            reason: format!("need n >= 1, got {n_level}"),
        });
    }
    let grid = u0_raw.grid().clone();
    let spec = CutoffSpec::new(1.0)?;
    let d = grid.dim();
    let mut cut = u0_raw.clone();
    let mut idx = vec![0usize; d];
    for flat in 0..grid.points() {
        grid.unravel(flat, &mut idx);
        let mut r2 = 0.0;
        for a in 0..d {
            let dx = grid.coord(a, idx[a]) - 0.5 * grid.extent()[a];
            r2 += dx * dx;
        }
        let w = spec.phi(r2.sqrt() / n_level)?;
        if w != 1.0 {
            for j in 0..d {
                cut.component_mut(j)[flat] *= w;
            }
        }
    }
    gaussian_projector(&leray_project(&cut)?, projector_level)
}

/// `sum_j |u_j|_p^p` (componentwise, as in the quarter-bound convention).
pub fn componentwise_lp_p(u: &RealVectorField, p: f64) -> Result<f64> {
    let mut acc = 0.0;
    for j in 0..u.grid().dim() {
        acc += lp_norm_scalar(u.grid(), u.component(j), p)?.powf(p);
    }
    Ok(acc)
}

/// Draw a full Wiener path (one increment per step) up front; freezing the
/// path is what the Picard iteration and coupling tests rely on.
pub fn draw_noise_path(
    rng: &mut ChaCha20Rng,
    steps: usize,
    dt: f64,
    k_modes: usize,
) -> Result<Vec<WienerIncrement>> {
    (0..steps).map(|_| wiener_increment(rng, dt, k_modes)).collect()
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<RealVectorField>,
}

#[derive(Debug)]
pub struct SnseRun {
    pub trajectory: Trajectory,
    pub ledger: EnergyLedger,
    pub stopping: StoppingRecord,
}

/// Evolve the truncated system along a frozen noise path, with the stopping
/// monitor attached.  `observer` sees every retained state (including t = 0);
/// evolution stops at the crossing step.
pub fn snse_solve_path(
    cfg: &SnseConfig,
    u0: RealVectorField,
    stop: &StoppingSpec,
    path: &[WienerIncrement],
    mut observer: impl FnMut(&HeatState),
) -> Result<(EnergyLedger, StoppingRecord)> {
    let stepper = SnseStepper::new(cfg)?;
    let threshold = stop.threshold(cfg.p);
    let mut ledger = LedgerBuilder::new(cfg.p)?;
    let mut state = HeatState::initial(u0);
    let m0_min = 4.0 * componentwise_lp_p(&state.u, cfg.p)? / stop.k_bound.powf(cfg.p);

    let push = |lb: &mut LedgerBuilder, st: &HeatState| -> Result<(bool, f64)> {
        let phi = cfg.cutoff.phi(lp_norm(&st.u, cfg.p)?)?;
        lb.push(st.t, &st.u, phi, false)?;
        let rows = lb.ledger().rows.len();
        let functional = lb.ledger().stopping_functional(rows - 1);
        Ok((functional >= threshold, functional))
    };

    let (mut crossed, mut functional) = push(&mut ledger, &state)?;
    observer(&state);
    let mut record = StoppingRecord {
        m: stop.m,
        k_bound: stop.k_bound,
        triggered: false,
        tau: f64::INFINITY,
        functional_at_tau: f64::NAN,
        m0_min,
    };
    if crossed {
        record.triggered = true;
        record.tau = 0.0;
        record.functional_at_tau = functional;
        let mut done = ledger.finish();
        if let Some(row) = done.rows.last_mut() {
            row.stopped_flag = true;
        }
        return Ok((done, record));
    }
    for dw in path {
        state = stepper.step(&state, dw)?;
        (crossed, functional) = push(&mut ledger, &state)?;
        observer(&state);
        if crossed {
            record.triggered = true;
            record.tau = state.t;
            record.functional_at_tau = functional;
            break;
        }
    }
    let mut done = ledger.finish();
    if record.triggered {
        if let Some(row) = done.rows.last_mut() {
            row.stopped_flag = true;
        }
    }
    Ok((done, record))
}

/// Full run: prepare the data at level `n_level`, draw the path from `rng`,
/// evolve with monitors, and keep the whole trajectory.
pub fn snse_solve(
    cfg: &SnseConfig,
    u0_raw: &RealVectorField,
    n_level: f64,
    stop: &StoppingSpec,
    rng: &mut ChaCha20Rng,
) -> Result<SnseRun> {
    let u0 = prepare_initial_data(u0_raw, n_level, cfg.projector_level)?;
    let steps = step_count(cfg.t_end, cfg.dt)?;
    let k_modes = cfg.noise.as_ref().map_or(1, |m| m.modes());
    let path = draw_noise_path(rng, steps, cfg.dt, k_modes)?;
    let mut trajectory = Trajectory::default();
    let (ledger, stopping) = snse_solve_path(cfg, u0, stop, &path, |st| {
        trajectory.times.push(st.t);
        trajectory.states.push(st.u.clone());
    })?;
    Ok(SnseRun { trajectory, ledger, stopping })
}

/// One Picard sweep: coefficients frozen on the previous iterate, cutoff
/// evaluated on both the previous and the developing iterate, noise path
/// frozen across sweeps.  The zero previous iterate reproduces the heat flow
/// of the initial data.
pub fn picard_iterate(
    prev: &Trajectory,
    cfg: &SnseConfig,
    u0: &RealVectorField,
    path: &[WienerIncrement],
) -> Result<Trajectory> {
    let steps = step_count(cfg.t_end, cfg.dt)?;
    if prev.states.len() != steps + 1 || path.len() != steps {
        return Err(SnseError::DimensionMismatch(format!(
            "iterate has {} states and path {} increments for {} steps",
            prev.states.len(),
            path.len(),
            steps
        )));
    }
    let stepper = SnseStepper::new(cfg)?;
    let mut out = Trajectory { times: vec![0.0], states: vec![u0.clone()] };
    let mut state = HeatState::initial(u0.clone());
    for (step, dw) in path.iter().enumerate() {
        let prev_u = &prev.states[step];
        let phi_prev = cfg.cutoff.phi(lp_norm(prev_u, cfg.p)?)?;
        let phi_cur = cfg.cutoff.phi(lp_norm(&state.u, cfg.p)?)?;
        let gate = phi_prev * phi_cur;
        let mut uh = forward_transform(&state.u)?;
        if gate > 0.0 {
            let ph = stepper.project(&forward_transform(prev_u)?);
            let pv = inverse_transform(&ph)?;
            let mut drift = stepper.bilinear_spectral(prev_u, &pv)?;
            drift.scale(gate);
            uh.axpy(-cfg.dt, &drift);
            if let Some(model) = &cfg.noise {
                let base = sigma_base(model, &pv)?;
                let mut bh = stepper.project(&forward_transform(&base)?);
                bh.scale(gate);
                let amp: f64 =
                    model.weights().iter().zip(dw.values()).map(|(a, w)| a * w).sum();
                uh.axpy(amp, &bh);
            }
        }
        let uh = uh.apply_table(&stepper.heat_table);
        let u = inverse_transform(&uh)?;
        if !u.is_finite() {
            return Err(SnseError::NonFiniteState { step: step + 1, context: "picard_iterate".into() });
        }
        state = HeatState { t: state.t + cfg.dt, step_index: step + 1, u };
        out.times.push(state.t);
        out.states.push(state.u.clone());
    }
    Ok(out)
}

/// sup_t |a(t) - b(t)|_p over the shared time lattice.
pub fn trajectory_sup_distance(a: &Trajectory, b: &Trajectory, p: f64) -> Result<f64> {
    let n = a.states.len().min(b.states.len());
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max(lp_norm(&a.states[i].sub(&b.states[i]), p)?);
    }
    Ok(worst)
}

/// Energy-based projector schedule: smallest integer exceeding
/// `(n + 1) * E[|phi(./(n+1)) u0|_2^2]`, keyed to the measured L^2 norm of the
/// cutoff data, floored at 1.
pub fn energy_projector_schedule(n_level: f64, cutoff_data_l2_sq: f64) -> f64 {
    let x = (n_level + 1.0) * cutoff_data_l2_sq;
    (x.floor() + 1.0).max(1.0)
}
