//! Stopping-time monitors, the Sobolev-side diagnostic ratio, and the
//! level-coupled Cauchy and uniqueness studies built on shared Wiener paths.

use crate::error::{Result, SnseError};
use crate::field::{gradient_fd, lp_norm, lp_norm_scalar, RealVectorField};
use crate::heat::EnergyLedger;
use crate::noise::trajectory_rng;
use crate::snse::{
    draw_noise_path, energy_projector_schedule, prepare_initial_data, snse_solve_path,
    trajectory_sup_distance, SnseConfig, Trajectory,
};
use crate::heat::step_count;
use serde::Serialize;

/// Threshold parameters of the stopping functional
/// `sup_s |u|_p^p + int_0^t |u|_{3p}^p ds >= M K^p`.
#[derive(Debug, Clone, Copy)]
pub struct StoppingSpec {
    pub m: f64,
    pub k_bound: f64,
}

impl StoppingSpec {
    pub fn threshold(&self, p: f64) -> f64 {
        self.m * self.k_bound.powf(p)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StoppingRecord {
    pub m: f64,
    pub k_bound: f64,
    pub triggered: bool,
    /// First crossing time; `+inf` when the horizon is reached untriggered.
    pub tau: f64,
    /// Functional value at the crossing row; NaN when untriggered.
    pub functional_at_tau: f64,
    /// Smallest M for which the initial data meets the quarter bound
    /// `sum_j |u0_j|_p^p <= M K^p / 4`.
    pub m0_min: f64,
}

/// Scan a finished ledger for the first crossing of the stopping functional.
pub fn stopping_monitor(ledger: &EnergyLedger, spec: &StoppingSpec, p: f64) -> StoppingRecord {
    let threshold = spec.threshold(p);
    let mut record = StoppingRecord {
        m: spec.m,
        k_bound: spec.k_bound,
        triggered: false,
        tau: f64::INFINITY,
        functional_at_tau: f64::NAN,
        m0_min: ledger
            .rows
            .first()
            .map(|r| 4.0 * r.lp_p / spec.k_bound.powf(p))
            .unwrap_or(f64::NAN),
    };
    for (i, row) in ledger.rows.iter().enumerate() {
        let functional = ledger.stopping_functional(i);
        if functional >= threshold {
            record.triggered = true;
            record.tau = row.t;
            record.functional_at_tau = functional;
            break;
        }
    }
    record
}

/// `max_j |v_j|_{3p}^p / |grad |v_j|^{p/2}|_2^2` over components, with the
/// zero-field convention 0/0 -> 0.  Requires mean-zero components.
pub fn sobolev_ratio(v: &RealVectorField, p: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(SnseError::InvalidParameter {
            name: "p",
            reason: format!("ratio needs p > 2, got {p}"),
        });
    }
    let grid = v.grid();
    let mut worst = 0.0f64;
    for j in 0..grid.dim() {
        let comp = v.component(j);
        let scale = comp.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mean = comp.iter().sum::<f64>() / comp.len() as f64;
        if mean.abs() > 1e-10 * scale.max(1e-300) {
            return Err(SnseError::InvalidParameter {
                name: "v",
                reason: format!("component {j} is not mean-zero (mean {mean:.3e})"),
            });
        }
        let num = lp_norm_scalar(grid, comp, 3.0 * p)?.powf(p);
        let pow: Vec<f64> = comp.iter().map(|x| x.abs().powf(p / 2.0)).collect();
        let mut den = 0.0;
        for axis in 0..grid.dim() {
            let g = gradient_fd(grid, &pow, axis);
            den += g.iter().map(|x| x * x).sum::<f64>();
        }
        den *= grid.volume_element();
        let ratio = if num == 0.0 && den == 0.0 {
            0.0
        } else if den == 0.0 {
            return Err(SnseError::InvalidParameter {
                name: "v",
                reason: "zero gradient energy with nonzero numerator".into(),
            });
        } else {
            num / den
        };
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Projector schedule for the level sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KSchedule {
    /// k(n) = n.
    EqualsN,
    /// Smallest integer above `(n + 1) |phi(./(n+1)) u0|_2^2`.
    MeasuredL2,
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyReport {
    pub n_level: f64,
    pub m_level: f64,
    pub k_n: f64,
    pub k_m: f64,
    /// sup over the common stopped window of |u^n - u^m|_p.
    pub sup_dist_p: f64,
    /// Trapezoid of |u^n - u^m|_{3p}^p over the common stopped window.
    pub int_dist_3p: f64,
    pub tau_n: f64,
    pub tau_m: f64,
    pub horizon: f64,
}

fn schedule_level(
    schedule: KSchedule,
    u0_raw: &RealVectorField,
    n: f64,
) -> Result<f64> {
    match schedule {
        KSchedule::EqualsN => Ok(n),
        KSchedule::MeasuredL2 => {
            // L^2 norm of the spatially cutoff (pre-projection) data
            let cut = prepare_initial_data(u0_raw, n + 1.0, 1e6)?;
            let l2 = lp_norm(&cut, 2.0)?;
            Ok(energy_projector_schedule(n, l2 * l2))
        }
    }
}

fn run_level(
    cfg: &SnseConfig,
    u0_raw: &RealVectorField,
    n: f64,
    k: f64,
    stop: &StoppingSpec,
    path: &[crate::noise::WienerIncrement],
) -> Result<(Trajectory, EnergyLedger, StoppingRecord)> {
    let mut cfg_n = cfg.clone();
    cfg_n.projector_level = k;
    let u0 = prepare_initial_data(u0_raw, n, k)?;
    let mut traj = Trajectory::default();
    let (ledger, record) = snse_solve_path(&cfg_n, u0, stop, path, |st| {
        traj.times.push(st.t);
        traj.states.push(st.u.clone());
    })?;
    Ok((traj, ledger, record))
}

/// One truncation level of a [`cauchy_study`].
#[derive(Debug)]
pub struct LevelRun {
    pub n_level: f64,
    pub projector_level: f64,
    pub ledger: EnergyLedger,
    pub stopping: StoppingRecord,
}

#[derive(Debug)]
pub struct CauchyStudy {
    pub reports: Vec<CauchyReport>,
    pub levels: Vec<LevelRun>,
}

/// Couple consecutive truncation levels through one Wiener path and measure
/// their distance on the jointly stopped window `tau_n ^ tau_m ^ T`.
pub fn cauchy_study(
    cfg: &SnseConfig,
    u0_raw: &RealVectorField,
    levels: &[f64],
    stop: &StoppingSpec,
    master_seed: u64,
    trajectory: u64,
    schedule: KSchedule,
) -> Result<CauchyStudy> {
    if levels.len() < 2 {
        return Err(SnseError::InvalidParameter {
            name: "levels",
            reason: "need at least two truncation levels".into(),
        });
    }
    let steps = step_count(cfg.t_end, cfg.dt)?;
    let k_modes = cfg.noise.as_ref().map_or(1, |m| m.modes());
    let mut rng = trajectory_rng(master_seed, trajectory);
    let path = draw_noise_path(&mut rng, steps, cfg.dt, k_modes)?;
    let mut reports = Vec::new();
    let mut level_runs = Vec::new();
    let mut prev: Option<(f64, f64, Trajectory, StoppingRecord)> = None;
    for &n in levels {
        let k = schedule_level(schedule, u0_raw, n)?;
        let (traj, ledger, record) = run_level(cfg, u0_raw, n, k, stop, &path)?;
        level_runs.push(LevelRun {
            n_level: n,
            projector_level: k,
            ledger,
            stopping: record.clone(),
        });
        if let Some((pn, pk, ptraj, precord)) = &prev {
            let window = ptraj.states.len().min(traj.states.len());
            let mut sup = 0.0f64;
            let mut int_3p = 0.0;
            let mut last = 0.0;
            for i in 0..window {
                let diff = ptraj.states[i].sub(&traj.states[i]);
                sup = sup.max(lp_norm(&diff, cfg.p)?);
                let d3 = lp_norm(&diff, 3.0 * cfg.p)?.powf(cfg.p);
                if i > 0 {
                    int_3p += 0.5 * (last + d3) * cfg.dt;
                }
                last = d3;
            }
            reports.push(CauchyReport {
                n_level: *pn,
                m_level: n,
                k_n: *pk,
                k_m: k,
                sup_dist_p: sup,
                int_dist_3p: int_3p,
                tau_n: precord.tau,
                tau_m: record.tau,
                horizon: cfg.t_end,
            });
        }
        prev = Some((n, k, traj, record));
    }
    Ok(CauchyStudy { reports, levels: level_runs })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub perturbation: f64,
    /// sup_t |u1 - u2|_p between the coupled runs.
    pub sup_dist_p: f64,
    /// Ratio of the final distance to the initial one; NaN when unperturbed.
    pub growth_factor: f64,
    pub bit_identical: bool,
}

/// Couple two runs through the same Wiener path.  With no perturbation the
/// trajectories must agree bit for bit; with a tiny one the distance envelope
/// is reported.
pub fn uniqueness_check(
    cfg: &SnseConfig,
    u0_raw: &RealVectorField,
    n_level: f64,
    stop: &StoppingSpec,
    master_seed: u64,
    perturbation: f64,
) -> Result<UniquenessReport> {
    if !(perturbation >= 0.0) || perturbation >= 1.0 {
        return Err(SnseError::InvalidParameter {
            name: "perturbation",
            reason: format!("need 0 <= delta < 1, got {perturbation}"),
        });
    }
    let steps = step_count(cfg.t_end, cfg.dt)?;
    let k_modes = cfg.noise.as_ref().map_or(1, |m| m.modes());
    let mut rng = trajectory_rng(master_seed, 0);
    let path = draw_noise_path(&mut rng, steps, cfg.dt, k_modes)?;
    let u0 = prepare_initial_data(u0_raw, n_level, cfg.projector_level)?;
    let mut u0b = u0.clone();
    u0b.scale(1.0 + perturbation);

    let run = |init: RealVectorField| -> Result<Trajectory> {
        let mut traj = Trajectory::default();
        snse_solve_path(cfg, init, stop, &path, |st| {
            traj.times.push(st.t);
            traj.states.push(st.u.clone());
        })?;
        Ok(traj)
    };
    let ta = run(u0)?;
    let tb = run(u0b)?;
    let sup = trajectory_sup_distance(&ta, &tb, cfg.p)?;
    let n = ta.states.len().min(tb.states.len());
    let d0 = lp_norm(&ta.states[0].sub(&tb.states[0]), cfg.p)?;
    let dend = lp_norm(&ta.states[n - 1].sub(&tb.states[n - 1]), cfg.p)?;
    let bit_identical = perturbation == 0.0
        && ta.states.len() == tb.states.len()
        && ta.states.iter().zip(&tb.states).all(|(a, b)| a == b);
    Ok(UniquenessReport {
        perturbation,
        sup_dist_p: sup,
        growth_factor: if d0 > 0.0 { dend / d0 } else { f64::NAN },
        bit_identical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::heat::LedgerBuilder;
    use crate::operators::CutoffSpec;
    use crate::sampling::{band_limited_random, divergence_free_random};

    fn synthetic_ledger(values: &[f64], p: f64) -> EnergyLedger {
        let grid = Grid::cube(1, 4, 1.0).unwrap();
        let mut lb = LedgerBuilder::new(p).unwrap();
        for (i, v) in values.iter().enumerate() {
            // constant field c has |u|_p^p = c^p * V; invert for the target
            let c = (*v / grid.volume()).powf(1.0 / p);
            let u = RealVectorField::new(grid.clone(), vec![vec![c; grid.points()]]).unwrap();
            lb.push(i as f64 * 0.1, &u, 1.0, false).unwrap();
        }
        lb.finish()
    }

    #[test]
    fn crossing_detected_at_exact_row() {
        let p = 4.0;
        let ledger = synthetic_ledger(&[1.0, 2.0, 5.0, 9.0, 3.0], p);
        let spec = StoppingSpec { m: 5.0, k_bound: 1.0 };
        let rec = stopping_monitor(&ledger, &spec, p);
        assert!(rec.triggered);
        // functional = sup lp_p + accumulated 3p term; sup hits 5 at row 2
        assert!(rec.tau <= 0.2 + 1e-12, "tau {}", rec.tau);
        assert!(rec.functional_at_tau >= spec.threshold(p));
        assert!((rec.m0_min - 4.0).abs() < 1e-9);
    }

    #[test]
    fn threshold_monotonicity() {
        let p = 4.0;
        let ledger = synthetic_ledger(&[1.0, 2.0, 3.0, 4.0, 5.0], p);
        let mut last_tau = -1.0;
        for m in [1.0, 2.5, 4.0] {
            let rec = stopping_monitor(&ledger, &StoppingSpec { m, k_bound: 1.0 }, p);
            assert!(rec.triggered);
            assert!(rec.tau >= last_tau);
            last_tau = rec.tau;
        }
        let rec = stopping_monitor(&ledger, &StoppingSpec { m: 1e9, k_bound: 1.0 }, p);
        assert!(!rec.triggered && rec.tau.is_infinite());
        assert!(rec.functional_at_tau.is_nan());
    }

    #[test]
    fn ratio_is_scale_invariant_in_the_right_powers() {
        let grid = Grid::cube(3, 8, 2.0).unwrap();
        let p = 4.0;
        let mut v = band_limited_random(&grid, 7, 2);
        for j in 0..3 {
            let mean = v.component(j).iter().sum::<f64>() / grid.points() as f64;
            for x in v.component_mut(j) {
                *x -= mean;
            }
        }
        let r1 = sobolev_ratio(&v, p).unwrap();
        let mut w = v.clone();
        let lam = 3.7;
        w.scale(lam);
        let r2 = sobolev_ratio(&w, p).unwrap();
        // numerator and denominator both scale as lam^p
        assert!((r2 - r1).abs() <= 1e-12 * r1.max(1e-30), "{r1} vs {r2}");
        assert_eq!(sobolev_ratio(&RealVectorField::zeros(grid), p).unwrap(), 0.0);
    }

    #[test]
    fn ratio_rejects_non_mean_zero() {
        let grid = Grid::cube(2, 8, 2.0).unwrap();
        let u = RealVectorField::new(
            grid.clone(),
            vec![vec![1.0; grid.points()], vec![0.0; grid.points()]],
        )
        .unwrap();
        assert!(sobolev_ratio(&u, 4.0).is_err());
    }

    #[test]
    fn coupled_runs_without_perturbation_are_identical() {
        let grid = Grid::cube(3, 8, 2.0).unwrap();
        let cfg = SnseConfig {
            grid: grid.clone(),
            p: 4.0,
            projector_level: 4.0,
            cutoff: CutoffSpec::new(10.0).unwrap(),
            noise: Some(
                crate::noise::NoiseModel::inverse_k(
                    crate::noise::NoiseKind::LinearMollified,
                    4,
                    0.2,
                )
                .unwrap(),
            ),
            dt: 1e-3,
            t_end: 0.01,
            dealias_two_thirds: false,
        };
        let u0 = divergence_free_random(&grid, 13, 2);
        let stop = StoppingSpec { m: 1e6, k_bound: 1.0 };
        let rep = uniqueness_check(&cfg, &u0, 4.0, &stop, 99, 0.0).unwrap();
        assert!(rep.bit_identical);
        assert_eq!(rep.sup_dist_p, 0.0);
        let rep2 = uniqueness_check(&cfg, &u0, 4.0, &stop, 99, 1e-8).unwrap();
        assert!(!rep2.bit_identical);
        assert!(rep2.sup_dist_p > 0.0 && rep2.sup_dist_p < 1e-4);
    }

    #[test]
    fn cauchy_reports_cover_consecutive_pairs() {
        let grid = Grid::cube(3, 8, 2.0).unwrap();
        let cfg = SnseConfig {
            grid: grid.clone(),
            p: 4.0,
            projector_level: 2.0,
            cutoff: CutoffSpec::new(10.0).unwrap(),
            noise: None,
            dt: 1e-3,
            t_end: 0.01,
            dealias_two_thirds: false,
        };
        let u0 = divergence_free_random(&grid, 21, 2);
        let stop = StoppingSpec { m: 1e6, k_bound: 1.0 };
        let study =
            cauchy_study(&cfg, &u0, &[2.0, 4.0, 8.0], &stop, 5, 0, KSchedule::EqualsN).unwrap();
        let reports = study.reports;
        assert_eq!(study.levels.len(), 3);
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].n_level, 2.0);
        assert_eq!(reports[1].m_level, 8.0);
        for r in &reports {
            assert!(r.sup_dist_p.is_finite() && r.int_dist_3p >= 0.0);
            assert!(r.tau_n.is_infinite() && r.tau_m.is_infinite());
        }
    }
}
