//! Command dispatch and artifact emission: ledgers as CSV, reports as JSON,
//! and a manifest tying the run to a config hash and per-file checksums.
//! All output is byte-stable for a fixed config and seed.

use crate::config::{Command, ExperimentConfig, InitialData, KScheduleConfig};
use crate::error::{Result, SnseError};
use crate::field::{lp_norm, RealVectorField};
use crate::grid::Grid;
use crate::heat::{heat_solve, EnergyLedger, LedgerRow};
use crate::monitors::{
    cauchy_study, uniqueness_check, CauchyReport, KSchedule, StoppingRecord, StoppingSpec,
};
use crate::noise::{noise_audit, sigma_apply, trajectory_rng, NoiseAudit};
use crate::operators::{
    gaussian_projector, gaussian_projector_direct, leray_project, CutoffSpec,
};
use crate::sampling::{divergence_free_random, random_field, taylor_green};
use crate::snse::snse_solve;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const OUTPUT_DIR_ENV: &str = "SNSE_OUTPUT_DIR";

const LEDGER_HEADER: &str = "t,lp_p,sup_lp_p,grad_energy_cum,l3p_cum,phi_value,stopped_flag";

/// Write a ledger as CSV with the fixed seven-column header; 17 significant
/// digits, LF endings.
pub fn emit_ledger(ledger: &EnergyLedger, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (ledger.rows.len() + 1));
    out.push_str(LEDGER_HEADER);
    out.push('\n');
    for r in &ledger.rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.t,
            r.lp_p,
            r.sup_lp_p,
            r.grad_energy_cum,
            r.l3p_cum,
            r.phi_value,
            u8::from(r.stopped_flag)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a CSV produced by [`emit_ledger`]; the round-trip is exact.
pub fn parse_ledger(text: &str) -> Result<EnergyLedger> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == LEDGER_HEADER => {}
        other => {
            return Err(SnseError::Other(format!("bad ledger header: {other:?}")));
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(SnseError::Other(format!("row {i}: expected 7 columns, got {}", cols.len())));
        }
        let num = |j: usize| -> Result<f64> {
            cols[j]
                .parse()
                .map_err(|e| SnseError::Other(format!("row {i} col {j}: {e}")))
        };
        rows.push(LedgerRow {
            t: num(0)?,
            lp_p: num(1)?,
            sup_lp_p: num(2)?,
            grad_energy_cum: num(3)?,
            l3p_cum: num(4)?,
            phi_value: num(5)?,
            stopped_flag: cols[6] == "1",
        });
    }
    Ok(EnergyLedger { rows })
}

#[derive(Debug, Serialize)]
struct ArtifactEntry {
    name: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    config_sha256: String,
    master_seed: u64,
    artifacts: Vec<ArtifactEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| SnseError::Other(e.to_string()))?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Output directory: the environment override wins over the config value.
pub fn resolve_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output_dir.clone())
}

fn initial_field(cfg: &ExperimentConfig, grid: &Grid) -> RealVectorField {
    match &cfg.initial {
        InitialData::TaylorGreen { amplitude } => taylor_green(grid, *amplitude),
        InitialData::Random { seed } => random_field(grid, *seed),
        InitialData::DivergenceFree { seed, max_mode } => {
            divergence_free_random(grid, *seed, *max_mode)
        }
    }
}

fn write_manifest(
    cfg: &ExperimentConfig,
    dir: &Path,
    mut names: Vec<String>,
) -> Result<()> {
    names.sort();
    let mut artifacts = Vec::with_capacity(names.len());
    for name in names {
        let bytes = std::fs::read(dir.join(&name))?;
        artifacts.push(ArtifactEntry { name, sha256: sha256_hex(&bytes) });
    }
    let manifest = Manifest {
        command: cfg.command.to_string(),
        config_sha256: sha256_hex(cfg.canonical_json()?.as_bytes()),
        master_seed: cfg.master_seed,
        artifacts,
    };
    write_json(&manifest, &dir.join("manifest.json"))
}

/// Execute the configured command; artifacts land in the resolved output
/// directory, with a manifest written last.
pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    let dir = resolve_output_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let names = match cfg.command {
        Command::VerifyOperators => run_verify(cfg, &dir)?,
        Command::HeatRun => run_heat(cfg, &dir)?,
        Command::SnseRun => run_snse(cfg, &dir)?,
        Command::ConvergeStudy => run_converge(cfg, &dir)?,
        Command::UniquenessCheck => run_uniqueness(cfg, &dir)?,
        Command::NoiseAudit => run_noise_audit(cfg, &dir)?,
    };
    write_manifest(cfg, &dir, names)
}

#[derive(Debug, Serialize)]
struct PropertyCheck {
    name: String,
    pass: bool,
    worst: f64,
    tolerance: f64,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    all_pass: bool,
    checks: Vec<PropertyCheck>,
}

fn run_verify(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let grid = cfg.grid()?;
    let mut checks = Vec::new();
    let mut push = |name: &str, worst: f64, tolerance: f64| {
        checks.push(PropertyCheck {
            name: name.into(),
            pass: worst <= tolerance,
            worst,
            tolerance,
        });
    };

    // projector contraction in L^q across levels and seeds
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let f = random_field(&grid, cfg.master_seed.wrapping_add(seed));
        for q in [2.0, 4.0, cfg.p] {
            for n in [1.0, 2.0, 8.0] {
                let pf = gaussian_projector(&f, n)?;
                let ratio = lp_norm(&pf, q)? / lp_norm(&f, q)?;
                worst = worst.max(ratio - 1.0);
            }
        }
    }
    push("projector_contraction_excess", worst, 1e-10);

    // FFT path against the periodized-kernel convolution
    let small = Grid::cube(3, 8, 1.0)?;
    let f = random_field(&small, cfg.master_seed);
    let a = gaussian_projector(&f, 0.5)?;
    let b = gaussian_projector_direct(&f, 0.5)?;
    let scale = a.max_abs().max(1e-300);
    push("fft_vs_direct_rel_err", a.sub(&b).max_abs() / scale, 1e-10);

    // Leray idempotence and divergence kill
    let u = random_field(&grid, cfg.master_seed.wrapping_add(101));
    let pu = leray_project(&u)?;
    let ppu = leray_project(&pu)?;
    push(
        "leray_idempotence",
        ppu.sub(&pu).max_abs() / pu.max_abs().max(1e-300),
        1e-12,
    );
    let div = crate::field::forward_transform(&pu)?.divergence_rel();
    push("leray_divergence_rel", div, 1e-10);

    // cutoff midpoint value
    let spec = CutoffSpec::new(cfg.cutoff_level)?;
    push(
        "cutoff_midpoint",
        (spec.phi(3.0 * cfg.cutoff_level)? - 0.5).abs(),
        1e-12,
    );

    // heat semigroup per-mode factor over a few steps
    let table = crate::heat::heat_semigroup_table(&grid, cfg.dt);
    let mut idx = vec![0usize; grid.dim()];
    let mut xi = vec![0.0; grid.dim()];
    let mut worst = 0.0f64;
    for flat in (0..grid.points()).step_by(grid.points() / 64 + 1) {
        grid.unravel(flat, &mut idx);
        for (a, x) in xi.iter_mut().enumerate() {
            *x = grid.freq(a, idx[a]);
        }
        let q: f64 = xi.iter().map(|v| v * v).sum();
        let exact = (-4.0 * std::f64::consts::PI.powi(2) * q * cfg.dt).exp();
        worst = worst.max((table[flat].re - exact).abs() / exact.max(1e-300));
        worst = worst.max(table[flat].im.abs());
    }
    push("heat_semigroup_symbol", worst, 1e-12);

    let report = VerifyReport { all_pass: checks.iter().all(|c| c.pass), checks };
    write_json(&report, &dir.join("verify_operators.json"))?;
    if !report.all_pass {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        return Err(SnseError::Other(format!("property checks failed: {failed:?}")));
    }
    Ok(vec!["verify_operators.json".into()])
}

fn ledger_name(i: usize) -> String {
    format!("ledger_{i:04}.csv")
}

fn run_heat(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let grid = cfg.grid()?;
    let u0 = initial_field(cfg, &grid);
    let model = cfg.noise_model()?;
    let g = model.as_ref().map(|m| sigma_apply(m, &u0)).transpose()?;
    let k_modes = model.as_ref().map_or(0, |m| m.modes());
    let ledgers: Vec<Result<EnergyLedger>> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(cfg.master_seed, i as u64);
            let diffusion = g.as_ref().map(|g| move |_t: f64| g.clone());
            let diffusion_dyn: Option<&dyn Fn(f64) -> crate::field::LtwoSequenceField> =
                diffusion.as_ref().map(|f| f as _);
            let (_, ledger) = heat_solve(
                u0.clone(),
                None,
                diffusion_dyn,
                k_modes,
                cfg.t_end,
                cfg.dt,
                &mut rng,
                cfg.p,
            )?;
            Ok(ledger)
        })
        .collect();
    let mut names = Vec::new();
    for (i, ledger) in ledgers.into_iter().enumerate() {
        let name = ledger_name(i);
        emit_ledger(&ledger?, &dir.join(&name))?;
        names.push(name);
    }
    Ok(names)
}

#[derive(Debug, Serialize)]
struct SnseRunReport {
    trajectory: usize,
    stopping: StoppingRecord,
}

fn run_snse(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let snse_cfg = cfg.snse_config()?;
    let grid = cfg.grid()?;
    let u0_raw = initial_field(cfg, &grid);
    let stop = StoppingSpec { m: cfg.m, k_bound: cfg.k_bound };
    let runs: Vec<Result<(EnergyLedger, StoppingRecord)>> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(cfg.master_seed, i as u64);
            let run = snse_solve(&snse_cfg, &u0_raw, cfg.n_level, &stop, &mut rng)?;
            Ok((run.ledger, run.stopping))
        })
        .collect();
    let mut names = Vec::new();
    let mut reports = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        let (ledger, stopping) = run?;
        let name = ledger_name(i);
        emit_ledger(&ledger, &dir.join(&name))?;
        names.push(name);
        reports.push(SnseRunReport { trajectory: i, stopping });
    }
    write_json(&reports, &dir.join("stopping.json"))?;
    names.push("stopping.json".into());
    Ok(names)
}

#[derive(Debug, Serialize)]
struct ConvergeReport {
    trajectory: usize,
    pairs: Vec<CauchyReport>,
}

#[derive(Debug, Serialize)]
struct ConvergeSummary {
    /// Ensemble means of sup_dist_p, indexed by consecutive level pair.
    mean_sup_dist_p: Vec<f64>,
    mean_int_dist_3p: Vec<f64>,
    reports: Vec<ConvergeReport>,
}

fn run_converge(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let snse_cfg = cfg.snse_config()?;
    let grid = cfg.grid()?;
    let u0_raw = initial_field(cfg, &grid);
    let stop = StoppingSpec { m: cfg.m, k_bound: cfg.k_bound };
    let schedule = match cfg.k_schedule {
        KScheduleConfig::EqualsN => KSchedule::EqualsN,
        KScheduleConfig::MeasuredL2 => KSchedule::MeasuredL2,
    };
    let studies: Vec<Result<crate::monitors::CauchyStudy>> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|i| {
            cauchy_study(&snse_cfg, &u0_raw, &cfg.levels, &stop, cfg.master_seed, i as u64, schedule)
        })
        .collect();
    let studies = studies.into_iter().collect::<Result<Vec<_>>>()?;
    let mut names = Vec::new();
    // per-level ledgers of the first ensemble member
    for level in &studies[0].levels {
        let name = format!("level_n{}.csv", level.n_level);
        emit_ledger(&level.ledger, &dir.join(&name))?;
        names.push(name);
    }
    let pairs = studies[0].reports.len();
    let mut mean_sup = vec![0.0; pairs];
    let mut mean_int = vec![0.0; pairs];
    for s in &studies {
        for (j, r) in s.reports.iter().enumerate() {
            mean_sup[j] += r.sup_dist_p / studies.len() as f64;
            mean_int[j] += r.int_dist_3p / studies.len() as f64;
        }
    }
    let summary = ConvergeSummary {
        mean_sup_dist_p: mean_sup,
        mean_int_dist_3p: mean_int,
        reports: studies
            .into_iter()
            .enumerate()
            .map(|(i, s)| ConvergeReport { trajectory: i, pairs: s.reports })
            .collect(),
    };
    write_json(&summary, &dir.join("cauchy_reports.json"))?;
    names.push("cauchy_reports.json".into());
    Ok(names)
}

fn run_uniqueness(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let snse_cfg = cfg.snse_config()?;
    let grid = cfg.grid()?;
    let u0_raw = initial_field(cfg, &grid);
    let stop = StoppingSpec { m: cfg.m, k_bound: cfg.k_bound };
    let report = uniqueness_check(
        &snse_cfg,
        &u0_raw,
        cfg.n_level,
        &stop,
        cfg.master_seed,
        cfg.perturbation,
    )?;
    write_json(&report, &dir.join("uniqueness.json"))?;
    Ok(vec!["uniqueness.json".into()])
}

fn run_noise_audit(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let grid = cfg.grid()?;
    let model = cfg.noise_model()?.ok_or_else(|| SnseError::ConfigValidation {
        key: "noise".into(),
        reason: "noise-audit needs a noise subconfig".into(),
    })?;
    let count = cfg.ensemble_size.max(2);
    let samples: Vec<RealVectorField> = (0..count)
        .map(|i| divergence_free_random(&grid, cfg.master_seed.wrapping_add(i as u64), 2))
        .collect();
    let audit: NoiseAudit = noise_audit(&model, &samples, cfg.p)?;
    write_json(&audit, &dir.join("noise_audit.json"))?;
    Ok(vec!["noise_audit.json".into()])
}
