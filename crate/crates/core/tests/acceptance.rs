//! Acceptance gate: one test per headline criterion, each printing a single
//! PASS/FAIL line with the measured quantity next to its pinned tolerance.

use num_complex::Complex64;
use snse::config::ExperimentConfig;
use snse::field::{forward_transform, inverse_transform, lp_norm};
use snse::heat::{dissipation_identity_check, heat_step, HeatState};
use snse::monitors::{
    cauchy_study, stopping_monitor, uniqueness_check, KSchedule, StoppingSpec,
};
use snse::noise::{trajectory_rng, wiener_increment, NoiseKind, NoiseModel, WienerIncrement};
use snse::operators::{
    gaussian_projector, gaussian_projector_direct, leray_project, CutoffSpec,
};
use snse::sampling::{band_limited_random, divergence_free_random, random_field};
use snse::snse::{
    componentwise_lp_p, convective_term, draw_noise_path, picard_iterate, prepare_initial_data,
    snse_solve, trajectory_sup_distance, SnseConfig, Trajectory,
};
use snse::stats::linear_fit;
use snse::{Grid, LtwoSequenceField, RealVectorField};

fn verdict(index: usize, name: &str, ok: bool, detail: &str) {
    println!("ACCEPTANCE {index:02} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

#[test]
fn criterion_01_projector_contraction() {
    let grid = Grid::cube(3, 32, snse::grid::DEFAULT_EXTENT).unwrap();
    let p = 4.0;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..100u64 {
        let f = random_field(&grid, seed);
        let fh = forward_transform(&f).unwrap();
        for n in [1.0, 2.0, 8.0] {
            let pf = inverse_transform(
                &snse::operators::gaussian_projector_spectral(&fh, n).unwrap(),
            )
            .unwrap();
            for q in [2.0, 4.0, p] {
                let excess = lp_norm(&pf, q).unwrap() / lp_norm(&f, q).unwrap() - 1.0;
                worst = worst.max(excess);
            }
        }
    }
    verdict(1, "projector-contraction", worst <= 1e-10, &format!("worst excess {worst:.3e} <= 1e-10"));
}

#[test]
fn criterion_02_fft_vs_direct_projector() {
    // levels chosen so the multiplier decays past roundoff at Nyquist and the
    // kernel is resolved; the two discretizations then agree
    let mut worst = 0.0f64;
    for (npts, l, n) in [(8usize, 1.0, 0.5), (16, 1.0, 1.0)] {
        let grid = Grid::cube(3, npts, l).unwrap();
        let f = random_field(&grid, 2);
        let a = gaussian_projector(&f, n).unwrap();
        let b = gaussian_projector_direct(&f, n).unwrap();
        worst = worst.max(a.sub(&b).max_abs() / f.max_abs());
    }
    verdict(2, "fft-vs-direct-projector", worst <= 1e-10, &format!("max rel err {worst:.3e} <= 1e-10"));
}

/// Trapezoid quadrature of `int |(F^-1 psi)(y)| |y| dy` for the Gaussian
/// projector profile in d = 3; closed form 2 / pi^{3/2}.
fn lipschitz_constant_oracle() -> f64 {
    let surface = 4.0 * std::f64::consts::PI;
    let amp = std::f64::consts::PI.powf(1.5);
    let (rmax, steps) = (4.0, 40_000usize);
    let h = rmax / steps as f64;
    let g = |r: f64| surface * r.powi(3) * amp * (-std::f64::consts::PI.powi(2) * r * r).exp();
    let mut acc = 0.5 * (g(0.0) + g(rmax));
    for i in 1..steps {
        acc += g(i as f64 * h);
    }
    acc * h
}

#[test]
fn criterion_03_projector_lipschitz_in_inverse_level() {
    let cstar = lipschitz_constant_oracle();
    let closed = 2.0 / std::f64::consts::PI.powf(1.5);
    assert!((cstar - closed).abs() < 1e-9);
    let grid = Grid::cube(3, 16, 1.0).unwrap();
    let f = band_limited_random(&grid, 13, 2);
    let fh = forward_transform(&f).unwrap();
    let mut grad2 = vec![0.0; grid.points()];
    for j in 0..3 {
        for axis in 0..3 {
            let dh = fh
                .apply_multiplier(|xi| Complex64::new(0.0, 2.0 * std::f64::consts::PI * xi[axis]))
                .unwrap();
            let dj = inverse_transform(&dh).unwrap();
            for (g2, v) in grad2.iter_mut().zip(dj.component(j)) {
                *g2 += v * v;
            }
        }
    }
    let h = grid.volume_element();
    let mut worst_margin = f64::INFINITY;
    let mut ok = true;
    for q in [2.0, 4.0] {
        let grad_norm = (grad2.iter().map(|v| v.powf(q / 2.0)).sum::<f64>() * h).powf(1.0 / q);
        for (n, m) in [(2.0, 4.0), (4.0, 8.0), (8.0, 16.0)] {
            let pn = gaussian_projector(&f, n).unwrap();
            let pm = gaussian_projector(&f, m).unwrap();
            let lhs = lp_norm(&pn.sub(&pm), q).unwrap();
            let rhs = cstar * (1.0 / n - 1.0 / m).abs() * grad_norm;
            ok &= lhs <= rhs;
            worst_margin = worst_margin.min(rhs / lhs.max(1e-300));
        }
    }
    verdict(3, "projector-lipschitz-in-1/n", ok, &format!("min bound/value {worst_margin:.3}"));
}

#[test]
fn criterion_04_leray_properties() {
    let grid = Grid::cube(3, 32, snse::grid::DEFAULT_EXTENT).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    // idempotence and spectral divergence on random fields
    let mut worst_idem = 0.0f64;
    let mut worst_div = 0.0f64;
    for seed in 0..5u64 {
        let f = random_field(&grid, seed);
        let p1 = leray_project(&f).unwrap();
        let p2 = leray_project(&p1).unwrap();
        worst_idem = worst_idem.max(p2.sub(&p1).max_abs() / p1.max_abs());
        worst_div = worst_div.max(forward_transform(&p1).unwrap().divergence_rel());
    }
    ok &= worst_idem <= 1e-12 && worst_div <= 1e-10;
    // gradient annihilation: a pure gradient projects to (nearly) zero
    let scalar = band_limited_random(&grid, 9, 3);
    let sh = forward_transform(&scalar).unwrap();
    let mut grad = RealVectorField::zeros(grid.clone());
    for axis in 0..3 {
        let d = inverse_transform(
            &sh.apply_multiplier(|xi| Complex64::new(0.0, 2.0 * std::f64::consts::PI * xi[axis]))
                .unwrap(),
        )
        .unwrap();
        grad.component_mut(axis).copy_from_slice(d.component(0));
    }
    let killed = leray_project(&grad).unwrap().max_abs() / grad.max_abs();
    ok &= killed <= 1e-12;
    detail.push_str(&format!(
        "idem {worst_idem:.2e} <= 1e-12, div {worst_div:.2e} <= 1e-10, grad {killed:.2e} <= 1e-12"
    ));
    verdict(4, "leray-projection", ok, &detail);
}

#[test]
fn criterion_05_heat_semigroup_exactness() {
    let grid = Grid::cube(3, 16, snse::grid::DEFAULT_EXTENT).unwrap();
    let f = random_field(&grid, 3);
    let dt = 1e-3;
    let steps = 50;
    let mut state = HeatState::initial(f.clone());
    for _ in 0..steps {
        state = heat_step(&state, None, None, &WienerIncrement::zeros(0), dt).unwrap();
    }
    let fh = forward_transform(&f).unwrap();
    let uh = forward_transform(&state.u).unwrap();
    let mut idx = vec![0usize; 3];
    let mut xi = vec![0.0; 3];
    let scale = (0..3).fold(0.0f64, |m, j| {
        fh.component(j).iter().fold(m, |m, c| m.max(c.norm()))
    });
    let mut worst = 0.0f64;
    for flat in 0..grid.points() {
        grid.freq_at(flat, &mut idx, &mut xi);
        let q: f64 = xi.iter().map(|v| v * v).sum();
        let factor = (-4.0 * std::f64::consts::PI.powi(2) * q * dt * steps as f64).exp();
        for j in 0..3 {
            let expect = fh.component(j)[flat] * factor;
            if expect.norm() > 1e-6 * scale {
                worst = worst.max((uh.component(j)[flat] - expect).norm() / expect.norm());
            }
        }
    }
    verdict(5, "heat-semigroup-exactness", worst <= 1e-12, &format!("worst rel {worst:.3e} <= 1e-12 over {steps} steps"));
}

#[test]
fn criterion_06_ito_isometry_ou_variance() {
    let grid = Grid::cube(3, 8, 1.0).unwrap();
    let l = grid.extent()[0];
    let gfield = RealVectorField::from_fn(grid.clone(), |j, x| {
        if j == 0 { (2.0 * std::f64::consts::PI * x[0] / l).sin() } else { 0.0 }
    });
    let g = LtwoSequenceField::new(vec![gfield.clone()]).unwrap();
    let dt = 2e-4;
    let steps = 250;
    let lambda = 4.0 * std::f64::consts::PI.powi(2);
    let ghat = forward_transform(&gfield).unwrap();
    let bin = grid.ravel(&[1, 0, 0]);
    let g2 = ghat.component(0)[bin].norm_sqr();
    let t = dt * steps as f64;
    let target = g2 * (1.0 - (-2.0 * lambda * t).exp()) / (2.0 * lambda);
    let paths = 400;
    let mut mean = 0.0;
    for path in 0..paths {
        let mut rng = trajectory_rng(2026, path as u64);
        let mut state = HeatState::initial(RealVectorField::zeros(grid.clone()));
        for _ in 0..steps {
            let dw = wiener_increment(&mut rng, dt, 1).unwrap();
            state = heat_step(&state, None, Some(&g), &dw, dt).unwrap();
        }
        let uh = forward_transform(&state.u).unwrap();
        mean += uh.component(0)[bin].norm_sqr() / paths as f64;
    }
    let se = target * (2.0 / paths as f64).sqrt();
    let dev = (mean - target).abs();
    verdict(6, "ito-isometry-ou-variance", dev < 3.0 * se, &format!("|{mean:.4e} - {target:.4e}| = {dev:.2e} < 3se = {:.2e}", 3.0 * se));
}

#[test]
fn criterion_07_dissipation_identity() {
    let mut errs = Vec::new();
    for n in [16usize, 32, 64] {
        let grid = Grid::cube(3, n, 1.0).unwrap();
        let l = grid.extent()[0];
        let u = RealVectorField::from_fn(grid, |j, x| {
            if j == 0 { (2.0 * std::f64::consts::PI * x[0] / l).sin() } else { 0.0 }
        });
        errs.push(dissipation_identity_check(&u, 4.0).unwrap().relative_error);
    }
    let ok = errs[1] <= 1e-3 && errs[1] < errs[0] && errs[2] < errs[1];
    verdict(7, "dissipation-identity", ok, &format!("errs {errs:?}; 32^3 <= 1e-3, strictly decreasing"));
}

#[test]
fn criterion_08_convective_cancellation() {
    let grid = Grid::cube(3, 16, 2.0 * std::f64::consts::PI).unwrap();
    let h = grid.volume_element();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let w = divergence_free_random(&grid, 300 + seed, 3);
        let term = convective_term(&w, &w).unwrap();
        let mut pairing = 0.0;
        for j in 0..3 {
            for (a, b) in term.component(j).iter().zip(w.component(j)) {
                pairing += a * b;
            }
        }
        pairing = (pairing * h).abs();
        // proxy bound |w|_2 |grad w|_2 |w|_inf
        let wh = forward_transform(&w).unwrap();
        let mut idx = vec![0usize; 3];
        let mut xi = vec![0.0; 3];
        let mut grad2 = 0.0;
        for flat in 0..grid.points() {
            grid.freq_at(flat, &mut idx, &mut xi);
            let q: f64 = xi.iter().map(|v| v * v).sum();
            for j in 0..3 {
                grad2 += 4.0 * std::f64::consts::PI.powi(2) * q * wh.component(j)[flat].norm_sqr();
            }
        }
        grad2 /= grid.volume();
        let bound = lp_norm(&w, 2.0).unwrap() * grad2.sqrt() * w.max_abs();
        worst = worst.max(pairing / bound);
    }
    verdict(8, "convective-cancellation", worst <= 1e-10, &format!("worst normalized pairing {worst:.3e} <= 1e-10"));
}

#[test]
fn criterion_09_picard_contraction() {
    // horizon short enough for the contraction regime
    let grid = Grid::cube(3, 8, 2.0 * std::f64::consts::PI).unwrap();
    let cfg = SnseConfig {
        grid: grid.clone(),
        p: 4.0,
        projector_level: 4.0,
        cutoff: CutoffSpec::new(50.0).unwrap(),
        noise: Some(NoiseModel::inverse_k(NoiseKind::ThreeHalvesMollified, 4, 0.5).unwrap()),
        dt: 1e-3,
        t_end: 0.02,
        dealias_two_thirds: false,
    };
    let steps = snse::heat::step_count(cfg.t_end, cfg.dt).unwrap();
    let mut all_ratios_ok = true;
    let mut worst_r2 = f64::INFINITY;
    for seed in 0..10u64 {
        let u0 = prepare_initial_data(
            &divergence_free_random(&grid, 500 + seed, 2),
            100.0,
            cfg.projector_level,
        )
        .unwrap();
        let mut rng = trajectory_rng(700 + seed, 0);
        let path = draw_noise_path(&mut rng, steps, cfg.dt, 4).unwrap();
        let mut current = Trajectory {
            times: (0..=steps).map(|i| i as f64 * cfg.dt).collect(),
            states: vec![RealVectorField::zeros(grid.clone()); steps + 1],
        };
        current = picard_iterate(&current, &cfg, &u0, &path).unwrap();
        let mut dists = Vec::new();
        for _ in 0..7 {
            let next = picard_iterate(&current, &cfg, &u0, &path).unwrap();
            dists.push(trajectory_sup_distance(&next, &current, cfg.p).unwrap());
            current = next;
        }
        for w in dists.windows(2).take(5) {
            all_ratios_ok &= w[1] < w[0];
        }
        let xs: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let ys: Vec<f64> = dists.iter().take(6).map(|d| d.ln()).collect();
        let (_, _, r2) = linear_fit(&xs, &ys);
        worst_r2 = worst_r2.min(r2);
    }
    let ok = all_ratios_ok && worst_r2 >= 0.95;
    verdict(9, "picard-contraction", ok, &format!("ratios < 1 for m=0..5 on 10 seeds, min R^2 {worst_r2:.4} >= 0.95"));
}

#[test]
fn criterion_10_uniform_in_k_l2_envelope() {
    let grid = Grid::cube(3, 16, snse::grid::DEFAULT_EXTENT).unwrap();
    let stop = StoppingSpec { m: 1e9, k_bound: 1.0 };
    let metric = |k: f64| -> f64 {
        let cfg = SnseConfig {
            grid: grid.clone(),
            p: 4.0,
            projector_level: k,
            cutoff: CutoffSpec::new(100.0).unwrap(),
            noise: Some(NoiseModel::inverse_k(NoiseKind::LinearMollified, 4, 1.0).unwrap()),
            dt: 2.5e-3,
            t_end: 0.05,
            dealias_two_thirds: false,
        };
        let u0 = divergence_free_random(&grid, 11, 2);
        let mut acc = 0.0;
        let paths = 8;
        for i in 0..paths {
            let mut rng = trajectory_rng(42, i);
            let run = snse_solve(&cfg, &u0, 8.0, &stop, &mut rng).unwrap();
            let sup = run
                .trajectory
                .states
                .iter()
                .map(|s| lp_norm(s, 2.0).unwrap().powi(2))
                .fold(0.0f64, f64::max);
            acc += sup / paths as f64;
        }
        acc
    };
    let m8 = metric(8.0);
    let m32 = metric(32.0);
    let change = (m32 - m8).abs() / m8;
    verdict(10, "uniform-in-k-l2-envelope", change <= 0.2, &format!("k 8 -> 32 changes mean sup |u|_2^2 by {:.2}% <= 20%", 100.0 * change));
}

#[test]
fn criterion_11_cauchy_decay() {
    let grid = Grid::cube(3, 16, snse::grid::DEFAULT_EXTENT).unwrap();
    let cfg = SnseConfig {
        grid: grid.clone(),
        p: 4.0,
        projector_level: 2.0,
        cutoff: CutoffSpec::new(100.0).unwrap(),
        noise: Some(NoiseModel::inverse_k(NoiseKind::LinearMollified, 4, 1.0).unwrap()),
        dt: 2.5e-3,
        t_end: 0.025,
        dealias_two_thirds: false,
    };
    // localized data: the level sweep converges through the cutoff radii
    let mut u0 = band_limited_random(&grid, 17, 3);
    let sigma = 4.0f64;
    for j in 0..3 {
        for flat in 0..grid.points() {
            let mut idx = vec![0usize; 3];
            grid.unravel(flat, &mut idx);
            let r2: f64 = (0..3)
                .map(|a| {
                    let dx = grid.coord(a, idx[a]) - 0.5 * grid.extent()[a];
                    dx * dx
                })
                .sum();
            u0.component_mut(j)[flat] *= (-r2 / (2.0 * sigma * sigma)).exp();
        }
    }
    let stop = StoppingSpec { m: 1e9, k_bound: 1.0 };
    let levels = [2.0, 4.0, 8.0, 16.0];
    let members = 4;
    let mut mean = vec![0.0; levels.len() - 1];
    for t in 0..members {
        let study =
            cauchy_study(&cfg, &u0, &levels, &stop, 90, t as u64, KSchedule::EqualsN).unwrap();
        for (j, r) in study.reports.iter().enumerate() {
            mean[j] += r.sup_dist_p / members as f64;
        }
    }
    let ok = mean.windows(2).all(|w| w[1] < w[0]);
    verdict(11, "cauchy-decay", ok, &format!("ensemble-mean consecutive sup_dist_p {mean:?} strictly decreasing"));
}

#[test]
fn criterion_12_pathwise_uniqueness_surrogate() {
    let grid = Grid::cube(3, 16, snse::grid::DEFAULT_EXTENT).unwrap();
    let cfg = SnseConfig {
        grid: grid.clone(),
        p: 4.0,
        projector_level: 4.0,
        cutoff: CutoffSpec::new(100.0).unwrap(),
        noise: Some(NoiseModel::inverse_k(NoiseKind::ThreeHalvesMollified, 4, 1.0).unwrap()),
        dt: 1e-3,
        t_end: 0.05,
        dealias_two_thirds: false,
    };
    let u0 = divergence_free_random(&grid, 23, 2);
    let stop = StoppingSpec { m: 1e9, k_bound: 1.0 };
    let rep = uniqueness_check(&cfg, &u0, 4.0, &stop, 31, 0.0).unwrap();
    let ok = rep.bit_identical && rep.sup_dist_p <= 1e-12;
    verdict(12, "pathwise-uniqueness-surrogate", ok, &format!("coupled sup distance {:.3e} <= 1e-12 over the horizon", rep.sup_dist_p));
}

#[test]
fn criterion_13_stopping_time_positivity_and_monotonicity() {
    let grid = Grid::cube(3, 8, 2.0 * std::f64::consts::PI).unwrap();
    let cfg = SnseConfig {
        grid: grid.clone(),
        p: 4.0,
        projector_level: 4.0,
        cutoff: CutoffSpec::new(100.0).unwrap(),
        noise: Some(NoiseModel::inverse_k(NoiseKind::LinearMollified, 4, 0.5).unwrap()),
        dt: 1e-3,
        t_end: 0.05,
        dealias_two_thirds: false,
    };
    let u0_raw = divergence_free_random(&grid, 29, 2);
    let k_bound = 1.0f64;
    let prepped = prepare_initial_data(&u0_raw, 100.0, cfg.projector_level).unwrap();
    let m0_min = 4.0 * componentwise_lp_p(&prepped, cfg.p).unwrap() / k_bound.powf(cfg.p);
    // M at the quarter bound: the initial functional sits below the threshold
    let stop = StoppingSpec { m: m0_min, k_bound };
    let mut all_positive = true;
    for i in 0..8u64 {
        let run = snse_solve(&cfg, &u0_raw, 100.0, &stop, &mut trajectory_rng(60, i)).unwrap();
        all_positive &= run.stopping.tau > 0.0;
        all_positive &= run.stopping.m0_min <= stop.m * (1.0 + 1e-12);
    }
    // monotonicity of tau in M on a fixed trajectory
    let free = StoppingSpec { m: 1e12, k_bound };
    let run = snse_solve(&cfg, &u0_raw, 100.0, &free, &mut trajectory_rng(60, 0)).unwrap();
    let mut last_tau = -1.0;
    let mut monotone = true;
    for m in [1e-6, 1e-3, m0_min, 10.0 * m0_min, 1e9] {
        let rec = stopping_monitor(&run.ledger, &StoppingSpec { m, k_bound }, cfg.p);
        let tau = rec.tau;
        monotone &= tau >= last_tau;
        last_tau = tau;
    }
    let ok = all_positive && monotone;
    verdict(13, "stopping-time-positivity-monotonicity", ok, "tau > 0 under the quarter bound on 8 runs; tau nondecreasing in M");
}

#[test]
fn criterion_14_cli_determinism() {
    let base = tempfile::tempdir().unwrap();
    let toml = format!(
        r#"
command = "snse-run"
p = 4.0
projector_level = 4.0
cutoff_level = 100.0
m = 1e9
k_bound = 1.0
dt = 1e-3
t_end = 0.02
ensemble_size = 2
master_seed = 7

[grid]
dim = 3
size = 8
extent = {}

[noise]
kind = "linear_mollified"
modes = 4
eps = 1.0

[initial]
kind = "divergence-free"
seed = 3
max_mode = 2
"#,
        2.0 * std::f64::consts::PI
    );
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut dirs = Vec::new();
    for pass in 0..2 {
        let mut cfg = ExperimentConfig::from_toml(&toml).unwrap();
        let dir = base.path().join(format!("run{pass}"));
        cfg.output_dir = dir.clone();
        pool.install(|| snse::runner::run(&cfg)).unwrap();
        dirs.push(dir);
    }
    let mut names: Vec<String> = std::fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"manifest.json".to_string()));
    let mut ok = true;
    for name in &names {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        let b = std::fs::read(dirs[1].join(name)).unwrap();
        ok &= a == b;
    }
    verdict(14, "cli-determinism", ok, &format!("{} artifacts byte-identical across two seeded runs", names.len()));
}
