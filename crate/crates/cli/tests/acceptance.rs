//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spillover::dynamics::{bootstrap_bands, rolling_connectedness, BootstrapConfig, MeasureSpec, RollingConfig};
use spillover::freqdomain::{
    band_measures, band_table, parse_bands, reconstruction_residual, spectral_gfevd, BandSpec, SpectralBasis,
};
use spillover::ingest::{bipower_variation, synth_var_panel};
use spillover::timedomain::{dy_measures, gfevd, Horizon};
use spillover::varcore::{fit_var, wold, VarModel};
use spillover::Execution;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 row-sum law", row_sum_law, Some(Duration::from_secs(10))),
        ("2 reconstruction identity", reconstruction_identity, Some(Duration::from_secs(60))),
        ("3 oracle equivalence", oracle_equivalence, Some(Duration::from_secs(5))),
        ("4 zero-connectedness law", zero_connectedness, None),
        ("5 flat-spectrum proportionality", flat_spectrum, None),
        ("6 estimation recovery", estimation_recovery, Some(Duration::from_secs(30))),
        ("7 bootstrap coverage", bootstrap_coverage, Some(Duration::from_secs(600))),
        ("8 bpv correctness", bpv_correctness, None),
        ("9 rolling-protocol throughput", throughput, Some(Duration::from_secs(60))),
        ("10 cli determinism", cli_determinism, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked".into()));
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let passed = result.passed && in_time;
        let budget_note = budget.map_or_else(String::new, |b| format!(" / {} s budget", b.as_secs()));
        println!(
            "acceptance {name}: {} - {} ({:.2} s{budget_note})",
            if passed { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64()
        );
        if !passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
}

fn row_sum_law() -> Outcome {
    let mut worst: f64 = 0.0;
    for model in fleet(200, 1) {
        let seq = wold(&model, 100).unwrap();
        for h in [1, 10, 100] {
            let table = gfevd(&model, &seq, h).unwrap();
            for row in table.theta.row_iter() {
                worst = worst.max((row.sum() - 1.0).abs());
            }
        }
        let grid = spectral_gfevd(&model, &seq, 512).unwrap();
        let unconditional = grid.unconditional_table().unwrap();
        assert_eq!(unconditional.horizon, Horizon::Unconditional);
        for row in unconditional.theta.row_iter() {
            worst = worst.max((row.sum() - 1.0).abs());
        }
    }
    outcome(worst < 1e-10, format!("max |row sum - 1| = {worst:.1e} over 200 models"))
}

fn random_partition(rng: &mut ChaCha8Rng) -> Vec<BandSpec> {
    // Bands at least 0.05 wide always hold grid points at N = 512.
    let parts = rng.random_range(2..=5);
    let edges = loop {
        let mut cuts: Vec<f64> = (0..parts - 1).map(|_| rng.random_range(0.05..PI - 0.05)).collect();
        cuts.sort_by(f64::total_cmp);
        let mut edges = vec![0.0];
        edges.extend(cuts);
        edges.push(PI);
        if edges.windows(2).all(|e| e[1] - e[0] >= 0.05) {
            break edges;
        }
    };
    edges
        .windows(2)
        .enumerate()
        .map(|(i, e)| BandSpec::new(e[0], e[1], format!("b{i}")).unwrap())
        .collect()
}

fn reconstruction_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut partitions = vec![parse_bands("1:5,5:inf").unwrap()];
    partitions.extend((0..5).map(|_| random_partition(&mut rng)));
    let mut worst: f64 = 0.0;
    for model in fleet(200, 1) {
        let seq = wold(&model, 100).unwrap();
        let total = dy_measures(&gfevd(&model, &seq, 100).unwrap()).total;
        let grid = spectral_gfevd(&model, &seq, 512).unwrap();
        for partition in &partitions {
            let bands: Vec<_> = partition.iter().map(|b| band_measures(&grid, b).unwrap()).collect();
            worst = worst.max(reconstruction_residual(&bands, total));
        }
    }
    outcome(
        worst < 1e-6,
        format!("max |sum_d C~d - C| = {worst:.1e} over 200 models x 6 partitions"),
    )
}

fn hand_models() -> Vec<VarModel> {
    let m = |phi: Vec<&[&[f64]]>, sigma: &[&[f64]]| {
        let k = sigma.len();
        VarModel::new(
            None,
            phi.into_iter().map(from_rows).collect(),
            from_rows(sigma),
            VarModel::default_names(k),
        )
        .unwrap()
    };
    let i2: &[&[f64]] = &[&[1.0, 0.0], &[0.0, 1.0]];
    let c2: &[&[f64]] = &[&[1.0, 0.5], &[0.5, 1.0]];
    let s2: &[&[f64]] = &[&[2.0, -0.3], &[-0.3, 0.5]];
    let c3: &[&[f64]] = &[&[1.0, 0.3, 0.2], &[0.3, 1.0, 0.4], &[0.2, 0.4, 1.0]];
    let s3: &[&[f64]] = &[&[0.5, 0.0, 0.1], &[0.0, 2.0, -0.5], &[0.1, -0.5, 1.5]];
    let z2: &[&[f64]] = &[&[0.0, 0.0], &[0.0, 0.0]];
    vec![
        m(vec![z2], c2),
        m(vec![&[&[0.5, 0.2], &[0.1, 0.5]]], i2),
        m(vec![&[&[0.5, 0.2], &[0.1, 0.5]]], c2),
        m(vec![&[&[0.9, 0.0], &[0.0, 0.2]]], c2),
        m(vec![&[&[0.0, 0.8], &[0.0, 0.0]]], i2),
        m(vec![&[&[-0.6, 0.3], &[0.2, 0.4]]], s2),
        m(vec![&[&[0.3, -0.4], &[0.4, 0.3]]], s2),
        m(vec![&[&[0.7, 0.1], &[-0.2, 0.6]]], c2),
        m(vec![&[&[0.4, 0.1], &[0.1, 0.3]], &[&[0.2, 0.0], &[0.0, 0.2]]], i2),
        m(vec![&[&[0.5, 0.3], &[0.0, 0.4]], &[&[-0.2, 0.1], &[0.1, -0.1]]], c2),
        m(vec![&[&[1.2, 0.0], &[0.0, 0.5]], &[&[-0.4, 0.0], &[0.0, 0.2]]], s2),
        m(vec![&[&[0.1, 0.5], &[0.5, 0.1]], &[&[0.3, -0.2], &[-0.2, 0.3]]], c2),
        m(vec![&[&[0.5, 0.1, 0.0], &[0.1, 0.5, 0.1], &[0.0, 0.1, 0.5]]], c3),
        m(vec![&[&[0.2, 0.3, 0.1], &[0.0, 0.4, 0.2], &[0.1, 0.0, 0.6]]], s3),
        m(vec![&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]], c3),
        m(vec![&[&[0.8, 0.0, 0.0], &[0.0, -0.5, 0.0], &[0.0, 0.0, 0.3]]], c3),
        m(vec![&[&[0.0, 0.6, 0.0], &[0.0, 0.0, 0.6], &[0.6, 0.0, 0.0]]], s3),
        m(
            vec![
                &[&[0.4, 0.2, 0.0], &[0.1, 0.3, 0.1], &[0.0, 0.2, 0.4]],
                &[&[0.1, 0.0, 0.05], &[0.0, 0.1, 0.0], &[0.05, 0.0, 0.1]],
            ],
            c3,
        ),
        m(
            vec![
                &[&[0.6, -0.1, 0.2], &[0.2, 0.5, 0.0], &[-0.1, 0.1, 0.4]],
                &[&[-0.2, 0.0, 0.0], &[0.0, 0.1, 0.1], &[0.0, 0.0, -0.1]],
            ],
            s3,
        ),
        m(
            vec![
                &[&[0.3, 0.1, 0.1], &[0.1, 0.3, 0.1], &[0.1, 0.1, 0.3]],
                &[&[0.1, 0.1, 0.0], &[0.0, 0.1, 0.1], &[0.1, 0.0, 0.1]],
            ],
            c3,
        ),
    ]
}

fn oracle_equivalence() -> Outcome {
    let models = hand_models();
    let mut worst: f64 = 0.0;
    for model in &models {
        let seq = wold(model, 100).unwrap();
        let grid = spectral_gfevd(model, &seq, 512).unwrap();
        let integrated = grid.unconditional_table().unwrap();
        let oracle = oracle_gfevd(&model_phi(model), &to_mat(model.sigma()), 100);
        worst = worst.max(max_abs_diff(&oracle, &integrated.theta));
    }
    // The worked 2x2 white-noise case, standardized row (0.8, 0.2).
    let seq = wold(&models[0], 100).unwrap();
    let theta = spectral_gfevd(&models[0], &seq, 512).unwrap().unconditional_table().unwrap().theta;
    let worked = (theta[(0, 0)] - 0.8).abs().max((theta[(0, 1)] - 0.2).abs());
    outcome(
        models.len() == 20 && worst < 1e-6 && worked < 1e-12,
        format!(
            "max |integrated - direct summation| = {worst:.1e} over {} models; worked row off by {worked:.1e}",
            models.len()
        ),
    )
}

fn zero_connectedness() -> Outcome {
    let models = [
        VarModel::new(
            None,
            vec![from_rows(&[&[0.7, 0.0], &[0.0, -0.4]])],
            from_rows(&[&[2.0, 0.0], &[0.0, 0.5]]),
            VarModel::default_names(2),
        )
        .unwrap(),
        VarModel::new(
            None,
            vec![
                DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.9, -0.3])),
                DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, -0.1, 0.1])),
            ],
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.3, 4.0])),
            VarModel::default_names(3),
        )
        .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut partitions = vec![parse_bands("1:5,5:inf").unwrap()];
    partitions.extend((0..3).map(|_| random_partition(&mut rng)));
    let mut worst: f64 = 0.0;
    for model in &models {
        let seq = wold(model, 100).unwrap();
        let dy = dy_measures(&gfevd(model, &seq, 100).unwrap());
        worst = worst
            .max(dy.total.abs())
            .max(dy.from_others.abs().max())
            .max(dy.to_others.abs().max())
            .max(dy.net.abs().max())
            .max(dy.pairwise.abs().max());
        let grid = spectral_gfevd(model, &seq, 512).unwrap();
        for partition in &partitions {
            for band in partition {
                let b = band_measures(&grid, band).unwrap();
                worst = worst.max(b.absolute_total.abs()).max(b.absolute_from.abs().max()).max(b.absolute_to.abs().max());
                if let Some(w) = &b.within {
                    worst = worst
                        .max(w.total.abs())
                        .max(w.from_others.abs().max())
                        .max(w.to_others.abs().max())
                        .max(w.net.abs().max())
                        .max(w.pairwise.abs().max());
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("largest measure magnitude {worst:.1e}"))
}

fn flat_spectrum() -> Outcome {
    let sigmas = [
        from_rows(&[&[1.0, 0.5], &[0.5, 1.0]]),
        from_rows(&[&[2.0, -0.7], &[-0.7, 0.5]]),
        from_rows(&[&[1.0, 0.3, 0.2], &[0.3, 1.0, 0.4], &[0.2, 0.4, 1.0]]),
        DMatrix::identity(4, 4),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut partitions = vec![parse_bands("1:5,5:inf").unwrap()];
    partitions.extend((0..3).map(|_| random_partition(&mut rng)));
    let mut worst: f64 = 0.0;
    for sigma in &sigmas {
        let k = sigma.nrows();
        let model = VarModel::new(None, vec![DMatrix::zeros(k, k)], sigma.clone(), VarModel::default_names(k)).unwrap();
        let seq = wold(&model, 100).unwrap();
        let grid = spectral_gfevd(&model, &seq, 512).unwrap();
        let unconditional = band_table(&grid, &BandSpec::full()).unwrap().standardized;
        for partition in &partitions {
            for band in partition {
                let b = band_measures(&grid, band).unwrap();
                let share = b.grid_points as f64 / grid.n_freq() as f64;
                worst = worst.max((b.gamma - share).abs());
                worst = worst.max((b.within_table.as_ref().unwrap() - &unconditional).abs().max());
            }
        }
    }
    outcome(
        worst < 1e-12,
        format!("max deviation {worst:.1e} (within table vs unconditional, gamma vs grid share)"),
    )
}

fn recovery_model() -> VarModel {
    VarModel::new(
        Some(DVector::from_vec(vec![0.1, -0.2, 0.05])),
        vec![
            from_rows(&[&[0.4, 0.2, 0.0], &[0.1, 0.3, 0.1], &[0.0, 0.2, 0.4]]),
            from_rows(&[&[0.1, 0.0, 0.05], &[0.0, 0.1, 0.0], &[0.05, 0.0, 0.1]]),
        ],
        from_rows(&[&[1.0, 0.3, 0.2], &[0.3, 1.0, 0.3], &[0.2, 0.3, 1.0]]),
        VarModel::default_names(3),
    )
    .unwrap()
}

fn true_total(model: &VarModel) -> f64 {
    let seq = wold(model, 100).unwrap();
    dy_measures(&gfevd(model, &seq, 100).unwrap()).total
}

fn estimation_recovery() -> Outcome {
    let truth = recovery_model();
    let panel = synth_var_panel(&truth, 100_000, 6).unwrap();
    let fit = fit_var(&panel, 2, true).unwrap();
    let coef = fit
        .phi()
        .iter()
        .zip(truth.phi())
        .map(|(a, b)| (a - b).abs().max())
        .fold(0.0, f64::max);
    let total = (true_total(&fit) - true_total(&truth)).abs();
    outcome(
        coef < 0.02 && total < 0.01,
        format!("max coefficient error {coef:.4}, total connectedness error {total:.4}"),
    )
}

fn bootstrap_coverage() -> Outcome {
    let truth_model = recovery_model();
    let truth = true_total(&truth_model);
    let spec = MeasureSpec::total_only(100);
    let trials = 200;
    let mut covered = 0;
    let mut failures = 0;
    for trial in 0..trials {
        let panel = synth_var_panel(&truth_model, 500, 10_000 + trial).unwrap();
        let fitted = fit_var(&panel, 2, true).unwrap();
        let cfg = BootstrapConfig {
            replications: 300,
            significance: 0.10,
            seed: trial,
            execution: Execution::Parallel,
        };
        match bootstrap_bands(&fitted, 500, &spec, &cfg) {
            Ok(bands) => {
                let (lo, hi) = (bands.lower[0].unwrap(), bands.upper[0].unwrap());
                if lo <= truth && truth <= hi {
                    covered += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let rate = covered as f64 / trials as f64;
    outcome(
        rate >= 0.80,
        format!("true total inside the 5-95% band in {covered}/{trials} panels ({:.1}%), {failures} bootstrap failures", 100.0 * rate),
    )
}

fn bpv_correctness() -> Outcome {
    let (n, c) = (78, 0.004);
    let constant = bipower_variation(&vec![c; n]).unwrap();
    let exact = PI / 2.0 * (n - 1) as f64 * c * c;
    // Exact up to rounding: naive summation of n - 1 equal terms is within
    // (n - 1) ulps of the closed form.
    let constant_rel = (constant - exact).abs() / exact;
    let constant_ok = constant_rel <= (n - 1) as f64 * f64::EPSILON;
    let mut jump = vec![0.0; n];
    jump[30] = 0.25;
    let jump_ok = bipower_variation(&jump).unwrap() == 0.0;

    let sigma = 0.001;
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let days = 10_000;
    let mean = (0..days)
        .map(|_| {
            let r: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            bipower_variation(&r).unwrap()
        })
        .sum::<f64>()
        / days as f64;
    let rel = mean / ((n - 1) as f64 * sigma * sigma) - 1.0;
    outcome(
        constant_ok && jump_ok && rel.abs() < 0.01,
        format!("constant day relative error {constant_rel:.1e}, isolated jump gives 0: {jump_ok}, Monte Carlo relative error {rel:+.4}"),
    )
}

fn throughput() -> Outcome {
    let panel = synth_var_panel(&recovery_model(), 6499, 9).unwrap();
    let cfg = RollingConfig {
        p: 2,
        include_intercept: true,
        window: 500,
        step: 1,
        spec: MeasureSpec {
            bands: parse_bands("1:5,5:inf").unwrap(),
            n_freq: 512,
            ..MeasureSpec::default()
        },
        bootstrap: None,
        execution: Execution::Parallel,
    };
    let _ = SpectralBasis::new(512, 100).unwrap();
    let start = Instant::now();
    let result = rolling_connectedness(&panel, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        result.n_windows() == 6000 && elapsed < 60.0,
        format!(
            "{} windows in {elapsed:.2} s on {} thread(s)",
            result.n_windows(),
            std::thread::available_parallelism().map_or(1, |n| n.get())
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_spillover"))
        .current_dir(dir)
        .env_remove("SPILLOVER_OUT")
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn write_ticks(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let shock = Normal::new(0.0, 0.001).unwrap();
    for (symbol, start) in [("CL", 60.0), ("HO", 1.9)] {
        let mut price: f64 = start;
        let mut text = String::from("timestamp,price\n");
        for day in 1..=14u32 {
            let mut seconds = 0u32;
            while seconds < 86_000 {
                seconds += rng.random_range(30..400);
                price *= f64::exp(shock.sample(&mut rng));
                text.push_str(&format!(
                    "2021-06-{day:02}T{:02}:{:02}:{:02}Z,{price:.6}\n",
                    (seconds / 3600).min(23),
                    (seconds / 60) % 60,
                    seconds % 60
                ));
                if seconds / 3600 >= 23 {
                    break;
                }
            }
        }
        fs::write(dir.join(format!("{symbol}.csv")), text).unwrap();
    }
}

fn cli_determinism() -> Outcome {
    // Two identical working directories, so every output including the
    // echoed config can be compared byte for byte.
    let tmp = tempfile::TempDir::new().unwrap();
    let runs = [tmp.path().join("a"), tmp.path().join("b")];
    for dir in &runs {
        fs::create_dir(dir).unwrap();
        write_ticks(dir);
        fs::write(
            dir.join("run.toml"),
            "seed = 11\n[synth]\nlength = 700\n[rolling]\nwindow = 600\nstep = 25\n[bootstrap]\nreplications = 100\n",
        )
        .unwrap();
    }
    let commands: [(&str, &[&str]); 5] = [
        ("rv", &["rv", "CL.csv", "HO.csv"]),
        ("synth", &["synth"]),
        ("fit", &["fit", "synth/panel.csv"]),
        ("connect", &["connect", "synth/panel.csv"]),
        ("roll", &["roll", "synth/panel.csv"]),
    ];
    let mut mismatches = Vec::new();
    let mut files = 0;
    for (name, args) in commands {
        for dir in &runs {
            let mut full = args.to_vec();
            full.extend(["--config", "run.toml", "--out", name]);
            if !run_cli(dir, &full) {
                return outcome(false, format!("`{name}` failed in {}", dir.display()));
            }
        }
        let mut entries: Vec<_> = fs::read_dir(runs[0].join(name)).unwrap().map(|e| e.unwrap().file_name()).collect();
        entries.sort();
        for file in entries {
            files += 1;
            let left = fs::read(runs[0].join(name).join(&file)).unwrap();
            let right = fs::read(runs[1].join(name).join(&file)).unwrap_or_default();
            if left != right {
                mismatches.push(format!("{name}/{}", file.to_string_lossy()));
            }
        }
    }
    outcome(
        mismatches.is_empty() && files >= 20,
        format!("{files} output files compared across 5 commands; mismatches: {mismatches:?}"),
    )
}
