//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use kagome_core::disorder::{
    estimate_sigma_high_t, estimate_sigma_low_t, kagome_ideal, mode_histogram, synthetic_peak_sets, DisorderError,
    DisorderModel, HistogramGrid, LowTOptions,
};
use kagome_core::formats::peak_sets_csv;
use kagome_core::spectrum::{degenerate_pair_supports, diagonalize, eigenfrequencies, sensitivities};
use kagome_core::topology::build_kagome_star;
use kagome_core::transmission::{round_trip_sigma, RoundTripParams};
use kagome_core::units::{ghz, mhz};
use kagome_core::{EstimatorMethod, HamiltonianSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ideal_exactness() -> Outcome {
    let g = build_kagome_star();
    let t = mhz(31.0);
    let s = diagonalize(&HamiltonianSpec::new(&g, ghz(7.0), t), None).unwrap();
    let f = s.frequencies();
    let span = f[11] - f[0];
    let var = s.frequency_variance();
    let sizes = s.group_sizes();
    let doublets = sizes.iter().filter(|&&n| n == 2).count();
    let span_err = rel(span, (3.0 + 5f64.sqrt()) * t);
    let var_err = rel(var, 3.0 * t * t);
    outcome(
        sizes.len() == 8 && doublets == 4 && span_err < 1e-9 && var_err < 1e-9,
        format!("{} distinct, {doublets} doublets, span rel err {span_err:.1e}, variance rel err {var_err:.1e}", sizes.len()),
    )
}

fn flat_band() -> Outcome {
    let g = build_kagome_star();
    let spec = HamiltonianSpec::new(&g, 0.0, 1.0);
    let s = diagonalize(&spec, None).unwrap();
    let outer = (6..12).map(|i| s.vectors()[0][i].abs()).fold(0.0, f64::max);
    let sens = sensitivities(&spec, &s).unwrap();
    let inner = (0..6).map(|i| (sens[0][i] - 1.0 / 6.0).abs()).fold(0.0, f64::max);
    outcome(outer < 1e-10 && inner < 1e-10, format!("max outer amplitude {outer:.1e}, max |S - 1/6| {inner:.1e}"))
}

fn histograms() -> Outcome {
    let g = build_kagome_star();
    let t = 1.0;
    let n = 100_000;
    let wide = mode_histogram(&g, 0.0, t, &DisorderModel::new(10.0 * t, 1, n), &HistogramGrid::default_for(0.0, t, 10.0 * t))
        .unwrap();
    let fit_err = wide.fit_gaussian().map(|f| rel(f.width, 10.0 * t)).unwrap_or(f64::INFINITY);
    let narrow =
        mode_histogram(&g, 0.0, t, &DisorderModel::new(0.1 * t, 2, n), &HistogramGrid::default_for(0.0, t, 0.1 * t))
            .unwrap();
    let ideal = kagome_ideal(t).unwrap();
    let maxima: Vec<f64> = narrow
        .resolved_maxima(0.1, 0.02)
        .into_iter()
        .filter(|m| ideal.frequencies().iter().any(|w| (m - w).abs() < 0.1 * t))
        .collect();
    outcome(
        fit_err < 0.05 && maxima.len() >= 8,
        format!("10t width rel err {fit_err:.3}, 0.1t resolved maxima {}", maxima.len()),
    )
}

fn fraction_within(sigma: f64, t: f64, n_devices: usize, tol: f64, trials: usize, high: bool, seed: u64) -> f64 {
    let g = build_kagome_star();
    let ideal = kagome_ideal(t).unwrap();
    let model = DisorderModel::new(sigma, seed, 1);
    let mut hits = 0;
    for trial in 0..trials {
        let sets = synthetic_peak_sets(&g, ghz(7.0), t, &model, (trial * n_devices) as u64, n_devices).unwrap();
        let est = if high {
            estimate_sigma_high_t(&sets, &ideal).map(|e| e.sigma_hat)
        } else {
            match estimate_sigma_low_t(&sets, t, &LowTOptions::default()) {
                Ok(e) => Ok(e.sigma_hat),
                Err(DisorderError::NonPhysical(e)) => Ok(e.sigma_hat),
                Err(e) => Err(e),
            }
        };
        if est.is_ok_and(|s| (s - sigma).abs() <= tol) {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}

fn low_t_round_trip() -> Outcome {
    let t = mhz(0.8);
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (sigma, tol, n_dev)) in [(9.1, 2.8, 13), (3.9, 1.2, 4), (1.4, 0.8, 4)].into_iter().enumerate() {
        let f = fraction_within(mhz(sigma), t, n_dev, mhz(tol), 200, false, 100 + k as u64);
        pass &= f >= 0.8;
        parts.push(format!("{sigma} MHz: {f:.3}"));
    }
    outcome(pass, parts.join(", "))
}

fn high_t_round_trip() -> Outcome {
    let f = fraction_within(mhz(1.1), mhz(31.0), 4, mhz(0.6), 200, true, 200);
    outcome(f >= 0.8, format!("within 0.6 MHz: {f:.3}"))
}

fn sensitivity_check() -> Outcome {
    let g = build_kagome_star();
    let t = 1.0;
    let h = 1e-6 * t;
    let model = DisorderModel::new(0.3 * t, 300, 1);
    let (mut worst, mut worst_row, mut skipped) = (0.0f64, 0.0f64, 0);
    for r in 0..100 {
        let deltas = model.sample(r, 12);
        let spec = HamiltonianSpec::new(&g, 0.0, t).with_deltas(deltas.clone());
        let s = diagonalize(&spec, None).unwrap();
        let sens = sensitivities(&spec, &s).unwrap();
        let f = s.frequencies();
        for row in &sens {
            worst_row = worst_row.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        let shifted = |i: usize, by: f64| {
            let mut d = deltas.clone();
            d[i] += by;
            eigenfrequencies(&spec.clone().with_deltas(d)).unwrap()
        };
        let fd: Vec<(Vec<f64>, Vec<f64>)> = (0..12).map(|i| (shifted(i, h), shifted(i, -h))).collect();
        for j in 0..12usize {
            let gap = [j.checked_sub(1), (j + 1 < 12).then_some(j + 1)]
                .into_iter()
                .flatten()
                .map(|k| (f[k] - f[j]).abs())
                .fold(f64::INFINITY, f64::min);
            if gap < 1e-6 * t {
                skipped += 1;
                continue;
            }
            for (i, (up, dn)) in fd.iter().enumerate() {
                worst = worst.max(((up[j] - dn[j]) / (2.0 * h) - sens[j][i]).abs());
            }
        }
    }
    outcome(
        worst < 1e-5 && worst_row < 1e-9,
        format!("max |HF - FD| {worst:.1e}, max |row sum - 1| {worst_row:.1e}, degenerate modes skipped {skipped}"),
    )
}

fn doublet_disjointness() -> Outcome {
    let g = build_kagome_star();
    let s = diagonalize(&HamiltonianSpec::new(&g, 0.0, 1.0), None).unwrap();
    let d = degenerate_pair_supports(&s).unwrap();
    let disjoint = d.iter().filter(|x| x.is_disjoint()).count();
    let overlaps: Vec<String> = d.iter().map(|x| format!("{:.3}", x.max_overlap)).collect();
    outcome(
        d.len() == 4 && disjoint == 4,
        format!("{disjoint}/{} doublets disjoint, min max-overlap per doublet [{}]", d.len(), overlaps.join(", ")),
    )
}

fn pipeline() -> Outcome {
    let mut p = RoundTripParams::new(mhz(31.0), mhz(1.1), mhz(0.05), 400, EstimatorMethod::HighT);
    p.omega_r = ghz(7.0);
    p.seed = 800;
    let r = round_trip_sigma(&p).unwrap();
    let n = r.devices.len() as f64;
    let twelve = r.devices.iter().filter(|d| d.n_peaks == 12).count() as f64 / n;
    let flat = r.devices.iter().filter(|d| d.flat_band_smallest).count() as f64 / n;
    outcome(twelve >= 0.95 && flat >= 0.95, format!("12 peaks {twelve:.3}, flat band smallest {flat:.3} of {n} devices"))
}

fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn kagome(args: &[&str], cwd: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_kagome")).args(args).current_dir(cwd).output().unwrap().status.success()
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let root = dir.path();
    let t = mhz(0.8);
    let sets = synthetic_peak_sets(&build_kagome_star(), ghz(7.0), t, &DisorderModel::new(mhz(3.9), 9, 1), 0, 4).unwrap();
    fs::write(root.join("peaks.csv"), peak_sets_csv(&sets)).unwrap();

    let runs: [&[&str]; 5] = [
        &["modes", "--sigma-hz", "2e6", "--seed", "3"],
        &["histogram", "--realizations", "20000", "--seed", "4"],
        &["spectrum", "--sigma-hz", "1.1e6", "--seed", "5"],
        &["estimate", "--peaks", "peaks.csv", "--t-hz", "0.8e6"],
        &["params"],
    ];
    let mut bad = Vec::new();
    for args in runs {
        let name = args[0];
        let first = format!("{name}_a");
        let again = format!("{name}_b");
        let mut a: Vec<&str> = args.to_vec();
        a.extend(["--threads", "1", "--out", &first]);
        let manifest = root.join(&first).join("manifest.json");
        let manifest = manifest.to_string_lossy();
        let ok = kagome(&a, root)
            && kagome(&[name, "--config", &manifest, "--threads", "4", "--out", &again], root)
            && outputs(&root.join(&first)) == outputs(&root.join(&again));
        if !ok {
            bad.push(name);
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "5/5 commands identical".into() } else { format!("differs: {bad:?}") })
}

fn main() -> ExitCode {
    let checks: [(u32, fn() -> Outcome, Option<Duration>); 9] = [
        (1, ideal_exactness, Some(Duration::from_secs(1))),
        (2, flat_band, Some(Duration::from_secs(1))),
        (3, histograms, Some(Duration::from_secs(60))),
        (4, low_t_round_trip, Some(Duration::from_secs(60))),
        (5, high_t_round_trip, Some(Duration::from_secs(60))),
        (6, sensitivity_check, None),
        (7, doublet_disjointness, None),
        (8, pipeline, None),
        (9, determinism, None),
    ];
    let mut failed = 0;
    for (n, check, budget) in checks {
        let start = Instant::now();
        let mut o = check();
        let elapsed = start.elapsed();
        if let Some(b) = budget {
            if elapsed > b {
                o.pass = false;
                o.detail.push_str(&format!(", over {}s budget", b.as_secs()));
            }
        }
        failed += usize::from(!o.pass);
        println!("criterion {n}: {} {} ({:.2}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
