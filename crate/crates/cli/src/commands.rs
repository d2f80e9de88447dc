use std::fs;
use std::path::Path;

use kagome_core::circuit::{escape_rate, hopping_rate, resonator_frequency, width_disorder_curve};
use kagome_core::disorder::{
    estimate_sigma_high_t, estimate_sigma_low_t, kagome_ideal, mode_histogram, DisorderModel, HistogramGrid,
    LowTOptions,
};
use kagome_core::formats::{
    curve_csv, eigenvector_csv, histogram_csv, parse_peak_sets_csv, trace_csv, EstimateJson, ModeSpectrumJson,
    PeakListJson,
};
use kagome_core::rng::derive_seed;
use kagome_core::spectrum::diagonalize;
use kagome_core::transmission::{find_peaks, synthesize_for_graph, FrequencyGrid, PeakSearch, SynthesisOptions};
use kagome_core::units::{hz_to_rad, rad_to_hz};
use kagome_core::{CouplingGraph, DisorderError, EstimatorMethod, HamiltonianSpec};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::plot::{self, Panel};

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

/// Site shifts for a single realization: explicit list or a draw.
fn single_deltas(cfg: &RunConfig, n: usize) -> Result<Vec<f64>, CliError> {
    match &cfg.deltas_hz {
        Some(d) if d.len() != n => Err(CliError::Config(format!("deltas_hz has {} entries for {n} sites", d.len()))),
        Some(d) => Ok(d.iter().map(|x| hz_to_rad(*x)).collect()),
        None => {
            let model = DisorderModel::new(hz_to_rad(cfg.sigma_hz), cfg.seed, 1);
            model.validate(n)?;
            Ok(model.sample(cfg.realization, n))
        }
    }
}

fn single_spec<'g>(cfg: &RunConfig, graph: &'g CouplingGraph) -> Result<HamiltonianSpec<'g>, CliError> {
    let deltas = single_deltas(cfg, graph.n_sites())?;
    let spec = HamiltonianSpec::new(graph, hz_to_rad(cfg.omega_r_hz), hz_to_rad(cfg.t_hz))
        .with_deltas(deltas)
        .with_edge_shift(hz_to_rad(cfg.edge_shift_hz));
    spec.validate()?;
    Ok(spec)
}

pub fn modes(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let graph = cfg.graph.load()?;
    let spec = single_spec(cfg, &graph)?;
    let s = diagonalize(&spec, None)?;
    write_json(&out.join("modes.json"), &ModeSpectrumJson::new(&s, cfg.sensitivities))?;
    if cfg.eigenvectors {
        write(&out.join("eigenvectors.csv"), &eigenvector_csv(&s))?;
    }
    eprintln!("{} modes, {} distinct", s.n_modes(), s.n_distinct());
    Ok(())
}

#[derive(Serialize)]
struct GaussianJson {
    #[serde(rename = "center_Hz")]
    center_hz: f64,
    #[serde(rename = "width_Hz")]
    width_hz: f64,
}

#[derive(Serialize)]
struct HistogramSummary {
    sigma_over_t: f64,
    #[serde(rename = "sigma_Hz")]
    sigma_hz: f64,
    file: String,
    n_realizations: usize,
    underflow: u64,
    overflow: u64,
    #[serde(rename = "mean_Hz")]
    mean_hz: f64,
    #[serde(rename = "std_Hz")]
    std_hz: f64,
    gaussian_fit: Option<GaussianJson>,
    #[serde(rename = "maxima_Hz")]
    maxima_hz: Vec<f64>,
}

pub fn histogram(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    if cfg.sigmas_over_t.is_empty() {
        return Err(CliError::Config("sigmas_over_t is empty".into()));
    }
    if cfg.sigmas_over_t.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(CliError::Config("sigmas_over_t must be >= 0".into()));
    }
    if !(cfg.t_hz > 0.0) {
        return Err(CliError::Config("histogram needs t_hz > 0".into()));
    }
    let graph = cfg.graph.load()?;
    let (w, t) = (hz_to_rad(cfg.omega_r_hz), hz_to_rad(cfg.t_hz));
    let mut summary = Vec::new();
    let mut panels = Vec::new();
    for (k, &ratio) in cfg.sigmas_over_t.iter().enumerate() {
        let sigma = ratio * t;
        let model = DisorderModel::new(sigma, derive_seed(cfg.seed, k as u64), cfg.realizations);
        let grid = HistogramGrid { n_bins: cfg.bins, ..HistogramGrid::default_for(w, t, sigma) };
        let h = mode_histogram(&graph, w, t, &model, &grid)?;
        let file = format!("histogram_{ratio}t.csv");
        write(&out.join(&file), &histogram_csv(&h))?;
        summary.push(HistogramSummary {
            sigma_over_t: ratio,
            sigma_hz: rad_to_hz(sigma),
            file,
            n_realizations: h.n_realizations,
            underflow: h.underflow,
            overflow: h.overflow,
            mean_hz: rad_to_hz(h.mean_frequency()),
            std_hz: rad_to_hz(h.frequency_std()),
            gaussian_fit: h
                .fit_gaussian()
                .map(|g| GaussianJson { center_hz: rad_to_hz(g.center), width_hz: rad_to_hz(g.width) }),
            maxima_hz: h.resolved_maxima(0.1, 0.02).into_iter().map(rad_to_hz).collect(),
        });
        panels.push(Panel {
            label: format!("sigma = {ratio} t"),
            x: h.bin_centers().iter().map(|c| (c - w) / t).collect(),
            y: h.normalized.clone(),
            markers: Vec::new(),
        });
        eprintln!("sigma = {ratio} t: {} modes binned", h.total());
    }
    write_json(&out.join("histogram.json"), &summary)?;
    let svg = plot::panels(
        &format!("Normal-mode histogram, {} realizations", cfg.realizations),
        "(omega - omega_r) / t",
        "N(omega), normalized",
        &panels,
    );
    write(&out.join("histogram.svg"), &svg)
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let graph = cfg.graph.load()?;
    let spec = single_spec(cfg, &graph)?;
    let s = diagonalize(&spec, None)?;
    let kappa = hz_to_rad(cfg.kappa_hz);
    let grid = FrequencyGrid::around(&s, 5.0 * kappa, cfg.grid_points);
    let opts = SynthesisOptions { kappa_int: cfg.kappa_int_hz.map(hz_to_rad) };
    let trace = synthesize_for_graph(&s, &graph, kappa, &grid, &opts)?;
    let mut search = PeakSearch::for_trace(&trace);
    if let Some(p) = cfg.prominence {
        search.prominence = p;
    }
    if let Some(sep) = cfg.min_separation_hz {
        search.min_separation = hz_to_rad(sep);
    }
    let peaks = find_peaks(&trace, &search);

    write(&out.join("trace.csv"), &trace_csv(&trace))?;
    write_json(&out.join("peaks.json"), &PeakListJson::new(&peaks))?;
    write_json(&out.join("modes.json"), &ModeSpectrumJson::new(&s, false))?;

    let w = s.omega_r();
    let db = |m: f64| 20.0 * m.max(1e-12).log10();
    let panel = Panel {
        label: format!("{} peaks", peaks.len()),
        x: trace.omega.iter().map(|x| rad_to_hz(x - w) / 1e6).collect(),
        y: trace.magnitude.iter().map(|m| db(*m)).collect(),
        markers: peaks.peaks.iter().map(|p| (rad_to_hz(p.omega - w) / 1e6, db(p.height))).collect(),
    };
    let svg = plot::panels("Synthetic transmission", "(f - f_r) / MHz", "|S21| / dB", &[panel]);
    write(&out.join("trace.svg"), &svg)?;
    eprintln!("{} modes, {} peaks", s.n_modes(), peaks.len());
    Ok(())
}

pub fn estimate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    if cfg.peaks.is_empty() {
        return Err(CliError::Config("no peak files given".into()));
    }
    let mut sets = Vec::new();
    for path in &cfg.peaks {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let parsed = parse_peak_sets_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        sets.extend(parsed);
    }
    let t = hz_to_rad(cfg.t_hz);
    let result = match cfg.method {
        EstimatorMethod::LowT => {
            let opts = LowTOptions { min_peaks: cfg.min_peaks, strict: cfg.strict };
            estimate_sigma_low_t(&sets, t, &opts)
        }
        EstimatorMethod::HighT => estimate_sigma_high_t(&sets, &kagome_ideal(t)?),
    };
    let path = out.join("estimate.json");
    match result {
        Ok(e) => {
            let json = EstimateJson::new(&e, Some(t));
            write_json(&path, &json)?;
            eprintln!("sigma_hat = {} Hz (+- {} Hz) from {} devices", json.sigma_hat_hz, json.std_error_hz, e.n_devices);
            Ok(())
        }
        Err(DisorderError::NonPhysical(e)) => {
            write_json(&path, &EstimateJson::new(&e, Some(t)))?;
            Err(CliError::NonPhysical(format!(
                "negative excess variance ({} Hz^2); sigma_hat reported as 0",
                e.raw_variance / (std::f64::consts::TAU * std::f64::consts::TAU)
            )))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct ParamsReport {
    #[serde(rename = "omega_r_Hz")]
    omega_r_hz: f64,
    #[serde(rename = "t_Hz", skip_serializing_if = "Option::is_none")]
    t_hz: Option<f64>,
    #[serde(rename = "kappa_Hz", skip_serializing_if = "Option::is_none")]
    kappa_hz: Option<f64>,
    /// Frequency from the configured inductances and capacitance.
    #[serde(rename = "omega_lc_Hz", skip_serializing_if = "Option::is_none")]
    omega_lc_hz: Option<f64>,
    kinetic_inductance_large: bool,
}

pub fn params(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let p = &cfg.device;
    p.validate()?;
    let report = ParamsReport {
        omega_r_hz: rad_to_hz(p.omega_r),
        t_hz: (p.c_couple > 0.0 && p.omega_r > 0.0).then(|| rad_to_hz(hopping_rate(p, 0.0, 0.0))),
        kappa_hz: (p.c_out > 0.0 && p.omega_r > 0.0).then(|| rad_to_hz(escape_rate(p))),
        omega_lc_hz: resonator_frequency(p).ok().map(rad_to_hz),
        kinetic_inductance_large: p.kinetic_inductance_large(),
    };
    println!("omega_r/2pi = {} Hz", report.omega_r_hz);
    for (name, v) in [("t/2pi", report.t_hz), ("kappa/2pi", report.kappa_hz), ("omega_LC/2pi", report.omega_lc_hz)] {
        match v {
            Some(v) => println!("{name} = {v} Hz"),
            None => println!("{name} = (not configured)"),
        }
    }
    write_json(&out.join("params.json"), &report)?;
    match &cfg.inductance {
        Some(model) => {
            let curve = width_disorder_curve(Some(model), &cfg.widths_m, cfg.dw_m, cfg.dgap_m, p)?;
            write(&out.join("width_curve.csv"), &curve_csv(&curve))?;
        }
        None => eprintln!("no inductance model configured; width-disorder curve skipped"),
    }
    Ok(())
}
