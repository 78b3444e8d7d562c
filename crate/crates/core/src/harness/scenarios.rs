//! One function per scenario. Each builds its physics objects from the
//! config, runs, and returns tables; nothing touches the filesystem except
//! the optional trade-off input of `fit`.

use serde::Deserialize;

use super::config::{PriorKind, Quantity, RunConfig, Scenario};
use super::{as_config, ConfigError, Job, RunError, Table};
use crate::field::{ensemble_density, sample_ensemble_with, unselected_density, AtomEnsemble, CavityGeometry, CouplingDensity};
use crate::optomech::{
    fit_quadratic, position_scan, radial_breathing, remove_radial, suppression_ratio, toggle_density,
    toggle_experiment, RadialOptions, ToggleResult, ToggleScenario,
};
use crate::selection::{run_sequence, select_density_with_floor, PulseSpec, SelectionSequence, StepErrors};
use crate::spectroscopy::{
    detuning_grid, invert_spectrum, simulate_fluorescence_slopes, synthesize_spectrum, FluorescenceModel, Spectrum,
};
use crate::stats::{density_stats, ensemble_stats, fit_power_law_weighted, log_grid, tradeoff_curve, SequenceTemplate, TradeoffPoint};
use crate::units::AngularFrequency;

type Out = Result<Vec<Table>, RunError>;

pub(crate) fn run(job: &Job) -> Out {
    let cfg = &job.config;
    match job.scenario {
        Scenario::Selection => selection(cfg),
        Scenario::Tradeoff => tradeoff(cfg),
        Scenario::Fit => fit(cfg, job),
        Scenario::Spectrum => spectrum(cfg),
        Scenario::Invert => invert(cfg),
        Scenario::Fluorescence => fluorescence(cfg),
        Scenario::OptomechToggle => toggle(cfg),
        Scenario::PositionScan => scan(cfg),
        Scenario::Radial => radial(cfg),
    }
}

fn geometry(cfg: &RunConfig) -> Result<CavityGeometry, RunError> {
    let g = cfg.geometry.resolve();
    g.validate().map_err(as_config)?;
    Ok(g)
}

fn sequence(cfg: &RunConfig, pulses: Option<usize>) -> Result<SelectionSequence, RunError> {
    match pulses {
        Some(n) => cfg.selection.sequence_with(n),
        None => cfg.selection.sequence(),
    }
    .map_err(as_config)
}

fn prior(cfg: &RunConfig, geo: &CavityGeometry) -> Result<CouplingDensity, RunError> {
    Ok(match cfg.ensemble.prior {
        PriorKind::Arcsine => unselected_density(),
        PriorKind::FiniteExtent => {
            ensemble_density(&cfg.ensemble.resolve(), geo, cfg.ensemble.axial_nodes).map_err(as_config)?
        }
    })
}

fn particles(cfg: &RunConfig, geo: &CavityGeometry) -> Result<AtomEnsemble, RunError> {
    sample_ensemble_with(&cfg.ensemble.resolve(), geo, cfg.seed).map_err(as_config)
}

fn select(cfg: &RunConfig, d: &CouplingDensity, seq: &SelectionSequence) -> Result<(CouplingDensity, f64), RunError> {
    Ok(select_density_with_floor(d, seq, cfg.selection.degenerate_floor)?)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn selection(cfg: &RunConfig) -> Out {
    let geo = geometry(cfg)?;
    let seq = sequence(cfg, None)?;

    let ens = particles(cfg, &geo)?;
    let after = run_sequence(&ens, &seq, cfg.seed)?;
    let mut atoms = Table::new("atoms.csv", &["index", "z_m", "eta", "stark_fraction", "retained"]);
    for (i, a) in after.atoms.iter().enumerate() {
        atoms.push([
            i.to_string(),
            a.z.to_string(),
            a.eta.to_string(),
            a.stark.to_string(),
            u8::from(a.is_retained()).to_string(),
        ]);
    }

    let mut stats = Table::new(
        "selection_stats.csv",
        &[
            "pipeline",
            "mean_eta",
            "spread",
            "retained_fraction",
            "n_retained",
            "mean_eta_se",
            "spread_se",
            "retained_fraction_se",
        ],
    );
    let (d, fraction) = select(cfg, &prior(cfg, &geo)?, &seq)?;
    let s = density_stats(&d)?;
    stats.push([
        "density".to_string(),
        s.mean.to_string(),
        s.spread.to_string(),
        fraction.to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
    ]);
    // an emptied sample is a legitimate outcome for tiny ensembles
    if after.retained_count() == 0 {
        stats.push(["particles", "", "", "0", "0", "", "", ""]);
    } else {
        let p = ensemble_stats(&after, cfg.selection.bootstrap_resamples, cfg.seed)?;
        let e = p.errors;
        stats.push([
            "particles".to_string(),
            p.mean.to_string(),
            p.spread.to_string(),
            p.retained_fraction.to_string(),
            p.n_retained.unwrap_or(0).to_string(),
            opt(e.map(|e| e.mean)),
            opt(e.map(|e| e.spread)),
            opt(e.map(|e| e.retained_fraction)),
        ]);
    }
    Ok(vec![atoms, stats])
}

/// Trade-off curves for every configured curve, in config order.
fn curves(cfg: &RunConfig) -> Result<Vec<(String, Vec<TradeoffPoint>)>, RunError> {
    let geo = geometry(cfg)?;
    let p = prior(cfg, &geo)?;
    let t = &cfg.tradeoff;
    let grid = log_grid(t.ratio_min, t.ratio_max, t.points).map_err(as_config)?;
    let errors = StepErrors {
        blow_away_survival: cfg.selection.blow_away_survival,
        repump_loss: cfg.selection.repump_loss,
    };
    t.curves
        .iter()
        .map(|c| {
            let mut tpl = SequenceTemplate::with_multipliers(c.multipliers(), c.eta_c);
            tpl.repump_between = cfg.selection.repump_between;
            tpl.errors = errors;
            Ok((c.label.clone(), tradeoff_curve(&p, &tpl, &grid)?))
        })
        .collect()
}

fn tradeoff(cfg: &RunConfig) -> Out {
    let mut table = Table::new(
        "tradeoff.csv",
        &["curve", "ratio", "retained_fraction", "mean_eta", "one_minus_mean_eta", "spread"],
    );
    for (label, pts) in curves(cfg)? {
        for p in pts {
            table.push([
                label.clone(),
                p.ratio.to_string(),
                p.retained_fraction.to_string(),
                p.mean.to_string(),
                (1.0 - p.mean).to_string(),
                p.spread.to_string(),
            ]);
        }
    }
    let mut out = vec![table];

    if !cfg.tradeoff.window_ratios.is_empty() {
        let stark = cfg.selection.stark();
        let stark = if stark.0 > 0.0 { stark } else { AngularFrequency::from_hz(1.0) };
        let mut w = Table::new("window.csv", &["ratio", "eta", "flip_probability"]);
        for &r in &cfg.tradeoff.window_ratios {
            let pulse = PulseSpec::from_ratio(r, 0.0, stark).map_err(as_config)?;
            for i in 0..=200 {
                let eta = i as f64 / 200.0;
                w.push([r.to_string(), eta.to_string(), pulse.flip_probability(1.0 - eta).to_string()]);
            }
        }
        out.push(w);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct TradeoffRow {
    curve: String,
    ratio: f64,
    retained_fraction: f64,
    mean_eta: f64,
    spread: f64,
}

fn read_tradeoff(job: &Job, path: &str) -> Result<Vec<(String, Vec<TradeoffPoint>)>, RunError> {
    let full = job.base_dir.join(path);
    let bad = |m: String| {
        RunError::Config(ConfigError {
            line: None,
            message: format!("fit.input {}: {m}", full.display()),
        })
    };
    let mut rd = csv::Reader::from_path(&full).map_err(|e| bad(e.to_string()))?;
    let mut groups: Vec<(String, Vec<TradeoffPoint>)> = Vec::new();
    for row in rd.deserialize::<TradeoffRow>() {
        let r = row.map_err(|e| bad(e.to_string()))?;
        let p = TradeoffPoint {
            ratio: r.ratio,
            retained_fraction: r.retained_fraction,
            mean: r.mean_eta,
            spread: r.spread,
        };
        match groups.iter_mut().find(|g| g.0 == r.curve) {
            Some(g) => g.1.push(p),
            None => groups.push((r.curve, vec![p])),
        }
    }
    if groups.is_empty() {
        return Err(bad("no rows".into()));
    }
    Ok(groups)
}

fn fit(cfg: &RunConfig, job: &Job) -> Out {
    let groups = match &cfg.fit.input {
        Some(p) => read_tradeoff(job, p)?,
        None => curves(cfg)?,
    };
    let range = (cfg.fit.range_min, cfg.fit.range_max);
    let mut table = Table::new(
        "fits.csv",
        &["curve", "quantity", "prefactor", "exponent", "range_min", "range_max", "residual_norm", "n_points"],
    );
    for (label, pts) in &groups {
        // fit against N_s/N
        let weights: Vec<f64> = pts.iter().map(|p| p.retained_fraction).collect();
        let w = cfg.fit.weighted.then_some(weights.as_slice());
        for q in &cfg.fit.quantities {
            let xy: Vec<(f64, f64)> = pts
                .iter()
                .map(|p| {
                    let y = match q {
                        Quantity::OneMinusMeanEta => 1.0 - p.mean,
                        Quantity::Spread => p.spread,
                    };
                    (p.retained_fraction, y)
                })
                .collect();
            let f = fit_power_law_weighted(&xy, w, range)?;
            table.push([
                label.clone(),
                q.name().to_string(),
                f.prefactor.to_string(),
                f.exponent.to_string(),
                range.0.to_string(),
                range.1.to_string(),
                f.residual_norm.to_string(),
                f.n_points.to_string(),
            ]);
        }
    }
    Ok(vec![table])
}

fn series_name(n: usize) -> String {
    match n {
        0 => "unselected".into(),
        1 => "1-selection".into(),
        n => format!("{n}-selections"),
    }
}

/// Spectra of the cloud after each configured number of selections, with
/// their true densities.
fn spectra(cfg: &RunConfig) -> Result<Vec<(String, CouplingDensity, Spectrum)>, RunError> {
    let geo = geometry(cfg)?;
    let sp = &cfg.spectrum;
    let stark = cfg.selection.stark();
    if !(stark.0 > 0.0) {
        return Err(RunError::Config(ConfigError {
            line: None,
            message: "selection.stark_hz: spectra need a non-zero Stark shift".into(),
        }));
    }
    let probe = AngularFrequency::from_hz(sp.probe_rabi_hz);
    let grid = detuning_grid(stark, sp.detuning_min, sp.detuning_max, sp.points).map_err(as_config)?;
    let p = prior(cfg, &geo)?;
    let n0 = cfg.ensemble.atoms as f64;
    let mut out = Vec::new();
    for &n in &sp.selections {
        let (d, frac) = if n == 0 {
            (p.clone(), 1.0)
        } else {
            select(cfg, &p, &sequence(cfg, Some(n))?)?
        };
        let s = synthesize_spectrum(&d, probe, stark, &grid, n0 * frac, geo.single_atom_shift()).map_err(as_config)?;
        out.push((series_name(n), d, s));
    }
    if sp.stark_off_reference {
        let s = synthesize_spectrum(&p, probe, AngularFrequency(0.0), &grid, n0, geo.single_atom_shift())
            .map_err(as_config)?;
        out.push(("stark-off".into(), p, s));
    }
    Ok(out)
}

fn spectrum(cfg: &RunConfig) -> Out {
    let mut t = Table::new("spectrum.csv", &["series", "detuning_hz", "eta", "shift_hz"]);
    for (name, _, s) in spectra(cfg)? {
        let stark = cfg.selection.stark();
        for (d, v) in s.detuning.iter().zip(&s.shift) {
            let eta = if s.stark.0 > 0.0 { (1.0 - d.0 / stark.0).to_string() } else { String::new() };
            t.push([name.clone(), d.hz().to_string(), eta, v.hz().to_string()]);
        }
    }
    Ok(vec![t])
}

fn invert(cfg: &RunConfig) -> Out {
    let trunc = (cfg.spectrum.truncation_min, cfg.spectrum.truncation_max);
    let mut dens = Table::new("density.csv", &["series", "eta", "weight", "width"]);
    let mut stats = Table::new(
        "density_stats.csv",
        &["series", "mean_eta", "spread", "peak_eta", "true_mean_eta", "true_spread", "l1_error"],
    );
    for (name, truth, s) in spectra(cfg)? {
        if s.stark.0 == 0.0 {
            continue;
        }
        let d = invert_spectrum(&s, trunc)?;
        for ((e, w), width) in d.eta.iter().zip(&d.weights).zip(&d.widths) {
            dens.push([name.clone(), e.to_string(), w.to_string(), width.to_string()]);
        }
        let ts = density_stats(&truth)?;
        stats.push([
            name,
            d.mean().to_string(),
            d.spread().to_string(),
            d.peak().to_string(),
            ts.mean.to_string(),
            ts.spread.to_string(),
            d.l1_error(|x| truth.cdf(x)).to_string(),
        ]);
    }
    Ok(vec![dens, stats])
}

fn fluorescence(cfg: &RunConfig) -> Out {
    let geo = geometry(cfg)?;
    let seq = sequence(cfg, None)?;
    let unselected = particles(cfg, &geo)?;
    let selected = run_sequence(&unselected, &seq, cfg.seed)?;
    let fl = &cfg.fluorescence;
    let model = FluorescenceModel {
        counts_per_atom: fl.counts_per_atom,
        relative_noise: fl.relative_noise,
        intercept: fl.intercept,
    };
    let r = simulate_fluorescence_slopes(&selected, &unselected, geo.single_atom_shift(), &fl.grid, &model, cfg.seed)?;
    let truth = ensemble_stats(&selected, cfg.selection.bootstrap_resamples, cfg.seed)?;

    let mut pts = Table::new("fluorescence.csv", &["series", "loading_fraction", "shift_hz", "counts"]);
    for (name, series) in [("unselected", &r.unselected_points), ("selected", &r.selected_points)] {
        for (k, (x, y)) in fl.grid.iter().zip(series) {
            pts.push([name.to_string(), k.to_string(), x.to_string(), y.to_string()]);
        }
    }
    let mut fit = Table::new(
        "fluorescence_fit.csv",
        &["slope_unselected_per_hz", "slope_selected_per_hz", "eta_estimate", "true_mean_eta", "true_mean_eta_se"],
    );
    fit.push([
        r.slope_unselected.to_string(),
        r.slope_selected.to_string(),
        r.eta_estimate.to_string(),
        truth.mean.to_string(),
        opt(truth.errors.map(|e| e.mean)),
    ]);
    Ok(vec![pts, fit])
}

fn toggle(cfg: &RunConfig) -> Out {
    use super::config::Pipeline;
    let geo = geometry(cfg)?;
    let seq = sequence(cfg, None)?;
    let o = &cfg.optomech;
    let trap = o.trap();
    trap.validate().map_err(as_config)?;
    let n0 = cfg.ensemble.atoms as f64;

    let (reference, selected, fraction, mean) = match o.pipeline {
        Pipeline::Density => {
            let p = prior(cfg, &geo)?;
            let (d, frac) = select(cfg, &p, &seq)?;
            let a0 = toggle_density(&p, &trap, &geo, o.power_ratio)?;
            let a_s = toggle_density(&d, &trap, &geo, o.power_ratio)?;
            (scaled(&a0, n0), scaled(&a_s, n0 * frac), frac, d.mean())
        }
        Pipeline::Particles => {
            let ens = particles(cfg, &geo)?;
            let after = run_sequence(&ens, &seq, cfg.seed)?;
            let s = ensemble_stats(&after, 0, cfg.seed)?;
            let a0 = toggle_experiment(&ens, &trap, &geo, o.power_ratio)?;
            let a_s = toggle_experiment(&after, &trap, &geo, o.power_ratio)?;
            (a0, a_s, s.retained_fraction, s.mean)
        }
    };

    let mut levels = Table::new("toggle.csv", &["series", "low_shift_hz", "high_shift_hz", "fractional_amplitude"]);
    let mut trace = Table::new("toggle_trace.csv", &["series", "time_s", "shift_hz"]);
    for (name, r) in [("unselected", &reference), ("selected", &selected)] {
        levels.push([
            name.to_string(),
            r.low_shift.hz().to_string(),
            r.high_shift.hz().to_string(),
            r.fractional_amplitude.to_string(),
        ]);
        for (t, v) in r.trace(o.toggle_window_s, o.toggle_cycles, o.sample_interval_s) {
            trace.push([name.to_string(), t.to_string(), v.hz().to_string()]);
        }
    }
    let mut summary = Table::new("toggle_summary.csv", &["ratio", "retained_fraction", "mean_eta"]);
    summary.push([suppression_ratio(&selected, &reference), fraction, mean]);
    Ok(vec![levels, summary, trace])
}

/// Density toggles are per atom; scale to the atom number.
fn scaled(r: &ToggleResult, atoms: f64) -> ToggleResult {
    ToggleResult {
        low_shift: r.low_shift * atoms,
        high_shift: r.high_shift * atoms,
        fractional_amplitude: r.fractional_amplitude,
    }
}

fn scan(cfg: &RunConfig) -> Out {
    let geo = geometry(cfg)?;
    let o = &cfg.optomech;
    let sc = ToggleScenario {
        ensemble: cfg.ensemble.resolve(),
        geometry: geo,
        sequence: sequence(cfg, None)?,
        trap: o.trap(),
        power_ratio: o.power_ratio,
        axial_nodes: cfg.ensemble.axial_nodes,
    };
    sc.trap.validate().map_err(as_config)?;
    let pts = position_scan(&o.offsets_m, &sc).map_err(as_config)?;
    let mut t = Table::new("scan.csv", &["offset_m", "r", "retained_fraction", "mean_eta"]);
    for p in &pts {
        t.push([p.offset, p.ratio, p.retained_fraction, p.mean_eta]);
    }
    let q = fit_quadratic(&pts.iter().map(|p| (p.offset, p.ratio)).collect::<Vec<_>>())?;
    let mut f = Table::new("scan_fit.csv", &["curvature_per_m2", "center_m", "floor", "r_squared"]);
    f.push([q.curvature, q.center, q.floor, q.r_squared]);
    Ok(vec![t, f])
}

fn radial(cfg: &RunConfig) -> Out {
    let geo = geometry(cfg)?;
    let o = &cfg.optomech;
    let r = &cfg.radial;
    let trap = o.trap();
    trap.validate().map_err(as_config)?;
    let full = particles(cfg, &geo)?;
    let ens = if r.selected {
        run_sequence(&full, &sequence(cfg, None)?, cfg.seed)?
    } else {
        full.clone()
    };
    let opts = RadialOptions {
        duration: r.duration_s,
        samples: r.samples,
        power_ratio: o.power_ratio,
        dephasing_time: r.dephasing_time_s,
        model: r.model(cfg.seed),
    };
    let trace = radial_breathing(&ens, &trap, &geo, &opts).map_err(as_config)?;
    let mut t = Table::new("radial.csv", &["time_s", "shift_hz"]);
    for (time, v) in &trace {
        t.push([*time, v.hz()]);
    }

    let (lo, hi) = trace
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| (lo.min(v.0), hi.max(v.0)));
    let mean = trace.iter().map(|(_, v)| v.0).sum::<f64>() / trace.len() as f64;
    let amplitude = if mean != 0.0 { (hi - lo) / mean.abs() } else { 0.0 };
    let eta_bar = ens.retained().map(|a| a.eta).sum::<f64>() / ens.retained_count().max(1) as f64;
    let f1 = trap.radial_frequency(&geo) * (1.0 + o.probe_depth_ratio * o.power_ratio * eta_bar).sqrt()
        / (2.0 * std::f64::consts::PI);

    // radial amplitude as a fraction of the unselected axial toggle amplitude
    let a0 = toggle_experiment(&full, &trap, &geo, o.power_ratio)?;
    let radial_ratio = amplitude / a0.fractional_amplitude;
    let corrected = match r.measured_ratio {
        Some(m) => Some(remove_radial(m, radial_ratio, r.composition)?),
        None => None,
    };

    let mut s = Table::new(
        "radial_summary.csv",
        &[
            "radial_frequency_hz",
            "breathing_frequency_hz",
            "fractional_amplitude",
            "radial_ratio",
            "measured_ratio",
            "corrected_ratio",
        ],
    );
    s.push([
        f1.to_string(),
        (2.0 * f1).to_string(),
        amplitude.to_string(),
        radial_ratio.to_string(),
        opt(r.measured_ratio),
        opt(corrected),
    ]);
    Ok(vec![t, s])
}
