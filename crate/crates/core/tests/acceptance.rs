//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fail.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::time::Instant;

use sitesel::field::{arcsine_cdf, sample_ensemble, unselected_density, EnsembleSpec};
use sitesel::harness::config::RunConfig;
use sitesel::harness::{execute, Job, Scenario};
use sitesel::optomech::{
    fit_quadratic, position_scan, radial_breathing, Displacement, RadialModel, RadialOptions, ToggleScenario, TrapModel,
};
use sitesel::selection::{run_sequence, select_density, transfer_probability};
use sitesel::spectroscopy::{
    detuning_grid, invert_spectrum, simulate_fluorescence_slopes, synthesize_spectrum, window_area,
    FluorescenceModel, DEFAULT_TRUNCATION,
};
use sitesel::stats::{density_stats, fit_power_law, ks_distance, log_grid, tradeoff_curve, SequenceTemplate};
use sitesel::{AngularFrequency, CavityGeometry, PulseSpec, SelectionSequence};

struct Outcome {
    pass: bool,
    detail: String,
}

fn khz(x: f64) -> AngularFrequency {
    AngularFrequency::from_khz(x)
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Excited-state population after a π/Ω pulse at detuning `delta`, by RK4
/// on the two-level Schrödinger equation in the rotating frame.
fn ode_flip(rabi: f64, delta: f64) -> f64 {
    type C = (f64, f64);
    // i·dc/dt = H·c, H = ½[[-Δ, Ω], [Ω, Δ]]
    let deriv = |c: [C; 2]| -> [C; 2] {
        let h = [[-0.5 * delta, 0.5 * rabi], [0.5 * rabi, 0.5 * delta]];
        let mut out = [(0.0, 0.0); 2];
        for i in 0..2 {
            let re = h[i][0] * c[0].0 + h[i][1] * c[1].0;
            let im = h[i][0] * c[0].1 + h[i][1] * c[1].1;
            // -i·(re + i·im) = im - i·re
            out[i] = (im, -re);
        }
        out
    };
    let t_end = PI / rabi;
    let freq = (rabi * rabi + delta * delta).sqrt();
    let steps = ((freq * t_end) * 200.0).ceil().max(2000.0) as usize;
    let h = t_end / steps as f64;
    let add = |a: [C; 2], b: [C; 2], s: f64| [(a[0].0 + s * b[0].0, a[0].1 + s * b[0].1), (a[1].0 + s * b[1].0, a[1].1 + s * b[1].1)];
    let mut c: [C; 2] = [(1.0, 0.0), (0.0, 0.0)];
    for _ in 0..steps {
        let k1 = deriv(c);
        let k2 = deriv(add(c, k1, 0.5 * h));
        let k3 = deriv(add(c, k2, 0.5 * h));
        let k4 = deriv(add(c, k3, h));
        for i in 0..2 {
            c[i].0 += h / 6.0 * (k1[i].0 + 2.0 * k2[i].0 + 2.0 * k3[i].0 + k4[i].0);
            c[i].1 += h / 6.0 * (k1[i].1 + 2.0 * k2[i].1 + 2.0 * k3[i].1 + k4[i].1);
        }
    }
    c[1].0 * c[1].0 + c[1].1 * c[1].1
}

fn window_oracle() -> Outcome {
    let start = Instant::now();
    let stark = khz(32.7);
    let n = 24;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let ratio = 0.05 + (2.0 - 0.05) * i as f64 / (n - 1) as f64;
        let rabi = stark * ratio;
        for j in 0..n {
            let gap = j as f64 / (n - 1) as f64;
            let closed = transfer_probability(gap, 0.0, rabi, stark).unwrap();
            let ode = ode_flip(rabi.0, gap * stark.0);
            worst = worst.max((closed - ode).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst < 1e-6 && secs < 10.0,
        detail: format!("max |F - ODE| = {worst:.2e} on {n}x{n} grid in {secs:.2} s"),
    }
}

fn arcsine_baseline() -> Outcome {
    let s = density_stats(&unselected_density()).unwrap();
    let de = (s.mean - 0.5).abs();
    let ds = (s.spread - FRAC_1_SQRT_2).abs();
    let ens = sample_ensemble(100_000, 1e-3, &CavityGeometry::default(), 7).unwrap();
    let ks = ks_distance(&ens.retained_etas(), arcsine_cdf);
    Outcome {
        pass: de < 1e-9 && ds < 1e-9 && ks < 0.01,
        detail: format!("|mean-0.5| = {de:.1e}, |spread-1/sqrt2| = {ds:.1e}, KS(1e5) = {ks:.4}"),
    }
}

/// Trade-off grid wide enough that every curve spans the fit range.
fn fig2_grid() -> Vec<f64> {
    log_grid(1e-7, 0.5, 60).unwrap()
}

fn fits(template: &SequenceTemplate) -> (sitesel::stats::PowerLawFit, sitesel::stats::PowerLawFit, Vec<f64>) {
    let pts = tradeoff_curve(&unselected_density(), template, &fig2_grid()).unwrap();
    let range = (1e-3, 0.1);
    let eta: Vec<_> = pts.iter().map(|p| (p.retained_fraction, 1.0 - p.mean)).collect();
    let spread: Vec<_> = pts.iter().map(|p| (p.retained_fraction, p.spread)).collect();
    (
        fit_power_law(&eta, range).unwrap(),
        fit_power_law(&spread, range).unwrap(),
        pts.iter().map(|p| p.mean).collect(),
    )
}

fn fit_ok(f: &sitesel::stats::PowerLawFit, a: f64, alpha: f64) -> bool {
    (f.prefactor / a - 1.0).abs() <= 0.10 && (f.exponent - alpha).abs() <= 0.05
}

/// label, template, expected (A, α) for `1 - η̄`, expected (A, α) for `Δη/η̄`
type FitCase = (&'static str, SequenceTemplate, (f64, f64), (f64, f64));

fn fig2_table() -> Outcome {
    let start = Instant::now();
    let cases: [FitCase; 5] = [
        ("1", SequenceTemplate::identical(1, 0.0), (1.83, 2.00), (1.75, 1.47)),
        ("2", SequenceTemplate::identical(2, 0.0), (1.04, 2.00), (1.41, 2.00)),
        ("3", SequenceTemplate::identical(3, 0.0), (1.00, 2.00), (1.12, 2.00)),
        ("4", SequenceTemplate::identical(4, 0.0), (1.00, 2.00), (1.09, 2.00)),
        ("2v", SequenceTemplate::with_multipliers(vec![1.0, SQRT_2], 0.0), (1.01, 2.00), (1.27, 2.00)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, tpl, e, s) in cases {
        let (fe, fs, _) = fits(&tpl);
        pass &= fit_ok(&fe, e.0, e.1) && fit_ok(&fs, s.0, s.1);
        parts.push(format!(
            "{name}: ({:.3},{:.3})/({:.3},{:.3})",
            fe.prefactor, fe.exponent, fs.prefactor, fs.exponent
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: pass && secs < 120.0,
        detail: format!("1-eta/spread fits {} in {secs:.1} s", parts.join(" ")),
    }
}

fn fig2d() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut worst_mean: f64 = 0.0;
    for (n, a, alpha) in [(1, 0.93, 0.48), (2, 1.70, 0.99), (3, 1.30, 1.00)] {
        let (_, fs, means) = fits(&SequenceTemplate::identical(n, 0.5));
        worst_mean = means.iter().fold(worst_mean, |w, m| w.max((m - 0.5).abs()));
        pass &= fit_ok(&fs, a, alpha);
        parts.push(format!("{n}: ({:.3},{:.3})", fs.prefactor, fs.exponent));
    }
    Outcome {
        pass: pass && worst_mean <= 0.005,
        detail: format!("max |mean-0.5| = {worst_mean:.1e}; spread fits {}", parts.join(" ")),
    }
}

fn nominal_selection(pulses: usize, detuning_khz: f64) -> (f64, f64, f64) {
    let p = PulseSpec::new(khz(2.04), khz(detuning_khz), khz(32.7)).unwrap();
    let (d, frac) = select_density(&unselected_density(), &SelectionSequence::repeated(p, pulses).unwrap()).unwrap();
    let s = density_stats(&d).unwrap();
    (s.mean, s.spread, frac)
}

fn nominal_predictions() -> Outcome {
    let targets = [(1, (0.90, 0.12, 0.18)), (2, (0.92, 0.04, 0.12))];
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, (m, s, f)) in targets {
        let got = nominal_selection(n, 2.7);
        let ok = within(got.0, m, 0.02) && within(got.1, s, 0.02) && within(got.2, f, 0.02);
        pass &= ok;
        parts.push(format!("{n} sel: ({:.3}, {:.3}, {:.3})", got.0, got.1, got.2));
    }
    let alt = nominal_selection(1, 0.0);
    let neg = nominal_selection(1, -2.7);
    Outcome {
        pass,
        detail: format!(
            "dm = +2.7 kHz toward the Stark shift: {}; targets (0.90,0.12,0.18)/(0.92,0.04,0.12); \
             other readings 1 sel dm=0: ({:.3},{:.3},{:.3}), dm=-2.7 kHz: ({:.3},{:.3},{:.3})",
            parts.join(", "),
            alt.0,
            alt.1,
            alt.2,
            neg.0,
            neg.1,
            neg.2
        ),
    }
}

fn spectroscopy_round_trip() -> Outcome {
    let probe = khz(0.17);
    let stark = khz(32.7);
    let grid = detuning_grid(stark, -0.2, 1.2, 201).unwrap();
    let shift0 = CavityGeometry::default().single_atom_shift();
    let mut l1 = Vec::new();
    let mut inner = Vec::new();
    for n in [0, 1, 2] {
        let p = PulseSpec::new(khz(2.04), khz(2.7), stark).unwrap();
        let d = if n == 0 {
            unselected_density()
        } else {
            select_density(&unselected_density(), &SelectionSequence::repeated(p, n).unwrap()).unwrap().0
        };
        let s = synthesize_spectrum(&d, probe, stark, &grid, 1e4, shift0).unwrap();
        let inv = invert_spectrum(&s, DEFAULT_TRUNCATION).unwrap();
        l1.push(inv.l1_error(|x| d.cdf(x)));
        // diagnostic only: the same round trip kept away from η = 1
        inner.push(invert_spectrum(&s, (0.4, 0.95)).unwrap().l1_error(|x| d.cdf(x)));
    }

    // narrow window: shift ≈ N·δωc0·(Ωp/δs)·∫F·η·P(η)
    let narrow = stark * 1e-3;
    let etas: Vec<f64> = (0..19).map(|i| 0.05 + 0.05 * i as f64).collect();
    let det: Vec<AngularFrequency> = etas.iter().map(|e| stark * (1.0 - e)).collect();
    let s = synthesize_spectrum(&unselected_density(), narrow, stark, &det, 1.0, shift0).unwrap();
    let scale = shift0.0 * 1e-3 * window_area();
    let worst = etas
        .iter()
        .zip(&s.shift)
        .map(|(e, v)| {
            let oracle = e / (PI * (e * (1.0 - e)).sqrt());
            (v.0 / scale / oracle - 1.0).abs()
        })
        .fold(0.0, f64::max);
    Outcome {
        pass: l1.iter().all(|x| *x < 0.05) && worst < 0.02,
        detail: format!(
            "L1 on (0.4,1] at Op/ds = {:.4}: unselected {:.4}, 1 sel {:.4}, 2 sel {:.4} (need < 0.05) \
             [on (0.4,0.95]: {:.4}, {:.4}, {:.4}]; narrow-window max rel err {worst:.2e}",
            probe / stark,
            l1[0],
            l1[1],
            l1[2],
            inner[0],
            inner[1],
            inner[2]
        ),
    }
}

fn fluorescence() -> Outcome {
    let geo = CavityGeometry::default();
    let ens = sample_ensemble(100_000, 1e-3, &geo, 11).unwrap();
    let p = PulseSpec::new(khz(2.04), khz(2.7), khz(32.7)).unwrap();
    let sel = run_sequence(&ens, &SelectionSequence::repeated(p, 1).unwrap(), 11).unwrap();
    let truth = sel.retained_etas().iter().sum::<f64>() / sel.retained_count() as f64;
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0];
    let model = FluorescenceModel::default();
    let estimates: Vec<f64> = (0..30)
        .map(|seed| {
            simulate_fluorescence_slopes(&sel, &ens, geo.single_atom_shift(), &grid, &model, seed)
                .unwrap()
                .eta_estimate
        })
        .collect();
    let m = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let sd = (estimates.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (estimates.len() - 1) as f64).sqrt();
    let one = estimates[0];
    Outcome {
        pass: (one - truth).abs() <= 3.0 * sd && within(one, 0.90, 0.02),
        detail: format!("estimate {one:.4} (sd {sd:.4} over noise seeds), true mean {truth:.4}"),
    }
}

fn toggle_scenario(detuning_khz: f64, epsilon: f64) -> ToggleScenario {
    let stark = khz(2.04 / 0.08);
    let p = PulseSpec::new(khz(2.04), khz(detuning_khz), stark).unwrap();
    ToggleScenario {
        ensemble: EnsembleSpec::default(),
        geometry: CavityGeometry::default(),
        sequence: SelectionSequence::repeated(p, 2).unwrap(),
        trap: TrapModel {
            probe_depth_ratio: epsilon,
            ..TrapModel::default()
        },
        power_ratio: 3.3,
        axial_nodes: 16,
    }
}

fn eps_spread(model: Displacement) -> f64 {
    let rs: Vec<f64> = [0.005, 0.01, 0.02]
        .iter()
        .map(|&e| {
            let mut s = toggle_scenario(0.0, e);
            s.trap.displacement = model;
            s.evaluate().unwrap().ratio
        })
        .collect();
    rs.iter().map(|r| (r / rs[1] - 1.0).abs()).fold(0.0, f64::max)
}

fn optomechanics() -> Outcome {
    let start = Instant::now();
    let base = toggle_scenario(0.0, 0.01).evaluate().unwrap();
    let off = toggle_scenario(2.0, 0.01).evaluate().unwrap();
    // linear regime: first-order displacement, no well stiffening
    let spread = eps_spread(Displacement::Linearized);
    let spread_exact = eps_spread(Displacement::Exact);
    // offset at which the prediction actually reaches r = 0.32
    let (mut lo, mut hi) = (2.0, 4.0);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if toggle_scenario(mid, 0.01).evaluate().unwrap().ratio < 0.32 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let at = toggle_scenario(lo, 0.01).evaluate().unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = within(base.ratio, 0.08, 0.02)
        && within(off.ratio, 0.32, 0.05)
        && within(off.retained_fraction, 0.14, 0.02)
        && within(off.mean_eta, 0.91, 0.02)
        && spread < 0.02
        && secs < 60.0;
    Outcome {
        pass,
        detail: format!(
            "baseline r = {:.4} (Ns/N {:.3}, eta {:.3}); +2 kHz: r = {:.4}, Ns/N {:.3}, eta {:.3}; \
             r = 0.32 needs +{lo:.2} kHz (Ns/N {:.3}, eta {:.3}); eps spread {spread:.2e} linearized, {spread_exact:.2e} exact",
            base.ratio,
            base.retained_fraction,
            base.mean_eta,
            off.ratio,
            off.retained_fraction,
            off.mean_eta,
            at.retained_fraction,
            at.mean_eta
        ),
    }
}

fn position() -> Outcome {
    let offsets: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.5e-4).collect();
    let pts = position_scan(&offsets, &toggle_scenario(0.0, 0.01)).unwrap();
    let n = pts.len();
    let odd = (0..n / 2)
        .map(|i| (pts[i].ratio - pts[n - 1 - i].ratio).abs() / pts[i].ratio)
        .fold(0.0, f64::max);
    let argmin = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.ratio.total_cmp(&b.1.ratio))
        .map(|(i, _)| i)
        .unwrap();
    let q = fit_quadratic(&pts.iter().map(|p| (p.offset, p.ratio)).collect::<Vec<_>>()).unwrap();
    Outcome {
        pass: odd < 1e-6 && pts[argmin].offset == 0.0 && q.r_squared > 0.99,
        detail: format!(
            "max relative asymmetry {odd:.1e}, minimum at {:.1e} m, R^2 = {:.6}, r(0) = {:.4}, r(0.5 mm) = {:.4}",
            pts[argmin].offset,
            q.r_squared,
            pts[n / 2].ratio,
            pts[n - 1].ratio
        ),
    }
}

fn radial() -> Outcome {
    let geo = CavityGeometry::default();
    let trap = TrapModel::default();
    let ens = sample_ensemble(20_000, 1e-3, &geo, 5).unwrap();
    let p = PulseSpec::new(khz(2.04), khz(0.0), khz(25.5)).unwrap();
    let sel = run_sequence(&ens, &SelectionSequence::repeated(p, 2).unwrap(), 5).unwrap();
    let opts = RadialOptions {
        duration: 20e-3,
        samples: 20_000,
        ..RadialOptions::default()
    };
    let trace = radial_breathing(&sel, &trap, &geo, &opts).unwrap();
    let y: Vec<f64> = trace.iter().map(|(_, v)| v.0).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> =
        y.iter().map(|v| rustfft::num_complex::Complex::new(v - mean, 0.0)).collect();
    rustfft::FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let dt = trace[1].0 - trace[0].0;
    let bin = 1.0 / (dt * buf.len() as f64);
    let peak = (1..buf.len() / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap() as f64 * bin;
    // coupling-weighted post-switch frequency
    let etas = sel.retained_etas();
    let eta_w = etas.iter().map(|e| e * e).sum::<f64>() / etas.iter().sum::<f64>();
    let f1 = trap.radial_frequency(&geo) * (1.0 + trap.probe_depth_ratio * opts.power_ratio * eta_w).sqrt() / (2.0 * PI);

    let flatness = |t: &[(f64, AngularFrequency)]| {
        let m = t.iter().map(|(_, v)| v.0).sum::<f64>() / t.len() as f64;
        t.iter().map(|(_, v)| (v.0 - m).abs()).fold(0.0, f64::max) / m.abs()
    };
    let cold = radial_breathing(
        &sel,
        &TrapModel {
            radial_temperature: 0.0,
            ..trap
        },
        &geo,
        &opts,
    )
    .unwrap();
    let adiabatic = radial_breathing(
        &sel,
        &trap,
        &geo,
        &RadialOptions {
            power_ratio: 1.0,
            ..opts
        },
    )
    .unwrap();
    let sampled_adiabatic = radial_breathing(
        &sel,
        &trap,
        &geo,
        &RadialOptions {
            power_ratio: 1.0,
            model: RadialModel::Sampled { seed: 3 },
            ..opts
        },
    );
    let (fc, fa) = (flatness(&cold), flatness(&adiabatic));
    Outcome {
        pass: (peak - 2.0 * f1).abs() <= bin && fc < 1e-12 && fa < 1e-12 && sampled_adiabatic.is_ok(),
        detail: format!(
            "FFT peak {peak:.1} Hz vs 2 f1 = {:.1} Hz (bin {bin:.1} Hz); T=0 flatness {fc:.1e}, adiabatic flatness {fa:.1e}",
            2.0 * f1
        ),
    }
}

fn determinism() -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.ensemble.atoms = 3000;
    cfg.tradeoff.points = 8;
    cfg.spectrum.points = 41;
    cfg.spectrum.selections = vec![0, 1];
    cfg.radial.samples = 200;
    cfg.optomech.offsets_m = vec![-2e-4, 0.0, 2e-4];
    cfg.selection.bootstrap_resamples = 20;
    cfg.tradeoff.window_ratios = vec![0.1];
    let mut differing = Vec::new();
    for s in Scenario::ALL {
        let mut c = cfg.clone();
        if s == Scenario::Fit {
            c.tradeoff.ratio_min = 1e-5;
            c.tradeoff.points = 20;
        }
        let job = Job::new(s, c);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = execute(std::slice::from_ref(&job), a.path(), "acceptance").unwrap();
        let mb = execute(std::slice::from_ref(&job), b.path(), "acceptance").unwrap();
        for (x, y) in ma.outputs.iter().zip(&mb.outputs) {
            let bx = std::fs::read(a.path().join(&x.file)).unwrap();
            let by = std::fs::read(b.path().join(&y.file)).unwrap();
            if bx != by || x.sha256 != y.sha256 {
                differing.push(format!("{s}/{}", x.file));
            }
        }
    }
    Outcome {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("all {} scenarios byte-identical on re-run", Scenario::ALL.len())
        } else {
            format!("differing outputs: {}", differing.join(", "))
        },
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("window closed form vs two-level ODE", window_oracle),
        ("arcsine baseline", arcsine_baseline),
        ("trade-off fit table", fig2_table),
        ("half-Stark detuning trade-off", fig2d),
        ("nominal-parameter selection predictions", nominal_predictions),
        ("spectroscopy round trip", spectroscopy_round_trip),
        ("fluorescence slope estimate", fluorescence),
        ("optomechanical suppression", optomechanics),
        ("position scan", position),
        ("radial breathing", radial),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
