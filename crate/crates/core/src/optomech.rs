//! Optomechanical response of the dressed cavity to probe-power toggling.
//!
//! The probe adds a weak standing-wave potential `ε·U_l·cos²(k_p z)` on top
//! of the lattice `U_l·cos²(k_l z)`. Atoms sitting on a probe slope are pushed
//! toward the nearer probe antinode, which changes their coupling by roughly
//! `2ε(k_p/k_l)²·η(1-η)`. Toggling the probe power therefore modulates the
//! dressed cavity shift unless every atom sits at `η ∈ {0, 1}`.
//!
//! The axial response is quasi-static: the cavity linewidth filters the
//! axial trap oscillation, so only equilibrium positions matter.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{ensemble_density, AtomEnsemble, CavityGeometry, CouplingDensity, EnsembleSpec};
use crate::rng::{domain, StreamFamily};
use crate::selection::{select_density, SelectionSequence};
use crate::units::{AngularFrequency, BOLTZMANN, RB87_MASS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapModel {
    /// Axial lattice trap frequency (Hz).
    pub axial_frequency: f64,
    /// Probe depth relative to the lattice depth at low probe power.
    pub probe_depth_ratio: f64,
    /// Radial temperature (K).
    pub radial_temperature: f64,
    /// Lattice beam waist setting the radial confinement (m).
    pub lattice_waist: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    pub displacement: Displacement,
}

/// How the probe-induced equilibrium shift is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Displacement {
    /// Newton minimization of the combined potential.
    #[default]
    Exact,
    /// First-order shift `-ε·q·sin(2θ)/2`. Drops the probe's stiffening of
    /// the well, which makes `r` exactly linear-response.
    Linearized,
}

impl Displacement {
    fn newton(self) -> bool {
        self == Displacement::Exact
    }
}

impl Default for TrapModel {
    fn default() -> Self {
        Self {
            axial_frequency: 205e3,
            probe_depth_ratio: 0.01,
            radial_temperature: 10e-6,
            lattice_waist: 70e-6,
            mass: RB87_MASS,
            displacement: Displacement::Exact,
        }
    }
}

impl TrapModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.axial_frequency > 0.0 && self.axial_frequency.is_finite()) {
            return invalid("axial trap frequency must be positive");
        }
        if !(self.probe_depth_ratio >= 0.0 && self.probe_depth_ratio.is_finite()) {
            return invalid("probe depth ratio must be non-negative");
        }
        if !(self.radial_temperature >= 0.0) {
            return invalid("radial temperature must be non-negative");
        }
        if !(self.lattice_waist > 0.0 && self.mass > 0.0) {
            return invalid("lattice waist and mass must be positive");
        }
        Ok(())
    }

    /// Lattice depth from the harmonic expansion of a well:
    /// `U_l = m·ω_ax²/(2·k_l²)` (J).
    pub fn lattice_depth(&self, geo: &CavityGeometry) -> f64 {
        let w = 2.0 * PI * self.axial_frequency;
        self.mass * w * w / (2.0 * geo.lattice_wavenumber().powi(2))
    }

    /// Radial trap frequency of the bare lattice, `√(4U_l/(m·w²))` (rad/s).
    pub fn radial_frequency(&self, geo: &CavityGeometry) -> f64 {
        (4.0 * self.lattice_depth(geo) / (self.mass * self.lattice_waist.powi(2))).sqrt()
    }
}

const NEWTON_ITERATIONS: usize = 50;

/// Equilibrium displacement in units of `1/k_l` for an atom at probe phase
/// `theta`, found by Newton iteration on
/// `V(x) = -cos²x - ε·cos²(θ + q·x)`, `q = k_p/k_l`.
/// With `newton = false` returns the linearized `-ε·q·sin(2θ)/2`.
pub fn equilibrium_offset(theta: f64, epsilon: f64, q: f64, newton: bool) -> Result<f64> {
    let linear = -0.5 * epsilon * q * (2.0 * theta).sin();
    if !newton || epsilon == 0.0 {
        return Ok(linear);
    }
    let mut x = linear;
    for _ in 0..NEWTON_ITERATIONS {
        let g = (2.0 * x).sin() + epsilon * q * (2.0 * (theta + q * x)).sin();
        let dg = 2.0 * (2.0 * x).cos() + 2.0 * epsilon * q * q * (2.0 * (theta + q * x)).cos();
        if !(dg > 0.0) {
            break;
        }
        let step = g / dg;
        x -= step;
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!(
        "equilibrium search did not converge (θ = {theta}, ε = {epsilon})"
    )))
}

/// Axial equilibrium shift (m) of an atom trapped at the lattice antinode
/// `z0`. Positive values point toward larger `z`; atoms move toward the
/// nearest probe antinode.
pub fn axial_displacement(z0: f64, trap: &TrapModel, geo: &CavityGeometry) -> Result<f64> {
    trap.validate()?;
    let q = geo.probe_wavenumber() / geo.lattice_wavenumber();
    let x = equilibrium_offset(geo.probe_phase(z0), trap.probe_depth_ratio, q, trap.displacement == Displacement::Exact)?;
    Ok(x / geo.lattice_wavenumber())
}

/// Coupling of an atom at probe phase `theta` after re-equilibration.
pub fn displaced_eta(theta: f64, epsilon: f64, q: f64, model: Displacement) -> Result<f64> {
    let x = equilibrium_offset(theta, epsilon, q, model.newton())?;
    Ok((theta + q * x).cos().powi(2))
}

/// First-order low-pass applied to toggle traces (Hz).
pub const CAVITY_BANDWIDTH: f64 = 50e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToggleResult {
    /// Dressed shift at low probe power.
    pub low_shift: AngularFrequency,
    /// Dressed shift at high probe power.
    pub high_shift: AngularFrequency,
    /// `|δ_high - δ_low| / mean`.
    pub fractional_amplitude: f64,
}

impl ToggleResult {
    /// `scale` is the shift of the same atoms all at unit coupling.
    fn new(low: f64, high: f64, scale: f64) -> Result<Self> {
        let mean = 0.5 * (low + high);
        if !(mean.abs() > 1e-12 * scale.abs()) {
            return Err(Error::DegenerateEnsemble("dressed shift is zero".into()));
        }
        Ok(Self {
            low_shift: AngularFrequency(low),
            high_shift: AngularFrequency(high),
            fractional_amplitude: (high - low).abs() / mean.abs(),
        })
    }

    /// Square toggling between the two levels with `window` seconds per
    /// level, sampled every `dt` and low-passed by the cavity. Returns
    /// `(time_s, shift)` pairs.
    pub fn trace(&self, window: f64, cycles: usize, dt: f64) -> Vec<(f64, AngularFrequency)> {
        let n = ((2.0 * window * cycles as f64) / dt).round() as usize;
        let alpha = 1.0 - (-2.0 * PI * CAVITY_BANDWIDTH * dt).exp();
        let mut y = self.low_shift.0;
        (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let high = ((t / window).floor() as usize) % 2 == 1;
                let x = if high { self.high_shift.0 } else { self.low_shift.0 };
                y += alpha * (x - y);
                (t, AngularFrequency(y))
            })
            .collect()
    }
}

fn probe_levels(trap: &TrapModel, power_ratio: f64) -> Result<(f64, f64)> {
    trap.validate()?;
    if !(power_ratio > 0.0 && power_ratio.is_finite()) {
        return invalid(format!("power ratio must be positive, got {power_ratio}"));
    }
    let lo = trap.probe_depth_ratio;
    Ok((lo, lo * power_ratio))
}

/// Toggle response of a particle ensemble (retained atoms only).
pub fn toggle_experiment(
    ens: &AtomEnsemble,
    trap: &TrapModel,
    geo: &CavityGeometry,
    power_ratio: f64,
) -> Result<ToggleResult> {
    let (lo, hi) = probe_levels(trap, power_ratio)?;
    if ens.retained_count() == 0 {
        return Err(Error::EmptyEnsemble("toggle needs retained atoms".into()));
    }
    let q = geo.probe_wavenumber() / geo.lattice_wavenumber();
    let shift0 = geo.single_atom_shift().0;
    let pairs = ens
        .atoms
        .par_iter()
        .filter(|a| a.is_retained())
        .map(|a| {
            let th = geo.probe_phase(a.z);
            Ok((displaced_eta(th, lo, q, trap.displacement)?, displaced_eta(th, hi, q, trap.displacement)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    // ordered reduction keeps the sum independent of thread count
    let (sl, sh) = pairs.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    ToggleResult::new(sl * shift0, sh * shift0, pairs.len() as f64 * shift0)
}

/// Toggle response of a coupling density, per atom (multiply the shifts by
/// the atom number for a whole ensemble).
pub fn toggle_density(
    density: &CouplingDensity,
    trap: &TrapModel,
    geo: &CavityGeometry,
    power_ratio: f64,
) -> Result<ToggleResult> {
    let (lo, hi) = probe_levels(trap, power_ratio)?;
    let q = geo.probe_wavenumber() / geo.lattice_wavenumber();
    let failed = AtomicBool::new(false);
    let eta_at = |th: f64, eps: f64| match displaced_eta(th, eps, q, trap.displacement) {
        Ok(e) => e,
        Err(_) => {
            failed.store(true, Ordering::Relaxed);
            f64::NAN
        }
    };
    let [el, eh] = density.expect(|s| [eta_at(s.theta, lo), eta_at(s.theta, hi)]);
    if failed.load(Ordering::Relaxed) {
        return Err(Error::Numeric("equilibrium search failed inside quadrature".into()));
    }
    let shift0 = geo.single_atom_shift().0;
    ToggleResult::new(el * shift0, eh * shift0, shift0)
}

/// `r = a_s/a_0`.
pub fn suppression_ratio(selected: &ToggleResult, reference: &ToggleResult) -> f64 {
    selected.fractional_amplitude / reference.fractional_amplitude
}

/// A full selection-plus-toggle scenario, evaluated with the density
/// pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ToggleScenario {
    pub ensemble: EnsembleSpec,
    pub geometry: CavityGeometry,
    pub sequence: SelectionSequence,
    pub trap: TrapModel,
    pub power_ratio: f64,
    /// Gauss–Legendre nodes across the cloud.
    pub axial_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub offset: f64,
    pub ratio: f64,
    pub retained_fraction: f64,
    pub mean_eta: f64,
}

impl ToggleScenario {
    pub fn evaluate(&self) -> Result<ScenarioOutcome> {
        let prior = ensemble_density(&self.ensemble, &self.geometry, self.axial_nodes)?;
        let (selected, fraction) = select_density(&prior, &self.sequence)?;
        let a0 = toggle_density(&prior, &self.trap, &self.geometry, self.power_ratio)?;
        let a_s = toggle_density(&selected, &self.trap, &self.geometry, self.power_ratio)?;
        Ok(ScenarioOutcome {
            offset: self.ensemble.offset,
            ratio: suppression_ratio(&a_s, &a0),
            retained_fraction: fraction,
            mean_eta: selected.mean(),
        })
    }
}

/// Reruns the scenario with the cloud centered at each offset.
pub fn position_scan(offsets: &[f64], scenario: &ToggleScenario) -> Result<Vec<ScenarioOutcome>> {
    let half = 0.5 * scenario.geometry.cavity_length();
    if let Some(o) = offsets.iter().find(|o| !(o.abs() <= half)) {
        return invalid(format!("offset {o} m lies outside the cavity (±{half} m)"));
    }
    offsets
        .par_iter()
        .map(|&o| {
            let mut s = scenario.clone();
            s.ensemble.offset = o;
            s.evaluate()
        })
        .collect()
}

/// `R(x) = A·(x - x0)² + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub curvature: f64,
    pub center: f64,
    pub floor: f64,
    pub r_squared: f64,
}

pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<QuadraticFit> {
    if points.len() < 3 {
        return Err(Error::Fit("quadratic fit needs at least 3 points".into()));
    }
    // normal equations for y = c0 + c1 x + c2 x², with x scaled for conditioning
    let sx = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut m = [[0.0; 4]; 3];
    for &(x, y) in points {
        let u = x / sx;
        let b = [1.0, u, u * u];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += b[i] * b[j];
            }
            m[i][3] += b[i] * y;
        }
    }
    let c = solve3(m).ok_or_else(|| Error::Fit("singular quadratic fit".into()))?;
    let (c0, c1, c2) = (c[0], c[1] / sx, c[2] / (sx * sx));
    if c2 == 0.0 {
        return Err(Error::Fit("data has no curvature".into()));
    }
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - c0 - c1 * p.0 - c2 * p.0 * p.0).powi(2)).sum();
    let center = -c1 / (2.0 * c2);
    Ok(QuadraticFit {
        curvature: c2,
        center,
        floor: c0 - c1 * c1 / (4.0 * c2),
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    })
}

fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                let pivot_row = m[col];
                for (x, p) in m[r][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// How radial and axial modulations combine into the observed amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    /// Independent contributions: `√(a² + b²)`.
    #[default]
    RootSumSquare,
    /// In-phase contributions: `a + b`.
    Coherent,
}

pub fn compose_amplitudes(axial: f64, radial: f64, rule: Composition) -> f64 {
    match rule {
        Composition::RootSumSquare => axial.hypot(radial),
        Composition::Coherent => axial + radial,
    }
}

/// Removes a radial contribution from an observed amplitude or ratio.
pub fn remove_radial(observed: f64, radial: f64, rule: Composition) -> Result<f64> {
    let v = match rule {
        Composition::RootSumSquare => {
            let d = observed * observed - radial * radial;
            if d < 0.0 {
                return invalid("radial contribution exceeds the observed amplitude");
            }
            d.sqrt()
        }
        Composition::Coherent => observed - radial,
    };
    if v < 0.0 {
        return invalid("radial contribution exceeds the observed amplitude");
    }
    Ok(v)
}

/// How the radial phase-space distribution is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RadialModel {
    /// Each atom carries the full thermal Gaussian; its weight evolves with
    /// the analytic variance. No sampling noise.
    #[default]
    Thermal,
    /// Each atom gets one phase-space point drawn from the thermal
    /// distribution.
    Sampled { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialOptions {
    /// Trace length (s).
    pub duration: f64,
    pub samples: usize,
    /// Probe power after the switch relative to before.
    pub power_ratio: f64,
    /// Exponential dephasing time of the breathing (s); `None` for none.
    pub dephasing_time: Option<f64>,
    pub model: RadialModel,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            duration: 2e-3,
            samples: 4000,
            power_ratio: 3.3,
            dephasing_time: None,
            model: RadialModel::Thermal,
        }
    }
}

/// Dressed shift `(time_s, shift)` after a sudden change of probe power.
///
/// Each atom's radial frequency is `ω_r·√(1 + ε·η)`, with the probe adding
/// `ε·η` of the lattice depth; its cavity weight is `η·exp(-2ρ²/w²)`.
pub fn radial_breathing(
    ens: &AtomEnsemble,
    trap: &TrapModel,
    geo: &CavityGeometry,
    opts: &RadialOptions,
) -> Result<Vec<(f64, AngularFrequency)>> {
    trap.validate()?;
    if !(opts.duration > 0.0) || opts.samples < 2 {
        return invalid("radial trace needs a positive duration and at least two samples");
    }
    if !(opts.power_ratio > 0.0) {
        return invalid("power ratio must be positive");
    }
    let wr = trap.radial_frequency(geo);
    let eps0 = trap.probe_depth_ratio;
    let eps1 = eps0 * opts.power_ratio;
    let kt_m = BOLTZMANN * trap.radial_temperature / trap.mass;
    let w2 = geo.mode_waist.powi(2);
    let dt = opts.duration / (opts.samples - 1) as f64;
    let times: Vec<f64> = (0..opts.samples).map(|i| i as f64 * dt).collect();

    let atoms: Vec<(usize, f64)> = ens
        .atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_retained())
        .map(|(i, a)| (i, a.eta))
        .collect();
    if atoms.is_empty() {
        return Err(Error::EmptyEnsemble("radial trace needs retained atoms".into()));
    }
    let family = match opts.model {
        RadialModel::Sampled { seed } => Some(StreamFamily::new(seed, &[domain::RADIAL])),
        RadialModel::Thermal => None,
    };
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let decay = |t: f64| opts.dephasing_time.map_or(1.0, |tau| (-t / tau).exp());

    // per-atom contribution at every sample, summed in atom order per chunk
    let per_atom = |&(idx, eta): &(usize, f64)| -> Vec<f64> {
        let w0 = wr * (1.0 + eps0 * eta).sqrt();
        let w1 = wr * (1.0 + eps1 * eta).sqrt();
        match &family {
            None => {
                let s0 = kt_m / (w0 * w0);
                let sv = kt_m / (w1 * w1);
                let avg = 0.5 * (s0 + sv);
                times
                    .iter()
                    .map(|&t| {
                        let c = (w1 * t).cos().powi(2);
                        let var = s0 * c + sv * (1.0 - c);
                        let var = avg + (var - avg) * decay(t);
                        eta / (1.0 + 4.0 * var / w2)
                    })
                    .collect()
            }
            Some(f) => {
                let mut rng = f.stream(idx as u64);
                let sx = (kt_m / (w0 * w0)).sqrt();
                let sv = kt_m.sqrt();
                let (x0, y0) = (sx * normal.sample(&mut rng), sx * normal.sample(&mut rng));
                let (vx, vy) = (sv * normal.sample(&mut rng), sv * normal.sample(&mut rng));
                times
                    .iter()
                    .map(|&t| {
                        let (c, s) = ((w1 * t).cos(), (w1 * t).sin());
                        let x = x0 * c + vx / w1 * s;
                        let y = y0 * c + vy / w1 * s;
                        eta * (-2.0 * (x * x + y * y) / w2).exp()
                    })
                    .collect()
            }
        }
    };
    const CHUNK: usize = 1024;
    let partials: Vec<Vec<f64>> = atoms
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; times.len()];
            for a in chunk {
                for (s, v) in acc.iter_mut().zip(per_atom(a)) {
                    *s += v;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; times.len()];
    for p in partials {
        for (s, v) in total.iter_mut().zip(p) {
            *s += v;
        }
    }
    let shift0 = geo.single_atom_shift().0;
    Ok(times
        .into_iter()
        .zip(total)
        .map(|(t, s)| (t, AngularFrequency(s * shift0)))
        .collect())
}
