//! Cavity geometry, standing-wave mode functions and coupling distributions.
//!
//! Positions `z` are measured along the cavity axis from the mid-plane. The
//! probe mode has intensity `cos²(k_p z)` and the Stark mode, one free spectral
//! range away, has `sin²(k_s z)`; near the mid-plane the two are locally
//! anti-phased so an atom's Stark fraction is `1 - η`. Away from the mid-plane
//! the field phases slip by `(k_s - k_p) z`.
//!
//! Coupling densities are integrated in the probe phase `θ` with
//! `η = cos²θ` and `θ` uniform on `[-π/2, π/2)`. In that variable the arcsine
//! density `1/(π√(η(1-η)))` is flat, so the endpoint singularities never reach
//! the quadrature.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::{gauss_legendre, integrate, prepare_breakpoints, QuadOptions};
use crate::rng::{domain, StreamFamily};
use crate::selection::StarkWindow;
use crate::units::{AngularFrequency, SPEED_OF_LIGHT};

/// Which side of the probe mode the Stark mode sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StarkMode {
    /// One FSR above the probe in frequency: `1/λs = 1/λp + FSR/c`.
    #[default]
    Above,
    /// One FSR below: `1/λs = 1/λp - FSR/c`.
    Below,
}

/// Which mode has an intensity antinode at the cavity mid-plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MidPlaneSymmetry {
    /// Probe antinode, Stark node at `z = 0`.
    #[default]
    ProbeAntinode,
    /// Stark antinode, probe node at `z = 0`.
    StarkAntinode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// Trapping lattice wavelength (m).
    pub lattice_wavelength: f64,
    /// Atomic probe wavelength (m).
    pub probe_wavelength: f64,
    /// Atomic transition wavelength (m).
    pub atomic_wavelength: f64,
    pub free_spectral_range: AngularFrequency,
    pub hyperfine_splitting: AngularFrequency,
    /// Probe detuning from the upper-state optical transition.
    pub probe_detuning: AngularFrequency,
    /// Stark-beam detuning from the lower-state optical transition.
    pub stark_detuning: AngularFrequency,
    /// Single-atom coupling `g0` (half the vacuum Rabi frequency).
    pub peak_coupling: AngularFrequency,
    /// Cavity mode waist (m).
    pub mode_waist: f64,
    pub stark_mode: StarkMode,
    pub symmetry: MidPlaneSymmetry,
}

impl Default for CavityGeometry {
    fn default() -> Self {
        let probe_detuning = AngularFrequency::from_hz(700e6);
        // g0 chosen so that g0²/Δp = 2π × 150 Hz.
        let shift = AngularFrequency::from_hz(150.0);
        let peak_coupling = AngularFrequency((shift.0 * probe_detuning.0).sqrt());
        Self {
            lattice_wavelength: 813e-9,
            probe_wavelength: 780e-9,
            atomic_wavelength: 780e-9,
            free_spectral_range: AngularFrequency::from_hz(6.791e9),
            hyperfine_splitting: AngularFrequency::from_hz(6.834e9),
            probe_detuning,
            stark_detuning: AngularFrequency::from_hz(700e6),
            peak_coupling,
            mode_waist: 70e-6,
            stark_mode: StarkMode::Above,
            symmetry: MidPlaneSymmetry::ProbeAntinode,
        }
    }
}

impl CavityGeometry {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("lattice_wavelength", self.lattice_wavelength),
            ("probe_wavelength", self.probe_wavelength),
            ("atomic_wavelength", self.atomic_wavelength),
            ("mode_waist", self.mode_waist),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.free_spectral_range.0.is_finite() && self.free_spectral_range.0 > 0.0) {
            return invalid("free_spectral_range must be positive");
        }
        if !(self.peak_coupling.0.is_finite() && self.peak_coupling.0 >= 0.0) {
            return invalid("peak_coupling must be non-negative");
        }
        if !(self.probe_detuning.0.is_finite() && self.probe_detuning.0 != 0.0) {
            return invalid("probe_detuning must be finite and nonzero");
        }
        let ks = self.stark_wavenumber();
        if !(ks.is_finite() && ks > 0.0) {
            return invalid("Stark mode wavelength is not positive for this FSR");
        }
        Ok(())
    }

    pub fn probe_wavenumber(&self) -> f64 {
        2.0 * PI / self.probe_wavelength
    }

    pub fn lattice_wavenumber(&self) -> f64 {
        2.0 * PI / self.lattice_wavelength
    }

    /// `2π·FSR/c`, the wavenumber step between adjacent longitudinal modes.
    pub fn mode_spacing_wavenumber(&self) -> f64 {
        self.free_spectral_range.0 / SPEED_OF_LIGHT
    }

    pub fn stark_wavenumber(&self) -> f64 {
        match self.stark_mode {
            StarkMode::Above => self.probe_wavenumber() + self.mode_spacing_wavenumber(),
            StarkMode::Below => self.probe_wavenumber() - self.mode_spacing_wavenumber(),
        }
    }

    pub fn stark_wavelength(&self) -> f64 {
        2.0 * PI / self.stark_wavenumber()
    }

    /// `L = c / (2·FSR)`.
    pub fn cavity_length(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.free_spectral_range.hz())
    }

    /// `1/λd = |1/λl - 1/λp|`: the length over which lattice sites sample
    /// every probe phase.
    pub fn differential_wavelength(&self) -> f64 {
        1.0 / (1.0 / self.lattice_wavelength - 1.0 / self.probe_wavelength).abs()
    }

    /// Single-atom dispersive cavity shift `g0²/Δp` for an atom at a probe
    /// antinode.
    pub fn single_atom_shift(&self) -> AngularFrequency {
        AngularFrequency(self.peak_coupling.0 * self.peak_coupling.0 / self.probe_detuning.0)
    }

    /// Field-phase slip `(k_s - k_p)·z` between the Stark and probe modes.
    pub fn phase_slip(&self, z: f64) -> f64 {
        (self.stark_wavenumber() - self.probe_wavenumber()) * z
    }

    /// Stark fraction seen by an atom sitting exactly on the probe antinode
    /// nearest to `z`. Zero at the mid-plane; `sin²(slip)` elsewhere.
    pub fn anti_alignment_error(&self, z: f64) -> f64 {
        let kp = self.probe_wavenumber();
        let antinode = match self.symmetry {
            MidPlaneSymmetry::ProbeAntinode => (kp * z / PI).round() * PI / kp,
            MidPlaneSymmetry::StarkAntinode => ((kp * z / PI - 0.5).round() + 0.5) * PI / kp,
        };
        stark_fraction(antinode, self)
    }

    /// Probe phase `θ` such that `η = cos²θ`, reduced to `[-π/2, π/2)`.
    pub fn probe_phase(&self, z: f64) -> f64 {
        let raw = match self.symmetry {
            MidPlaneSymmetry::ProbeAntinode => self.probe_wavenumber() * z,
            MidPlaneSymmetry::StarkAntinode => self.probe_wavenumber() * z + FRAC_PI_2,
        };
        wrap_phase(raw)
    }
}

/// Reduces a phase to `[-π/2, π/2)` (period π).
pub fn wrap_phase(theta: f64) -> f64 {
    theta - PI * ((theta + FRAC_PI_2) / PI).floor()
}

/// Normalized coupling `η = (g/g0)² = cos²(2πz/λp)`.
pub fn coupling_eta(z: f64, geo: &CavityGeometry) -> f64 {
    let phase = geo.probe_wavenumber() * z;
    match geo.symmetry {
        MidPlaneSymmetry::ProbeAntinode => phase.cos().powi(2),
        MidPlaneSymmetry::StarkAntinode => phase.sin().powi(2),
    }
}

/// Stark-mode intensity relative to its peak, `sin²(2πz/λs)`.
pub fn stark_fraction(z: f64, geo: &CavityGeometry) -> f64 {
    let phase = geo.stark_wavenumber() * z;
    match geo.symmetry {
        MidPlaneSymmetry::ProbeAntinode => phase.sin().powi(2),
        MidPlaneSymmetry::StarkAntinode => phase.cos().powi(2),
    }
}

/// Differential light shift of the microwave transition, `δs·sin²(2πz/λs)`.
pub fn stark_shift(z: f64, peak: AngularFrequency, geo: &CavityGeometry) -> AngularFrequency {
    peak * stark_fraction(z, geo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spin {
    Up,
    Down,
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Axial position from the mid-plane (m).
    pub z: f64,
    /// Radial offset from the cavity axis (m).
    pub rho: f64,
    pub spin: Spin,
    /// Probe coupling `η` at `z`.
    pub eta: f64,
    /// Stark fraction at `z`.
    pub stark: f64,
}

impl Atom {
    pub fn at(z: f64, geo: &CavityGeometry) -> Self {
        Self {
            z,
            rho: 0.0,
            spin: Spin::Up,
            eta: coupling_eta(z, geo),
            stark: stark_fraction(z, geo),
        }
    }

    pub fn is_retained(&self) -> bool {
        self.spin != Spin::Removed
    }
}

/// A particle ensemble. Atoms are never dropped from the vector; removal is a
/// spin state, so indices (and therefore random substreams) stay stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomEnsemble {
    pub atoms: Vec<Atom>,
    pub seed: u64,
}

impl AtomEnsemble {
    pub fn from_atoms(atoms: Vec<Atom>, seed: u64) -> Self {
        Self { atoms, seed }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn retained(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| a.is_retained())
    }

    pub fn retained_count(&self) -> usize {
        self.retained().count()
    }

    pub fn count(&self, spin: Spin) -> usize {
        self.atoms.iter().filter(|a| a.spin == spin).count()
    }

    pub fn retained_etas(&self) -> Vec<f64> {
        self.retained().map(|a| a.eta).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AxialProfile {
    /// Uniform over `[offset - extent/2, offset + extent/2]`.
    #[default]
    Uniform,
    /// Gaussian centered on the offset with σ = extent/4.
    Gaussian,
}

/// Loading parameters for [`sample_ensemble_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub atoms: usize,
    /// Axial extent of the cloud (m).
    pub extent: f64,
    /// Cloud center relative to the cavity mid-plane (m).
    pub offset: f64,
    pub profile: AxialProfile,
    /// RMS radial offset per transverse axis (m).
    pub radial_sigma: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            atoms: 100_000,
            extent: 1e-3,
            offset: 0.0,
            profile: AxialProfile::Uniform,
            radial_sigma: 0.0,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.atoms == 0 {
            return invalid("atom count must be at least 1");
        }
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return invalid(format!("extent must be positive, got {}", self.extent));
        }
        if !self.offset.is_finite() {
            return invalid("offset must be finite");
        }
        if !(self.radial_sigma.is_finite() && self.radial_sigma >= 0.0) {
            return invalid("radial_sigma must be non-negative");
        }
        Ok(())
    }
}

/// Samples `n` atoms uniformly over lattice sites within `extent` of the
/// mid-plane. All atoms start spin up.
pub fn sample_ensemble(n: usize, extent: f64, geo: &CavityGeometry, seed: u64) -> Result<AtomEnsemble> {
    let spec = EnsembleSpec {
        atoms: n,
        extent,
        ..EnsembleSpec::default()
    };
    sample_ensemble_with(&spec, geo, seed)
}

/// Ratio below which the site phases no longer sample the probe pattern
/// uniformly enough for the arcsine limit.
pub const MIN_EXTENT_OVER_LAMBDA_D: f64 = 50.0;

pub fn sample_ensemble_with(spec: &EnsembleSpec, geo: &CavityGeometry, seed: u64) -> Result<AtomEnsemble> {
    spec.validate()?;
    geo.validate()?;
    let ratio = spec.extent / geo.differential_wavelength();
    if ratio < MIN_EXTENT_OVER_LAMBDA_D {
        log::warn!(
            "ensemble extent is only {ratio:.1} differential wavelengths; the coupling distribution will deviate from arcsine"
        );
    }
    let site = 0.5 * geo.lattice_wavelength;
    let family = StreamFamily::new(seed, &[domain::ENSEMBLE]);
    let gauss = Normal::new(spec.offset, 0.25 * spec.extent).expect("positive sigma");
    let atoms = (0..spec.atoms)
        .into_par_iter()
        .map(|i| {
            let mut rng = family.stream(i as u64);
            let raw = match spec.profile {
                AxialProfile::Uniform => spec.offset + spec.extent * (rng.random::<f64>() - 0.5),
                AxialProfile::Gaussian => gauss.sample(&mut rng),
            };
            // Lattice antinodes sit at integer multiples of λl/2.
            let z = (raw / site).round() * site;
            let mut atom = Atom::at(z, geo);
            if spec.radial_sigma > 0.0 {
                let x: f64 = rng.sample(rand_distr::StandardNormal);
                let y: f64 = rng.sample(rand_distr::StandardNormal);
                atom.rho = spec.radial_sigma * x.hypot(y);
            }
            atom
        })
        .collect();
    Ok(AtomEnsemble { atoms, seed })
}

/// One component of the phase-space prior: atoms whose Stark phase is offset
/// from the probe phase by `slip`, carrying relative `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBranch {
    pub weight: f64,
    pub slip: f64,
}

/// A point in the coupling phase space handed to density integrands.
#[derive(Debug, Clone, Copy)]
pub struct Site {
    /// Probe phase, `η = cos²θ`.
    pub theta: f64,
    pub eta: f64,
    pub stark: f64,
}

impl Site {
    fn new(theta: f64, slip: f64) -> Self {
        Self {
            theta,
            eta: theta.cos().powi(2),
            stark: (theta + slip).sin().powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Prior {
    /// Probe phase uniform over a period, mixed over phase-slip branches.
    Arcsine { branches: Vec<PhaseBranch> },
    /// Every atom at the same coupling, locally anti-phased Stark fraction.
    PointMass { eta: f64 },
}

/// Probability density over the coupling `η`, stored as a prior times a
/// product of selection windows. Integrals are evaluated on demand by
/// adaptive quadrature, so selected densities carry no sampling noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDensity {
    prior: Prior,
    windows: Vec<StarkWindow>,
    /// Constant survival factor (repump losses).
    scale: f64,
    /// `∫ prior · Π windows · scale`, i.e. the retained fraction relative to
    /// the prior.
    mass: f64,
}

/// Tabulated view of a density for export.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    pub eta: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
}

const THETA_LO: f64 = -FRAC_PI_2;
const THETA_HI: f64 = FRAC_PI_2;

pub(crate) fn quad_options() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-10,
        max_intervals: 50_000,
    }
}

/// The unselected lattice distribution `P(η) = 1/(π√(η(1-η)))`.
pub fn unselected_density() -> CouplingDensity {
    CouplingDensity::arcsine(vec![PhaseBranch {
        weight: 1.0,
        slip: 0.0,
    }])
}

/// Unselected density for a cloud of finite axial extent, resolving the
/// probe/Stark phase slip across the cloud with Gauss–Legendre nodes in `z`.
pub fn ensemble_density(spec: &EnsembleSpec, geo: &CavityGeometry, nodes: usize) -> Result<CouplingDensity> {
    spec.validate()?;
    geo.validate()?;
    let nodes = nodes.max(1);
    let (lo, hi, sigma) = match spec.profile {
        AxialProfile::Uniform => (spec.offset - 0.5 * spec.extent, spec.offset + 0.5 * spec.extent, None),
        AxialProfile::Gaussian => {
            let s = 0.25 * spec.extent;
            (spec.offset - 5.0 * s, spec.offset + 5.0 * s, Some(s))
        }
    };
    let branches = gauss_legendre(nodes, lo, hi)
        .into_iter()
        .map(|(z, w)| {
            let weight = match sigma {
                None => w / (hi - lo),
                Some(s) => w * (-(z - spec.offset).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt()),
            };
            PhaseBranch {
                weight,
                slip: geo.phase_slip(z),
            }
        })
        .collect();
    Ok(CouplingDensity::arcsine(branches))
}

impl CouplingDensity {
    pub fn arcsine(mut branches: Vec<PhaseBranch>) -> Self {
        let total: f64 = branches.iter().map(|b| b.weight).sum();
        for b in &mut branches {
            b.weight /= total;
        }
        Self {
            prior: Prior::Arcsine { branches },
            windows: Vec::new(),
            scale: 1.0,
            mass: 1.0,
        }
    }

    pub fn point_mass(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return invalid(format!("point mass must lie in [0, 1], got {eta}"));
        }
        Ok(Self {
            prior: Prior::PointMass { eta },
            windows: Vec::new(),
            scale: 1.0,
            mass: 1.0,
        })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn windows(&self) -> &[StarkWindow] {
        &self.windows
    }

    /// Fraction of the prior that survives the applied windows.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Returns a new density with the extra windows and survival factor
    /// applied. The result is normalized; its [`mass`](Self::mass) is the
    /// cumulative retained fraction.
    pub(crate) fn with_windows(&self, extra: &[StarkWindow], survival: f64) -> Self {
        let mut next = self.clone();
        next.windows.extend_from_slice(extra);
        next.scale *= survival;
        next.mass = next.integrate_unnormalized(&[], &[], |_| [1.0])[0];
        next
    }

    /// `∫ prior · Π(windows ∪ extra) · scale · f`. Not divided by the mass.
    pub(crate) fn integrate_unnormalized<const N: usize, F>(
        &self,
        extra: &[StarkWindow],
        extra_theta_points: &[f64],
        f: F,
    ) -> [f64; N]
    where
        F: Fn(&Site) -> [f64; N] + Sync,
    {
        let weight = |s: f64| -> f64 {
            self.windows
                .iter()
                .chain(extra)
                .map(|w| w.smoothed(s))
                .product::<f64>()
                * self.scale
        };
        match &self.prior {
            Prior::PointMass { eta } => {
                let site = Site::new(eta.sqrt().acos(), 0.0);
                let w = weight(site.stark);
                let v = f(&site);
                v.map(|x| x * w)
            }
            Prior::Arcsine { branches } => {
                let parts: Vec<[f64; N]> = branches
                    .iter()
                    .map(|b| {
                        let mut pts: Vec<f64> = Vec::new();
                        for w in self.windows.iter().chain(extra) {
                            for s in w.stark_breakpoints() {
                                let phi = s.clamp(0.0, 1.0).sqrt().asin();
                                pts.push(wrap_phase(phi - b.slip));
                                pts.push(wrap_phase(-phi - b.slip));
                            }
                        }
                        pts.push(wrap_phase(-b.slip));
                        pts.push(wrap_phase(FRAC_PI_2 - b.slip));
                        pts.extend_from_slice(extra_theta_points);
                        pts.push(0.0);
                        let pts = prepare_breakpoints(pts, THETA_LO, THETA_HI);
                        let r = integrate(
                            |theta| {
                                let site = Site::new(theta, b.slip);
                                let w = weight(site.stark);
                                if w == 0.0 {
                                    return [0.0; N];
                                }
                                f(&site).map(|x| x * w)
                            },
                            &pts,
                            quad_options(),
                        );
                        r.value.map(|x| x * b.weight / PI)
                    })
                    .collect();
                let mut out = [0.0; N];
                for p in parts {
                    for i in 0..N {
                        out[i] += p[i];
                    }
                }
                out
            }
        }
    }

    /// Expectation of `f` under the (normalized) density.
    pub fn expect<const N: usize, F>(&self, f: F) -> [f64; N]
    where
        F: Fn(&Site) -> [f64; N] + Sync,
    {
        let v = self.integrate_unnormalized(&[], &[], f);
        v.map(|x| x / self.mass)
    }

    /// `(⟨η⟩, ⟨η²⟩)`.
    pub fn moments(&self) -> (f64, f64) {
        let [m1, m2] = self.expect(|s| [s.eta, s.eta * s.eta]);
        (m1, m2)
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }

    pub fn variance(&self) -> f64 {
        let (m1, m2) = self.moments();
        (m2 - m1 * m1).max(0.0)
    }

    /// Cumulative distribution `𝒞(η)`.
    pub fn cdf(&self, eta: f64) -> f64 {
        if eta <= 0.0 {
            return 0.0;
        }
        if eta >= 1.0 {
            return 1.0;
        }
        if let Prior::PointMass { eta: e0 } = self.prior {
            return if e0 <= eta { 1.0 } else { 0.0 };
        }
        // η ≤ x  ⇔  |θ| ≥ arccos(√x)
        let cut = eta.sqrt().acos();
        let v = self.integrate_unnormalized(&[], &[-cut, cut], |s| [if s.theta.abs() >= cut { 1.0 } else { 0.0 }]);
        (v[0] / self.mass).clamp(0.0, 1.0)
    }

    /// Density value `P(η)` for `η ∈ (0, 1)`. Point masses have no density.
    pub fn pdf(&self, eta: f64) -> f64 {
        let Prior::Arcsine { branches } = &self.prior else {
            return 0.0;
        };
        if !(eta > 0.0 && eta < 1.0) {
            return f64::INFINITY;
        }
        let theta0 = eta.sqrt().acos();
        let jac = 1.0 / (2.0 * PI * (eta * (1.0 - eta)).sqrt());
        let weight = |s: f64| -> f64 { self.windows.iter().map(|w| w.smoothed(s)).product::<f64>() * self.scale };
        let sum: f64 = branches
            .iter()
            .map(|b| {
                let plus = weight((theta0 + b.slip).sin().powi(2));
                let minus = weight((-theta0 + b.slip).sin().powi(2));
                b.weight * (plus + minus)
            })
            .sum();
        jac * sum / self.mass
    }

    /// Samples `pdf` and `cdf` at `n` interior points of `(0, 1)`.
    pub fn tabulate(&self, n: usize) -> TabulatedDensity {
        let eta: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let pdf = eta.iter().map(|&e| self.pdf(e)).collect();
        let mut cdf: Vec<f64> = eta.par_iter().map(|&e| self.cdf(e)).collect();
        // enforce monotonicity against quadrature jitter
        for i in 1..cdf.len() {
            if cdf[i] < cdf[i - 1] {
                cdf[i] = cdf[i - 1];
            }
        }
        TabulatedDensity { eta, pdf, cdf }
    }
}

/// Analytic arcsine CDF `(2/π)·arcsin(√η)`.
pub fn arcsine_cdf(eta: f64) -> f64 {
    (2.0 / PI) * eta.clamp(0.0, 1.0).sqrt().asin()
}

/// Analytic arcsine density.
pub fn arcsine_pdf(eta: f64) -> f64 {
    1.0 / (PI * (eta * (1.0 - eta)).sqrt())
}
