//! Dressed-cavity microwave spectra: forward synthesis, inversion to a
//! discrete coupling density, and the fluorescence-slope estimate of `η̄`.
//!
//! A spectroscopy π-pulse at detuning `δm` flips atoms whose Stark fraction
//! is near `δm/δs`. With the Stark mode anti-aligned to the probe that
//! fraction is `1 - η`, so the spectrum maps onto coupling through
//! `η = 1 - δm/δs`. The flipped atoms shift the cavity by
//! `N·δωc0·∫ η P(η) F dη`.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{AtomEnsemble, CouplingDensity};
use crate::quadrature::{integrate, QuadOptions};
use crate::rng::{domain, StreamFamily};
use crate::selection::{rabi_transfer, StarkWindow};
use crate::units::AngularFrequency;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub detuning: Vec<AngularFrequency>,
    pub shift: Vec<AngularFrequency>,
    pub probe_rabi: AngularFrequency,
    pub stark: AngularFrequency,
    pub atom_count: f64,
    pub single_atom_shift: AngularFrequency,
}

impl Spectrum {
    /// Coupling coordinate of each grid point, `1 - δm/δs`.
    pub fn eta_axis(&self) -> Vec<f64> {
        self.detuning.iter().map(|d| 1.0 - *d / self.stark).collect()
    }
}

/// `∫F(u) du` over the whole detuning axis, for the square π-pulse window
/// in units of `Ω`.
pub fn window_area() -> f64 {
    static AREA: OnceLock<f64> = OnceLock::new();
    *AREA.get_or_init(|| {
        // Split at the zeros of sin²(π/2·√(1+u²)), i.e. √(1+u²) = 2k.
        const K: usize = 2000;
        let mut pts = vec![0.0];
        pts.extend((1..=K).map(|k| ((2.0 * k as f64).powi(2) - 1.0).sqrt()));
        let r = integrate(|u| [rabi_transfer(u)], &pts, QuadOptions::default());
        let cut = *pts.last().unwrap();
        // Beyond a zero the oscillating part of the tail integrates to O(cut⁻³).
        let tail = 0.5 * (FRAC_PI_2 - cut.atan());
        2.0 * (r.value[0] + tail)
    })
}

/// Detunings covering `[lo, hi]·δs` in `n` points.
pub fn detuning_grid(stark: AngularFrequency, lo: f64, hi: f64, n: usize) -> Result<Vec<AngularFrequency>> {
    if n < 2 || !(hi > lo) {
        return invalid(format!("bad detuning grid [{lo}, {hi}] x {n}"));
    }
    Ok((0..n)
        .map(|i| stark * (lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect())
}

/// 201 points over `[-0.2, 1.2]·δs`.
pub fn default_detuning_grid(stark: AngularFrequency) -> Vec<AngularFrequency> {
    detuning_grid(stark, -0.2, 1.2, 201).expect("static grid")
}

pub fn synthesize_spectrum(
    density: &CouplingDensity,
    probe_rabi: AngularFrequency,
    stark: AngularFrequency,
    detuning: &[AngularFrequency],
    atom_count: f64,
    single_atom_shift: AngularFrequency,
) -> Result<Spectrum> {
    if !(probe_rabi.0 > 0.0 && probe_rabi.0.is_finite()) {
        return invalid(format!("probe Rabi frequency must be positive, got {}", probe_rabi.0));
    }
    if !(stark.0 >= 0.0) {
        return invalid("peak Stark shift must be non-negative");
    }
    if !(atom_count >= 0.0) {
        return invalid("atom count must be non-negative");
    }
    let scale = atom_count * single_atom_shift.0 / density.mass();
    let shift = detuning
        .par_iter()
        .map(|d| {
            let w = StarkWindow {
                detuning: d.0,
                stark: stark.0,
                rabi: probe_rabi.0,
                floor: 0.0,
            };
            let v = density.integrate_unnormalized(&[w], &[], |s| [s.eta])[0];
            AngularFrequency(scale * v)
        })
        .collect();
    Ok(Spectrum {
        detuning: detuning.to_vec(),
        shift,
        probe_rabi,
        stark,
        atom_count,
        single_atom_shift,
    })
}

pub const DEFAULT_TRUNCATION: (f64, f64) = (0.4, 1.0);

/// Piecewise-constant density on cells around the grid couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDensity {
    pub eta: Vec<f64>,
    /// Density values, normalized so `Σ weight·width = 1`.
    pub weights: Vec<f64>,
    /// Cell widths, clipped to the truncation range.
    pub widths: Vec<f64>,
    pub truncation: (f64, f64),
}

impl DiscreteDensity {
    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn spread(&self) -> f64 {
        let m = self.mean();
        (self.moment(2) - m * m).max(0.0).sqrt() / m
    }

    fn moment(&self, k: i32) -> f64 {
        self.eta
            .iter()
            .zip(&self.weights)
            .zip(&self.widths)
            .map(|((e, w), d)| e.powi(k) * w * d)
            .sum()
    }

    /// Coupling of the largest density value.
    pub fn peak(&self) -> f64 {
        let i = self
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.eta[i]
    }

    /// Total absolute difference between cell masses and those of a
    /// reference distribution restricted to the truncation range.
    pub fn l1_error(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let (a, b) = self.truncation;
        let z = cdf(b) - cdf(a);
        self.cells()
            .zip(&self.weights)
            .map(|((lo, hi), w)| {
                let width = hi - lo;
                (w * width - (cdf(hi) - cdf(lo)) / z).abs()
            })
            .sum()
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (a, b) = self.truncation;
        self.eta.iter().zip(&self.widths).map(move |(e, w)| {
            // widths were clipped symmetrically except at the range ends
            let lo = (e - 0.5 * w).max(a);
            let hi = (lo + w).min(b);
            (lo, hi)
        })
    }
}

/// Inverts a spectrum in the delta-window approximation: divide by `η` and
/// by `N·δωc0·W` with `W = (Ωp/δs)·∫F du`, keep couplings inside
/// `truncation` (exclusive below, inclusive above), renormalize.
pub fn invert_spectrum(s: &Spectrum, truncation: (f64, f64)) -> Result<DiscreteDensity> {
    if !(s.stark.0 > 0.0) {
        return Err(Error::Inversion("inversion needs a non-zero Stark shift".into()));
    }
    let (a, b) = truncation;
    if !(0.0 <= a && a < b && b <= 1.0) {
        return invalid(format!("bad truncation range ({a}, {b}]"));
    }
    let eta_axis = s.eta_axis();
    let step = if eta_axis.len() > 1 {
        (eta_axis[0] - eta_axis[1]).abs()
    } else {
        0.0
    };
    let norm = s.atom_count * s.single_atom_shift.0 * (s.probe_rabi / s.stark) * window_area();

    let mut eta = Vec::new();
    let mut raw = Vec::new();
    let mut widths = Vec::new();
    for (e, v) in eta_axis.iter().zip(&s.shift) {
        let e = *e;
        if !(e > a + 1e-12 && e <= b + 1e-12) {
            continue;
        }
        let lo = (e - 0.5 * step).max(a);
        let hi = (e + 0.5 * step).min(b);
        eta.push(e.min(b));
        raw.push(if norm > 0.0 { v.0 / (e * norm) } else { 0.0 });
        widths.push((hi - lo).max(0.0));
    }
    if eta.is_empty() {
        return Err(Error::Inversion(format!("no spectrum points map into ({a}, {b}]")));
    }
    let area: f64 = raw.iter().zip(&widths).map(|(r, w)| r * w).sum();
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::Inversion("spectrum has no weight inside the truncation range".into()));
    }
    Ok(DiscreteDensity {
        eta,
        weights: raw.iter().map(|r| r / area).collect(),
        widths,
        truncation,
    })
}

/// Fluorescence count model: proportional to atom number, with optional
/// Gaussian relative noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluorescenceModel {
    pub counts_per_atom: f64,
    /// Relative standard deviation of the counts; zero for noiseless.
    pub relative_noise: f64,
    /// Fit `counts = a·shift + b` instead of a line through the origin.
    pub intercept: bool,
}

impl Default for FluorescenceModel {
    fn default() -> Self {
        Self {
            counts_per_atom: 1.0,
            relative_noise: 0.01,
            intercept: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluorescenceResult {
    /// Counts per Hz of cavity shift, unselected atoms.
    pub slope_unselected: f64,
    /// Counts per Hz of cavity shift, selected atoms.
    pub slope_selected: f64,
    /// `a_u/(2·a_s)`.
    pub eta_estimate: f64,
    /// `(shift_hz, counts)` for the unselected and selected series.
    pub unselected_points: Vec<(f64, f64)>,
    pub selected_points: Vec<(f64, f64)>,
}

/// Scales each ensemble by the loading fractions in `atom_count_grid`,
/// records (cavity shift, fluorescence) pairs and fits their slopes.
pub fn simulate_fluorescence_slopes(
    selected: &AtomEnsemble,
    unselected: &AtomEnsemble,
    single_atom_shift: AngularFrequency,
    atom_count_grid: &[f64],
    model: &FluorescenceModel,
    seed: u64,
) -> Result<FluorescenceResult> {
    let distinct = {
        let mut g = atom_count_grid.to_vec();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g.len()
    };
    if distinct < 2 {
        return Err(Error::Fit("fluorescence fit needs at least two distinct atom counts".into()));
    }
    if atom_count_grid.iter().any(|k| !(*k > 0.0)) {
        return invalid("atom count scale factors must be positive");
    }
    if !(model.relative_noise >= 0.0 && model.counts_per_atom > 0.0) {
        return invalid("fluorescence model needs positive counts and non-negative noise");
    }
    let series = |ens: &AtomEnsemble, which: u64| -> Result<Vec<(f64, f64)>> {
        let etas = ens.retained_etas();
        if etas.is_empty() {
            return Err(Error::EmptyEnsemble("fluorescence needs retained atoms".into()));
        }
        let sum_eta: f64 = etas.iter().sum();
        let n = etas.len() as f64;
        let family = StreamFamily::new(seed, &[domain::FLUORESCENCE, which]);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        Ok(atom_count_grid
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let shift = k * sum_eta * single_atom_shift.hz();
                let mut counts = k * n * model.counts_per_atom;
                if model.relative_noise > 0.0 {
                    let z: f64 = normal.sample(&mut family.stream(i as u64));
                    counts *= 1.0 + model.relative_noise * z;
                }
                (shift, counts)
            })
            .collect())
    };
    let pu = series(unselected, 0)?;
    let ps = series(selected, 1)?;
    let a_u = slope(&pu, model.intercept)?;
    let a_s = slope(&ps, model.intercept)?;
    Ok(FluorescenceResult {
        slope_unselected: a_u,
        slope_selected: a_s,
        eta_estimate: a_u / (2.0 * a_s),
        unselected_points: pu,
        selected_points: ps,
    })
}

fn slope(points: &[(f64, f64)], intercept: bool) -> Result<f64> {
    let n = points.len() as f64;
    let (mx, my) = if intercept {
        (
            points.iter().map(|p| p.0).sum::<f64>() / n,
            points.iter().map(|p| p.1).sum::<f64>() / n,
        )
    } else {
        (0.0, 0.0)
    };
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("degenerate cavity-shift axis".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{unselected_density, Atom, CavityGeometry};

    fn khz(x: f64) -> AngularFrequency {
        AngularFrequency::from_khz(x)
    }

    #[test]
    fn window_area_value() {
        assert!((window_area() - 2.116_689_385_349_401).abs() < 1e-9, "{}", window_area());
    }

    #[test]
    fn zero_atoms_give_zero_spectrum() {
        let grid = default_detuning_grid(khz(32.7));
        let s = synthesize_spectrum(&unselected_density(), khz(2.04), khz(32.7), &grid, 0.0, khz(0.15)).unwrap();
        assert!(s.shift.iter().all(|v| v.0 == 0.0));
        assert!(matches!(invert_spectrum(&s, DEFAULT_TRUNCATION), Err(Error::Inversion(_))));
    }

    #[test]
    fn rejects_bad_probe_rabi() {
        let grid = default_detuning_grid(khz(32.7));
        assert!(synthesize_spectrum(&unselected_density(), khz(0.0), khz(32.7), &grid, 1.0, khz(0.15)).is_err());
    }

    #[test]
    fn stark_off_gives_a_single_line() {
        // the δs-relative grid collapses with the beam off; use absolute detunings
        let abs: Vec<_> = (-30..=30).map(|k| khz(k as f64 * 0.5)).collect();
        let s = synthesize_spectrum(&unselected_density(), khz(2.04), AngularFrequency(0.0), &abs, 1e5, khz(0.15)).unwrap();
        let peak = s
            .shift
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .unwrap()
            .0;
        assert_eq!(abs[peak].0, 0.0);
        // η̄ = 0.5 of the atoms flip on resonance
        assert!((s.shift[peak].0 / (1e5 * khz(0.15).0) - 0.5).abs() < 1e-9);
        // the line is as wide as the window: F(1) at one Rabi frequency
        let i = abs.iter().position(|d| (d.0 - khz(2.0).0).abs() < 1.0).unwrap();
        let expected = rabi_transfer(2.0 / 2.04) * 0.5;
        assert!((s.shift[i].0 / (1e5 * khz(0.15).0) - expected).abs() < 1e-9);
    }

    #[test]
    fn no_points_in_range_is_an_inversion_error() {
        let grid = detuning_grid(khz(32.7), 0.7, 1.2, 11).unwrap();
        let s = synthesize_spectrum(&unselected_density(), khz(1.0), khz(32.7), &grid, 1.0, khz(0.15)).unwrap();
        assert!(matches!(invert_spectrum(&s, DEFAULT_TRUNCATION), Err(Error::Inversion(_))));
    }

    fn uniform_atoms(eta: f64, n: usize) -> AtomEnsemble {
        let geo = CavityGeometry::default();
        let z = eta.sqrt().acos() / geo.probe_wavenumber();
        AtomEnsemble::from_atoms((0..n).map(|_| Atom::at(z, &geo)).collect(), 0)
    }

    #[test]
    fn perfectly_coupled_atoms_give_unit_estimate() {
        let sel = uniform_atoms(1.0, 100);
        let unsel = uniform_atoms(0.5, 100);
        let model = FluorescenceModel {
            relative_noise: 0.0,
            ..Default::default()
        };
        let r = simulate_fluorescence_slopes(&sel, &unsel, khz(0.15), &[0.2, 0.6, 1.0], &model, 1).unwrap();
        assert!((r.eta_estimate - 1.0).abs() < 1e-12);
        assert!((r.slope_unselected / r.slope_selected - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_grid_is_a_fit_error() {
        let e = uniform_atoms(0.5, 10);
        let r = simulate_fluorescence_slopes(&e, &e, khz(0.15), &[1.0, 1.0], &FluorescenceModel::default(), 1);
        assert!(matches!(r, Err(Error::Fit(_))));
    }
}
