//! Coupling statistics, trade-off curves and power-law scaling fits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{AtomEnsemble, CouplingDensity};
use crate::rng::{domain, StreamFamily};
use crate::selection::{select_density, PulseSpec, SelectionSequence, StepErrors};
use crate::units::AngularFrequency;

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;

/// Standard errors of the fields of [`CouplingStats`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatErrors {
    pub mean: f64,
    pub spread: f64,
    pub retained_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingStats {
    /// `η̄ = ⟨η⟩`.
    pub mean: f64,
    /// `Δη/η̄ = √(⟨η²⟩ - η̄²)/η̄`.
    pub spread: f64,
    /// `N_s/N`.
    pub retained_fraction: f64,
    /// Retained atom count; `None` for densities.
    pub n_retained: Option<usize>,
    /// Bootstrap errors; `None` for densities, which carry no sampling noise.
    pub errors: Option<StatErrors>,
}

impl CouplingStats {
    fn from_moments(m1: f64, m2: f64, retained_fraction: f64) -> Self {
        let var = (m2 - m1 * m1).max(0.0);
        Self {
            mean: m1,
            spread: if m1 > 0.0 { var.sqrt() / m1 } else { 0.0 },
            retained_fraction,
            n_retained: None,
            errors: None,
        }
    }
}

/// Statistics of a (possibly selected) density; the retained fraction is
/// the density's surviving mass.
pub fn density_stats(density: &CouplingDensity) -> Result<CouplingStats> {
    if !(density.mass() > 0.0) {
        return Err(Error::EmptyEnsemble("density has zero mass".into()));
    }
    let (m1, m2) = density.moments();
    Ok(CouplingStats::from_moments(m1, m2, density.mass()))
}

/// Statistics of the retained atoms with bootstrap standard errors.
/// `N_s/N` is taken relative to every atom in the ensemble, removed or not.
pub fn ensemble_stats(ens: &AtomEnsemble, resamples: usize, seed: u64) -> Result<CouplingStats> {
    let etas = ens.retained_etas();
    if etas.is_empty() {
        return Err(Error::EmptyEnsemble("no retained atoms".into()));
    }
    let n = etas.len();
    let fraction = n as f64 / ens.len() as f64;
    let (m1, m2) = raw_moments(&etas);
    let mut stats = CouplingStats::from_moments(m1, m2, fraction);
    stats.n_retained = Some(n);

    if resamples >= 2 {
        let family = StreamFamily::new(seed, &[domain::BOOTSTRAP]);
        let draws: Vec<(f64, f64)> = (0..resamples)
            .into_par_iter()
            .map(|b| {
                let mut rng = family.stream(b as u64);
                let (mut s1, mut s2) = (0.0, 0.0);
                for _ in 0..n {
                    let e = etas[rng.random_range(0..n)];
                    s1 += e;
                    s2 += e * e;
                }
                let s = CouplingStats::from_moments(s1 / n as f64, s2 / n as f64, fraction);
                (s.mean, s.spread)
            })
            .collect();
        let sd = |f: &dyn Fn(&(f64, f64)) -> f64| {
            let m = draws.iter().map(f).sum::<f64>() / resamples as f64;
            (draws.iter().map(|d| (f(d) - m).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt()
        };
        stats.errors = Some(StatErrors {
            mean: sd(&|d| d.0),
            spread: sd(&|d| d.1),
            retained_fraction: (fraction * (1.0 - fraction) / ens.len() as f64).sqrt(),
        });
    }
    Ok(stats)
}

fn raw_moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|e| e * e).sum();
    (s1 / n, s2 / n)
}

/// Shape of a selection sequence with the overall `Ω/δs` left free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceTemplate {
    /// Per-pulse Rabi frequency relative to the swept ratio.
    pub rabi_multipliers: Vec<f64>,
    /// Resonant Stark fraction `δm/δs`, shared by all pulses.
    pub eta_c: f64,
    pub repump_between: bool,
    pub errors: StepErrors,
}

impl SequenceTemplate {
    /// `pulses` identical pulses.
    pub fn identical(pulses: usize, eta_c: f64) -> Self {
        Self::with_multipliers(vec![1.0; pulses], eta_c)
    }

    pub fn with_multipliers(rabi_multipliers: Vec<f64>, eta_c: f64) -> Self {
        Self {
            rabi_multipliers,
            eta_c,
            repump_between: true,
            errors: StepErrors::default(),
        }
    }

    /// Concrete sequence at `Ω/δs = ratio` for a given peak Stark shift.
    pub fn instantiate(&self, ratio: f64, stark: AngularFrequency) -> Result<SelectionSequence> {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return invalid(format!("Rabi/Stark ratio must be positive, got {ratio}"));
        }
        let pulses = self
            .rabi_multipliers
            .iter()
            .map(|m| PulseSpec::from_ratio(ratio * m, self.eta_c, stark))
            .collect::<Result<Vec<_>>>()?;
        let mut seq = SelectionSequence::new(pulses)?.with_errors(self.errors)?;
        seq.repump_between = self.repump_between;
        Ok(seq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub ratio: f64,
    pub retained_fraction: f64,
    pub mean: f64,
    pub spread: f64,
}

/// Stark shift used when a computation is scale-free in `δs`.
pub(crate) const NOMINAL_STARK: AngularFrequency = AngularFrequency(2.0 * std::f64::consts::PI * 32.7e3);

/// One density-pipeline statistics triple per ratio, in grid order.
pub fn tradeoff_curve(
    prior: &CouplingDensity,
    template: &SequenceTemplate,
    ratio_grid: &[f64],
) -> Result<Vec<TradeoffPoint>> {
    if ratio_grid.is_empty() {
        return invalid("ratio grid is empty");
    }
    ratio_grid
        .par_iter()
        .map(|&ratio| {
            let seq = template.instantiate(ratio, NOMINAL_STARK)?;
            let (d, fraction) = select_density(prior, &seq)?;
            let s = density_stats(&d)?;
            Ok(TradeoffPoint {
                ratio,
                retained_fraction: fraction,
                mean: s.mean,
                spread: s.spread,
            })
        })
        .collect()
}

/// `n` log-spaced points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return invalid(format!("bad log grid [{lo}, {hi}] x {n}"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// `40` log-spaced ratios over `[0.01, 0.5]`.
pub fn default_ratio_grid() -> Vec<f64> {
    log_grid(0.01, 0.5, 40).expect("static grid")
}

pub const DEFAULT_FIT_RANGE: (f64, f64) = (1e-3, 0.1);

/// `y = A·x^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub fit_range: (f64, f64),
    /// RMS residual in `ln y`.
    pub residual_norm: f64,
    pub n_points: usize,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }
}

/// Unweighted least squares on `(ln x, ln y)` over points with `x` inside
/// `range` (inclusive).
pub fn fit_power_law(points: &[(f64, f64)], range: (f64, f64)) -> Result<PowerLawFit> {
    fit_power_law_weighted(points, None, range)
}

/// As [`fit_power_law`], with optional per-point weights on the log residuals.
pub fn fit_power_law_weighted(points: &[(f64, f64)], weights: Option<&[f64]>, range: (f64, f64)) -> Result<PowerLawFit> {
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(Error::Fit("weights and points differ in length".into()));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (i, &(x, y)) in points.iter().enumerate() {
        if !(x >= range.0 && x <= range.1) {
            continue;
        }
        if !(y > 0.0) {
            return Err(Error::Fit(format!("non-positive value {y} at x = {x}")));
        }
        xs.push(x.ln());
        ys.push(y.ln());
        ws.push(weights.map_or(1.0, |w| w[i]));
    }
    if xs.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points in [{}, {}], found {}",
            range.0,
            range.1,
            xs.len()
        )));
    }
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), w) in xs.iter().zip(&ys).zip(&ws) {
        sxx += w * (x - mx).powi(2);
        sxy += w * (x - mx) * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::Fit("all points share the same x".into()));
    }
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icept - slope * x).powi(2))
        .sum();
    Ok(PowerLawFit {
        prefactor: icept.exp(),
        exponent: slope,
        fit_range: range,
        residual_norm: (rss / xs.len() as f64).sqrt(),
        n_points: xs.len(),
    })
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::unselected_density;

    #[test]
    fn arcsine_stats() {
        let s = density_stats(&unselected_density()).unwrap();
        assert!((s.mean - 0.5).abs() < 1e-12);
        assert!((s.spread - 0.5f64.sqrt()).abs() < 1e-10);
        assert_eq!(s.retained_fraction, 1.0);
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.001, 0.003, 0.01, 0.03, 0.09].iter().map(|&x| (x, 2.0 * x * x)).collect();
        let f = fit_power_law(&pts, DEFAULT_FIT_RANGE).unwrap();
        assert!((f.prefactor - 2.0).abs() < 1e-12);
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!(f.residual_norm < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let pts = [(0.01, 1.0), (0.02, 2.0)];
        assert!(matches!(fit_power_law(&pts, DEFAULT_FIT_RANGE), Err(Error::Fit(_))));
        let pts = [(0.01, 1.0), (0.02, 0.0), (0.03, 2.0)];
        assert!(matches!(fit_power_law(&pts, DEFAULT_FIT_RANGE), Err(Error::Fit(_))));
        // out-of-range points are ignored, including bad ones
        let pts = [(0.5, -1.0), (0.01, 1.0), (0.02, 2.0), (0.04, 4.0)];
        assert!(fit_power_law(&pts, DEFAULT_FIT_RANGE).is_ok());
    }

    #[test]
    fn empty_ensemble_is_an_error() {
        let e = AtomEnsemble::from_atoms(vec![], 0);
        assert!(matches!(ensemble_stats(&e, 10, 0), Err(Error::EmptyEnsemble(_))));
    }

    #[test]
    fn wide_window_keeps_everything() {
        let pts = tradeoff_curve(&unselected_density(), &SequenceTemplate::identical(1, 0.0), &[50.0]).unwrap();
        assert!(pts[0].retained_fraction > 0.99);
        assert!((pts[0].mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let sample: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_distance(&sample, |x| x) - 0.5 / n as f64).abs() < 1e-12);
    }
}
