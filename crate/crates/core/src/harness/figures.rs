//! Canned configurations, one per reproducible figure panel.

use std::fmt;
use std::str::FromStr;

use super::config::{CurveConfig, PriorKind, Quantity, RunConfig, Scenario};
use super::Job;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2a,
    Fig2b,
    Fig2c,
    Fig2d,
    Fig3a,
    Fig3b,
    Fig3c,
    Fig3d,
    Fig4b,
    Fig4c,
    Fig4dInset,
}

/// Ratio grid for the trade-off figures: wide enough on the low side that
/// `N_s/N` covers the whole fit range for every curve.
pub const TRADEOFF_RATIO_RANGE: (f64, f64) = (1e-7, 0.5);
pub const TRADEOFF_POINTS: usize = 60;

/// Stark shift that puts a 2.04 kHz Rabi frequency at `Ω/δs = 0.08`.
pub const OPTOMECH_STARK_HZ: f64 = 2040.0 / 0.08;

impl Figure {
    pub const ALL: [Figure; 11] = [
        Figure::Fig2a,
        Figure::Fig2b,
        Figure::Fig2c,
        Figure::Fig2d,
        Figure::Fig3a,
        Figure::Fig3b,
        Figure::Fig3c,
        Figure::Fig3d,
        Figure::Fig4b,
        Figure::Fig4c,
        Figure::Fig4dInset,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig2c => "fig2c",
            Figure::Fig2d => "fig2d",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig3c => "fig3c",
            Figure::Fig3d => "fig3d",
            Figure::Fig4b => "fig4b",
            Figure::Fig4c => "fig4c",
            Figure::Fig4dInset => "fig4d-inset",
        }
    }

    pub fn jobs(self) -> Vec<Job> {
        let base = RunConfig::default();
        match self {
            Figure::Fig2a | Figure::Fig2b => {
                let mut c = tradeoff_base(0.0, 3);
                c.tradeoff.curves.push(CurveConfig {
                    label: "2-pulse-varying".into(),
                    pulses: 2,
                    eta_c: 0.0,
                    rabi_multipliers: vec![1.0, std::f64::consts::SQRT_2],
                });
                c.fit.quantities = vec![if self == Figure::Fig2a {
                    Quantity::OneMinusMeanEta
                } else {
                    Quantity::Spread
                }];
                vec![Job::new(Scenario::Tradeoff, c.clone()), Job::new(Scenario::Fit, c)]
            }
            Figure::Fig2c => {
                let mut c = base;
                c.tradeoff.window_ratios = vec![0.02, 0.05, 0.1, 0.2, 0.5];
                vec![Job::new(Scenario::Tradeoff, c)]
            }
            Figure::Fig2d => {
                let mut c = tradeoff_base(0.5, 3);
                c.fit.quantities = vec![Quantity::Spread];
                vec![Job::new(Scenario::Tradeoff, c.clone()), Job::new(Scenario::Fit, c)]
            }
            Figure::Fig3a | Figure::Fig3b => {
                // probe with the selection Rabi frequency, Stark beam on and off
                let mut c = base;
                c.spectrum.probe_rabi_hz = c.selection.rabi_hz;
                c.spectrum.stark_off_reference = self == Figure::Fig3a;
                vec![Job::new(Scenario::Spectrum, c)]
            }
            Figure::Fig3c => {
                let mut c = base;
                c.selection.pulses = 2;
                c.spectrum.selections = vec![1, 2];
                vec![Job::new(Scenario::Spectrum, c.clone()), Job::new(Scenario::Invert, c)]
            }
            Figure::Fig3d => vec![Job::new(Scenario::Fluorescence, base)],
            Figure::Fig4b => vec![Job::new(Scenario::OptomechToggle, optomech_base())],
            Figure::Fig4c => vec![Job::new(Scenario::PositionScan, optomech_base())],
            Figure::Fig4dInset => {
                let mut c = optomech_base();
                c.radial.selected = true;
                vec![Job::new(Scenario::Radial, c)]
            }
        }
    }
}

fn tradeoff_base(eta_c: f64, max_pulses: usize) -> RunConfig {
    let mut c = RunConfig::default();
    c.tradeoff.ratio_min = TRADEOFF_RATIO_RANGE.0;
    c.tradeoff.ratio_max = TRADEOFF_RATIO_RANGE.1;
    c.tradeoff.points = TRADEOFF_POINTS;
    c.tradeoff.curves = (1..=max_pulses).map(|n| CurveConfig::identical(n, eta_c)).collect();
    c
}

/// Double selection at `δm = 0`, `Ω/δs = 0.08`, finite cloud.
fn optomech_base() -> RunConfig {
    let mut c = RunConfig::default();
    c.selection.pulses = 2;
    c.selection.detuning_hz = 0.0;
    c.selection.stark_hz = OPTOMECH_STARK_HZ;
    c.ensemble.prior = PriorKind::FiniteExtent;
    c
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL.into_iter().find(|x| x.tag() == s).ok_or_else(|| {
            let tags: Vec<_> = Figure::ALL.iter().map(|x| x.tag()).collect();
            format!("unknown figure '{s}' (expected one of: {})", tags.join(", "))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for f in Figure::ALL {
            assert_eq!(f.tag().parse::<Figure>().unwrap(), f);
        }
        assert!("fig9z".parse::<Figure>().is_err());
    }

    #[test]
    fn canned_configs_validate() {
        for f in Figure::ALL {
            for j in f.jobs() {
                j.config.validate("").unwrap_or_else(|e| panic!("{f}: {e}"));
            }
        }
    }
}
