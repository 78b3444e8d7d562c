//! Microwave π-pulse selection: the transfer window, blow-away, repump and
//! multi-pulse schedules, over particle ensembles or analytic densities.
//!
//! Sign convention: an atom with Stark fraction `s` has its microwave
//! transition shifted by `s·δs`, so a pulse at detuning `δm` is detuned from
//! that atom by `δm - s·δs`. Positive `δm` therefore moves the resonance into
//! the physical range `s ∈ [0, 1]` ("same sign as the Stark shift"); `δm = 0`
//! is resonant with atoms on Stark nodes, which are the probe antinodes.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{AtomEnsemble, CouplingDensity, Spin};
use crate::rng::{domain, StreamFamily};
use crate::units::AngularFrequency;

/// Spin-flip probability of a square π-pulse (duration π/Ω) as a function
/// of the normalized detuning `u = Δ/Ω`.
pub fn rabi_transfer(u: f64) -> f64 {
    let g2 = 1.0 + u * u;
    let s = (FRAC_PI_2 * g2.sqrt()).sin();
    s * s / g2
}

/// Transfer probability for coordinate `eta` under a π-pulse resonant at
/// `eta_c = δm/δs`, with detuning `Δ = (η_c - η)·δs`.
pub fn transfer_probability(
    eta_c: f64,
    eta: f64,
    rabi: AngularFrequency,
    stark: AngularFrequency,
) -> Result<f64> {
    if !(rabi.0 > 0.0 && rabi.0.is_finite()) {
        return invalid(format!("Rabi frequency must be positive, got {}", rabi.0));
    }
    if !(stark.0 >= 0.0 && stark.0.is_finite()) {
        return invalid(format!("peak Stark shift must be non-negative, got {}", stark.0));
    }
    let detuning = (eta_c - eta) * stark.0;
    Ok(rabi_transfer(detuning / rabi.0))
}

/// Normalized detuning beyond which the window's `sin²` factor is replaced
/// by its mean of 1/2 inside density quadrature. Only the far Lorentzian
/// tails are affected; their oscillating remainder integrates to
/// `O(1/U²)` of the tail weight.
pub const TAIL_AVERAGING_CUTOFF: f64 = 200.0;

/// Per-atom survival weight of one selection step, as a function of the Stark
/// fraction: `floor + (1 - floor)·F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkWindow {
    /// Microwave detuning `δm` (rad/s).
    pub detuning: f64,
    /// Peak Stark shift `δs` (rad/s).
    pub stark: f64,
    /// Rabi frequency `Ω` (rad/s).
    pub rabi: f64,
    /// Probability that an atom which did not flip survives anyway.
    pub floor: f64,
}

impl StarkWindow {
    pub fn normalized_detuning(&self, stark_fraction: f64) -> f64 {
        (self.detuning - stark_fraction * self.stark) / self.rabi
    }

    pub fn exact(&self, stark_fraction: f64) -> f64 {
        let f = rabi_transfer(self.normalized_detuning(stark_fraction));
        self.floor + (1.0 - self.floor) * f
    }

    /// Window with far tails replaced by their cycle average; used by the
    /// density pipeline.
    pub fn smoothed(&self, stark_fraction: f64) -> f64 {
        let u = self.normalized_detuning(stark_fraction);
        let f = if u.abs() > TAIL_AVERAGING_CUTOFF {
            0.5 / (1.0 + u * u)
        } else {
            rabi_transfer(u)
        };
        self.floor + (1.0 - self.floor) * f
    }

    /// Stark fractions where the window changes character: the resonance,
    /// a ladder of widths around it, and the tail-averaging cutoffs.
    pub fn stark_breakpoints(&self) -> Vec<f64> {
        if self.stark <= 0.0 {
            return Vec::new();
        }
        const LADDER: [f64; 13] = [
            -TAIL_AVERAGING_CUTOFF,
            -60.0,
            -20.0,
            -6.0,
            -2.0,
            -1.0,
            0.0,
            1.0,
            2.0,
            6.0,
            20.0,
            60.0,
            TAIL_AVERAGING_CUTOFF,
        ];
        LADDER
            .iter()
            .map(|k| (self.detuning + k * self.rabi) / self.stark)
            .filter(|s| *s > 0.0 && *s < 1.0)
            .collect()
    }
}

/// One microwave π-pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub rabi: AngularFrequency,
    pub detuning: AngularFrequency,
    pub stark: AngularFrequency,
}

impl PulseSpec {
    pub fn new(rabi: AngularFrequency, detuning: AngularFrequency, stark: AngularFrequency) -> Result<Self> {
        let p = Self { rabi, detuning, stark };
        p.validate()?;
        Ok(p)
    }

    /// Pulse with `Ω/δs = ratio` and `δm = eta_c·δs`.
    pub fn from_ratio(ratio: f64, eta_c: f64, stark: AngularFrequency) -> Result<Self> {
        Self::new(stark * ratio, stark * eta_c, stark)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi.0 > 0.0 && self.rabi.0.is_finite()) {
            return invalid(format!("Rabi frequency must be positive, got {} Hz", self.rabi.hz()));
        }
        if !(self.stark.0 >= 0.0 && self.stark.0.is_finite()) {
            return invalid("peak Stark shift must be non-negative");
        }
        if !self.detuning.0.is_finite() {
            return invalid("microwave detuning must be finite");
        }
        Ok(())
    }

    /// π-pulse duration `π/Ω` (s).
    pub fn duration(&self) -> f64 {
        std::f64::consts::PI / self.rabi.0
    }

    /// `η_c = δm/δs`, `None` with the Stark beam off.
    pub fn eta_c(&self) -> Option<f64> {
        (self.stark.0 > 0.0).then(|| self.detuning / self.stark)
    }

    pub fn window(&self, floor: f64) -> StarkWindow {
        StarkWindow {
            detuning: self.detuning.0,
            stark: self.stark.0,
            rabi: self.rabi.0,
            floor,
        }
    }

    /// Flip probability for an atom with the given Stark fraction.
    pub fn flip_probability(&self, stark_fraction: f64) -> f64 {
        self.window(0.0).exact(stark_fraction)
    }
}

/// Imperfections of the blow-away and repump steps. Both default to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct StepErrors {
    /// Probability that an atom in the blown-away state survives.
    pub blow_away_survival: f64,
    /// Probability that a retained atom is lost during repumping.
    pub repump_loss: f64,
}

impl StepErrors {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("blow_away_survival", self.blow_away_survival),
            ("repump_loss", self.repump_loss),
        ] {
            if !(0.0..1.0).contains(&v) {
                return invalid(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSequence {
    pulses: Vec<PulseSpec>,
    pub repump_between: bool,
    pub errors: StepErrors,
}

impl SelectionSequence {
    pub fn new(pulses: Vec<PulseSpec>) -> Result<Self> {
        if pulses.is_empty() {
            return invalid("a selection sequence needs at least one pulse");
        }
        for p in &pulses {
            p.validate()?;
        }
        Ok(Self {
            pulses,
            repump_between: true,
            errors: StepErrors::default(),
        })
    }

    /// `count` identical pulses.
    pub fn repeated(pulse: PulseSpec, count: usize) -> Result<Self> {
        Self::new(vec![pulse; count])
    }

    pub fn with_errors(mut self, errors: StepErrors) -> Result<Self> {
        errors.validate()?;
        self.errors = errors;
        Ok(self)
    }

    pub fn pulses(&self) -> &[PulseSpec] {
        &self.pulses
    }
}

/// Flips every spin-up atom with probability `F`. Atoms already in the down
/// state are a precondition violation; removed atoms are ignored.
pub fn apply_pulse_particles(ens: &AtomEnsemble, pulse: &PulseSpec, seed: u64) -> Result<AtomEnsemble> {
    pulse.validate()?;
    if ens.atoms.iter().any(|a| a.spin == Spin::Down) {
        return Err(Error::PreconditionViolation(
            "pulse applied to an ensemble with spin-down atoms; repump first".into(),
        ));
    }
    Ok(flip(ens, pulse, seed, 0))
}

fn flip(ens: &AtomEnsemble, pulse: &PulseSpec, seed: u64, pulse_index: u64) -> AtomEnsemble {
    let family = StreamFamily::new(seed, &[domain::PULSE, pulse_index]);
    let atoms = ens
        .atoms
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut a = *a;
            if a.spin == Spin::Removed {
                return a;
            }
            let p = pulse.flip_probability(a.stark);
            // draw for every live atom so streams stay aligned
            let u: f64 = family.stream(i as u64).random();
            if u < p {
                a.spin = match a.spin {
                    Spin::Up => Spin::Down,
                    _ => Spin::Up,
                };
            }
            a
        })
        .collect();
    AtomEnsemble {
        atoms,
        seed: ens.seed,
    }
}

/// Removes every spin-up atom. Idempotent.
pub fn blow_away(ens: &AtomEnsemble) -> AtomEnsemble {
    remove_state(ens, Spin::Up, 0.0, 0, 0)
}

fn remove_state(ens: &AtomEnsemble, target: Spin, survival: f64, seed: u64, step: u64) -> AtomEnsemble {
    let family = (survival > 0.0).then(|| StreamFamily::new(seed, &[domain::BLOW_AWAY, step]));
    let atoms = ens
        .atoms
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut a = *a;
            if a.spin == target {
                let survives = match &family {
                    Some(f) => f.stream(i as u64).random::<f64>() < survival,
                    None => false,
                };
                if !survives {
                    a.spin = Spin::Removed;
                }
            }
            a
        })
        .collect();
    AtomEnsemble {
        atoms,
        seed: ens.seed,
    }
}

/// Optically pumps every retained atom back to spin up.
pub fn repump(ens: &AtomEnsemble) -> AtomEnsemble {
    repump_with_loss(ens, 0.0, 0, 0)
}

fn repump_with_loss(ens: &AtomEnsemble, loss: f64, seed: u64, step: u64) -> AtomEnsemble {
    let family = (loss > 0.0).then(|| StreamFamily::new(seed, &[domain::REPUMP, step]));
    let atoms = ens
        .atoms
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut a = *a;
            if a.spin != Spin::Removed {
                a.spin = Spin::Up;
                if let Some(f) = &family {
                    if f.stream(i as u64).random::<f64>() < loss {
                        a.spin = Spin::Removed;
                    }
                }
            }
            a
        })
        .collect();
    AtomEnsemble {
        atoms,
        seed: ens.seed,
    }
}

/// Runs pulse → blow-away → repump for every pulse. Survivors end spin up.
///
/// Without `repump_between`, survivors stay in the flipped state and the next
/// pulse flips them back, so the blow-away alternates between the two spin
/// states.
pub fn run_sequence(ens: &AtomEnsemble, seq: &SelectionSequence, seed: u64) -> Result<AtomEnsemble> {
    if ens.atoms.iter().any(|a| a.spin == Spin::Down) {
        return Err(Error::PreconditionViolation(
            "selection must start from spin-up atoms".into(),
        ));
    }
    let mut cur = ens.clone();
    let mut unflipped = Spin::Up;
    for (k, pulse) in seq.pulses.iter().enumerate() {
        let k = k as u64;
        cur = flip(&cur, pulse, seed, k);
        cur = remove_state(&cur, unflipped, seq.errors.blow_away_survival, seed, k);
        if seq.repump_between {
            cur = repump_with_loss(&cur, seq.errors.repump_loss, seed, k);
        } else {
            unflipped = match unflipped {
                Spin::Up => Spin::Down,
                _ => Spin::Up,
            };
        }
    }
    if !seq.repump_between {
        cur = repump(&cur);
    }
    Ok(cur)
}

/// Retained-fraction floor for [`select_density`].
pub const DEFAULT_DEGENERATE_FLOOR: f64 = 1e-9;

/// Applies a sequence to a coupling density by quadrature. Returns the
/// normalized selected density and the retained fraction `∫P·ΠF dη`.
pub fn select_density(density: &CouplingDensity, seq: &SelectionSequence) -> Result<(CouplingDensity, f64)> {
    select_density_with_floor(density, seq, DEFAULT_DEGENERATE_FLOOR)
}

pub fn select_density_with_floor(
    density: &CouplingDensity,
    seq: &SelectionSequence,
    floor: f64,
) -> Result<(CouplingDensity, f64)> {
    let windows: Vec<StarkWindow> = seq
        .pulses
        .iter()
        .map(|p| p.window(seq.errors.blow_away_survival))
        .collect();
    let survival = (1.0 - seq.errors.repump_loss).powi(seq.pulses.len() as i32);
    let selected = density.with_windows(&windows, survival);
    let fraction = selected.mass() / density.mass();
    if !(fraction >= floor) {
        return Err(Error::DegenerateSelection { fraction, floor });
    }
    Ok((selected, fraction))
}
