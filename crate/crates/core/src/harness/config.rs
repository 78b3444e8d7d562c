//! Run configuration: a TOML file with strict key checking.
//!
//! Frequencies are given in Hz, lengths in metres, times in seconds and
//! temperatures in kelvin; key names carry the unit suffix. Every section
//! and key is optional and falls back to the documented default, and the
//! fully resolved configuration is echoed into the run manifest.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::field::{AxialProfile, CavityGeometry, EnsembleSpec, MidPlaneSymmetry, StarkMode};
use crate::optomech::{Composition, Displacement, RadialModel, TrapModel};
use crate::selection::{PulseSpec, SelectionSequence, StepErrors};
use crate::units::{AngularFrequency, RB87_MASS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Selection,
    Tradeoff,
    Spectrum,
    Invert,
    Fluorescence,
    OptomechToggle,
    PositionScan,
    Radial,
    Fit,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::Selection,
        Scenario::Tradeoff,
        Scenario::Spectrum,
        Scenario::Invert,
        Scenario::Fluorescence,
        Scenario::OptomechToggle,
        Scenario::PositionScan,
        Scenario::Radial,
        Scenario::Fit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Selection => "selection",
            Scenario::Tradeoff => "tradeoff",
            Scenario::Spectrum => "spectrum",
            Scenario::Invert => "invert",
            Scenario::Fluorescence => "fluorescence",
            Scenario::OptomechToggle => "optomech-toggle",
            Scenario::PositionScan => "position-scan",
            Scenario::Radial => "radial",
            Scenario::Fit => "fit",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|x| x.name()).collect();
                format!("unknown scenario '{s}' (expected one of: {})", names.join(", "))
            })
    }
}

/// A configuration problem, with the 1-based line it refers to when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Optional; must agree with the scenario named on the command line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub ensemble: EnsembleConfig,
    pub selection: SelectionConfig,
    pub tradeoff: TradeoffConfig,
    pub fit: FitConfig,
    pub spectrum: SpectrumConfig,
    pub fluorescence: FluorescenceConfig,
    pub optomech: OptomechConfig,
    pub radial: RadialConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 1,
            geometry: GeometryConfig::default(),
            ensemble: EnsembleConfig::default(),
            selection: SelectionConfig::default(),
            tradeoff: TradeoffConfig::default(),
            fit: FitConfig::default(),
            spectrum: SpectrumConfig::default(),
            fluorescence: FluorescenceConfig::default(),
            optomech: OptomechConfig::default(),
            radial: RadialConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub lattice_wavelength_m: f64,
    pub probe_wavelength_m: f64,
    pub atomic_wavelength_m: f64,
    pub free_spectral_range_hz: f64,
    pub hyperfine_splitting_hz: f64,
    pub probe_detuning_hz: f64,
    pub stark_detuning_hz: f64,
    /// Single-atom dispersive shift `g0²/Δp`; sets `g0`.
    pub single_atom_shift_hz: f64,
    pub mode_waist_m: f64,
    pub stark_mode: StarkMode,
    pub symmetry: MidPlaneSymmetry,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = CavityGeometry::default();
        Self {
            lattice_wavelength_m: g.lattice_wavelength,
            probe_wavelength_m: g.probe_wavelength,
            atomic_wavelength_m: g.atomic_wavelength,
            free_spectral_range_hz: g.free_spectral_range.hz(),
            hyperfine_splitting_hz: g.hyperfine_splitting.hz(),
            probe_detuning_hz: g.probe_detuning.hz(),
            stark_detuning_hz: g.stark_detuning.hz(),
            single_atom_shift_hz: 150.0,
            mode_waist_m: g.mode_waist,
            stark_mode: g.stark_mode,
            symmetry: g.symmetry,
        }
    }
}

impl GeometryConfig {
    pub fn resolve(&self) -> CavityGeometry {
        let probe_detuning = AngularFrequency::from_hz(self.probe_detuning_hz);
        let shift = AngularFrequency::from_hz(self.single_atom_shift_hz);
        CavityGeometry {
            lattice_wavelength: self.lattice_wavelength_m,
            probe_wavelength: self.probe_wavelength_m,
            atomic_wavelength: self.atomic_wavelength_m,
            free_spectral_range: AngularFrequency::from_hz(self.free_spectral_range_hz),
            hyperfine_splitting: AngularFrequency::from_hz(self.hyperfine_splitting_hz),
            probe_detuning,
            stark_detuning: AngularFrequency::from_hz(self.stark_detuning_hz),
            peak_coupling: AngularFrequency((shift.0 * probe_detuning.0).abs().sqrt()),
            mode_waist: self.mode_waist_m,
            stark_mode: self.stark_mode,
            symmetry: self.symmetry,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub atoms: usize,
    pub extent_m: f64,
    pub offset_m: f64,
    pub profile: AxialProfile,
    /// Gauss–Legendre nodes across the cloud for the density pipeline.
    pub axial_nodes: usize,
    /// Density-pipeline prior. The ideal arcsine ignores the probe/Stark
    /// phase slip across the cloud; the position scan always resolves it.
    pub prior: PriorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    #[default]
    Arcsine,
    FiniteExtent,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            atoms: 100_000,
            extent_m: 1e-3,
            offset_m: 0.0,
            profile: AxialProfile::Uniform,
            axial_nodes: 16,
            prior: PriorKind::Arcsine,
        }
    }
}

impl EnsembleConfig {
    pub fn resolve(&self) -> EnsembleSpec {
        EnsembleSpec {
            atoms: self.atoms,
            extent: self.extent_m,
            offset: self.offset_m,
            profile: self.profile,
            ..EnsembleSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub rabi_hz: f64,
    /// Peak Stark shift `δs`.
    pub stark_hz: f64,
    /// Microwave detuning `δm`; positive values move the resonance toward
    /// Stark-shifted atoms.
    pub detuning_hz: f64,
    pub pulses: usize,
    /// Per-pulse Rabi multipliers; empty means all ones.
    pub rabi_multipliers: Vec<f64>,
    pub repump_between: bool,
    pub blow_away_survival: f64,
    pub repump_loss: f64,
    pub degenerate_floor: f64,
    pub bootstrap_resamples: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            rabi_hz: 2040.0,
            stark_hz: 32_700.0,
            detuning_hz: 2700.0,
            pulses: 1,
            rabi_multipliers: Vec::new(),
            repump_between: true,
            blow_away_survival: 0.0,
            repump_loss: 0.0,
            degenerate_floor: 1e-9,
            bootstrap_resamples: 200,
        }
    }
}

impl SelectionConfig {
    pub fn multipliers(&self) -> Vec<f64> {
        if self.rabi_multipliers.is_empty() {
            vec![1.0; self.pulses]
        } else {
            self.rabi_multipliers.clone()
        }
    }

    pub fn stark(&self) -> AngularFrequency {
        AngularFrequency::from_hz(self.stark_hz)
    }

    /// The configured sequence, truncated or extended to `pulses` pulses.
    pub fn sequence_with(&self, pulses: usize) -> crate::Result<SelectionSequence> {
        let mult = self.multipliers();
        let list = (0..pulses)
            .map(|k| {
                let m = mult.get(k).copied().unwrap_or(*mult.last().unwrap_or(&1.0));
                PulseSpec::new(
                    AngularFrequency::from_hz(self.rabi_hz * m),
                    AngularFrequency::from_hz(self.detuning_hz),
                    self.stark(),
                )
            })
            .collect::<crate::Result<Vec<_>>>()?;
        let mut seq = SelectionSequence::new(list)?.with_errors(StepErrors {
            blow_away_survival: self.blow_away_survival,
            repump_loss: self.repump_loss,
        })?;
        seq.repump_between = self.repump_between;
        Ok(seq)
    }

    pub fn sequence(&self) -> crate::Result<SelectionSequence> {
        self.sequence_with(self.multipliers().len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveConfig {
    pub label: String,
    pub pulses: usize,
    /// Resonant Stark fraction `δm/δs`.
    pub eta_c: f64,
    pub rabi_multipliers: Vec<f64>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            label: "1-pulse".into(),
            pulses: 1,
            eta_c: 0.0,
            rabi_multipliers: Vec::new(),
        }
    }
}

impl CurveConfig {
    pub fn identical(pulses: usize, eta_c: f64) -> Self {
        Self {
            label: format!("{pulses}-pulse"),
            pulses,
            eta_c,
            rabi_multipliers: Vec::new(),
        }
    }

    pub fn multipliers(&self) -> Vec<f64> {
        if self.rabi_multipliers.is_empty() {
            vec![1.0; self.pulses]
        } else {
            self.rabi_multipliers.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TradeoffConfig {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub points: usize,
    pub curves: Vec<CurveConfig>,
    /// Also tabulate the flip probability against `η` at these `Ω/δs`
    /// (resonant at `η = 1`).
    pub window_ratios: Vec<f64>,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        Self {
            ratio_min: 0.01,
            ratio_max: 0.5,
            points: 40,
            curves: vec![CurveConfig::default()],
            window_ratios: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Trade-off CSV to fit, relative to the config file. When absent the
    /// trade-off curves are computed from the `[tradeoff]` section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub range_min: f64,
    pub range_max: f64,
    /// Weight each log residual by `N_s/N`, favouring the upper end of the
    /// range; unweighted by default.
    pub weighted: bool,
    pub quantities: Vec<Quantity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `1 - η̄`.
    OneMinusMeanEta,
    /// `Δη/η̄`.
    Spread,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::OneMinusMeanEta => "one_minus_mean_eta",
            Quantity::Spread => "spread",
        }
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            input: None,
            range_min: 1e-3,
            range_max: 0.1,
            weighted: false,
            quantities: vec![Quantity::OneMinusMeanEta, Quantity::Spread],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub probe_rabi_hz: f64,
    /// Grid bounds in units of `δs`.
    pub detuning_min: f64,
    pub detuning_max: f64,
    pub points: usize,
    /// Selection-pulse counts to synthesize; 0 is the unselected cloud.
    pub selections: Vec<usize>,
    /// Also emit the spectrum with the Stark beam off.
    pub stark_off_reference: bool,
    pub truncation_min: f64,
    pub truncation_max: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            probe_rabi_hz: 170.0,
            detuning_min: -0.2,
            detuning_max: 1.2,
            points: 201,
            selections: vec![0],
            stark_off_reference: false,
            truncation_min: 0.4,
            truncation_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluorescenceConfig {
    /// Loading fractions at which the cloud is imaged.
    pub grid: Vec<f64>,
    pub relative_noise: f64,
    pub counts_per_atom: f64,
    pub intercept: bool,
}

impl Default for FluorescenceConfig {
    fn default() -> Self {
        Self {
            grid: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            relative_noise: 0.01,
            counts_per_atom: 1.0,
            intercept: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    #[default]
    Density,
    Particles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptomechConfig {
    pub axial_frequency_hz: f64,
    pub probe_depth_ratio: f64,
    pub power_ratio: f64,
    pub radial_temperature_k: f64,
    pub lattice_waist_m: f64,
    pub toggle_window_s: f64,
    pub toggle_cycles: usize,
    pub sample_interval_s: f64,
    pub offsets_m: Vec<f64>,
    pub pipeline: Pipeline,
    pub displacement: Displacement,
}

impl Default for OptomechConfig {
    fn default() -> Self {
        let t = TrapModel::default();
        Self {
            axial_frequency_hz: t.axial_frequency,
            probe_depth_ratio: t.probe_depth_ratio,
            power_ratio: 3.3,
            radial_temperature_k: t.radial_temperature,
            lattice_waist_m: t.lattice_waist,
            toggle_window_s: 100e-6,
            toggle_cycles: 4,
            sample_interval_s: 1e-6,
            offsets_m: (-5..=5).map(|i| i as f64 * 1e-4).collect(),
            pipeline: Pipeline::Density,
            displacement: Displacement::Exact,
        }
    }
}

impl OptomechConfig {
    pub fn trap(&self) -> TrapModel {
        TrapModel {
            axial_frequency: self.axial_frequency_hz,
            probe_depth_ratio: self.probe_depth_ratio,
            radial_temperature: self.radial_temperature_k,
            lattice_waist: self.lattice_waist_m,
            mass: RB87_MASS,
            displacement: self.displacement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadialConfig {
    pub duration_s: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dephasing_time_s: Option<f64>,
    /// Draw one phase-space point per atom instead of the thermal average.
    pub sampled: bool,
    /// Radial ratio removed from a measured suppression ratio.
    pub composition: Composition,
    /// Run the configured selection first instead of using the full cloud.
    pub selected: bool,
    /// Measured suppression ratio to correct for the radial contribution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_ratio: Option<f64>,
}

impl Default for RadialConfig {
    fn default() -> Self {
        Self {
            duration_s: 2e-3,
            samples: 4000,
            dephasing_time_s: None,
            sampled: false,
            composition: Composition::RootSumSquare,
            selected: false,
            measured_ratio: None,
        }
    }
}

impl RadialConfig {
    pub fn model(&self, seed: u64) -> RadialModel {
        if self.sampled {
            RadialModel::Sampled { seed }
        } else {
            RadialModel::Thermal
        }
    }
}

/// 1-based line of `key` inside `[section]` (or at top level for an empty
/// section); falls back to the section header.
pub fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section && header.is_none() {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

fn line_of_offset(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Parses and validates a configuration file.
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(source).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(source, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate(source)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Range checks. `source` is only used to attach line numbers.
    pub fn validate(&self, source: &str) -> Result<(), ConfigError> {
        let mut v = Checks { source, first: None };
        let g = &self.geometry;
        for (k, x) in [
            ("lattice_wavelength_m", g.lattice_wavelength_m),
            ("probe_wavelength_m", g.probe_wavelength_m),
            ("atomic_wavelength_m", g.atomic_wavelength_m),
            ("free_spectral_range_hz", g.free_spectral_range_hz),
            ("hyperfine_splitting_hz", g.hyperfine_splitting_hz),
            ("single_atom_shift_hz", g.single_atom_shift_hz),
            ("mode_waist_m", g.mode_waist_m),
        ] {
            v.positive("geometry", k, x);
        }
        v.check("geometry", "probe_detuning_hz", g.probe_detuning_hz > 0.0, "must be positive");
        v.check(
            "geometry",
            "stark_detuning_hz",
            g.stark_detuning_hz.is_finite(),
            "must be finite",
        );

        let e = &self.ensemble;
        v.check("ensemble", "atoms", e.atoms >= 1, "must be at least 1");
        v.positive("ensemble", "extent_m", e.extent_m);
        v.check("ensemble", "offset_m", e.offset_m.is_finite(), "must be finite");
        v.check("ensemble", "axial_nodes", e.axial_nodes >= 1, "must be at least 1");

        let s = &self.selection;
        v.positive("selection", "rabi_hz", s.rabi_hz);
        v.check("selection", "stark_hz", s.stark_hz >= 0.0 && s.stark_hz.is_finite(), "must be non-negative");
        v.check("selection", "detuning_hz", s.detuning_hz.is_finite(), "must be finite");
        v.check("selection", "pulses", s.pulses >= 1, "need at least one pulse");
        v.check(
            "selection",
            "rabi_multipliers",
            s.rabi_multipliers.iter().all(|m| *m > 0.0 && m.is_finite()),
            "multipliers must be positive",
        );
        v.check(
            "selection",
            "blow_away_survival",
            (0.0..1.0).contains(&s.blow_away_survival),
            "must lie in [0, 1)",
        );
        v.check("selection", "repump_loss", (0.0..1.0).contains(&s.repump_loss), "must lie in [0, 1)");
        v.check(
            "selection",
            "degenerate_floor",
            s.degenerate_floor > 0.0 && s.degenerate_floor < 1.0,
            "must lie in (0, 1)",
        );

        let t = &self.tradeoff;
        v.positive("tradeoff", "ratio_min", t.ratio_min);
        v.check("tradeoff", "ratio_max", t.ratio_max > t.ratio_min, "must exceed ratio_min");
        v.check("tradeoff", "points", t.points >= 2, "need at least two points");
        v.check("tradeoff", "curves", !t.curves.is_empty(), "need at least one curve");
        for c in &t.curves {
            v.check("tradeoff.curves", "pulses", c.pulses >= 1 || !c.rabi_multipliers.is_empty(), "need at least one pulse");
            v.check("tradeoff.curves", "eta_c", c.eta_c.is_finite(), "must be finite");
            v.check(
                "tradeoff.curves",
                "rabi_multipliers",
                c.rabi_multipliers.iter().all(|m| *m > 0.0),
                "multipliers must be positive",
            );
        }

        v.check(
            "tradeoff",
            "window_ratios",
            t.window_ratios.iter().all(|r| *r > 0.0 && r.is_finite()),
            "ratios must be positive",
        );

        let f = &self.fit;
        v.positive("fit", "range_min", f.range_min);
        v.check("fit", "range_max", f.range_max > f.range_min, "must exceed range_min");
        v.check("fit", "quantities", !f.quantities.is_empty(), "list at least one quantity");

        let sp = &self.spectrum;
        v.positive("spectrum", "probe_rabi_hz", sp.probe_rabi_hz);
        v.check("spectrum", "detuning_max", sp.detuning_max > sp.detuning_min, "must exceed detuning_min");
        v.check("spectrum", "points", sp.points >= 2, "need at least two points");
        v.check("spectrum", "selections", !sp.selections.is_empty(), "list at least one selection count");
        v.check(
            "spectrum",
            "truncation_min",
            sp.truncation_min >= 0.0 && sp.truncation_min < sp.truncation_max && sp.truncation_max <= 1.0,
            "truncation range must satisfy 0 <= min < max <= 1",
        );

        let fl = &self.fluorescence;
        v.check("fluorescence", "grid", fl.grid.iter().all(|x| *x > 0.0), "loading fractions must be positive");
        v.check("fluorescence", "relative_noise", fl.relative_noise >= 0.0, "must be non-negative");
        v.positive("fluorescence", "counts_per_atom", fl.counts_per_atom);

        let o = &self.optomech;
        v.positive("optomech", "axial_frequency_hz", o.axial_frequency_hz);
        v.check("optomech", "probe_depth_ratio", o.probe_depth_ratio >= 0.0 && o.probe_depth_ratio < 0.5, "must lie in [0, 0.5)");
        v.positive("optomech", "power_ratio", o.power_ratio);
        v.check("optomech", "radial_temperature_k", o.radial_temperature_k >= 0.0, "must be non-negative");
        v.positive("optomech", "lattice_waist_m", o.lattice_waist_m);
        v.positive("optomech", "toggle_window_s", o.toggle_window_s);
        v.check("optomech", "toggle_cycles", o.toggle_cycles >= 1, "must be at least 1");
        v.positive("optomech", "sample_interval_s", o.sample_interval_s);
        let half = 0.5 * self.geometry.resolve().cavity_length();
        v.check(
            "optomech",
            "offsets_m",
            o.offsets_m.iter().all(|x| x.abs() <= half),
            "offsets must lie inside the cavity",
        );

        let r = &self.radial;
        v.positive("radial", "duration_s", r.duration_s);
        v.check("radial", "samples", r.samples >= 2, "need at least two samples");
        if let Some(tau) = r.dephasing_time_s {
            v.positive("radial", "dephasing_time_s", tau);
        }

        match v.first {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

struct Checks<'a> {
    source: &'a str,
    first: Option<ConfigError>,
}

impl Checks<'_> {
    fn check(&mut self, section: &str, key: &str, ok: bool, why: &str) {
        if !ok && self.first.is_none() {
            self.first = Some(ConfigError {
                line: locate(self.source, section, key),
                message: format!("{section}.{key}: {why}"),
            });
        }
    }

    fn positive(&mut self, section: &str, key: &str, x: f64) {
        self.check(section, key, x > 0.0 && x.is_finite(), "must be positive");
    }
}
