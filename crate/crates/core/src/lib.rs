//! Spectroscopic site selection of atoms in a standing-wave optical cavity.
//!
//! The crate simulates the full selection workflow: coupling of lattice-trapped
//! atoms to a probe cavity mode, microwave π-pulse selection dressed by a
//! second, anti-aligned Stark mode, the resulting coupling statistics and
//! trade-off scaling laws, dressed-cavity microwave spectra, and the
//! optomechanical response to probe-power toggling.
//!
//! Two pipelines are available throughout: a particle pipeline over sampled
//! [`AtomEnsemble`]s with deterministic per-atom random streams, and a density
//! pipeline over [`CouplingDensity`] that evaluates the same physics by
//! quadrature with no sampling noise.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod harness;
pub mod optomech;
pub mod quadrature;
pub mod rng;
pub mod selection;
pub mod spectroscopy;
pub mod stats;
pub mod units;

pub use error::{Error, Result};
pub use field::{
    coupling_eta, sample_ensemble, stark_shift, unselected_density, Atom, AtomEnsemble, CavityGeometry,
    CouplingDensity, EnsembleSpec, Spin,
};
pub use selection::{
    apply_pulse_particles, blow_away, repump, run_sequence, select_density, transfer_probability, PulseSpec,
    SelectionSequence,
};
pub use units::AngularFrequency;

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/tradeoffs.md")]
    mod tradeoffs {}
    #[doc = include_str!("../../../book/src/spectroscopy.md")]
    mod spectroscopy {}
    #[doc = include_str!("../../../book/src/optomechanics.md")]
    mod optomechanics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
