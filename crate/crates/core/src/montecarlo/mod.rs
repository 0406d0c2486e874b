//! Event-level simulation of the feedback-gated acquisition sequence.
//!
//! One *trial* is one write attempt: the source may emit a pair, the bucket
//! detector may click, and only then is the idler read out onto the camera.
//! Every trial draws from its own counter-based stream, so results depend
//! on the seed and the trial index only.

mod classical;
mod diag;
mod g2;
mod rates;
mod sequence;

pub use classical::{run_classical_fringes, uniform_sweep, Arm, ClassicalSpec, IntensityFrame};
pub use diag::{run_kappa_diagnostic, KappaHistograms, KappaRunSpec};
pub use g2::{estimate_g2, g2_model, g2_model_from_rates, G2Estimate, G2Tally};
pub use rates::{rate_report, retention, RateInputs, RateReport};
pub use sequence::{mean_bucket_acceptance, predicted_visibility, run_sequence, run_unconditional, RunSpec, SequenceOutput};

use crate::error::{Error, Result};
use crate::measurement::Channel;
use crate::{Grid, Setting};

/// Per-trial probabilities of the source and detector model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    /// Pair-generation probability.
    pub p: f64,
    /// Signal transmission × detection efficiency.
    pub chi_s: f64,
    /// Idler transmission × retrieval × detection efficiency.
    pub chi_i: f64,
    /// Spurious bucket click probability.
    pub zeta_s: f64,
    /// Spurious camera count probability (uniform over the frame).
    pub zeta_i: f64,
    /// Emulate O(p²) double-pair emission as an extra uncorrelated coincidence.
    pub multi_pair: bool,
}

impl NoiseModel {
    pub fn new(p: f64, chi_s: f64, chi_i: f64, zeta_s: f64, zeta_i: f64) -> Result<Self> {
        let m = NoiseModel { p, chi_s, chi_i, zeta_s, zeta_i, multi_pair: true };
        m.validate()?;
        Ok(m)
    }

    /// Derives `ζ_s = n̄_s − p·χ_s` from a measured mean signal rate.
    pub fn from_mean_signal(p: f64, chi_s: f64, chi_i: f64, mean_signal: f64, zeta_i: f64) -> Result<Self> {
        let zeta_s = mean_signal - p * chi_s;
        if zeta_s < 0.0 {
            return Err(Error::invalid(format!(
                "mean signal rate {mean_signal} is below p·chi_s = {}",
                p * chi_s
            )));
        }
        Self::new(p, chi_s, chi_i, zeta_s, zeta_i)
    }

    /// No spurious counts and no multi-pair events.
    pub fn noiseless(p: f64, chi_s: f64, chi_i: f64) -> Self {
        NoiseModel { p, chi_s, chi_i, zeta_s: 0.0, zeta_i: 0.0, multi_pair: false }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p", self.p),
            ("chi_s", self.chi_s),
            ("chi_i", self.chi_i),
            ("zeta_s", self.zeta_s),
            ("zeta_i", self.zeta_i),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.mean_signal_rate() > 1.0 {
            return Err(Error::invalid(format!(
                "p·chi_s + zeta_s must not exceed 1, got {}",
                self.mean_signal_rate()
            )));
        }
        Ok(())
    }

    /// `n̄_s = p·χ_s + ζ_s`
    pub fn mean_signal_rate(&self) -> f64 {
        self.p * self.chi_s + self.zeta_s
    }
}

/// One camera count in a read-out frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IdlerHit {
    pub bin_x: u32,
    pub bin_y: u32,
    pub channel: Channel,
    /// True unless the count is the partner of the pair whose signal fired the bucket.
    pub is_noise: bool,
}

/// A trial that fired the bucket detector. Trials without a click are not
/// recorded.
///
/// The camera registers at most one count per frame. When several photons
/// reach it in one trial the pair partner wins, then the multi-pair idler,
/// then the spurious count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialEvent {
    pub trial_id: u64,
    pub bucket_click: bool,
    pub readout_performed: bool,
    pub hit: Option<IdlerHit>,
}

/// Ghost images for one setting: a count histogram per channel over the
/// idler grid (row-major, `iy * nx + ix`).
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSet {
    pub setting: Setting,
    pub grid: Grid,
    pub plus: Vec<u32>,
    pub minus: Vec<u32>,
    pub trials: u64,
    pub bucket_clicks: u64,
}

impl FrameSet {
    pub fn empty(setting: Setting, grid: Grid) -> Self {
        let n = grid.len();
        FrameSet { setting, grid, plus: vec![0; n], minus: vec![0; n], trials: 0, bucket_clicks: 0 }
    }

    pub fn counts(&self, channel: Channel) -> &[u32] {
        match channel {
            Channel::Plus => &self.plus,
            Channel::Minus => &self.minus,
        }
    }

    pub fn counts_mut(&mut self, channel: Channel) -> &mut [u32] {
        match channel {
            Channel::Plus => &mut self.plus,
            Channel::Minus => &mut self.minus,
        }
    }

    pub fn total(&self, channel: Channel) -> u64 {
        self.counts(channel).iter().map(|&c| c as u64).sum()
    }

    pub fn total_hits(&self) -> u64 {
        self.total(Channel::Plus) + self.total(Channel::Minus)
    }
}
