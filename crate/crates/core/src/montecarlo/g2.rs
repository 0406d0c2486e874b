use super::NoiseModel;
use crate::error::{Error, Result};

/// Per-trial photon-number sums of an unconditional-readout run. The
/// second moments feed the standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct G2Tally {
    pub trials: u64,
    /// `Σ n_s`
    pub signal: u64,
    /// `Σ n_i`
    pub idler: u64,
    /// `Σ n_s n_i`
    pub coincidences: u64,
    /// `Σ n_s²`
    pub signal_sq: u64,
    /// `Σ n_i²`
    pub idler_sq: u64,
    /// `Σ (n_s n_i)²`
    pub coincidences_sq: u64,
    /// `Σ n_s² n_i`
    pub signal_coinc: u64,
    /// `Σ n_s n_i²`
    pub idler_coinc: u64,
}

impl G2Tally {
    /// Tally of click detectors (every count 0 or 1).
    pub fn from_clicks(trials: u64, signal: u64, idler: u64, coincidences: u64) -> Self {
        G2Tally {
            trials,
            signal,
            idler,
            coincidences,
            signal_sq: signal,
            idler_sq: idler,
            coincidences_sq: coincidences,
            signal_coinc: coincidences,
            idler_coinc: coincidences,
        }
    }

    /// Adds one trial with `ns` signal and `ni` idler counts.
    #[inline]
    pub fn add(&mut self, ns: u64, ni: u64) {
        let c = ns * ni;
        self.trials += 1;
        self.signal += ns;
        self.idler += ni;
        self.coincidences += c;
        self.signal_sq += ns * ns;
        self.idler_sq += ni * ni;
        self.coincidences_sq += c * c;
        self.signal_coinc += ns * c;
        self.idler_coinc += ni * c;
    }

    pub fn merged(&self, o: &G2Tally) -> G2Tally {
        G2Tally {
            trials: self.trials + o.trials,
            signal: self.signal + o.signal,
            idler: self.idler + o.idler,
            coincidences: self.coincidences + o.coincidences,
            signal_sq: self.signal_sq + o.signal_sq,
            idler_sq: self.idler_sq + o.idler_sq,
            coincidences_sq: self.coincidences_sq + o.coincidences_sq,
            signal_coinc: self.signal_coinc + o.signal_coinc,
            idler_coinc: self.idler_coinc + o.idler_coinc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct G2Estimate {
    pub value: f64,
    pub std_error: f64,
    /// `1 + 1/(n̄_s/χ_s + ζ_i/χ_i)` with the measured `n̄_s`.
    pub model_from_rates: f64,
    pub coincidences: u64,
    /// `n̄_s·n̄_i·N`
    pub accidentals: f64,
}

/// `g² = 1 + 1/(p + ζ_s/χ_s + ζ_i/χ_i)`
pub fn g2_model(noise: &NoiseModel) -> Result<f64> {
    if noise.chi_s <= 0.0 || noise.chi_i <= 0.0 {
        return Err(Error::invalid("the g² model needs chi_s > 0 and chi_i > 0"));
    }
    let d = noise.p + noise.zeta_s / noise.chi_s + noise.zeta_i / noise.chi_i;
    if d <= 0.0 {
        return Err(Error::UndefinedEstimate("g² model diverges without pairs or noise".into()));
    }
    Ok(1.0 + 1.0 / d)
}

/// `g² = 1 + 1/(n̄_s/χ_s + ζ_i/χ_i)`
pub fn g2_model_from_rates(mean_signal: f64, chi_s: f64, zeta_i_over_chi_i: f64) -> Result<f64> {
    if chi_s <= 0.0 {
        return Err(Error::invalid("chi_s must be positive"));
    }
    let d = mean_signal / chi_s + zeta_i_over_chi_i;
    if d <= 0.0 {
        return Err(Error::UndefinedEstimate("no signal counts".into()));
    }
    Ok(1.0 + 1.0 / d)
}

/// `g² = ⟨n_s n_i⟩ / (n̄_s n̄_i)` with a delta-method standard error from
/// the per-trial moments (covariances between the three sums included).
pub fn estimate_g2(tally: &G2Tally, noise: &NoiseModel) -> Result<G2Estimate> {
    let n = tally.trials as f64;
    if tally.trials == 0 || tally.signal == 0 || tally.idler == 0 {
        return Err(Error::UndefinedEstimate(format!(
            "no accidental baseline: {} signal and {} idler detections in {} trials",
            tally.signal, tally.idler, tally.trials
        )));
    }
    if tally.coincidences == 0 {
        return Err(Error::UndefinedEstimate("no coincidences recorded".into()));
    }
    let mean = |x: u64| x as f64 / n;
    let (ps, pi, psi) = (mean(tally.signal), mean(tally.idler), mean(tally.coincidences));
    let g = psi / (ps * pi);
    let var_s = mean(tally.signal_sq) - ps * ps;
    let var_i = mean(tally.idler_sq) - pi * pi;
    let var_c = mean(tally.coincidences_sq) - psi * psi;
    let cov_cs = mean(tally.signal_coinc) - psi * ps;
    let cov_ci = mean(tally.idler_coinc) - psi * pi;
    let cov_si = psi - ps * pi;
    let var_ln = (var_c / (psi * psi) + var_s / (ps * ps) + var_i / (pi * pi) - 2.0 * cov_cs / (psi * ps) - 2.0 * cov_ci / (psi * pi)
        + 2.0 * cov_si / (ps * pi))
        / n;
    if !(var_ln > 0.0) {
        return Err(Error::UndefinedEstimate(format!("non-positive variance estimate {var_ln}")));
    }
    let zi = if noise.chi_i > 0.0 { noise.zeta_i / noise.chi_i } else { 0.0 };
    Ok(G2Estimate {
        value: g,
        std_error: g * var_ln.sqrt(),
        model_from_rates: g2_model_from_rates(ps, noise.chi_s, zi)?,
        coincidences: tally.coincidences,
        accidentals: ps * pi * n,
    })
}
