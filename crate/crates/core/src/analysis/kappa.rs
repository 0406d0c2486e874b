use crate::error::{Error, Result};
use crate::fit::levenberg_marquardt;
use crate::measurement::Channel;
use crate::montecarlo::KappaHistograms;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub mean: f64,
    pub sigma: f64,
    pub sigma_err: f64,
    pub chi2_red: f64,
}

/// Fits `A·exp(−(x − μ)²/(2s²))` to a histogram with per-bin variances.
pub fn fit_gaussian(x: &[f64], y: &[f64], var: &[f64]) -> Result<GaussianFit> {
    let total: f64 = y.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientData("histogram is empty".into()));
    }
    let mean = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / total;
    let spread = (x.iter().zip(y).map(|(a, b)| (a - mean).powi(2) * b).sum::<f64>() / total).max(1e-12).sqrt();
    let peak = y.iter().cloned().fold(f64::MIN, f64::max);
    let sigma: Vec<f64> = var.iter().map(|v| v.max(1.0).sqrt()).collect();
    let model = |x: f64, p: &[f64]| p[0] * (-(x - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp();
    let f = levenberg_marquardt(model, x, y, &sigma, &[peak, mean, spread], 500)?;
    let s = f.params[2].abs();
    if !s.is_finite() || s == 0.0 {
        return Err(Error::Numeric("Gaussian fit collapsed".into()));
    }
    let chi2_red = f.chi2 / f.dof.max(1) as f64;
    Ok(GaussianFit {
        amplitude: f.params[0],
        mean: f.params[1],
        sigma: s,
        sigma_err: (f.covariance[2][2] * chi2_red.max(1.0)).sqrt(),
        chi2_red,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KappaFit {
    /// `[axis][channel]`, axis 0 = x.
    pub per_direction: [[GaussianFit; 2]; 2],
    /// Mean of the four widths.
    pub kappa: f64,
    /// Larger of the spread of the four widths and their mean fit error.
    pub kappa_err: f64,
}

/// κ from the background-subtracted `(ks + ki)` histograms: one Gaussian
/// per axis and channel, whose standard deviation is κ.
pub fn kappa_fit(h: &KappaHistograms) -> Result<KappaFit> {
    let mut fits = Vec::with_capacity(4);
    for axis in 0..2 {
        for ch in [Channel::Plus, Channel::Minus] {
            let (y, var) = h.net(axis, ch);
            fits.push(fit_gaussian(&h.centers, &y, &var)?);
        }
    }
    let kappa = fits.iter().map(|f| f.sigma).sum::<f64>() / 4.0;
    let spread = (fits.iter().map(|f| (f.sigma - kappa).powi(2)).sum::<f64>() / 3.0).sqrt();
    let fit_err = fits.iter().map(|f| f.sigma_err).sum::<f64>() / 4.0;
    Ok(KappaFit {
        per_direction: [[fits[0], fits[1]], [fits[2], fits[3]]],
        kappa,
        kappa_err: spread.max(fit_err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{run_kappa_diagnostic, KappaRunSpec, NoiseModel};
    use crate::{BellEprState, PhaseProfile};

    #[test]
    fn recovers_generator_kappa() {
        let st = BellEprState::new(Default::default(), PhaseProfile::flat(), PhaseProfile::flat()).unwrap();
        let noise = NoiseModel::new(0.05, 0.3, 0.3, 1e-3, 1e-2).unwrap();
        let spec = KappaRunSpec { n_trials: 4_000_000, seed: 5, bins: 61, half_range: 30.0 };
        let h = run_kappa_diagnostic(&st, &noise, &spec, 4).unwrap();
        let k = kappa_fit(&h).unwrap();
        for row in &k.per_direction {
            for f in row {
                assert!((f.sigma - 5.9).abs() < 4.0 * f.sigma_err + 0.05, "{f:?}");
            }
        }
        assert!((k.kappa - 5.9).abs() < 0.15, "{k:?}");
    }

    #[test]
    fn empty_histogram() {
        assert!(fit_gaussian(&[0.0, 1.0, 2.0, 3.0], &[0.0; 4], &[0.0; 4]).is_err());
    }
}
