use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateInputs {
    /// Write attempts per second while the memory is ready.
    pub trial_rate: f64,
    /// Usable fraction of the experimental cycle.
    pub duty_cycle: f64,
    pub p: f64,
    pub chi_s: f64,
    pub chi_i: f64,
    /// Storage time before readout (s).
    pub delay: f64,
    /// Storage time at which half the modes are retained (s).
    pub half_retention: f64,
    /// Exponent of the decay law; 1 is a plain exponential.
    pub shape: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateReport {
    pub coincidences_per_trial: f64,
    /// Averaged over the whole cycle.
    pub cps: f64,
    /// During the usable part of the cycle.
    pub cps_instantaneous: f64,
    pub retention: f64,
    /// Retention at `half_retention`, 0.5 by construction.
    pub retention_at_anchor: f64,
}

/// Fraction of modes retained after `delay`: `2^(−(delay/t½)^shape)`.
pub fn retention(delay: f64, half_retention: f64, shape: f64) -> f64 {
    (-std::f64::consts::LN_2 * (delay / half_retention).powf(shape)).exp()
}

pub fn rate_report(inp: &RateInputs) -> Result<RateReport> {
    let positive = [
        ("trial_rate", inp.trial_rate),
        ("duty_cycle", inp.duty_cycle),
        ("p", inp.p),
        ("chi_s", inp.chi_s),
        ("chi_i", inp.chi_i),
        ("half_retention", inp.half_retention),
        ("shape", inp.shape),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    for (name, v) in [("duty_cycle", inp.duty_cycle), ("p", inp.p), ("chi_s", inp.chi_s), ("chi_i", inp.chi_i)] {
        if v > 1.0 {
            return Err(Error::invalid(format!("{name} must not exceed 1, got {v}")));
        }
    }
    if !(inp.delay >= 0.0 && inp.delay.is_finite()) {
        return Err(Error::invalid(format!("delay must be >= 0, got {}", inp.delay)));
    }
    let ret = retention(inp.delay, inp.half_retention, inp.shape);
    let per_trial = inp.p * inp.chi_s * inp.chi_i * ret;
    let inst = inp.trial_rate * per_trial;
    Ok(RateReport {
        coincidences_per_trial: per_trial,
        cps: inst * inp.duty_cycle,
        cps_instantaneous: inst,
        retention: ret,
        retention_at_anchor: retention(inp.half_retention, inp.half_retention, inp.shape),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> RateInputs {
        RateInputs {
            trial_rate: 1000.0,
            duty_cycle: 0.5,
            p: 0.1,
            chi_s: 0.5,
            chi_i: 0.2,
            delay: 0.0,
            half_retention: 45e-6,
            shape: 1.0,
        }
    }

    #[test]
    fn retention_anchor() {
        assert_eq!(retention(45e-6, 45e-6, 1.0), 0.5);
        assert_eq!(retention(45e-6, 45e-6, 2.3), 0.5);
        assert_eq!(retention(0.0, 45e-6, 1.0), 1.0);
        assert!((retention(90e-6, 45e-6, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rates_are_products() {
        let r = rate_report(&inputs()).unwrap();
        assert!((r.cps_instantaneous - 10.0).abs() < 1e-12);
        assert!((r.cps - 5.0).abs() < 1e-12);
        assert_eq!(r.retention_at_anchor, 0.5);
    }

    #[test]
    fn rejects_non_positive() {
        let mut i = inputs();
        i.trial_rate = 0.0;
        assert!(rate_report(&i).is_err());
        let mut i = inputs();
        i.duty_cycle = 1.5;
        assert!(rate_report(&i).is_err());
    }
}
