//! Polarization measurement outcome probabilities and visibility factors.
//!
//! The analyzer state on the Bloch equator is `|θ⟩ ∝ |H⟩ + e^{iθ}|V⟩`. For a
//! signal analyzer at θ_s and the idler's two-output analyzer at θ_i:
//!
//! ```text
//! p₊(ki) = ∫ |ψ̃(ks, ki)|² cos²((φ(ks, ki) + θ_s − θ_i)/2) dks
//! p₋(ki) = ∫ |ψ̃(ks, ki)|² sin²((φ(ks, ki) + θ_s − θ_i)/2) dks
//! ```
//!
//! so the `+` channel carries the fringe `+cos(φ + θ_s − θ_i)` and the `−`
//! channel is the orthogonal projection (θ_i → θ_i + π). The integral runs
//! over the bucket disc.

use std::fmt;

use crate::error::{Error, Result};
use crate::kspace::{BellEprState, KVector};
use crate::quadrature::{integrate_disc, integrate_rect, QuadOptions};
use crate::scalar::{wrap_tau, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SignalAnalyzer<T> {
    Angle(T),
    /// Single-channel polarizer removed.
    Marginal,
}

/// One `(θ_s, θ_i)` measurement setting. Angles are kept in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Setting<T> {
    pub theta_s: SignalAnalyzer<T>,
    pub theta_i: T,
}

impl<T: Real> Setting<T> {
    pub fn new(theta_s: T, theta_i: T) -> Self {
        Setting {
            theta_s: SignalAnalyzer::Angle(wrap_tau(theta_s)),
            theta_i: wrap_tau(theta_i),
        }
    }

    pub fn marginal(theta_i: T) -> Self {
        Setting {
            theta_s: SignalAnalyzer::Marginal,
            theta_i: wrap_tau(theta_i),
        }
    }

    pub fn is_marginal(&self) -> bool {
        matches!(self.theta_s, SignalAnalyzer::Marginal)
    }

    /// `θ_s − θ_i`, or `None` for the marginal setting.
    pub fn phase_offset(&self) -> Option<T> {
        match self.theta_s {
            SignalAnalyzer::Angle(ts) => Some(ts - self.theta_i),
            SignalAnalyzer::Marginal => None,
        }
    }

    /// The four CHSH settings `{0, π/2}²` followed by the marginal `(∞, 0)`.
    pub fn standard_set() -> [Setting<T>; 5] {
        let z = T::zero();
        let q = T::FRAC_PI_2();
        [
            Setting::new(z, z),
            Setting::new(q, z),
            Setting::new(z, q),
            Setting::new(q, q),
            Setting::marginal(z),
        ]
    }
}

impl<T: Real> fmt::Display for Setting<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.theta_s {
            SignalAnalyzer::Angle(ts) => write!(f, "theta_s={} theta_i={}", ts, self.theta_i),
            SignalAnalyzer::Marginal => write!(f, "theta_s=INF theta_i={}", self.theta_i),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Plus,
    Minus,
}

impl Channel {
    pub fn sign(self) -> i8 {
        match self {
            Channel::Plus => 1,
            Channel::Minus => -1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Channel::Plus => '+',
            Channel::Minus => '-',
        }
    }
}

/// Conditional density of `ks` given `ki`: Gaussian with per-axis precision
/// `1/κ² + σ²` centered where the biphoton exponent is stationary.
fn signal_density<T: Real>(state: &BellEprState<T>, ki: KVector<T>) -> (KVector<T>, T) {
    let p = &state.params;
    let inv_k2 = (p.kappa * p.kappa).recip();
    let s2 = p.sigma * p.sigma;
    let precision = inv_k2 + s2;
    let mean = ki * ((s2 - inv_k2) / precision);
    (mean, precision)
}

/// `[p₊, p₋]` at `ki`, integrated jointly on one adaptive mesh so that
/// their sum is exactly the polarization-independent coincidence weight.
pub fn outcome_probabilities<T: Real>(
    state: &BellEprState<T>,
    setting: &Setting<T>,
    ki: KVector<T>,
    opts: &QuadOptions<T>,
) -> Result<[T; 2]> {
    let offset = setting
        .phase_offset()
        .ok_or_else(|| Error::invalid("outcome probabilities need a signal analyzer angle, not the marginal setting"))?;
    if !state.in_fov(ki) {
        return Err(Error::OutOfRange(format!("idler wavevector ({}, {}) outside the field of view", ki.kx, ki.ky)));
    }
    let (mean, precision) = signal_density(state, ki);
    let norm = precision / T::TAU();
    let half = T::lit(0.5);
    let phi_i = state.phase_i.eval(ki);
    let integrand = |x: T, y: T| {
        let ks = KVector::new(x, y);
        let w = norm * (-half * precision * (ks - mean).norm_sqr()).exp();
        let arg = (state.phase_s.eval(ks) - phi_i + offset) * half;
        let c = arg.cos();
        let c2 = c * c;
        [w * c2, w * (T::one() - c2)]
    };

    let radius = state.params.bucket_radius_k;
    let reach = T::lit(8.0) / precision.sqrt();
    let box_inside = mean.norm() + reach * T::SQRT_2() <= radius;
    let res = if box_inside {
        integrate_rect(integrand, (mean.kx - reach, mean.kx + reach), (mean.ky - reach, mean.ky + reach), opts)
    } else {
        integrate_disc(integrand, radius, opts)
    };
    res.map(|r| r.values)
        .map_err(|e| Error::Numeric(format!("outcome probability at ki = ({}, {}): {e}", ki.kx, ki.ky)))
}

/// Probability of detecting the idler at `ki` in `channel` (unnormalized over `ki`).
pub fn outcome_probability<T: Real>(
    state: &BellEprState<T>,
    setting: &Setting<T>,
    ki: KVector<T>,
    channel: Channel,
) -> Result<T> {
    let [plus, minus] = outcome_probabilities(state, setting, ki, &QuadOptions::default())?;
    Ok(match channel {
        Channel::Plus => plus,
        Channel::Minus => minus,
    })
}

/// Finite-κ visibility `exp(−α²κ²/2)` for a signal phase slope α.
pub fn kappa_visibility<T: Real>(alpha: T, kappa: T) -> T {
    (-(alpha * alpha * kappa * kappa) * T::lit(0.5)).exp()
}

/// Interferometer-shift mismatch visibility `exp(−ξk²/(8κ²))`.
pub fn mismatch_visibility<T: Real>(xi_k: T, kappa: T) -> T {
    (-(xi_k * xi_k) / (T::lit(8.0) * kappa * kappa)).exp()
}

/// Closed-form probability that the idler at `ki` exits the `+` port, given
/// the signal passed its analyzer:
///
/// `(1 + v·V_ξ·V_κ·cos(φ(−ki, ki) + θ_s − θ_i)) / 2`
///
/// with `V_κ` taken at the local signal phase gradient at `−ki`. The
/// marginal setting gives exactly 1/2.
pub fn conditional_idler_prob<T: Real>(
    state: &BellEprState<T>,
    setting: &Setting<T>,
    ki: KVector<T>,
    xi_k: T,
    extra_visibility: T,
) -> Result<T> {
    if !(extra_visibility > T::zero() && extra_visibility <= T::one()) {
        return Err(Error::invalid(format!("extra visibility must be in (0, 1], got {extra_visibility}")));
    }
    if !(xi_k >= T::zero()) {
        return Err(Error::invalid(format!("xi_k must be >= 0, got {xi_k}")));
    }
    let half = T::lit(0.5);
    let Some(offset) = setting.phase_offset() else {
        return Ok(half);
    };
    let phi = state.anticorrelated_phase(ki)?;
    let kappa = state.params.kappa;
    let alpha = state.phase_s.gradient(-ki).norm();
    let v = extra_visibility * mismatch_visibility(xi_k, kappa) * kappa_visibility(alpha, kappa);
    Ok(half * (T::one() + v * (phi + offset).cos()))
}

/// Multiplicative visibility budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibilityBudget<T> {
    pub v_ult: T,
    pub v_optics: T,
    pub v_kappa: T,
    pub v_xi: T,
    pub v_total: T,
}

pub fn visibility_budget<T: Real>(v_ult: T, optics_factor: T, alpha: T, kappa: T, xi_k: T) -> Result<VisibilityBudget<T>> {
    let unit = |name: &str, v: T| {
        if v > T::zero() && v <= T::one() {
            Ok(v)
        } else {
            Err(Error::invalid(format!("{name} must be in (0, 1], got {v}")))
        }
    };
    let v_ult = unit("v_ult", v_ult)?;
    let v_optics = unit("optics factor", optics_factor)?;
    if !alpha.is_finite() || !(kappa > T::zero()) || !(xi_k >= T::zero()) {
        return Err(Error::invalid("alpha must be finite, kappa > 0 and xi_k >= 0"));
    }
    let v_kappa = kappa_visibility(alpha, kappa);
    let v_xi = mismatch_visibility(xi_k, kappa);
    Ok(VisibilityBudget {
        v_ult,
        v_optics,
        v_kappa,
        v_xi,
        v_total: v_ult * v_optics * v_kappa * v_xi,
    })
}
