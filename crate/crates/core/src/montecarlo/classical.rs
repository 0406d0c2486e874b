use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::{BellEprState, Grid, Setting};

/// Which interferometer produces the fringes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    /// `cos(φ_s(k) + θ_s)` over signal wavevectors.
    Signal,
    /// `cos(φ_i(k) + θ_i)` over idler wavevectors.
    Idler,
    /// `cos(φ(−k, k) + θ_s − θ_i)` over idler wavevectors.
    Joint,
}

impl Arm {
    fn global_phase(self, s: &Setting) -> Result<f64> {
        match self {
            Arm::Idler => Some(s.theta_i),
            Arm::Signal => s.phase_offset().map(|o| o + s.theta_i),
            Arm::Joint => s.phase_offset(),
        }
        .ok_or_else(|| Error::invalid("classical fringes need a signal analyzer angle"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalSpec {
    pub grid: Grid,
    pub visibility: f64,
    /// Mean of `I₊ + I₋` per pixel.
    pub mean_intensity: f64,
    /// Draw Poisson counts; otherwise return the expected intensities.
    pub poisson: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntensityFrame {
    pub setting: Setting,
    /// Phase added by the analyzers for this frame.
    pub global_phase: f64,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl IntensityFrame {
    /// `(I₊ − I₋)/(I₊ + I₋)`; NaN where both vanish.
    pub fn correlation(&self) -> Vec<f64> {
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(p, m)| if p + m > 0.0 { (p - m) / (p + m) } else { f64::NAN })
            .collect()
    }
}

/// `n` settings stepping the arm's global phase uniformly over `[0, 2π)`.
pub fn uniform_sweep(arm: Arm, n: usize) -> Vec<Setting> {
    (0..n)
        .map(|j| {
            let t = std::f64::consts::TAU * j as f64 / n as f64;
            match arm {
                Arm::Signal | Arm::Joint => Setting::new(t, 0.0),
                Arm::Idler => Setting::new(0.0, t),
            }
        })
        .collect()
}

/// One `(I₊, I₋)` frame per sweep setting, `I± ∝ (1 ± V·cos ψ)/2`.
pub fn run_classical_fringes(
    state: &BellEprState,
    arm: Arm,
    sweep: &[Setting],
    spec: &ClassicalSpec,
) -> Result<Vec<IntensityFrame>> {
    if !(spec.visibility >= 0.0 && spec.visibility <= 1.0) {
        return Err(Error::invalid(format!("visibility must be in [0, 1], got {}", spec.visibility)));
    }
    if !(spec.mean_intensity > 0.0 && spec.mean_intensity.is_finite()) {
        return Err(Error::invalid("mean intensity must be positive"));
    }
    let g = spec.grid;
    let mut pixel_phase = Vec::with_capacity(g.len());
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let k = g.center(ix, iy);
            pixel_phase.push(match arm {
                Arm::Signal => state.phase_s.eval(k),
                Arm::Idler => state.phase_i.eval(k),
                Arm::Joint => state.phase_s.eval(-k) - state.phase_i.eval(k),
            });
        }
    }
    let key = StreamKey::new(spec.seed, 0xC1A5 + arm as u64);
    sweep
        .iter()
        .enumerate()
        .map(|(j, setting)| {
            let theta = arm.global_phase(setting)?;
            let mut stream = key.stream(j as u64);
            let mut draw = |lambda: f64| {
                if !spec.poisson {
                    lambda
                } else if lambda > 0.0 {
                    Poisson::new(lambda).map(|d| d.sample(&mut stream)).unwrap_or(0.0)
                } else {
                    0.0
                }
            };
            let half = 0.5 * spec.mean_intensity;
            let mut plus = Vec::with_capacity(g.len());
            let mut minus = Vec::with_capacity(g.len());
            for &phi in &pixel_phase {
                let c = spec.visibility * (phi + theta).cos();
                plus.push(draw(half * (1.0 + c)));
                minus.push(draw(half * (1.0 - c)));
            }
            Ok(IntensityFrame { setting: *setting, global_phase: theta, plus, minus })
        })
        .collect()
}
