//! Fourier-transform phase retrieval from stacks of correlation frames.
//!
//! Each frame `C_j(k) ≈ V cos(φ(k) + θ_j)` is transformed, everything but a
//! rectangular window around one carrier peak is zeroed, and the inverse
//! transform gives `e^{±i(φ + θ_j)}`. Removing `θ_j` and averaging the unit
//! phasors over the stack yields `φ` and its mean resultant length.

use log::warn;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::kspace::SampledPhase as Sampled;
use crate::scalar::wrap_pi;
use crate::{Grid, PhaseProfile, SampledPhase};

/// Correlation frames sharing one grid, with the global phase of each.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeStack {
    pub grid: Grid,
    /// Row-major maps; NaN marks bins without data.
    pub frames: Vec<Vec<f64>>,
    pub phases: Vec<f64>,
}

impl FringeStack {
    /// Validates shapes. Returns warnings (e.g. global phases spanning less than π).
    pub fn new(grid: Grid, frames: Vec<Vec<f64>>, phases: Vec<f64>) -> Result<(Self, Vec<String>)> {
        if frames.is_empty() || frames.len() != phases.len() {
            return Err(Error::invalid(format!("{} frames with {} phases", frames.len(), phases.len())));
        }
        if let Some(f) = frames.iter().find(|f| f.len() != grid.len()) {
            return Err(Error::invalid(format!("frame of {} bins on a {}x{} grid", f.len(), grid.nx, grid.ny)));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("global phases must be finite"));
        }
        let mut warnings = Vec::new();
        let span = circular_span(&phases);
        if span < std::f64::consts::PI {
            warnings.push(format!("global phases span only {span:.3} rad (< π)"));
        }
        Ok((FringeStack { grid, frames, phases }, warnings))
    }
}

/// Length of the smallest arc holding all angles.
fn circular_span(angles: &[f64]) -> f64 {
    let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(std::f64::consts::TAU)).collect();
    a.sort_by(f64::total_cmp);
    let mut gap = a.first().zip(a.last()).map_or(0.0, |(f, l)| f + std::f64::consts::TAU - l);
    for w in a.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    std::f64::consts::TAU - gap
}

/// Which of the two symmetric carrier peaks to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CarrierSign {
    /// Positive frequency along the dominant axis; returns `+φ`.
    #[default]
    Positive,
    /// The conjugate peak; returns `−φ`.
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum CarrierWindow {
    /// Half-width of half the carrier distance to DC.
    #[default]
    Auto,
    /// Half-width in frequency bins.
    HalfWidth(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RetrievalOptions {
    pub window: CarrierWindow,
    pub sign: CarrierSign,
    /// Subtract the integer-bin carrier ramp from the result.
    pub remove_carrier: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Retrieved {
    /// Wrapped to (−π, π] on the stack's grid.
    pub profile: SampledPhase,
    /// Mean resultant length of the per-frame phasors, averaged over bins.
    pub coherence: f64,
    /// Selected peak in signed frequency bins `(fx, fy)`.
    pub carrier: (i64, i64),
    pub warnings: Vec<String>,
}

impl Retrieved {
    pub fn into_profile(self) -> PhaseProfile {
        PhaseProfile::Sampled(self.profile)
    }
}

fn signed(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn fft2(data: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (fx, fy) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    for row in data.chunks_mut(nx) {
        fx.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for x in 0..nx {
        for y in 0..ny {
            col[y] = data[y * nx + x];
        }
        fy.process(&mut col);
        for y in 0..ny {
            data[y * nx + x] = col[y];
        }
    }
}

fn spectrum(frame: &[f64], nx: usize, ny: usize) -> Vec<Complex64> {
    let valid: Vec<f64> = frame.iter().copied().filter(|v| v.is_finite()).collect();
    let mean = if valid.is_empty() { 0.0 } else { valid.iter().sum::<f64>() / valid.len() as f64 };
    let mut data: Vec<Complex64> = frame
        .iter()
        .map(|&v| Complex64::new(if v.is_finite() { v - mean } else { 0.0 }, 0.0))
        .collect();
    fft2(&mut data, nx, ny, false);
    data
}

pub fn retrieve_phase(stack: &FringeStack, opts: &RetrievalOptions) -> Result<Retrieved> {
    let g = stack.grid;
    let (nx, ny) = (g.nx, g.ny);
    let spectra: Vec<Vec<Complex64>> = stack.frames.iter().map(|f| spectrum(f, nx, ny)).collect();

    // carrier from the summed magnitude spectrum
    let mut mag = vec![0.0; nx * ny];
    for s in &spectra {
        for (m, z) in mag.iter_mut().zip(s) {
            *m += z.norm();
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &m) in mag.iter().enumerate() {
        let (fx, fy) = (signed(i % nx, nx), signed(i / nx, ny));
        if fx.abs().max(fy.abs()) < 2 {
            continue;
        }
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    let (peak_idx, peak) = best.ok_or_else(|| Error::NoCarrier("grid too small to hold a carrier away from DC".into()))?;
    let mut sorted = mag.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if !(peak > 3.0 * median) || peak == 0.0 {
        return Err(Error::NoCarrier(format!("strongest peak {peak:.3e} is not above 3x the spectral median {median:.3e}")));
    }
    let (mut cx, mut cy) = (signed(peak_idx % nx, nx), signed(peak_idx / nx, ny));
    let dominant_positive = if cx.abs() >= cy.abs() { cx > 0 } else { cy > 0 };
    let want_positive = opts.sign == CarrierSign::Positive;
    if dominant_positive != want_positive {
        cx = -cx;
        cy = -cy;
    }
    let sigma = if want_positive { 1.0 } else { -1.0 };
    let half = match opts.window {
        CarrierWindow::Auto => 0.5 * ((cx * cx + cy * cy) as f64).sqrt(),
        CarrierWindow::HalfWidth(h) => h,
    };
    if !(half > 0.0) {
        return Err(Error::invalid("carrier window half-width must be positive"));
    }

    let mut acc = vec![Complex64::new(0.0, 0.0); nx * ny];
    for (spec, &theta) in spectra.iter().zip(&stack.phases) {
        let mut data = spec.clone();
        for (i, z) in data.iter_mut().enumerate() {
            let (fx, fy) = (signed(i % nx, nx), signed(i / nx, ny));
            if ((fx - cx) as f64).abs() > half || ((fy - cy) as f64).abs() > half {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        fft2(&mut data, nx, ny, true);
        let demod = Complex64::from_polar(1.0, -sigma * theta);
        for (a, z) in acc.iter_mut().zip(&data) {
            let n = z.norm();
            if n > 0.0 {
                *a += z / n * demod;
            }
        }
    }
    let nf = stack.frames.len() as f64;
    let mut coherence = 0.0;
    let mut values = Vec::with_capacity(nx * ny);
    for (i, a) in acc.iter().enumerate() {
        let m = a / nf;
        coherence += m.norm();
        let mut phi = m.arg();
        if opts.remove_carrier {
            let (ix, iy) = ((i % nx) as f64, (i / nx) as f64);
            let ramp = std::f64::consts::TAU * (cx as f64 * ix / nx as f64 + cy as f64 * iy / ny as f64);
            phi -= sigma * ramp;
        }
        values.push(wrap_pi(phi));
    }
    coherence /= (nx * ny) as f64;

    let mut warnings = Vec::new();
    if coherence < 0.5 {
        let w = format!("low coherence {coherence:.3}: the retrieved profile is unreliable");
        warn!("{w}");
        warnings.push(w);
    }
    let c0 = g.center(0, 0);
    let profile = Sampled::new(nx, ny, c0.kx, c0.ky, g.dx(), g.dy(), values)?;
    Ok(Retrieved { profile, coherence, carrier: (cx, cy), warnings })
}

/// `φ_s(−ki) − φ_i(ki)` sampled on `grid`.
pub fn combine_profiles(phase_s: &PhaseProfile, phase_i: &PhaseProfile, grid: &Grid) -> Result<SampledPhase> {
    let covered = |p: &PhaseProfile, k| match p {
        PhaseProfile::Sampled(s) => s.covers(k),
        PhaseProfile::Linear { .. } => true,
    };
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let k = grid.center(ix, iy);
            if !covered(phase_s, -k) || !covered(phase_i, k) {
                return Err(Error::InvalidGeometry(format!(
                    "profiles do not overlap at ki = ({}, {}) after reflecting the signal arm",
                    k.kx, k.ky
                )));
            }
        }
    }
    Sampled::from_grid(grid, |k| phase_s.eval(-k) - phase_i.eval(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{run_classical_fringes, uniform_sweep, Arm, ClassicalSpec};
    use crate::{BellEprState, KVector};
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(64, 64, 25.0).unwrap()
    }

    fn stack_for(phase_i: PhaseProfile, poisson: bool, n: usize) -> FringeStack {
        let st = BellEprState::new(Default::default(), PhaseProfile::flat(), phase_i).unwrap();
        let spec = ClassicalSpec { grid: grid(), visibility: 0.9, mean_intensity: 2000.0, poisson, seed: 4 };
        let frames = run_classical_fringes(&st, Arm::Idler, &uniform_sweep(Arm::Idler, n), &spec).unwrap();
        let phases = frames.iter().map(|f| f.global_phase).collect();
        FringeStack::new(grid(), frames.iter().map(|f| f.correlation()).collect(), phases).unwrap().0
    }

    fn rms_up_to_constant(a: &SampledPhase, truth: impl Fn(KVector) -> f64) -> f64 {
        let g = grid();
        let d: Vec<f64> = (0..g.len()).map(|i| a.values[i] - truth(g.center(i % g.nx, i / g.nx))).collect();
        let c = d.iter().map(|x| Complex64::from_polar(1.0, *x)).sum::<Complex64>().arg();
        (d.iter().map(|x| wrap_pi(x - c).powi(2)).sum::<f64>() / d.len() as f64).sqrt()
    }

    // 3 fringe periods over the 50 mm⁻¹ field
    const SLOPE: f64 = 6.0 * PI / 50.0;

    #[test]
    fn linear_profile_round_trip() {
        let r = retrieve_phase(&stack_for(PhaseProfile::linear(0.0, SLOPE, 0.4), true, 12), &RetrievalOptions::default()).unwrap();
        assert_eq!(r.carrier, (0, 3));
        assert!(r.coherence > 0.9);
        let rms = rms_up_to_constant(&r.profile, |k| SLOPE * k.ky);
        assert!(rms < 0.05, "{rms}");
    }

    #[test]
    fn null_profile_after_carrier_removal() {
        let r = retrieve_phase(
            &stack_for(PhaseProfile::linear(0.0, SLOPE, 0.0), false, 8),
            &RetrievalOptions { remove_carrier: true, ..Default::default() },
        )
        .unwrap();
        let rms = rms_up_to_constant(&r.profile, |_| 0.0);
        assert!(rms < 1e-2, "{rms}");
    }

    #[test]
    fn conjugate_peak_negates() {
        let stack = stack_for(PhaseProfile::linear(0.0, SLOPE, 0.0), false, 8);
        let p = retrieve_phase(&stack, &RetrievalOptions::default()).unwrap();
        let n = retrieve_phase(&stack, &RetrievalOptions { sign: CarrierSign::Negative, ..Default::default() }).unwrap();
        for (a, b) in p.profile.values.iter().zip(&n.profile.values) {
            assert!(wrap_pi(a + b).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_order_does_not_matter() {
        let s = stack_for(PhaseProfile::linear(0.0, SLOPE, 0.0), true, 6);
        let mut rev = s.clone();
        rev.frames.reverse();
        rev.phases.reverse();
        let a = retrieve_phase(&s, &RetrievalOptions::default()).unwrap();
        let b = retrieve_phase(&rev, &RetrievalOptions::default()).unwrap();
        for (x, y) in a.profile.values.iter().zip(&b.profile.values) {
            assert!(wrap_pi(x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_frames_have_no_carrier() {
        let s = stack_for(PhaseProfile::flat(), false, 4);
        assert!(matches!(retrieve_phase(&s, &RetrievalOptions::default()), Err(Error::NoCarrier(_))));
    }

    #[test]
    fn narrow_phase_sweep_warns() {
        let g = Grid::new(4, 4, 1.0).unwrap();
        let (_, w) = FringeStack::new(g, vec![vec![0.0; 16]; 2], vec![0.0, 0.5]).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn combined_linear_slopes() {
        let g = Grid::new(8, 8, 25.0).unwrap();
        let (a, b) = (0.2, -0.45);
        let d = combine_profiles(&PhaseProfile::linear(0.0, a, 0.0), &PhaseProfile::linear(0.0, b, 0.0), &g).unwrap();
        let k = g.center(3, 5);
        assert!((d.eval(k) - (-a - b) * k.ky).abs() < 1e-12);
        let even = PhaseProfile::Sampled(Sampled::from_grid(&g, |k| 1e-3 * (k.kx * k.kx + k.ky * k.ky)).unwrap());
        let z = combine_profiles(&even, &even, &g).unwrap();
        assert!(z.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn disjoint_profiles_rejected() {
        let small = Grid::new(4, 4, 2.0).unwrap();
        let s = PhaseProfile::Sampled(Sampled::from_grid(&small, |_| 0.0).unwrap());
        assert!(matches!(combine_profiles(&s, &PhaseProfile::flat(), &grid()), Err(Error::InvalidGeometry(_))));
    }
}
