use std::f64::consts::{FRAC_PI_4, SQRT_2, TAU};

use num_complex::Complex64;

use super::fringe::{pixel_phasors, FringeFit};
use crate::error::{Error, Result};
use crate::montecarlo::FrameSet;
use crate::KVector;

fn check_pair(name: &str, (v, e): (f64, f64)) -> Result<()> {
    if !v.is_finite() || !(e >= 0.0) || !e.is_finite() {
        return Err(Error::invalid(format!("{name} must be finite with a non-negative error, got {v} ± {e}")));
    }
    Ok(())
}

/// `(S − 2)/σ` when `S > 2`.
pub fn sd_violation(s: f64, err: f64) -> Option<f64> {
    (s > 2.0 && err > 0.0).then(|| (s - 2.0) / err)
}

/// Four-setting form with cosine fringes: `S = (V₁ + V₂ + V₃ + V₄)/√2 − 2C^∞`,
/// errors added in quadrature.
pub fn bell_s_chsh(visibilities: &[(f64, f64); 4], c_inf: (f64, f64)) -> Result<(f64, f64)> {
    for (i, &v) in visibilities.iter().enumerate() {
        check_pair(&format!("visibility {}", i + 1), v)?;
    }
    check_pair("C^inf", c_inf)?;
    let s = visibilities.iter().map(|v| v.0).sum::<f64>() / SQRT_2 - 2.0 * c_inf.0;
    let var = visibilities.iter().map(|v| v.1 * v.1).sum::<f64>() / 2.0 + 4.0 * c_inf.1 * c_inf.1;
    Ok((s, var.sqrt()))
}

/// The combination `C¹ − C² + C³ + C⁴ − 2C^∞` evaluated with the four fitted
/// fringes `Vₖ cos(φ + oₖ)` at the joint phase that maximizes it. Fits are
/// ordered `(θ_s, θ_i), (θ_s, θ_i'), (θ_s', θ_i), (θ_s', θ_i')`.
pub fn bell_s_chsh_raw(fits: &[FringeFit; 4], c_inf: (f64, f64)) -> Result<(f64, f64)> {
    check_pair("C^inf", c_inf)?;
    let signs = [1.0, -1.0, 1.0, 1.0];
    let mut z = Complex64::new(0.0, 0.0);
    for (f, s) in fits.iter().zip(signs) {
        z += Complex64::new(f.ab[0], f.ab[1]) * s;
    }
    let amp = z.norm();
    if amp == 0.0 {
        return Ok((-2.0 * c_inf.0, 2.0 * c_inf.1));
    }
    // d|z| / d(a_k, b_k) = s_k (Re z, Im z)/|z|
    let (ux, uy) = (z.re / amp, z.im / amp);
    let mut var = 4.0 * c_inf.1 * c_inf.1;
    for f in fits {
        let c = f.ab_cov;
        var += ux * ux * c[0][0] + 2.0 * ux * uy * c[0][1] + uy * uy * c[1][1];
    }
    Ok((amp - 2.0 * c_inf.0, var.sqrt()))
}

/// `3C(φ) − C(3φ)` at `φ = π/4` for `C(φ) = V cos φ`, i.e. `2√2·V`.
pub fn quantum_freedman_s(v: f64) -> f64 {
    v * (3.0 * FRAC_PI_4.cos() - (3.0 * FRAC_PI_4).cos())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub phi: f64,
    pub c: f64,
    pub c_err: f64,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreedmanResult {
    pub s: f64,
    pub s_err: f64,
    pub visibility: f64,
    pub visibility_err: f64,
    pub curve: Vec<CurvePoint>,
}

/// Single-image Bell parameter: pixels are pooled by `φ(−ki, ki) mod 2π`
/// into `n_bins` equal bins, `C(φ) = V cos(φ + θ_s − θ_i)` is fitted with
/// the pixel-averaged model, and `S = 2√2·V − 2C^∞`.
pub fn bell_s_freedman(
    frames: &FrameSet,
    phase: impl Fn(KVector) -> f64 + Copy,
    n_bins: usize,
    c_inf: (f64, f64),
) -> Result<FreedmanResult> {
    check_pair("C^inf", c_inf)?;
    if n_bins < 4 {
        return Err(Error::invalid("at least 4 phase bins are needed"));
    }
    let delta = frames
        .setting
        .phase_offset()
        .ok_or_else(|| Error::invalid("the single-image form needs a setting with a signal analyzer"))?;
    let g = frames.grid;
    let phasors = pixel_phasors(&g, phase);
    let rot = Complex64::from_polar(1.0, delta);

    let mut plus = vec![0u64; n_bins];
    let mut minus = vec![0u64; n_bins];
    let mut model = vec![Complex64::new(0.0, 0.0); n_bins];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let i = g.index(ix, iy);
            let t = frames.plus[i] as u64 + frames.minus[i] as u64;
            if t == 0 {
                continue;
            }
            let phi = phase(g.center(ix, iy)).rem_euclid(TAU);
            let b = ((phi / TAU * n_bins as f64) as usize).min(n_bins - 1);
            plus[b] += frames.plus[i] as u64;
            minus[b] += frames.minus[i] as u64;
            model[b] += phasors[i] * rot * t as f64;
            members[b].push(i);
        }
    }
    if let Some(empty) = (0..n_bins).find(|&b| plus[b] + minus[b] == 0) {
        return Err(Error::InvalidGeometry(format!(
            "joint phase does not span 2π over populated pixels (bin {empty} of {n_bins} is empty)"
        )));
    }

    let n: Vec<f64> = (0..n_bins).map(|b| (plus[b] + minus[b]) as f64).collect();
    let c: Vec<f64> = (0..n_bins).map(|b| (plus[b] as f64 - minus[b] as f64) / n[b]).collect();
    let r: Vec<f64> = (0..n_bins).map(|b| model[b].re / n[b]).collect();
    let solve = |sig: &[f64]| {
        let (mut num, mut den) = (0.0, 0.0);
        for b in 0..n_bins {
            let w = 1.0 / (sig[b] * sig[b]);
            num += w * c[b] * r[b];
            den += w * r[b] * r[b];
        }
        (num / den, den)
    };
    let sig0: Vec<f64> = (0..n_bins).map(|b| ((1.0 - c[b] * c[b]).max(1.0 / n[b]) / n[b]).sqrt()).collect();
    let (v0, _) = solve(&sig0);
    let sig: Vec<f64> = (0..n_bins)
        .map(|b| {
            let var: f64 = members[b]
                .iter()
                .map(|&i| {
                    let t = (frames.plus[i] as u64 + frames.minus[i] as u64) as f64;
                    let cm = (v0 * (phasors[i] * rot).re).clamp(-1.0, 1.0);
                    t * (1.0 - cm * cm).max(1.0 / t)
                })
                .sum();
            var.sqrt() / n[b]
        })
        .collect();
    let (v, den) = solve(&sig);
    if !(den > 0.0) || !v.is_finite() {
        return Err(Error::Numeric("degenerate visibility fit".into()));
    }
    let chi2: f64 = (0..n_bins).map(|b| ((c[b] - v * r[b]) / sig[b]).powi(2)).sum();
    let chi2_red = chi2 / (n_bins - 1) as f64;
    let v_err = (chi2_red.max(1.0) / den).sqrt();

    let s = 2.0 * std::f64::consts::SQRT_2 * v - 2.0 * c_inf.0;
    let s_err = (8.0 * v_err * v_err + 4.0 * c_inf.1 * c_inf.1).sqrt();
    let curve = (0..n_bins)
        .map(|b| CurvePoint {
            phi: (b as f64 + 0.5) * TAU / n_bins as f64,
            c: c[b],
            c_err: sig[b],
            n: n[b] as u64,
        })
        .collect();
    Ok(FreedmanResult { s, s_err, visibility: v, visibility_err: v_err, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Grid, Setting};

    #[test]
    fn tsirelson_point() {
        let (s, e) = bell_s_chsh(&[(1.0, 0.0); 4], (0.0, 0.0)).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 1e-15);
        assert_eq!(e, 0.0);
        assert!((quantum_freedman_s(1.0) - 2.0 * SQRT_2).abs() < 4.0 * f64::EPSILON);
    }

    #[test]
    fn half_visibility_does_not_violate() {
        let (s, e) = bell_s_chsh(&[(0.5, 0.01); 4], (0.0, 0.001)).unwrap();
        assert!((s - SQRT_2).abs() < 1e-15);
        assert_eq!(sd_violation(s, e), None);
    }

    #[test]
    fn reference_visibilities() {
        let v = [(0.779, 0.005), (0.786, 0.005), (0.772, 0.005), (0.789, 0.005)];
        let (s, e) = bell_s_chsh(&v, (0.001, 0.003)).unwrap();
        // (0.779 + 0.786 + 0.772 + 0.789)/√2 − 0.002
        assert!((s - 2.208_416).abs() < 1e-5, "{s}");
        assert!((e - (4.0 * 0.005f64.powi(2) / 2.0 + 4.0 * 0.003f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!(sd_violation(s, e).unwrap() > 20.0);
    }

    fn synthetic(v: f64, delta: f64) -> FrameSet {
        let g = Grid::new(64, 64, 25.0).unwrap();
        let ph = pixel_phasors(&g, |k| 0.44 * k.ky);
        let mut fs = FrameSet::empty(Setting::new(delta, 0.0), g);
        let rot = Complex64::from_polar(1.0, delta);
        for (i, m) in ph.iter().enumerate() {
            let c = v * (m * rot).re;
            fs.plus[i] = ((1.0 + c) / 2.0 * 1e6).round() as u32;
            fs.minus[i] = 1_000_000 - fs.plus[i];
        }
        fs
    }

    #[test]
    fn freedman_on_noiseless_input() {
        let r = bell_s_freedman(&synthetic(0.786, 0.0), |k| 0.44 * k.ky, 36, (0.0, 0.0)).unwrap();
        assert!((r.visibility - 0.786).abs() < 1e-5);
        assert!((r.s - 2.0 * SQRT_2 * 0.786).abs() < 1e-4);
        // maxima at φ ≈ 0, zero near π/2, C(φ) ≈ C(−φ)
        let n = r.curve.len();
        assert!(r.curve[0].c > 0.7 && r.curve[n - 1].c > 0.7);
        assert!(r.curve[n / 4].c.abs() < 0.1);
        for j in 0..n / 2 {
            assert!((r.curve[j].c - r.curve[n - 1 - j].c).abs() < 2e-3);
        }
    }

    #[test]
    fn below_the_bound_no_false_violation() {
        let r = bell_s_freedman(&synthetic(0.7, 0.0), |k| 0.44 * k.ky, 36, (0.0, 0.0)).unwrap();
        assert!(r.s < 2.0);
    }

    #[test]
    fn narrow_phase_span_is_rejected() {
        let fs = synthetic(0.7, 0.0);
        let e = bell_s_freedman(&fs, |k| 0.01 * k.ky, 36, (0.0, 0.0));
        assert!(matches!(e, Err(Error::InvalidGeometry(_))));
    }
}
