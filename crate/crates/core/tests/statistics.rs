//! Monte Carlo output checked against per-bin probabilities computed
//! independently of the simulator.

use ghostlab::analysis::{c_marginal, correlation_map, fringe_fit, AverageAxis};
use ghostlab::formats::write_events;
use ghostlab::kspace::sample_pair;
use ghostlab::measurement::conditional_idler_prob;
use ghostlab::montecarlo::{run_sequence, NoiseModel, RunSpec};
use ghostlab::rng::StreamKey;
use ghostlab::{BellEprState, BiphotonParams, Grid, KVector, PhaseProfile, Setting};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn wide_bucket_state() -> BellEprState {
    let params = BiphotonParams { bucket_radius_k: 60.0, ..Default::default() };
    BellEprState::new(params, PhaseProfile::linear(0.0, 0.0124, 0.0), PhaseProfile::linear(0.0, -0.45, 0.0)).unwrap()
}

/// Mean of `q` over the pixel by 8×8 midpoint sub-sampling.
fn pixel_mean(g: &Grid, ix: usize, iy: usize, q: impl Fn(KVector) -> f64) -> f64 {
    let c = g.center(ix, iy);
    let mut s = 0.0;
    for a in 0..8 {
        for b in 0..8 {
            let u = (a as f64 + 0.5) / 8.0 - 0.5;
            let v = (b as f64 + 0.5) / 8.0 - 0.5;
            s += q(KVector::new(c.kx + u * g.dx(), c.ky + v * g.dy()));
        }
    }
    s / 64.0
}

#[test]
fn frame_counts_match_per_bin_probabilities() {
    let st = wide_bucket_state();
    let noise = NoiseModel::noiseless(0.5, 1.0, 1.0);
    let g = Grid::new(16, 16, 25.0).unwrap();
    let setting = Setting::new(0.7, 0.2);
    let mut spec = RunSpec::new(setting, 2_000_000, 11, g);
    spec.optics_visibility = 0.9;
    let f = run_sequence(&st, &noise, &spec, 4).unwrap().frames;
    let hits = f.total_hits() as f64;
    // every click carries exactly one partner hit, uniform over the camera
    assert_eq!(f.total_hits(), f.bucket_clicks);
    let mut worst = 0.0f64;
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let q = pixel_mean(&g, ix, iy, |k| conditional_idler_prob(&st, &setting, k, st.params.xi_k, 0.9).unwrap());
            let i = g.index(ix, iy);
            let n = (f.plus[i] + f.minus[i]) as f64;
            let p_bin = 1.0 / g.len() as f64;
            let z_total = (n - hits * p_bin) / (hits * p_bin * (1.0 - p_bin)).sqrt();
            let z_plus = (f.plus[i] as f64 - n * q) / (n * q * (1.0 - q)).sqrt();
            worst = worst.max(z_total.abs()).max(z_plus.abs());
        }
    }
    assert!(worst < 4.5, "largest per-bin deviation {worst}σ");
}

#[test]
fn background_is_uniform() {
    let st = wide_bucket_state();
    // pairs effectively off: every camera count is a stray count
    let noise = NoiseModel::new(1e-9, 0.5, 0.5, 0.5, 0.5).unwrap();
    let g = Grid::new(16, 16, 25.0).unwrap();
    let f = run_sequence(&st, &noise, &RunSpec::new(Setting::new(0.0, 0.0), 1_000_000, 3, g), 2).unwrap().frames;
    for counts in [&f.plus, &f.minus] {
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        let e = total as f64 / g.len() as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        let p = 1.0 - ChiSquared::new((g.len() - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 1e-4, "χ² = {chi2}, p = {p}");
    }
    let (c, err) = c_marginal(&ghostlab::montecarlo::FrameSet { setting: Setting::marginal(0.0), ..f.clone() }).unwrap();
    assert!(c.abs() < 4.0 * err);
}

#[test]
fn event_logs_do_not_depend_on_worker_count() {
    let st = wide_bucket_state();
    let noise = NoiseModel::new(0.05, 0.075, 0.3, 2.5e-4, 1.2e-3).unwrap();
    let g = Grid::new(32, 32, 25.0).unwrap();
    let mut spec = RunSpec::new(Setting::new(0.0, 0.0), 400_000, 99, g);
    spec.record_events = true;
    let base = run_sequence(&st, &noise, &spec, 1).unwrap();
    let text = write_events(&base.events);
    for w in [2, 3, 8] {
        let o = run_sequence(&st, &noise, &spec, w).unwrap();
        assert_eq!(o.frames, base.frames, "workers = {w}");
        assert_eq!(write_events(&o.events), text, "workers = {w}");
    }
    assert_eq!(base.events.len() as u64, base.frames.bucket_clicks);
}

#[test]
fn pair_sampler_reproduces_kappa() {
    let st = wide_bucket_state();
    let key = StreamKey::new(2024, 1);
    let n = 1_000_000;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy, mut ix2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for t in 0..n {
        let (ks, ki) = sample_pair(&st, &mut key.stream(t));
        let d = ks + ki;
        sx += d.kx;
        sy += d.ky;
        sxx += d.kx * d.kx;
        syy += d.ky * d.ky;
        sxy += d.kx * d.ky;
        ix2 += ki.kx * ki.kx;
        assert!(st.in_fov(ki));
    }
    let n = n as f64;
    let kx = (sxx / n - (sx / n).powi(2)).sqrt();
    let ky = (syy / n - (sy / n).powi(2)).sqrt();
    assert!((kx - 5.9).abs() < 0.1 && (ky - 5.9).abs() < 0.1, "{kx} {ky}");
    // independent axes, ki uniform over ±25 (variance 625/3)
    assert!((sxy / n).abs() < 0.2);
    assert!((ix2 / n - 625.0 / 3.0).abs() < 1.0);
}

#[test]
fn fit_errors_match_run_to_run_scatter() {
    let st = wide_bucket_state();
    let noise = NoiseModel::new(0.05, 0.3, 0.3, 2.5e-4, 1.2e-3).unwrap();
    let g = Grid::new(32, 32, 25.0).unwrap();
    let phase = |k: KVector| st.anticorrelated_phase(k).unwrap();
    let (mut v, mut reported) = (Vec::new(), Vec::new());
    for seed in 0..24 {
        let f = run_sequence(&st, &noise, &RunSpec::new(Setting::new(0.0, 0.0), 600_000, seed, g), 4).unwrap().frames;
        let fit = fringe_fit(&correlation_map(&f), phase, AverageAxis::Kx).unwrap();
        v.push(fit.visibility);
        reported.push(fit.visibility_err);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
    let e = reported.iter().sum::<f64>() / reported.len() as f64;
    // 24 replicas estimate the scatter to about ±15%
    assert!(sd / e > 0.6 && sd / e < 1.5, "scatter {sd}, reported {e}");
}

#[test]
fn fitted_visibility_matches_prediction_under_noise() {
    use ghostlab::montecarlo::predicted_visibility;
    let st = wide_bucket_state();
    let g = Grid::new(32, 32, 25.0).unwrap();
    let phase = |k: KVector| st.anticorrelated_phase(k).unwrap();
    for noise in [
        NoiseModel::new(0.05, 0.3, 0.3, 2e-3, 1e-2).unwrap(),
        NoiseModel::new(0.1, 0.2, 0.5, 5e-3, 2e-3).unwrap(),
    ] {
        let mut spec = RunSpec::new(Setting::new(0.3, 0.0), 8_000_000, 17, g);
        spec.optics_visibility = 0.95;
        let f = run_sequence(&st, &noise, &spec, 4).unwrap().frames;
        let fit = fringe_fit(&correlation_map(&f), phase, AverageAxis::Kx).unwrap();
        let want = predicted_visibility(&st, &noise, &spec.setting, 0.95).unwrap();
        assert!((fit.visibility - want).abs() < 4.0 * fit.visibility_err + 2e-3, "{} ± {} vs {want}", fit.visibility, fit.visibility_err);
    }
}
