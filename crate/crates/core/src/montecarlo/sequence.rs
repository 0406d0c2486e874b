use log::debug;
use rayon::prelude::*;

use super::{FrameSet, G2Tally, IdlerHit, NoiseModel, TrialEvent};
use crate::error::{Error, Result};
use crate::kspace::sample_pair;
use crate::measurement::{conditional_idler_prob, kappa_visibility, mismatch_visibility, Channel};
use crate::quadrature::{integrate_disc, QuadOptions};
use crate::rng::{mix64, threshold_u32, StreamKey, TrialStream};
use crate::{BellEprState, Grid, KVector, Setting};

const CHUNK: u64 = 1 << 16;
const LOW32: u64 = 0xFFFF_FFFF;

/// What to simulate for one setting.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub setting: Setting,
    pub n_trials: u64,
    pub seed: u64,
    /// Separates the streams of runs that share a seed. [`RunSpec::new`]
    /// derives it from the setting.
    pub domain: u64,
    pub grid: Grid,
    /// Visibility factor of the optics (`v` of the conditional probability).
    pub optics_visibility: f64,
    pub record_events: bool,
    /// Largest count a histogram bin may hold.
    pub bin_capacity: u32,
}

impl RunSpec {
    pub fn new(setting: Setting, n_trials: u64, seed: u64, grid: Grid) -> Self {
        RunSpec {
            domain: setting_domain(&setting),
            setting,
            n_trials,
            seed,
            grid,
            optics_visibility: 1.0,
            record_events: false,
            bin_capacity: u32::MAX,
        }
    }
}

fn setting_domain(s: &Setting) -> u64 {
    let ts = match s.theta_s {
        crate::SignalAnalyzer::Angle(t) => t.to_bits(),
        crate::SignalAnalyzer::Marginal => u64::MAX,
    };
    mix64(ts ^ mix64(s.theta_i.to_bits()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceOutput {
    pub frames: FrameSet,
    /// Bucket-click trials in trial order (empty unless requested).
    pub events: Vec<TrialEvent>,
}

/// Mean probability that the signal partner of a uniformly drawn idler
/// lands inside the bucket aperture.
pub fn mean_bucket_acceptance(state: &BellEprState) -> Result<f64> {
    let w = state.params.fov_half_width;
    let kappa = state.params.kappa;
    let s = kappa * std::f64::consts::SQRT_2;
    // density of one component of ks = −ki + Δ
    let axis = |u: f64| (libm::erf((u + w) / s) - libm::erf((u - w) / s)) / (4.0 * w);
    let opts = QuadOptions { rel_tol: 1e-8, ..QuadOptions::default() };
    let r = integrate_disc(|x, y| [axis(x) * axis(y)], state.params.bucket_radius_k, &opts)?;
    Ok(r.values[0].min(1.0))
}

struct Kernel<'a> {
    state: &'a BellEprState,
    setting: Setting,
    noise: NoiseModel,
    key: StreamKey,
    thr_pair: u64,
    thr_zeta_s: u64,
    bucket_r2: f64,
    marginal: bool,
    optics: f64,
    multi_prob: f64,
    half_width: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Outcome {
    hit: Option<(KVector, Channel, bool)>,
    /// Photons detected in each arm, before the one-count camera readout.
    n_signal: u64,
    n_idler: u64,
}

impl<'a> Kernel<'a> {
    fn new(state: &'a BellEprState, noise: &NoiseModel, setting: Setting, seed: u64, domain: u64, optics: f64) -> Result<Self> {
        noise.validate()?;
        if !(optics > 0.0 && optics <= 1.0) {
            return Err(Error::invalid(format!("optics visibility must be in (0, 1], got {optics}")));
        }
        let marginal = setting.is_marginal();
        let polarizer = if marginal { 1.0 } else { 0.5 };
        let eta_s = noise.chi_s * polarizer * mean_bucket_acceptance(state)?;
        Ok(Kernel {
            state,
            setting,
            noise: *noise,
            key: StreamKey::new(seed, domain),
            thr_pair: threshold_u32(noise.p),
            thr_zeta_s: threshold_u32(noise.zeta_s),
            bucket_r2: state.params.bucket_radius_k.powi(2),
            marginal,
            optics,
            multi_prob: if noise.multi_pair { noise.p * eta_s * noise.chi_i } else { 0.0 },
            half_width: state.params.fov_half_width,
        })
    }

    fn uniform_k(&self, s: &mut TrialStream) -> KVector {
        let w = self.half_width;
        KVector::new((2.0 * s.uniform() - 1.0) * w, (2.0 * s.uniform() - 1.0) * w)
    }

    fn coin(s: &mut TrialStream) -> Channel {
        if s.uniform() < 0.5 {
            Channel::Plus
        } else {
            Channel::Minus
        }
    }

    /// Runs one trial. With `gated`, returns `None` for trials without a
    /// bucket click and performs no readout draws for them.
    #[inline]
    fn trial(&self, id: u64, gated: bool) -> Result<Option<Outcome>> {
        let mut s = self.key.stream(id);
        let r0 = s.next_u64();
        let pair = (r0 >> 32) < self.thr_pair;
        let zeta_s = (r0 & LOW32) < self.thr_zeta_s;
        if gated && !pair && !zeta_s {
            return Ok(None);
        }

        let mut own = false;
        let mut multi = false;
        // Some(passed) once the signal reached the analyzer.
        let mut analyzed = None;
        let mut ki = KVector::zero();
        if pair {
            let (ks, k) = sample_pair(self.state, &mut s);
            ki = k;
            if ks.norm_sqr() <= self.bucket_r2 {
                let pass = self.marginal || s.uniform() < 0.5;
                if !self.marginal {
                    analyzed = Some(pass);
                }
                if pass {
                    own = s.uniform() < self.noise.chi_s;
                }
            }
            multi = s.uniform() < self.multi_prob;
        }
        let click = own || zeta_s || multi;
        if gated && !click {
            return Ok(None);
        }

        let mut partner = None;
        if pair && s.uniform() < self.noise.chi_i {
            let q = match analyzed {
                None => 0.5,
                Some(pass) => {
                    let q = conditional_idler_prob(self.state, &self.setting, ki, self.state.params.xi_k, self.optics)?;
                    if pass {
                        q
                    } else {
                        1.0 - q
                    }
                }
            };
            let ch = if s.uniform() < q { Channel::Plus } else { Channel::Minus };
            partner = Some((ki, ch, !own));
        }
        let mut extra = None;
        if multi {
            let k = self.uniform_k(&mut s);
            extra = Some((k, Self::coin(&mut s), true));
        }
        let mut stray = None;
        if s.uniform() < self.noise.zeta_i {
            let k = self.uniform_k(&mut s);
            stray = Some((k, Self::coin(&mut s), true));
        }
        let n_signal = own as u64 + zeta_s as u64 + multi as u64;
        let n_idler = [partner.is_some(), extra.is_some(), stray.is_some()].iter().filter(|&&b| b).count() as u64;
        Ok(Some(Outcome { hit: partner.or(extra).or(stray), n_signal, n_idler }))
    }
}

pub(super) fn for_chunks<R, F>(n_trials: u64, workers: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u64, u64) -> Result<R> + Sync + Send,
{
    let n_chunks = n_trials.div_ceil(CHUNK);
    let run = |c: u64| f(c * CHUNK, ((c + 1) * CHUNK).min(n_trials));
    if workers <= 1 {
        return (0..n_chunks).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..n_chunks).into_par_iter().map(run).collect())
}

struct Chunk {
    start: u64,
    clicks: u64,
    /// `bin << 1 | minus`
    hits: Vec<u32>,
    events: Vec<TrialEvent>,
}

fn check_trials(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n_trials must be at least 1"));
    }
    Ok(())
}

/// Simulates `spec.n_trials` feedback-gated trials and accumulates the
/// ghost images. The result depends only on the inputs, not on `workers`.
pub fn run_sequence(state: &BellEprState, noise: &NoiseModel, spec: &RunSpec, workers: usize) -> Result<SequenceOutput> {
    check_trials(spec.n_trials)?;
    let kernel = Kernel::new(state, noise, spec.setting, spec.seed, spec.domain, spec.optics_visibility)?;
    let grid = spec.grid;
    debug!("run_sequence: {} trials at {}", spec.n_trials, spec.setting);

    let chunks = for_chunks(spec.n_trials, workers, |start, end| {
        let mut out = Chunk { start, clicks: 0, hits: Vec::new(), events: Vec::new() };
        for id in start..end {
            let Some(o) = kernel.trial(id, true)? else { continue };
            out.clicks += 1;
            let hit = o.hit.and_then(|(k, ch, noise)| {
                grid.bin_of(k).map(|(bx, by)| IdlerHit { bin_x: bx as u32, bin_y: by as u32, channel: ch, is_noise: noise })
            });
            if let Some(h) = hit {
                let bin = grid.index(h.bin_x as usize, h.bin_y as usize) as u32;
                out.hits.push(bin << 1 | (h.channel == Channel::Minus) as u32);
            }
            if spec.record_events {
                out.events.push(TrialEvent { trial_id: id, bucket_click: true, readout_performed: true, hit });
            }
        }
        Ok(out)
    })?;

    let mut frames = FrameSet::empty(spec.setting, grid);
    let mut events = Vec::new();
    for chunk in chunks {
        for (n, &h) in chunk.hits.iter().enumerate() {
            let (bin, minus) = ((h >> 1) as usize, h & 1 == 1);
            let counts = if minus { &mut frames.minus } else { &mut frames.plus };
            if counts[bin] >= spec.bin_capacity {
                for &u in &chunk.hits[..n] {
                    let c = if u & 1 == 1 { &mut frames.minus } else { &mut frames.plus };
                    c[(u >> 1) as usize] -= 1;
                }
                return Err(Error::HistogramOverflow { merged_trials: chunk.start, partial: Box::new(frames) });
            }
            counts[bin] += 1;
        }
        frames.trials += CHUNK.min(spec.n_trials - chunk.start);
        frames.bucket_clicks += chunk.clicks;
        events.extend(chunk.events);
    }
    Ok(SequenceOutput { frames, events })
}

/// Diagnostic mode: the camera is read out on every trial, and the photon
/// numbers detected in both arms are tallied for a g² estimate.
pub fn run_unconditional(
    state: &BellEprState,
    noise: &NoiseModel,
    setting: Setting,
    n_trials: u64,
    seed: u64,
    workers: usize,
) -> Result<G2Tally> {
    check_trials(n_trials)?;
    let kernel = Kernel::new(state, noise, setting, seed, setting_domain(&setting) ^ 0x6732, 1.0)?;
    let parts = for_chunks(n_trials, workers, |start, end| {
        let mut t = G2Tally::default();
        for id in start..end {
            let o = kernel.trial(id, false)?.unwrap_or_default();
            t.add(o.n_signal, o.n_idler);
        }
        Ok(t)
    })?;
    Ok(parts.into_iter().fold(G2Tally::default(), |a, b| a.merged(&b)))
}

/// Expected fringe visibility of the gated ghost images, from the same
/// probabilities the simulator draws (spatially averaged; linear profiles).
/// Zero for the marginal setting.
pub fn predicted_visibility(state: &BellEprState, noise: &NoiseModel, setting: &Setting, optics: f64) -> Result<f64> {
    if setting.is_marginal() {
        return Ok(0.0);
    }
    noise.validate()?;
    let a = mean_bucket_acceptance(state)?;
    let kappa = state.params.kappa;
    let alpha = state.phase_s.gradient(KVector::zero()).norm();
    let v_pair = optics * mismatch_visibility(state.params.xi_k, kappa) * kappa_visibility(alpha, kappa);

    let NoiseModel { p, chi_s, chi_i, zeta_s, zeta_i, multi_pair } = *noise;
    let eta = chi_s * 0.5 * a;
    let m = if multi_pair { p * eta * chi_i } else { 0.0 };
    let genuine = p * eta * chi_i;
    // partners of pairs whose signal missed while a spurious click fired
    let stray_partner = p * (1.0 - eta) * zeta_s * chi_i;
    // a multi-pair trial always shows one count: its partner or the extra hit
    let multi = p * m;
    let stray_contrast = -p * (zeta_s + m) * chi_i * eta;
    let click = p * eta + zeta_s + multi;
    let uncounted = (click - genuine - stray_partner - multi).max(0.0);
    let background = stray_partner + multi + zeta_i * uncounted;
    Ok(v_pair * (genuine + stray_contrast) / (genuine + background))
}
