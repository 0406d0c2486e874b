use super::sequence::for_chunks;
use super::NoiseModel;
use crate::error::{Error, Result};
use crate::kspace::sample_pair;
use crate::measurement::Channel;
use crate::rng::{threshold_u32, StreamKey, TrialStream};
use crate::{BellEprState, KVector};

/// Camera-camera run: the bucket is replaced by a second camera, so both
/// photons are localized and `ks + ki` can be histogrammed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaRunSpec {
    pub n_trials: u64,
    pub seed: u64,
    pub bins: usize,
    /// Histogram range `[-half_range, half_range]` of each component of `ks + ki`.
    pub half_range: f64,
}

/// Histograms of `(ks + ki)_x` and `(ks + ki)_y` per idler channel, for
/// same-trial pairs and for pairs shifted by one trial (accidentals).
#[derive(Clone, Debug, PartialEq)]
pub struct KappaHistograms {
    pub centers: Vec<f64>,
    /// `[axis][channel]`, axis 0 = x.
    pub coincident: [[Vec<u64>; 2]; 2],
    pub accidental: [[Vec<u64>; 2]; 2],
    pub trials: u64,
}

impl KappaHistograms {
    fn empty(bins: usize, half_range: f64) -> Self {
        let w = 2.0 * half_range / bins as f64;
        let z = || [vec![0; bins], vec![0; bins]];
        KappaHistograms {
            centers: (0..bins).map(|i| -half_range + (i as f64 + 0.5) * w).collect(),
            coincident: [z(), z()],
            accidental: [z(), z()],
            trials: 0,
        }
    }

    fn merge(&mut self, o: &KappaHistograms) {
        for a in 0..2 {
            for c in 0..2 {
                for (x, y) in self.coincident[a][c].iter_mut().zip(&o.coincident[a][c]) {
                    *x += y;
                }
                for (x, y) in self.accidental[a][c].iter_mut().zip(&o.accidental[a][c]) {
                    *x += y;
                }
            }
        }
        self.trials += o.trials;
    }

    /// Background-subtracted histogram and its Poisson variance.
    pub fn net(&self, axis: usize, channel: Channel) -> (Vec<f64>, Vec<f64>) {
        let c = channel as usize;
        self.coincident[axis][c]
            .iter()
            .zip(&self.accidental[axis][c])
            .map(|(&n, &b)| (n as f64 - b as f64, (n + b) as f64))
            .unzip()
    }
}

pub fn run_kappa_diagnostic(
    state: &BellEprState,
    noise: &NoiseModel,
    spec: &KappaRunSpec,
    workers: usize,
) -> Result<KappaHistograms> {
    noise.validate()?;
    if spec.n_trials < 2 || spec.bins == 0 || !(spec.half_range > 0.0) {
        return Err(Error::invalid("kappa diagnostic needs >= 2 trials, >= 1 bin and a positive range"));
    }
    let key = StreamKey::new(spec.seed, 0x4B41_5050);
    let w = state.params.fov_half_width;
    let thr_p = threshold_u32(noise.p);
    let uniform_k = |s: &mut TrialStream| KVector::new((2.0 * s.uniform() - 1.0) * w, (2.0 * s.uniform() - 1.0) * w);
    let trial = |id: u64| {
        let mut s = key.stream(id);
        let mut sig: Vec<KVector> = Vec::new();
        let mut idl: Vec<(KVector, Channel)> = Vec::new();
        if (s.next_u64() >> 32) < thr_p {
            // a second pair with probability p/2 gives the within-trial cross
            // pairs the same O(p²) rate that the shifted-trial estimate sees
            let pairs = if noise.multi_pair && s.uniform() < noise.p / 2.0 { 2 } else { 1 };
            for _ in 0..pairs {
                let (ks, ki) = sample_pair(state, &mut s);
                if s.uniform() < noise.chi_s {
                    sig.push(ks);
                }
                if s.uniform() < noise.chi_i {
                    let ch = if s.uniform() < 0.5 { Channel::Plus } else { Channel::Minus };
                    idl.push((ki, ch));
                }
            }
        }
        if s.uniform() < noise.zeta_s {
            sig.push(uniform_k(&mut s));
        }
        if s.uniform() < noise.zeta_i {
            let k = uniform_k(&mut s);
            let ch = if s.uniform() < 0.5 { Channel::Plus } else { Channel::Minus };
            idl.push((k, ch));
        }
        (sig, idl)
    };
    let bin = |v: f64| {
        let u = (v + spec.half_range) / (2.0 * spec.half_range) * spec.bins as f64;
        (u >= 0.0 && u < spec.bins as f64).then_some(u as usize)
    };
    let fill = |h: &mut [[Vec<u64>; 2]; 2], sig: &[KVector], idl: &[(KVector, Channel)]| {
        for &ks in sig {
            for &(ki, ch) in idl {
                let sum = ks + ki;
                for (axis, v) in [sum.kx, sum.ky].into_iter().enumerate() {
                    if let Some(b) = bin(v) {
                        h[axis][ch as usize][b] += 1;
                    }
                }
            }
        }
    };

    let parts = for_chunks(spec.n_trials, workers, |start, end| {
        let mut h = KappaHistograms::empty(spec.bins, spec.half_range);
        h.trials = end - start;
        let mut prev = trial(start);
        fill(&mut h.coincident, &prev.0, &prev.1);
        for id in start + 1..end {
            let cur = trial(id);
            fill(&mut h.coincident, &cur.0, &cur.1);
            fill(&mut h.accidental, &prev.0, &cur.1);
            prev = cur;
        }
        Ok(h)
    })?;
    let mut total = KappaHistograms::empty(spec.bins, spec.half_range);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}
