//! Local-hidden-variable bound for the ghost-imaging CHSH combination.
//!
//! A deterministic strategy fixes, for one value of λ, whether the signal is
//! transmitted by its analyzer at `a`, `a'` or with the analyzer removed
//! (`s ∈ {0, 1}`), and the idler outcome at `b`, `b'` (`i ∈ {−1, 0, +1}`, 0 for
//! no detection). No-enhancement: inserting the analyzer cannot create a
//! signal detection (`s_a, s_a' ≤ s_∞`), and the idler is not detected at
//! `b'` more often than at `b`. The correlations are normalized by the
//! marginal coincidence rate, so for a λ-ensemble with weights `w`
//!
//! ```text
//! S = 2 Σ w·v / Σ w·n,
//! v = s_a i_b − s_a i_b' + s_a' i_b + s_a' i_b' − s_∞ i_b,   n = s_∞ |i_b|
//! ```
//!
//! and `|v| ≤ n` for every strategy gives `|S| ≤ 2`.

use crate::rng::StreamKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Strategy {
    pub s_a: i64,
    pub s_a2: i64,
    pub s_inf: i64,
    pub i_b: i64,
    pub i_b2: i64,
}

impl Strategy {
    /// `(v, n)` of the module formula.
    pub fn terms(&self) -> (i64, i64) {
        let v = self.s_a * self.i_b - self.s_a * self.i_b2 + self.s_a2 * self.i_b + self.s_a2 * self.i_b2 - self.s_inf * self.i_b;
        (v, self.s_inf * self.i_b.abs())
    }

    /// `S` of this strategy alone; `None` when it never yields a coincidence.
    pub fn s(&self) -> Option<f64> {
        let (v, n) = self.terms();
        (n > 0).then(|| 2.0 * v as f64 / n as f64)
    }
}

/// All strategies allowed by the no-enhancement constraints (5 signal × 7 idler).
pub fn enumerate_strategies() -> Vec<Strategy> {
    let mut signal = vec![(0, 0, 0)];
    for s_a in 0..=1 {
        for s_a2 in 0..=1 {
            signal.push((s_a, s_a2, 1));
        }
    }
    let mut idler = vec![(0, 0)];
    for i_b in [-1, 1] {
        for i_b2 in [-1, 0, 1] {
            idler.push((i_b, i_b2));
        }
    }
    let mut out = Vec::with_capacity(signal.len() * idler.len());
    for &(s_a, s_a2, s_inf) in &signal {
        for &(i_b, i_b2) in &idler {
            out.push(Strategy { s_a, s_a2, s_inf, i_b, i_b2 });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LhvBound {
    /// Largest `|S|` over the individual strategies.
    pub exhaustive_max: f64,
    /// Largest `|S|` over the sampled λ-ensembles.
    pub sampled_max: f64,
    pub models: usize,
}

/// Evaluates every deterministic strategy, then `n_models` random
/// ensembles with integer weights, so every ratio is computed exactly.
pub fn lhv_bound_oracle(n_models: usize, seed: u64) -> LhvBound {
    let strategies = enumerate_strategies();
    let terms: Vec<(i64, i64)> = strategies.iter().map(Strategy::terms).collect();
    let exhaustive_max = strategies.iter().filter_map(Strategy::s).fold(0.0f64, |m, s| m.max(s.abs()));

    let key = StreamKey::new(seed, 0x1B5);
    let mut sampled_max = 0.0f64;
    for m in 0..n_models {
        let mut stream = key.stream(m as u64);
        // sparse ensembles probe the extremes, dense ones the interior
        let support = 1 + (stream.next_u64() % terms.len() as u64) as usize;
        let (mut num, mut den) = (0i64, 0i64);
        for _ in 0..support {
            let k = (stream.next_u64() % terms.len() as u64) as usize;
            let w = 1 + (stream.next_u64() >> 44) as i64;
            num += w * terms[k].0;
            den += w * terms[k].1;
        }
        if den > 0 {
            sampled_max = sampled_max.max((2 * num.abs()) as f64 / den as f64);
        }
    }
    LhvBound { exhaustive_max, sampled_max, models: n_models }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_five_strategies_bounded_by_two() {
        let all = enumerate_strategies();
        assert_eq!(all.len(), 35);
        for s in &all {
            let (v, n) = s.terms();
            assert!(v.abs() <= n, "{s:?}");
        }
        // the 16 always-detected ±1 strategies are included
        let full = all.iter().filter(|s| s.s_inf == 1 && s.i_b != 0 && s.i_b2 != 0).count();
        assert_eq!(full, 16);
    }

    #[test]
    fn always_plus() {
        let s = Strategy { s_a: 1, s_a2: 1, s_inf: 1, i_b: 1, i_b2: 1 };
        // 1 − 1 + 1 + 1 − 1 = 1 over n = 1
        assert_eq!(s.s(), Some(2.0));
    }

    #[test]
    fn oracle_is_exactly_two() {
        let b = lhv_bound_oracle(20_000, 1);
        assert_eq!(b.exhaustive_max, 2.0);
        assert!(b.sampled_max <= 2.0);
    }
}
