use crate::error::{Error, Result};
use crate::montecarlo::FrameSet;
use crate::{Grid, Setting};

/// Per-bin `C = (n₊ − n₋)/(n₊ + n₋)`, NaN where a bin saw no counts.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMap {
    pub grid: Grid,
    pub setting: Setting,
    pub values: Vec<f64>,
    /// Binomial standard error `sqrt((1 − C²)/(n₊ + n₋))`.
    pub errors: Vec<f64>,
    pub totals: Vec<u64>,
}

impl CorrelationMap {
    pub fn from_counts(grid: Grid, setting: Setting, plus: &[u64], minus: &[u64]) -> Result<Self> {
        if plus.len() != grid.len() || minus.len() != grid.len() {
            return Err(Error::invalid(format!(
                "count arrays of length {} and {} do not match a {}x{} grid",
                plus.len(),
                minus.len(),
                grid.nx,
                grid.ny
            )));
        }
        let n = grid.len();
        let (mut values, mut errors, mut totals) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for (&p, &m) in plus.iter().zip(minus) {
            let t = p + m;
            totals.push(t);
            if t == 0 {
                values.push(f64::NAN);
                errors.push(f64::NAN);
            } else {
                let c = (p as f64 - m as f64) / t as f64;
                values.push(c);
                errors.push(((1.0 - c * c).max(0.0) / t as f64).sqrt());
            }
        }
        Ok(CorrelationMap { grid, setting, values, errors, totals })
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.totals[i] == 0
    }

    /// Count-weighted mean of C over the whole map with its binomial error.
    pub fn pooled(&self) -> Result<(f64, f64)> {
        let n: u64 = self.totals.iter().sum();
        if n == 0 {
            return Err(Error::InsufficientData("correlation map has no counts".into()));
        }
        let s: f64 = self.values.iter().zip(&self.totals).filter(|(_, &t)| t > 0).map(|(c, &t)| c * t as f64).sum();
        let c = s / n as f64;
        let nf = n as f64;
        Ok((c, ((1.0 - c * c).max(1.0 / nf) / nf).sqrt()))
    }
}

pub fn correlation_map(frames: &FrameSet) -> CorrelationMap {
    let plus: Vec<u64> = frames.plus.iter().map(|&c| c as u64).collect();
    let minus: Vec<u64> = frames.minus.iter().map(|&c| c as u64).collect();
    CorrelationMap::from_counts(frames.grid, frames.setting, &plus, &minus).expect("frame set arrays match its grid")
}

/// `C^∞`, taken as one constant over the marginal-setting map.
pub fn c_marginal(frames: &FrameSet) -> Result<(f64, f64)> {
    if !frames.setting.is_marginal() {
        return Err(Error::invalid(format!("C^inf needs the marginal setting, got {}", frames.setting)));
    }
    correlation_map(frames).pooled()
}
