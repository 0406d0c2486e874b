use num_complex::Complex64;

use super::CorrelationMap;
use crate::error::{Error, Result};
use crate::fit::weighted_linear;
use crate::{Grid, KVector};

const SUB: usize = 8;

/// Coordinate averaged away before fitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AverageAxis {
    /// Average over kx, fit C(ky).
    Kx,
    /// Average over ky, fit C(kx).
    Ky,
}

/// Mean of `e^{iφ}` over each pixel (8×8 sub-samples), row-major.
pub fn pixel_phasors(grid: &Grid, phase: impl Fn(KVector) -> f64) -> Vec<Complex64> {
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut out = Vec::with_capacity(grid.len());
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let c = grid.center(ix, iy);
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..SUB {
                let x = c.kx + ((a as f64 + 0.5) / SUB as f64 - 0.5) * dx;
                for b in 0..SUB {
                    let y = c.ky + ((b as f64 + 0.5) / SUB as f64 - 0.5) * dy;
                    acc += Complex64::from_polar(1.0, phase(KVector::new(x, y)));
                }
            }
            out.push(acc / (SUB * SUB) as f64);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FringePoint {
    /// Bin center along the kept coordinate.
    pub coord: f64,
    pub c: f64,
    pub c_err: f64,
    /// Count-weighted model phasor of the averaged pixels.
    pub model: Complex64,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FringeFit {
    /// `V` soft-clipped to `[0, 1.05]`.
    pub visibility: f64,
    pub visibility_err: f64,
    /// Unclipped amplitude.
    pub raw_visibility: f64,
    pub offset: f64,
    pub offset_err: f64,
    /// `(V cos o, V sin o)` and their covariance.
    pub ab: [f64; 2],
    pub ab_cov: [[f64; 2]; 2],
    pub chi2_red: f64,
    pub points: Vec<FringePoint>,
}

/// Weighted least-squares fit of `V·cos(φ + o)` to the averaged correlation
/// profile, where `φ` is the model phase (usually `φ(−ki, ki)`) averaged
/// over each pixel and over the averaged coordinate with the same count
/// weights as the data. Errors are scaled by `sqrt(χ²_red)` when it exceeds 1.
pub fn fringe_fit(map: &CorrelationMap, phase: impl Fn(KVector) -> f64, axis: AverageAxis) -> Result<FringeFit> {
    let g = map.grid;
    let phasors = pixel_phasors(&g, phase);
    let (n_keep, n_avg) = match axis {
        AverageAxis::Kx => (g.ny, g.nx),
        AverageAxis::Ky => (g.nx, g.ny),
    };
    let idx = |keep: usize, avg: usize| match axis {
        AverageAxis::Kx => g.index(avg, keep),
        AverageAxis::Ky => g.index(keep, avg),
    };

    struct Row {
        coord: f64,
        c: f64,
        n: u64,
        model: Complex64,
        pixels: Vec<(u64, Complex64)>,
    }
    let mut rows = Vec::new();
    for k in 0..n_keep {
        let mut n = 0u64;
        let mut sc = 0.0;
        let mut m = Complex64::new(0.0, 0.0);
        let mut pixels = Vec::new();
        for a in 0..n_avg {
            let i = idx(k, a);
            let t = map.totals[i];
            if t == 0 {
                continue;
            }
            n += t;
            sc += map.values[i] * t as f64;
            m += phasors[i] * t as f64;
            pixels.push((t, phasors[i]));
        }
        if n > 0 {
            let c = g.center(if axis == AverageAxis::Kx { 0 } else { k }, if axis == AverageAxis::Kx { k } else { 0 });
            let coord = if axis == AverageAxis::Kx { c.ky } else { c.kx };
            rows.push(Row { coord, c: sc / n as f64, n, model: m / n as f64, pixels });
        }
    }
    if rows.len() < 5 {
        return Err(Error::InsufficientData(format!("{} populated rows, at least 5 needed", rows.len())));
    }
    let mut angles: Vec<f64> = rows.iter().filter(|r| r.model.norm() > 1e-3).map(|r| r.model.arg()).collect();
    angles.sort_by(f64::total_cmp);
    let max_gap = angles
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(angles.first().zip(angles.last()).map(|(f, l)| f + std::f64::consts::TAU - l))
        .fold(0.0f64, f64::max);
    if angles.len() < 5 || max_gap >= std::f64::consts::PI {
        return Err(Error::InvalidGeometry("the model phase covers less than half a fringe period".into()));
    }

    let basis: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.model.re, -r.model.im]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.c).collect();
    // first pass: row-pooled binomial errors; second: errors from the fitted model
    let sigma0: Vec<f64> = rows.iter().map(|r| ((1.0 - r.c * r.c).max(1.0 / r.n as f64) / r.n as f64).sqrt()).collect();
    let first = weighted_linear(&basis, &y, &sigma0)?;
    let (a0, b0) = (first.params[0], first.params[1]);
    let sigma: Vec<f64> = rows
        .iter()
        .map(|r| {
            let var: f64 = r
                .pixels
                .iter()
                .map(|&(t, m)| {
                    let c = (a0 * m.re - b0 * m.im).clamp(-1.0, 1.0);
                    t as f64 * (1.0 - c * c).max(1.0 / t as f64)
                })
                .sum();
            var.sqrt() / r.n as f64
        })
        .collect();
    let fit = weighted_linear(&basis, &y, &sigma)?;
    let (a, b) = (fit.params[0], fit.params[1]);
    let chi2_red = fit.chi2 / fit.dof.max(1) as f64;
    let scale = chi2_red.max(1.0);
    let cov = [
        [fit.covariance[0][0] * scale, fit.covariance[0][1] * scale],
        [fit.covariance[1][0] * scale, fit.covariance[1][1] * scale],
    ];
    let v = a.hypot(b);
    let (var_v, var_o) = if v > 0.0 {
        (
            (a * a * cov[0][0] + 2.0 * a * b * cov[0][1] + b * b * cov[1][1]) / (v * v),
            (b * b * cov[0][0] - 2.0 * a * b * cov[0][1] + a * a * cov[1][1]) / v.powi(4),
        )
    } else {
        (cov[0][0].max(cov[1][1]), f64::INFINITY)
    };

    let points = rows
        .iter()
        .zip(&sigma)
        .map(|(r, &s)| FringePoint { coord: r.coord, c: r.c, c_err: s, model: r.model, n: r.n })
        .collect();
    Ok(FringeFit {
        visibility: v.min(1.05),
        visibility_err: var_v.sqrt(),
        raw_visibility: v,
        offset: b.atan2(a),
        offset_err: var_o.sqrt(),
        ab: [a, b],
        ab_cov: cov,
        chi2_red,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Setting;

    fn map_from(grid: Grid, c: impl Fn(KVector) -> f64, n: u64) -> CorrelationMap {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let v = c(grid.center(ix, iy));
                let p = ((1.0 + v) / 2.0 * n as f64).round() as u64;
                plus.push(p);
                minus.push(n - p);
            }
        }
        CorrelationMap::from_counts(grid, Setting::new(0.0, 0.0), &plus, &minus).unwrap()
    }

    #[test]
    fn noiseless_unit_fringe() {
        let g = Grid::new(32, 32, 25.0).unwrap();
        let f = 0.44;
        let ph = pixel_phasors(&g, |k| f * k.ky);
        // feed the exact pixel-averaged model so only rounding remains
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for m in &ph {
            let p = ((1.0 + m.re) / 2.0 * 1e9).round() as u64;
            plus.push(p);
            minus.push(1_000_000_000 - p);
        }
        let map = CorrelationMap::from_counts(g, Setting::new(0.0, 0.0), &plus, &minus).unwrap();
        let fit = fringe_fit(&map, |k| f * k.ky, AverageAxis::Kx).unwrap();
        assert!((fit.visibility - 1.0).abs() < 1e-6, "{}", fit.visibility);
        assert!(fit.offset.abs() < 1e-6);
    }

    #[test]
    fn offset_is_recovered() {
        let g = Grid::new(96, 96, 25.0).unwrap();
        let map = map_from(g, |k| 0.6 * (0.5 * k.ky + 1.2).cos(), 1_000_000);
        let fit = fringe_fit(&map, |k| 0.5 * k.ky, AverageAxis::Kx).unwrap();
        // point sampling vs pixel averaging: 1/sinc(0.5·dy/2) ≈ 1.003
        assert!((fit.visibility - 0.6).abs() < 0.01);
        assert!((fit.offset - 1.2).abs() < 0.01);
    }

    #[test]
    fn too_few_rows() {
        let g = Grid::new(4, 4, 25.0).unwrap();
        let map = map_from(g, |_| 0.5, 100);
        assert!(matches!(fringe_fit(&map, |k| k.ky, AverageAxis::Kx), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn flat_phase_has_no_fringe() {
        let g = Grid::new(16, 16, 25.0).unwrap();
        let map = map_from(g, |_| 0.5, 100);
        assert!(matches!(fringe_fit(&map, |_| 0.0, AverageAxis::Kx), Err(Error::InvalidGeometry(_))));
    }
}
