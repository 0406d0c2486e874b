//! Small dense least-squares helpers (a handful of parameters at most).

use crate::error::{Error, Result};

/// Inverse of a small symmetric positive-definite matrix by Gauss–Jordan
/// elimination with partial pivoting.
pub fn invert(mut a: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        if !(a[piv][col].abs() > 1e-13 * scale) {
            return Err(Error::Numeric("singular normal matrix".into()));
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub params: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
}

/// Weighted linear least squares `y ≈ Σ params_k · basis_k` with weights
/// `1/σ²`. The covariance is `(AᵀWA)⁻¹`, i.e. it trusts the supplied σ.
pub fn weighted_linear(basis: &[Vec<f64>], y: &[f64], sigma: &[f64]) -> Result<LinearFit> {
    let m = basis.first().map_or(0, |b| b.len());
    if basis.len() != y.len() || y.len() != sigma.len() || m == 0 {
        return Err(Error::invalid("least squares inputs have mismatched lengths"));
    }
    if y.len() < m {
        return Err(Error::InsufficientData(format!("{} points for {} parameters", y.len(), m)));
    }
    let mut ata = vec![vec![0.0; m]; m];
    let mut atb = vec![0.0; m];
    for ((row, &yi), &s) in basis.iter().zip(y).zip(sigma) {
        if !(s > 0.0) {
            return Err(Error::invalid("standard errors must be positive"));
        }
        let w = 1.0 / (s * s);
        for a in 0..m {
            atb[a] += w * row[a] * yi;
            for b in 0..m {
                ata[a][b] += w * row[a] * row[b];
            }
        }
    }
    let cov = invert(ata)?;
    let params: Vec<f64> = (0..m).map(|a| (0..m).map(|b| cov[a][b] * atb[b]).sum()).collect();
    let chi2 = basis
        .iter()
        .zip(y)
        .zip(sigma)
        .map(|((row, yi), s)| {
            let r = yi - row.iter().zip(&params).map(|(x, p)| x * p).sum::<f64>();
            (r / s).powi(2)
        })
        .sum();
    Ok(LinearFit { params, covariance: cov, chi2, dof: y.len() - m })
}

/// Levenberg–Marquardt for `y ≈ model(x, params)` with a forward-difference
/// Jacobian.
pub fn levenberg_marquardt<F: Fn(f64, &[f64]) -> f64>(
    model: F,
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    start: &[f64],
    max_iter: usize,
) -> Result<LinearFit> {
    let m = start.len();
    if x.len() != y.len() || y.len() != sigma.len() {
        return Err(Error::invalid("fit inputs have mismatched lengths"));
    }
    if y.len() <= m {
        return Err(Error::InsufficientData(format!("{} points for {} parameters", y.len(), m)));
    }
    let chi2 = |p: &[f64]| -> f64 { x.iter().zip(y).zip(sigma).map(|((&xi, &yi), &s)| ((yi - model(xi, p)) / s).powi(2)).sum() };
    let jac = |p: &[f64]| -> Vec<Vec<f64>> {
        x.iter()
            .map(|&xi| {
                let f0 = model(xi, p);
                (0..m)
                    .map(|k| {
                        let h = 1e-7 * p[k].abs().max(1e-3);
                        let mut q = p.to_vec();
                        q[k] += h;
                        (model(xi, &q) - f0) / h
                    })
                    .collect()
            })
            .collect()
    };
    let normal = |p: &[f64]| {
        let j = jac(p);
        let mut a = vec![vec![0.0; m]; m];
        let mut g = vec![0.0; m];
        for (i, row) in j.iter().enumerate() {
            let w = 1.0 / (sigma[i] * sigma[i]);
            let r = y[i] - model(x[i], p);
            for a_ in 0..m {
                g[a_] += w * row[a_] * r;
                for b in 0..m {
                    a[a_][b] += w * row[a_] * row[b];
                }
            }
        }
        (a, g)
    };

    let mut p = start.to_vec();
    let mut c = chi2(&p);
    if !c.is_finite() {
        return Err(Error::Numeric("non-finite residuals at the starting point".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..max_iter {
        let (a, g) = normal(&p);
        let mut damped = a.clone();
        for k in 0..m {
            damped[k][k] += lambda * a[k][k].max(1e-300);
        }
        let Ok(inv) = invert(damped) else {
            lambda *= 10.0;
            continue;
        };
        let step: Vec<f64> = (0..m).map(|i| (0..m).map(|k| inv[i][k] * g[k]).sum()).collect();
        let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
        let ct = chi2(&trial);
        if ct.is_finite() && ct <= c {
            let small = step.iter().zip(&trial).all(|(s, t)| s.abs() <= 1e-10 * t.abs().max(1e-10));
            let flat = c - ct <= 1e-12 * c.max(1e-300);
            p = trial;
            c = ct;
            lambda = (lambda / 10.0).max(1e-12);
            if small || flat {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::Numeric(format!("Levenberg-Marquardt did not converge in {max_iter} iterations")));
    }
    let (a, _) = normal(&p);
    let cov = invert(a)?;
    Ok(LinearFit { params: p, covariance: cov, chi2: c, dof: y.len() - m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let basis: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 + 0.5 * x).collect();
        let f = weighted_linear(&basis, &y, &[0.1; 10]).unwrap();
        assert!((f.params[0] - 2.0).abs() < 1e-12 && (f.params[1] - 0.5).abs() < 1e-12);
        assert!(f.chi2 < 1e-20);
        // slope error for unit spacing: σ/sqrt(Σ(x−x̄)²)
        assert!((f.covariance[1][1].sqrt() - 0.1 / 82.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn singular_is_an_error() {
        let basis = vec![vec![1.0, 2.0]; 4];
        assert!(weighted_linear(&basis, &[1.0; 4], &[1.0; 4]).is_err());
    }

    #[test]
    fn gaussian_by_lm() {
        let g = |x: f64, p: &[f64]| p[0] * (-(x - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp();
        let xs: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| g(x, &[100.0, 0.3, 4.0])).collect();
        let f = levenberg_marquardt(g, &xs, &ys, &vec![1.0; xs.len()], &[80.0, 0.0, 6.0], 200).unwrap();
        assert!((f.params[2].abs() - 4.0).abs() < 1e-6, "{:?}", f.params);
        assert!((f.params[1] - 0.3).abs() < 1e-6);
    }
}
