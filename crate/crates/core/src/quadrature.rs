//! Adaptive tensor-product Gauss–Legendre cubature on rectangles.
//!
//! Each region is integrated with an 8×8 and a 6×6 Gauss rule; their
//! difference is the region's error estimate. The region with the largest
//! estimate is quartered until the summed estimate meets the tolerance.
//! Integrands are vector valued so that quantities sharing a mesh (e.g.
//! the two channel probabilities) are refined together.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_regions: usize,
    /// Initial subdivision along each axis.
    pub initial: (usize, usize),
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        QuadOptions {
            rel_tol: T::lit(1e-6).max(T::tolerance_floor()),
            abs_tol: T::lit(1e-14).max(T::min_positive_value()),
            max_regions: 40_000,
            initial: (4, 4),
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult<T, const N: usize> {
    pub values: [T; N],
    pub errors: [T; N],
    pub regions: usize,
}

struct Rule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> Rule<T> {
    fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Rule {
            nodes: x.into_iter().map(T::lit).collect(),
            weights: w.into_iter().map(T::lit).collect(),
        }
    }
}

struct Region<T, const N: usize> {
    x: (T, T),
    y: (T, T),
    value: [T; N],
    error: [T; N],
    key: f64,
}

impl<T, const N: usize> PartialEq for Region<T, N> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<T, const N: usize> Eq for Region<T, N> {}
impl<T, const N: usize> PartialOrd for Region<T, N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T, const N: usize> Ord for Region<T, N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

fn apply<T: Real, const N: usize, F: Fn(T, T) -> [T; N]>(
    f: &F,
    rule: &Rule<T>,
    x: (T, T),
    y: (T, T),
) -> [T; N] {
    let half = T::lit(0.5);
    let (cx, hx) = ((x.0 + x.1) * half, (x.1 - x.0) * half);
    let (cy, hy) = ((y.0 + y.1) * half, (y.1 - y.0) * half);
    let mut acc = [T::zero(); N];
    for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
        let px = cx + hx * *xi;
        for (yj, wj) in rule.nodes.iter().zip(&rule.weights) {
            let v = f(px, cy + hy * *yj);
            let w = *wi * *wj;
            for (a, vk) in acc.iter_mut().zip(v) {
                *a = *a + w * vk;
            }
        }
    }
    let jac = hx * hy;
    acc.map(|a| a * jac)
}

/// Integrates `f` over `[x.0, x.1] × [y.0, y.1]`.
pub fn integrate_rect<T: Real, const N: usize, F: Fn(T, T) -> [T; N]>(
    f: F,
    x: (T, T),
    y: (T, T),
    opts: &QuadOptions<T>,
) -> Result<QuadResult<T, N>> {
    let fine = Rule::new(8);
    let coarse = Rule::new(6);
    let eval = |xr: (T, T), yr: (T, T)| -> Region<T, N> {
        let hi = apply(&f, &fine, xr, yr);
        let lo = apply(&f, &coarse, xr, yr);
        let mut error = [T::zero(); N];
        for k in 0..N {
            error[k] = (hi[k] - lo[k]).abs();
        }
        let key = error.iter().fold(0.0f64, |m, e| m.max(e.as_f64()));
        Region { x: xr, y: yr, value: hi, error, key }
    };

    let (nx, ny) = (opts.initial.0.max(1), opts.initial.1.max(1));
    let mut heap = BinaryHeap::new();
    for i in 0..nx {
        for j in 0..ny {
            let t = |a: T, b: T, k: usize, n: usize| {
                a + (b - a) * T::from_usize(k).unwrap() / T::from_usize(n).unwrap()
            };
            heap.push(eval(
                (t(x.0, x.1, i, nx), t(x.0, x.1, i + 1, nx)),
                (t(y.0, y.1, j, ny), t(y.0, y.1, j + 1, ny)),
            ));
        }
    }

    loop {
        let mut values = [T::zero(); N];
        let mut errors = [T::zero(); N];
        for r in heap.iter() {
            for k in 0..N {
                values[k] = values[k] + r.value[k];
                errors[k] = errors[k] + r.error[k];
            }
        }
        let converged = (0..N).all(|k| {
            let target = (opts.rel_tol * values[k].abs()).max(opts.abs_tol);
            errors[k] <= target
        });
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("integrand produced a non-finite value".into()));
        }
        if converged {
            return Ok(QuadResult { values, errors, regions: heap.len() });
        }
        if heap.len() + 3 > opts.max_regions {
            return Err(Error::Numeric(format!(
                "cubature did not reach relative tolerance {} after {} regions: values {:?}, error estimates {:?}",
                opts.rel_tol,
                heap.len(),
                values,
                errors
            )));
        }
        let worst = heap.pop().expect("non-empty region set");
        let half = T::lit(0.5);
        let mx = (worst.x.0 + worst.x.1) * half;
        let my = (worst.y.0 + worst.y.1) * half;
        for xr in [(worst.x.0, mx), (mx, worst.x.1)] {
            for yr in [(worst.y.0, my), (my, worst.y.1)] {
                heap.push(eval(xr, yr));
            }
        }
    }
}

/// Integrates `f(x, y)` over the disc of radius `radius` centered at the origin,
/// using polar coordinates so the integrand stays smooth up to the rim.
pub fn integrate_disc<T: Real, const N: usize, F: Fn(T, T) -> [T; N]>(
    f: F,
    radius: T,
    opts: &QuadOptions<T>,
) -> Result<QuadResult<T, N>> {
    if !(radius > T::zero()) {
        return Err(Error::invalid("disc radius must be positive"));
    }
    let polar = |r: T, t: T| {
        let v = f(r * t.cos(), r * t.sin());
        v.map(|x| x * r)
    };
    let mut o = *opts;
    o.initial = (opts.initial.0.max(8), opts.initial.1.max(16));
    integrate_rect(polar, (T::zero(), radius), (T::zero(), T::TAU()), &o)
}
