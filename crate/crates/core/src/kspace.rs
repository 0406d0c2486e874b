//! Transverse-wavevector geometry and the biphoton state.
//!
//! Wavevectors are in mm⁻¹, phase slopes in rad·mm. All work happens in
//! post-fold coordinates: the interferometer shift δk that overlays the two
//! halves of each beam is absorbed into the coordinates, so δk only enters
//! through validation and through the mismatch visibility factor.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::rng::TrialStream;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KVector<T> {
    pub kx: T,
    pub ky: T,
}

impl<T: Real> KVector<T> {
    pub fn new(kx: T, ky: T) -> Self {
        KVector { kx, ky }
    }

    pub fn zero() -> Self {
        KVector::new(T::zero(), T::zero())
    }

    pub fn norm_sqr(self) -> T {
        self.kx * self.kx + self.ky * self.ky
    }

    pub fn norm(self) -> T {
        self.kx.hypot(self.ky)
    }

    pub fn dot(self, other: Self) -> T {
        self.kx * other.kx + self.ky * other.ky
    }

    pub fn is_finite(self) -> bool {
        self.kx.is_finite() && self.ky.is_finite()
    }
}

impl<T: Real> Add for KVector<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        KVector::new(self.kx + o.kx, self.ky + o.ky)
    }
}

impl<T: Real> Sub for KVector<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        KVector::new(self.kx - o.kx, self.ky - o.ky)
    }
}

impl<T: Real> Neg for KVector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        KVector::new(-self.kx, -self.ky)
    }
}

impl<T: Real> Mul<T> for KVector<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        KVector::new(self.kx * s, self.ky * s)
    }
}

/// Square camera binning over `[-W, W]²`. Row-major, `iy` is the row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    pub nx: usize,
    pub ny: usize,
    pub half_width: T,
}

impl<T: Real> Grid<T> {
    pub fn new(nx: usize, ny: usize, half_width: T) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!("grid must be non-empty, got {nx}x{ny}")));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::invalid(format!("grid half width must be positive, got {half_width}")));
        }
        Ok(Grid { nx, ny, half_width })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> T {
        (self.half_width + self.half_width) / T::from_usize(self.nx).unwrap()
    }

    pub fn dy(&self) -> T {
        (self.half_width + self.half_width) / T::from_usize(self.ny).unwrap()
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn center(&self, ix: usize, iy: usize) -> KVector<T> {
        let half = T::lit(0.5);
        KVector::new(
            -self.half_width + (T::from_usize(ix).unwrap() + half) * self.dx(),
            -self.half_width + (T::from_usize(iy).unwrap() + half) * self.dy(),
        )
    }

    /// Bin containing `k`; the upper edge belongs to the last bin.
    pub fn bin_of(&self, k: KVector<T>) -> Option<(usize, usize)> {
        let w = self.half_width;
        if !(k.kx >= -w && k.kx <= w && k.ky >= -w && k.ky <= w) {
            return None;
        }
        let fx = ((k.kx + w) / self.dx()).floor().to_usize()?;
        let fy = ((k.ky + w) / self.dy()).floor().to_usize()?;
        Some((fx.min(self.nx - 1), fy.min(self.ny - 1)))
    }

    pub fn contains(&self, k: KVector<T>) -> bool {
        let w = self.half_width;
        k.kx.abs() <= w && k.ky.abs() <= w
    }
}

/// Physical source parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiphotonParams<T> {
    /// Momentum anti-correlation width κ (mm⁻¹).
    pub kappa: T,
    /// Position correlation width σ (mm); 0 selects the perfect-position-correlation limit.
    pub sigma: T,
    /// Interferometer fold shift along ŷ (mm⁻¹).
    pub delta_k: T,
    /// Residual mismatch between the two interferometer shifts (mm⁻¹).
    pub xi_k: T,
    /// Signal bucket aperture radius (mm⁻¹).
    pub bucket_radius_k: T,
    /// Idler camera half extent (mm⁻¹).
    pub fov_half_width: T,
}

impl<T: Real> Default for BiphotonParams<T> {
    fn default() -> Self {
        BiphotonParams {
            kappa: T::lit(5.9),
            sigma: T::zero(),
            delta_k: T::lit(286.0),
            xi_k: T::lit(0.5 * 5.9),
            bucket_radius_k: T::lit(25.0),
            fov_half_width: T::lit(25.0),
        }
    }
}

impl<T: Real> BiphotonParams<T> {
    /// Checks the hard invariants; returns soft warnings (currently only
    /// δk < 10κ, where the folded-state closed forms stop being accurate).
    pub fn validate(&self) -> Result<Vec<String>> {
        let finite = [
            self.kappa,
            self.sigma,
            self.delta_k,
            self.xi_k,
            self.bucket_radius_k,
            self.fov_half_width,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("source parameters must be finite"));
        }
        if !(self.kappa > T::zero()) {
            return Err(Error::invalid(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if self.sigma < T::zero() || self.delta_k < T::zero() || self.xi_k < T::zero() {
            return Err(Error::invalid("sigma, delta_k and xi_k must be >= 0"));
        }
        if !(self.bucket_radius_k > T::zero()) || !(self.fov_half_width > T::zero()) {
            return Err(Error::invalid("bucket radius and field of view must be > 0"));
        }
        let mut warnings = Vec::new();
        if self.delta_k < T::lit(10.0) * self.kappa {
            let w = format!(
                "delta_k = {} is below 10*kappa = {}; folded-state closed forms are approximate",
                self.delta_k,
                T::lit(10.0) * self.kappa
            );
            log::warn!("{w}");
            warnings.push(w);
        }
        Ok(warnings)
    }

    pub fn grid(&self, nx: usize, ny: usize) -> Result<Grid<T>> {
        Grid::new(nx, ny, self.fov_half_width)
    }
}

/// Gaussian EPR biphoton amplitude
/// `(σ/(πκ))·exp(−|ks+ki|²/(4κ²) − σ²|ks−ki|²/4)`.
pub fn biphoton_amplitude<T: Real>(
    ks: KVector<T>,
    ki: KVector<T>,
    params: &BiphotonParams<T>,
) -> Result<Complex<T>> {
    if !ks.is_finite() || !ki.is_finite() {
        return Err(Error::invalid("wavevectors must be finite"));
    }
    if !(params.kappa > T::zero()) {
        return Err(Error::invalid("kappa must be > 0"));
    }
    if params.sigma == T::zero() {
        return Err(Error::UnsupportedLimit(
            "sigma = 0 has no finite amplitude; use sample_pair for the perfect-correlation limit".into(),
        ));
    }
    if !(params.sigma > T::zero()) {
        return Err(Error::invalid("sigma must be >= 0"));
    }
    let four = T::lit(4.0);
    let (kappa, sigma) = (params.kappa, params.sigma);
    let sum = (ks + ki).norm_sqr();
    let diff = (ks - ki).norm_sqr();
    let peak = sigma / (T::PI() * kappa);
    let re = peak * (-sum / (four * kappa * kappa) - sigma * sigma * diff / four).exp();
    Ok(Complex::new(re, T::zero()))
}

/// Uniformly sampled phase map with bilinear interpolation.
///
/// Sample `(i, j)` sits at `(x0 + i·dx, y0 + j·dy)`, stored row-major with
/// `j` as the row. Values may be wrapped: interpolation unwraps the four
/// surrounding samples against the first before blending, so unwrapped
/// input is reproduced exactly and wrapped input stays correct modulo 2π.
/// Queries outside the sampled rectangle are clamped to its edge.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPhase<T> {
    pub nx: usize,
    pub ny: usize,
    pub x0: T,
    pub y0: T,
    pub dx: T,
    pub dy: T,
    pub values: Vec<T>,
}

impl<T: Real> SampledPhase<T> {
    pub fn new(nx: usize, ny: usize, x0: T, y0: T, dx: T, dy: T, values: Vec<T>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!("sampled phase needs at least 2x2 samples, got {nx}x{ny}")));
        }
        if values.len() != nx * ny {
            return Err(Error::invalid(format!(
                "sampled phase expects {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if !(dx > T::zero()) || !(dy > T::zero()) || !x0.is_finite() || !y0.is_finite() {
            return Err(Error::invalid("sampled phase spacing must be positive and origin finite"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sampled phase values must be finite"));
        }
        Ok(SampledPhase { nx, ny, x0, y0, dx, dy, values })
    }

    /// Samples an arbitrary function at the bin centers of `grid`.
    pub fn from_grid(grid: &Grid<T>, f: impl Fn(KVector<T>) -> T) -> Result<Self> {
        let c0 = grid.center(0, 0);
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                values.push(f(grid.center(ix, iy)));
            }
        }
        SampledPhase::new(grid.nx, grid.ny, c0.kx, c0.ky, grid.dx(), grid.dy(), values)
    }

    pub fn x_max(&self) -> T {
        self.x0 + self.dx * T::from_usize(self.nx - 1).unwrap()
    }

    pub fn y_max(&self) -> T {
        self.y0 + self.dy * T::from_usize(self.ny - 1).unwrap()
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.nx + i]
    }

    /// Whether `k` lies inside the sampled rectangle extended by half a cell.
    pub fn covers(&self, k: KVector<T>) -> bool {
        let h = T::lit(0.5);
        k.kx >= self.x0 - h * self.dx
            && k.kx <= self.x_max() + h * self.dx
            && k.ky >= self.y0 - h * self.dy
            && k.ky <= self.y_max() + h * self.dy
    }

    fn cell(&self, k: KVector<T>) -> (usize, usize, T, T) {
        let fx = ((k.kx - self.x0) / self.dx).max(T::zero());
        let fy = ((k.ky - self.y0) / self.dy).max(T::zero());
        let last_x = T::from_usize(self.nx - 1).unwrap();
        let last_y = T::from_usize(self.ny - 1).unwrap();
        let fx = fx.min(last_x);
        let fy = fy.min(last_y);
        let i = fx.floor().to_usize().unwrap().min(self.nx - 2);
        let j = fy.floor().to_usize().unwrap().min(self.ny - 2);
        (i, j, fx - T::from_usize(i).unwrap(), fy - T::from_usize(j).unwrap())
    }

    fn corners(&self, i: usize, j: usize) -> [T; 4] {
        let base = self.at(i, j);
        let unwrap = |v: T| base + crate::scalar::wrap_pi(v - base);
        [
            base,
            unwrap(self.at(i + 1, j)),
            unwrap(self.at(i, j + 1)),
            unwrap(self.at(i + 1, j + 1)),
        ]
    }

    pub fn eval(&self, k: KVector<T>) -> T {
        let (i, j, tx, ty) = self.cell(k);
        let [v00, v10, v01, v11] = self.corners(i, j);
        let one = T::one();
        (one - ty) * ((one - tx) * v00 + tx * v10) + ty * ((one - tx) * v01 + tx * v11)
    }

    pub fn gradient(&self, k: KVector<T>) -> KVector<T> {
        let (i, j, tx, ty) = self.cell(k);
        let [v00, v10, v01, v11] = self.corners(i, j);
        let one = T::one();
        let gx = ((one - ty) * (v10 - v00) + ty * (v11 - v01)) / self.dx;
        let gy = ((one - tx) * (v01 - v00) + tx * (v11 - v10)) / self.dy;
        KVector::new(gx, gy)
    }
}

/// Wavevector-dependent phase imprinted by one interferometer arm.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseProfile<T> {
    /// `slope_x·kx + slope_y·ky + offset`
    Linear { slope_x: T, slope_y: T, offset: T },
    Sampled(SampledPhase<T>),
}

impl<T: Real> Default for PhaseProfile<T> {
    fn default() -> Self {
        PhaseProfile::flat()
    }
}

impl<T: Real> PhaseProfile<T> {
    pub fn flat() -> Self {
        PhaseProfile::Linear {
            slope_x: T::zero(),
            slope_y: T::zero(),
            offset: T::zero(),
        }
    }

    pub fn linear(slope_x: T, slope_y: T, offset: T) -> Self {
        PhaseProfile::Linear { slope_x, slope_y, offset }
    }

    pub fn eval(&self, k: KVector<T>) -> T {
        match self {
            PhaseProfile::Linear { slope_x, slope_y, offset } => {
                *slope_x * k.kx + *slope_y * k.ky + *offset
            }
            PhaseProfile::Sampled(s) => s.eval(k),
        }
    }

    pub fn gradient(&self, k: KVector<T>) -> KVector<T> {
        match self {
            PhaseProfile::Linear { slope_x, slope_y, .. } => KVector::new(*slope_x, *slope_y),
            PhaseProfile::Sampled(s) => s.gradient(k),
        }
    }

    /// Multiplies every phase value by `c`.
    pub fn scaled(&self, c: T) -> Self {
        match self {
            PhaseProfile::Linear { slope_x, slope_y, offset } => {
                PhaseProfile::linear(*slope_x * c, *slope_y * c, *offset * c)
            }
            PhaseProfile::Sampled(s) => {
                let mut s = s.clone();
                s.values.iter_mut().for_each(|v| *v = *v * c);
                PhaseProfile::Sampled(s)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhaseProfile::Linear { slope_x, slope_y, offset } => {
                if slope_x.is_finite() && slope_y.is_finite() && offset.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("linear phase coefficients must be finite"))
                }
            }
            PhaseProfile::Sampled(s) => {
                SampledPhase::new(s.nx, s.ny, s.x0, s.y0, s.dx, s.dy, s.values.clone()).map(|_| ())
            }
        }
    }
}

/// Phase-engineered Bell-EPR state: at every wavevector pair the
/// polarization is `|H,V⟩ + e^{i(φ_s(ks) − φ_i(ki))}|V,H⟩`.
///
/// The state's normalization constant is never needed: every observable
/// this crate computes is a conditional probability or a ratio of counts,
/// in which it cancels.
#[derive(Clone, Debug, PartialEq)]
pub struct BellEprState<T> {
    pub params: BiphotonParams<T>,
    pub phase_s: PhaseProfile<T>,
    pub phase_i: PhaseProfile<T>,
}

impl<T: Real> BellEprState<T> {
    pub fn new(params: BiphotonParams<T>, phase_s: PhaseProfile<T>, phase_i: PhaseProfile<T>) -> Result<Self> {
        params.validate()?;
        phase_s.validate()?;
        phase_i.validate()?;
        Ok(BellEprState { params, phase_s, phase_i })
    }

    pub fn in_fov(&self, k: KVector<T>) -> bool {
        let w = self.params.fov_half_width;
        k.is_finite() && k.kx.abs() <= w && k.ky.abs() <= w
    }

    /// `φ(ks, ki) = φ_s(ks) − φ_i(ki)`, not wrapped.
    pub fn joint_phase(&self, ks: KVector<T>, ki: KVector<T>) -> Result<T> {
        if !self.in_fov(ks) || !self.in_fov(ki) {
            return Err(Error::OutOfRange(format!(
                "wavevectors ({}, {}) / ({}, {}) outside the field of view ±{}",
                ks.kx, ks.ky, ki.kx, ki.ky, self.params.fov_half_width
            )));
        }
        Ok(self.phase_s.eval(ks) - self.phase_i.eval(ki))
    }

    /// Joint phase along the anti-correlation line, `φ(−ki, ki)`.
    pub fn anticorrelated_phase(&self, ki: KVector<T>) -> Result<T> {
        self.joint_phase(-ki, ki)
    }
}

/// Draws one pair in the σ→0 limit: `ki` uniform over the square field of
/// view, `ks = −ki + Δ` with `Δ ~ N(0, κ²I)`.
pub fn sample_pair<T: Real>(state: &BellEprState<T>, stream: &mut TrialStream) -> (KVector<T>, KVector<T>) {
    let w = state.params.fov_half_width.as_f64();
    let kappa = state.params.kappa.as_f64();
    let kix = (2.0 * stream.uniform() - 1.0) * w;
    let kiy = (2.0 * stream.uniform() - 1.0) * w;
    let dx = kappa * stream.standard_normal();
    let dy = kappa * stream.standard_normal();
    let ki = KVector::new(T::lit(kix), T::lit(kiy));
    let ks = KVector::new(T::lit(dx - kix), T::lit(dy - kiy));
    (ks, ki)
}
