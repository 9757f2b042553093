//! Periodic spectral calculus on the unit circle `S¹ = R/Z`.
//!
//! Functions are sampled at the nodes `θ_j = j/N`. The forward transform is
//! normalized by `1/N`, so the zeroth coefficient is the mean of the samples.
//! Frequencies are indexed by `n ∈ {−N/2, …, N/2−1}`; coefficients are stored
//! in FFT order.
//!
//! The operator `Λ = H∂_θ` acts with symbol `2π|n|`, which makes it agree with
//! the derivative on `R/Z` (so `Λ² = −∂²_θ`). All norms below use that symbol.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        fft.process(buf);
    });
}

/// Checks that `n` is an admissible grid size.
pub fn check_grid_size(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::Configuration(format!(
            "grid size must be a power of two ≥ 8, got {n}"
        )));
    }
    Ok(())
}

/// Signed frequency of FFT slot `k` on a grid of size `n`.
#[inline]
pub fn frequency(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Symbol of `Λ^p`: `(2π|n|)^p`, with `0^0 = 1` and `0^p = 0` for `p > 0`.
#[inline]
pub fn lambda_symbol(n: i64, p: f64) -> f64 {
    if n == 0 {
        if p == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (TWO_PI * n.unsigned_abs() as f64).powf(p)
    }
}

/// A Sobolev order `q ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SobolevOrder(f64);

impl SobolevOrder {
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() || q < 0.0 {
            return Err(Error::Domain(format!("Sobolev order must be finite and ≥ 0, got {q}")));
        }
        Ok(Self(q))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SobolevOrder {
    type Error = Error;
    fn try_from(q: f64) -> Result<Self> {
        Self::new(q)
    }
}

/// Uniform samples of a periodic `R^d`-valued function on `[0, 1)`.
///
/// Samples are stored row-major: node `j`, component `k` lives at `j * dim + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SampledFunction {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Configuration("dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::Configuration(format!(
                "{} samples do not split into points of dimension {dim}",
                data.len()
            )));
        }
        let n = data.len() / dim;
        check_grid_size(n)?;
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {bad}")));
        }
        Ok(Self { n, dim, data })
    }

    /// Samples `f(θ_j)` for `j = 0..n`; `f` writes the value into its output slice.
    pub fn from_fn(n: usize, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        check_grid_size(n)?;
        let mut data = vec![0.0; n * dim];
        for (j, chunk) in data.chunks_exact_mut(dim).enumerate() {
            f(j as f64 / n as f64, chunk);
        }
        Self::new(dim, data)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Configuration("points have inconsistent dimensions".into()));
        }
        Self::new(dim, points.iter().flatten().copied().collect())
    }

    pub fn constant(n: usize, value: &[f64]) -> Result<Self> {
        Self::from_fn(n, value.len(), |_, out| out.copy_from_slice(value))
    }

    pub fn zeros(n: usize, dim: usize) -> Result<Self> {
        check_grid_size(n)?;
        Ok(Self { n, dim, data: vec![0.0; n * dim] })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    #[inline]
    pub fn point(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.points().map(|p| p[k]).collect()
    }

    /// Whether two functions live on the same grid with the same dimension.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n && self.dim == other.dim
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "({} nodes, dim {}) vs ({} nodes, dim {})",
                self.n, self.dim, other.n, other.dim
            )))
        }
    }

    /// `a·self + b·other`, pointwise.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Self::new(self.dim, data)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { n: self.n, dim: self.dim, data: self.data.iter().map(|x| a * x).collect() }
    }

    /// Adds a constant vector to every sample.
    pub fn translated(&self, v: &[f64]) -> Self {
        let mut out = self.clone();
        for p in out.data.chunks_exact_mut(self.dim) {
            p.iter_mut().zip(v).for_each(|(x, dv)| *x += dv);
        }
        out
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            m.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= self.n as f64);
        m
    }

    /// Max over nodes of the Euclidean norm of the samples.
    pub fn sup_norm(&self) -> f64 {
        self.points().map(norm).fold(0.0, f64::max)
    }

    /// Trapezoid-rule `L²` norm on the periodic grid.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|x| x * x).sum::<f64>() / self.n as f64).sqrt()
    }

    /// Pointwise Euclidean norms as a scalar function.
    pub fn pointwise_norm(&self) -> Self {
        Self { n: self.n, dim: 1, data: self.points().map(norm).collect() }
    }
}

#[inline]
pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Complex Fourier coefficients `f̂(n)` of a [`SampledFunction`], in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    n: usize,
    dim: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficients in FFT order, `dim` per frequency.
    pub fn from_raw(n: usize, dim: usize, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), n * dim, "coefficient buffer does not match {n}×{dim}");
        Self { n, dim, coeffs }
    }

    /// Coefficient vector at signed frequency `freq ∈ [−N/2, N/2)`.
    pub fn at(&self, freq: i64) -> &[Complex64] {
        let n = self.n as i64;
        assert!(freq >= -n / 2 && freq < n / 2, "frequency {freq} outside grid of size {n}");
        let k = freq.rem_euclid(n) as usize;
        &self.coeffs[k * self.dim..(k + 1) * self.dim]
    }

    /// Iterates `(n, f̂(n))` in FFT order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &[Complex64])> {
        let n = self.n;
        self.coeffs.chunks_exact(self.dim).enumerate().map(move |(k, c)| (frequency(k, n), c))
    }

    /// Mutable counterpart of [`SpectralCoeffs::iter`].
    pub fn iter_mut(&mut self) -> impl Iterator<Item = (i64, &mut [Complex64])> {
        let n = self.n;
        self.coeffs.chunks_exact_mut(self.dim).enumerate().map(move |(k, c)| (frequency(k, n), c))
    }

    /// `Σ_n weight(n) |f̂(n)|²`.
    pub fn weighted_energy(&self, weight: impl Fn(i64) -> f64) -> f64 {
        self.iter().map(|(n, c)| weight(n) * c.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }
}

/// Forward transform `f̂(n) = (1/N) Σ_j f(θ_j) e^{−2πinθ_j}`.
pub fn fourier_forward(f: &SampledFunction) -> SpectralCoeffs {
    let (n, dim) = (f.n, f.dim);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n * dim];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let scale = 1.0 / n as f64;
    for k in 0..dim {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(f.data[j * dim + k], 0.0);
        }
        fft_in_place(&mut buf, false);
        for (j, b) in buf.iter().enumerate() {
            coeffs[j * dim + k] = b * scale;
        }
    }
    SpectralCoeffs { n, dim, coeffs }
}

/// Inverse transform; the imaginary part of the synthesis is discarded.
pub fn fourier_inverse(c: &SpectralCoeffs) -> SampledFunction {
    let (n, dim) = (c.n, c.dim);
    let mut data = vec![0.0; n * dim];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..dim {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = c.coeffs[j * dim + k];
        }
        fft_in_place(&mut buf, true);
        for (j, b) in buf.iter().enumerate() {
            data[j * dim + k] = b.re;
        }
    }
    SampledFunction { n, dim, data }
}

/// Applies `Λ^p`, i.e. multiplies `f̂(n)` by `(2π|n|)^p`.
pub fn fractional_multiplier(c: &SpectralCoeffs, p: f64) -> Result<SpectralCoeffs> {
    if !p.is_finite() || p < 0.0 {
        return Err(Error::Domain(format!("multiplier power must be finite and ≥ 0, got {p}")));
    }
    let mut out = c.clone();
    for (k, chunk) in out.coeffs.chunks_exact_mut(c.dim).enumerate() {
        let s = lambda_symbol(frequency(k, c.n), p);
        chunk.iter_mut().for_each(|z| *z *= s);
    }
    Ok(out)
}

/// Homogeneous seminorm `‖f‖_{Ḣ^q} = (Σ_{n≠0} (2π|n|)^{2q} |f̂(n)|²)^{1/2}`.
///
/// The mean never contributes, including at `q = 0`.
pub fn hq_dot_seminorm(f: &SampledFunction, q: SobolevOrder) -> f64 {
    hq_dot_seminorm_coeffs(&fourier_forward(f), q)
}

pub fn hq_dot_seminorm_coeffs(c: &SpectralCoeffs, q: SobolevOrder) -> f64 {
    let two_q = 2.0 * q.value();
    c.weighted_energy(|n| if n == 0 { 0.0 } else { lambda_symbol(n, two_q) }).sqrt()
}

/// Real inner product `Σ_{n≠0} (2π|n|)^{2q} Re⟨f̂(n), ĝ(n)⟩` associated with the seminorm.
pub fn hq_dot_inner(f: &SampledFunction, g: &SampledFunction, q: SobolevOrder) -> Result<f64> {
    f.check_same_shape(g)?;
    let (fc, gc) = (fourier_forward(f), fourier_forward(g));
    let two_q = 2.0 * q.value();
    Ok(fc
        .iter()
        .zip(gc.iter())
        .filter(|((n, _), _)| *n != 0)
        .map(|((n, a), (_, b))| {
            let w = lambda_symbol(n, two_q);
            w * a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum::<f64>()
        })
        .sum())
}

/// Full norm `‖f‖_{H^q} = (Σ_n (1 + (2πn)²)^q |f̂(n)|²)^{1/2}`.
pub fn hq_norm(f: &SampledFunction, q: SobolevOrder) -> f64 {
    let q = q.value();
    fourier_forward(f)
        .weighted_energy(|n| (1.0 + (TWO_PI * n as f64).powi(2)).powf(q))
        .sqrt()
}

/// Spectral derivative `∂_θ f`; the Nyquist mode is dropped.
pub fn derivative(f: &SampledFunction) -> SampledFunction {
    let mut c = fourier_forward(f);
    let n = c.n;
    for (k, chunk) in c.coeffs.chunks_exact_mut(c.dim).enumerate() {
        let freq = frequency(k, n);
        let factor = if 2 * freq.unsigned_abs() as usize == n {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, TWO_PI * freq as f64)
        };
        chunk.iter_mut().for_each(|z| *z *= factor);
    }
    fourier_inverse(&c)
}

/// Band-limited resampling onto a grid of `factor · N` nodes (zero padding).
pub fn upsample(f: &SampledFunction, factor: usize) -> Result<SampledFunction> {
    let (n, dim) = (f.n, f.dim);
    let big = n * factor;
    check_grid_size(big)?;
    let c = fourier_forward(f);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); big * dim];
    for (k, chunk) in c.coeffs.chunks_exact(dim).enumerate() {
        let freq = frequency(k, n);
        if 2 * freq.unsigned_abs() as usize == n && factor > 1 {
            // Split the Nyquist mode symmetrically so the result stays real.
            for (s, z) in chunk.iter().enumerate() {
                coeffs[(n / 2) * dim + s] += z * 0.5;
                coeffs[(big - n / 2) * dim + s] += z * 0.5;
            }
        } else {
            let slot = freq.rem_euclid(big as i64) as usize;
            coeffs[slot * dim..(slot + 1) * dim].copy_from_slice(chunk);
        }
    }
    Ok(fourier_inverse(&SpectralCoeffs { n: big, dim, coeffs }))
}

/// The real band-limited interpolant `Σ_n f̂(n) e^{2πinθ}` of a sampled function,
/// with the Nyquist mode taken as `f̂(N/2) cos(πNθ)`.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    n: usize,
    dim: usize,
    mean: Vec<f64>,
    /// Positive-frequency coefficients `n = 1..N/2`, row-major by frequency.
    positive: Vec<Complex64>,
    nyquist: Vec<f64>,
    /// `c_n/(2πin)`, coefficients of the antiderivative.
    anti: Vec<Complex64>,
    /// `2 Re Σ c_n/(2πin)`, the antiderivative's value at 0 before normalization.
    anti_offset: Vec<f64>,
}

impl TrigInterpolant {
    pub fn new(f: &SampledFunction) -> Self {
        let c = fourier_forward(f);
        let (n, dim) = (f.n, f.dim);
        let half = n / 2;
        let mean = c.coeffs[..dim].iter().map(|z| z.re).collect();
        let positive = c.coeffs[dim..half * dim].to_vec();
        let nyquist = c.coeffs[half * dim..(half + 1) * dim].iter().map(|z| z.re).collect();
        let anti: Vec<Complex64> = positive
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::new(0.0, -1.0 / (TWO_PI * (i / dim + 1) as f64)))
            .collect();
        let anti_offset = (0..dim).map(|k| 2.0 * anti.iter().skip(k).step_by(dim).sum::<Complex64>().re).collect();
        Self { n, dim, mean, positive, nyquist, anti, anti_offset }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn grid_size(&self) -> usize {
        self.n
    }

    /// Mean value (the zeroth coefficient).
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Horner evaluation of `Σ_{n=1}^{N/2−1} a_n z^n` for component `k` of `coeffs`.
    #[inline]
    fn horner(&self, z: Complex64, coeffs: &[Complex64], k: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in coeffs.iter().skip(k).step_by(self.dim).rev() {
            acc = acc * z + c;
        }
        acc * z
    }

    /// Value at `x` (any real; the interpolant is 1-periodic).
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let z = Complex64::from_polar(1.0, TWO_PI * x);
        let nyq = (PI * self.n as f64 * x).cos();
        for k in 0..self.dim {
            let s = self.horner(z, &self.positive, k);
            out[k] = self.mean[k] + 2.0 * s.re + self.nyquist[k] * nyq;
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Value and first derivative at `x`.
    pub fn eval_with_derivative(&self, x: f64, value: &mut [f64], deriv: &mut [f64]) {
        let z = Complex64::from_polar(1.0, TWO_PI * x);
        let (sn, cs) = (PI * self.n as f64 * x).sin_cos();
        let nyq_d = -PI * self.n as f64;
        let dim = self.dim;
        let top = self.n / 2 - 1;
        for k in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut dacc = Complex64::new(0.0, 0.0);
            for m in (1..=top).rev() {
                let c = self.positive[(m - 1) * dim + k];
                acc = acc * z + c;
                dacc = dacc * z + c * Complex64::new(0.0, TWO_PI * m as f64);
            }
            acc *= z;
            dacc *= z;
            value[k] = self.mean[k] + 2.0 * acc.re + self.nyquist[k] * cs;
            deriv[k] = 2.0 * dacc.re + self.nyquist[k] * nyq_d * sn;
        }
    }

    /// `∫_0^x` of the interpolant.
    pub fn eval_antiderivative_into(&self, x: f64, out: &mut [f64]) {
        let z = Complex64::from_polar(1.0, TWO_PI * x);
        let nyq = (PI * self.n as f64 * x).sin() / (PI * self.n as f64);
        for k in 0..self.dim {
            let s = self.horner(z, &self.anti, k);
            out[k] = self.mean[k] * x + 2.0 * s.re - self.anti_offset[k] + self.nyquist[k] * nyq;
        }
    }

    /// Antiderivative `∫_0^x` and value at `x` of a scalar interpolant, in one pass.
    pub fn eval_scalar_with_antiderivative(&self, x: f64) -> (f64, f64) {
        debug_assert_eq!(self.dim, 1);
        let z = Complex64::from_polar(1.0, TWO_PI * x);
        let (sn, cs) = (PI * self.n as f64 * x).sin_cos();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut anti = Complex64::new(0.0, 0.0);
        for (c, a) in self.positive.iter().zip(&self.anti).rev() {
            acc = acc * z + c;
            anti = anti * z + a;
        }
        let (acc, anti) = (acc * z, anti * z);
        let nyq = self.nyquist[0];
        (
            self.mean[0] * x + 2.0 * anti.re - self.anti_offset[0] + nyq * sn / (PI * self.n as f64),
            self.mean[0] + 2.0 * acc.re + nyq * cs,
        )
    }
}

/// Evaluates the band-limited interpolant of `f` at arbitrary points.
pub fn trig_interpolate(f: &SampledFunction, points: &[f64]) -> Result<Vec<Vec<f64>>> {
    if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite evaluation point {bad}")));
    }
    let interp = TrigInterpolant::new(f);
    Ok(points.iter().map(|&x| interp.eval(x)).collect())
}

/// `Â_m = Σ_k a_k e^{2πimx_k}` for `m = 0..=N/2`, per component.
fn point_spectrum(n: usize, dim: usize, points: &[f64], weights: &[f64]) -> Vec<Complex64> {
    let half = n / 2;
    let mut spec = vec![Complex64::new(0.0, 0.0); (half + 1) * dim];
    for (x, a) in points.iter().zip(weights.chunks_exact(dim)) {
        let z = Complex64::from_polar(1.0, TWO_PI * x);
        let mut zm = Complex64::new(1.0, 0.0);
        for m in 0..=half {
            for k in 0..dim {
                spec[m * dim + k] += zm * a[k];
            }
            zm *= z;
        }
    }
    spec
}

/// Transpose of the map `samples ↦ (interpolant values at points)`.
///
/// `weights` holds one `dim`-vector per point; the result has one per grid node.
pub(crate) fn interpolation_adjoint(n: usize, dim: usize, points: &[f64], weights: &[f64]) -> Vec<f64> {
    let half = n / 2;
    let spec = point_spectrum(n, dim, points, weights);
    let mut out = vec![0.0; n * dim];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..dim {
        buf[0] = Complex64::new(spec[k].re, 0.0);
        for m in 1..half {
            buf[m] = spec[m * dim + k];
            buf[n - m] = spec[m * dim + k].conj();
        }
        buf[half] = Complex64::new(spec[half * dim + k].re, 0.0);
        fft_in_place(&mut buf, false);
        for j in 0..n {
            out[j * dim + k] = buf[j].re / n as f64;
        }
    }
    out
}

/// Transpose of the scalar map `samples ↦ (∫_0^{x_k} interpolant)`.
pub(crate) fn antiderivative_adjoint(n: usize, points: &[f64], weights: &[f64]) -> Vec<f64> {
    let half = n / 2;
    let spec = point_spectrum(n, 1, points, weights);
    let total: f64 = weights.iter().sum();
    let moment: f64 = points.iter().zip(weights).map(|(x, b)| x * b).sum();
    // Σ_m (1/(πm)) [Im(B̂_m ω^{−mj}) + β sin(2πmj/N)] = Im Σ_m (B̂_m ω^{−mj} − β ω^{−mj}) / (πm)
    // since β sin(2πmj/N) = −Im(β ω^{−mj}).
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 1..half {
        buf[m] = (spec[m] - total) / (PI * m as f64);
    }
    fft_in_place(&mut buf, false);
    let nyq = spec[half].im / (PI * n as f64);
    (0..n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            (moment + buf[j].im + sign * nyq) / n as f64
        })
        .collect()
}
