//! Sampled immersed closed curves and sampled circle diffeomorphisms.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{self, SampledFunction, TrigInterpolant};

const TWO_PI: f64 = 2.0 * PI;

/// Default immersion threshold, relative to the maximal speed.
pub const DEFAULT_IMMERSION_TOL: f64 = 1e-8;

/// Rejection budget of the random generators.
pub const MAX_REJECTIONS: usize = 100;

/// Deterministic random stream `stream` derived from `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Solves `f(x) = target` for an increasing `f` bracketed by `lo ≤ x ≤ hi`.
///
/// Bisection steps are taken whenever a Newton step would leave the bracket.
pub(crate) fn solve_monotone(target: f64, lo: f64, hi: f64, f: impl Fn(f64) -> (f64, f64)) -> f64 {
    let (flo, fhi) = (f(lo).0, f(hi).0);
    solve_monotone_bracketed(target, (lo, flo), (hi, fhi), f)
}

/// [`solve_monotone`] with the bracket values already known.
pub(crate) fn solve_monotone_bracketed(
    target: f64,
    (mut lo, flo): (f64, f64),
    (mut hi, fhi): (f64, f64),
    f: impl Fn(f64) -> (f64, f64),
) -> f64 {
    if flo >= target {
        return lo;
    }
    if fhi <= target {
        return hi;
    }
    let mut x = lo + (hi - lo) * (target - flo) / (fhi - flo);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        let r = fx - target;
        if r == 0.0 {
            return x;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - r / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// Locates `target` among increasing `table` values; returns `i` with `table[i] ≤ target < table[i+1]`
/// clamped to valid brackets.
fn bracket(table: &[f64], target: f64) -> usize {
    let i = table.partition_point(|&v| v <= target);
    i.saturating_sub(1).min(table.len() - 2)
}

/// The constant-speed reparametrization `ψ_c(θ) = (1/l_c) ∫_0^θ |c_θ|`, built by
/// spectral integration of the speed interpolant.
#[derive(Debug, Clone)]
pub struct ArclengthMap {
    speed: TrigInterpolant,
    length: f64,
    /// `ψ(θ_j)` for `j = 0..=N` (closing value 1 included).
    node_values: Vec<f64>,
}

impl ArclengthMap {
    fn new(speed: &SampledFunction) -> Self {
        let interp = TrigInterpolant::new(speed);
        let length = interp.mean()[0];
        let n = speed.len();
        let mut node_values: Vec<f64> = (0..n)
            .map(|j| {
                let mut s = [0.0];
                interp.eval_antiderivative_into(j as f64 / n as f64, &mut s);
                s[0] / length
            })
            .collect();
        node_values[0] = 0.0;
        node_values.push(1.0);
        Self { speed: interp, length, node_values }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub(crate) fn speed_interpolant(&self) -> &TrigInterpolant {
        &self.speed
    }

    /// `ψ(x)` and `ψ'(x)` for `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (s, v) = self.speed.eval_scalar_with_antiderivative(x);
        (s / self.length, v / self.length)
    }

    /// `ψ^{-1}(τ)` for `τ ∈ [0, 1]`.
    pub fn inverse(&self, tau: f64) -> f64 {
        let n = self.node_values.len() - 1;
        let i = bracket(&self.node_values, tau);
        let (lo, hi) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
        let (flo, fhi) = (self.node_values[i], self.node_values[i + 1]);
        solve_monotone_bracketed(tau, (lo, flo), (hi, fhi), |x| self.eval(x))
    }
}

/// A sampled immersed closed curve with cached speed, length and `ψ_c`.
#[derive(Debug, Clone)]
pub struct DiscreteCurve {
    position: SampledFunction,
    velocity: SampledFunction,
    speed: SampledFunction,
    arclength: ArclengthMap,
    psi: Vec<f64>,
    psi_inverse: OnceLock<Vec<f64>>,
}

impl DiscreteCurve {
    /// Builds a curve, enforcing `min speed ≥ 1e−8 · max speed`.
    pub fn new(position: SampledFunction) -> Result<Self> {
        Self::with_immersion_tol(position, DEFAULT_IMMERSION_TOL)
    }

    pub fn with_immersion_tol(position: SampledFunction, rel_tol: f64) -> Result<Self> {
        if position.dim() < 2 {
            return Err(Error::Configuration(format!(
                "curves need ambient dimension ≥ 2, got {}",
                position.dim()
            )));
        }
        let velocity = spectral::derivative(&position);
        let speed = velocity.pointwise_norm();
        let (min, max) = speed
            .as_slice()
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        let threshold = rel_tol * max;
        if !(min >= threshold && min > 0.0) {
            return Err(Error::ImmersionViolation { min_speed: min, threshold });
        }
        let arclength = ArclengthMap::new(&speed);
        let n = position.len();
        let psi = arclength.node_values[..n].to_vec();
        Ok(Self { position, velocity, speed, arclength, psi, psi_inverse: OnceLock::new() })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.position.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.position.dim()
    }

    pub fn position(&self) -> &SampledFunction {
        &self.position
    }

    /// `c_θ` at the nodes.
    pub fn velocity(&self) -> &SampledFunction {
        &self.velocity
    }

    /// `|c_θ|` at the nodes.
    pub fn speed(&self) -> &SampledFunction {
        &self.speed
    }

    pub fn min_speed(&self) -> f64 {
        self.speed.as_slice().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn length(&self) -> f64 {
        self.arclength.length
    }

    pub fn arclength(&self) -> &ArclengthMap {
        &self.arclength
    }

    /// `ψ_c(θ_j)`.
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// `ψ_c^{-1}(θ_j)`.
    pub fn psi_inverse(&self) -> &[f64] {
        let n = self.len();
        self.psi_inverse.get_or_init(|| (0..n).map(|j| self.arclength.inverse(j as f64 / n as f64)).collect())
    }

    /// Checks that `f` lives on this curve's grid.
    pub fn check_compatible(&self, f: &SampledFunction) -> Result<()> {
        self.position.check_same_shape(f)
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.position.scaled(lambda))
    }

    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        Self::new(self.position.translated(v))
    }

    /// `c ∘ φ`, sampled by interpolating `c` at `φ(θ_j)`.
    pub fn reparametrize(&self, phi: &DiffeoSample) -> Result<Self> {
        Self::new(compose(&self.position, phi)?)
    }

    /// Curve of the same image traversed with constant speed `l_c`.
    pub fn to_constant_speed(&self) -> Result<Self> {
        let interp = TrigInterpolant::new(&self.position);
        let dim = self.dim();
        let mut data = vec![0.0; self.len() * dim];
        for (x, out) in self.psi_inverse().iter().zip(data.chunks_exact_mut(dim)) {
            interp.eval_into(*x, out);
        }
        Self::new(SampledFunction::new(dim, data)?)
    }

    /// Node-level diameter `max_{i,j} |c(θ_i) − c(θ_j)|`.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<&[f64]> = self.position.points().collect();
        let mut best = 0.0f64;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                best = best.max(d2);
            }
        }
        best.sqrt()
    }

    /// Diameter of the interpolated curve: node candidates on an 8× grid, then each
    /// near-maximal pair is polished by alternating golden-section searches.
    pub fn diameter_refined(&self) -> f64 {
        const FACTOR: usize = 8;
        let fine = spectral::upsample(&self.position, FACTOR).expect("upsampled grid is a power of two");
        let m = fine.len();
        let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        // Best partner of every fine node.
        let partners: Vec<(usize, f64)> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| (j, dist2(fine.point(i), fine.point(j))))
                    .fold((i, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
            })
            .collect();
        let top = partners.iter().map(|p| p.1).fold(0.0, f64::max);
        let interp = TrigInterpolant::new(&self.position);
        let eval = |x: f64| interp.eval(x);
        let h = 1.0 / m as f64;
        let mut best = top;
        for (i, &(j, d)) in partners.iter().enumerate() {
            // Only local maxima of the partner distance within a small band of the top.
            let prev = partners[(i + m - 1) % m].1;
            let next = partners[(i + 1) % m].1;
            if d < top * (1.0 - 1e-4) || d < prev || d < next {
                continue;
            }
            let (mut s, mut t) = (i as f64 * h, j as f64 * h);
            let mut value = d;
            for _ in 0..30 {
                let ct = eval(t);
                s = golden_max(|x| dist2(&eval(x), &ct), s - 2.0 * h, s + 2.0 * h);
                let cs = eval(s);
                t = golden_max(|x| dist2(&cs, &eval(x)), t - 2.0 * h, t + 2.0 * h);
                let v = dist2(&cs, &eval(t));
                let done = v - value <= 1e-15 * v;
                value = value.max(v);
                if done {
                    break;
                }
            }
            best = best.max(value);
        }
        best.sqrt()
    }

    /// Square-root velocity transform `c_θ / |c_θ|^{1/2}` at the nodes.
    pub fn srv_transform(&self) -> SampledFunction {
        let dim = self.dim();
        let mut data = self.velocity.as_slice().to_vec();
        for (p, s) in data.chunks_exact_mut(dim).zip(self.speed.as_slice()) {
            let inv = 1.0 / s.sqrt();
            p.iter_mut().for_each(|x| *x *= inv);
        }
        SampledFunction::new(dim, data).expect("srv transform of a valid curve is finite")
    }

    /// Arc-length derivative `D_s h = (1/|c_θ|) ∂_θ h`.
    pub fn ds_derivative(&self, h: &TangentField) -> Result<TangentField> {
        self.check_compatible(h.as_function())?;
        let d = spectral::derivative(h.as_function());
        let dim = self.dim();
        let mut data = d.into_vec();
        for (p, s) in data.chunks_exact_mut(dim).zip(self.speed.as_slice()) {
            p.iter_mut().for_each(|x| *x /= s);
        }
        Ok(TangentField(SampledFunction::new(dim, data)?))
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-13 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

/// `sup_j |c_0(θ_j) − c_1(θ_j)|`.
pub fn sup_distance(c0: &DiscreteCurve, c1: &DiscreteCurve) -> Result<f64> {
    Ok(c0.position().lin_comb(1.0, c1.position(), -1.0)?.sup_norm())
}

/// A vector field along a curve: an element of `T_c Imm`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField(SampledFunction);

impl TangentField {
    pub fn new(curve: &DiscreteCurve, field: SampledFunction) -> Result<Self> {
        curve.check_compatible(&field)?;
        Ok(Self(field))
    }

    /// Wraps a field without a curve at hand; the metric operations re-check the grid.
    pub fn from_function(field: SampledFunction) -> Self {
        Self(field)
    }

    pub fn as_function(&self) -> &SampledFunction {
        &self.0
    }

    pub fn into_inner(self) -> SampledFunction {
        self.0
    }
}

impl From<SampledFunction> for TangentField {
    fn from(f: SampledFunction) -> Self {
        Self(f)
    }
}

/// A sampled orientation-preserving circle diffeomorphism, lifted so that
/// `φ(θ + 1) = φ(θ) + 1`. Stored as `φ(θ) = θ + p(θ)` with `p` periodic.
#[derive(Debug, Clone)]
pub struct DiffeoSample {
    periodic: TrigInterpolant,
    values: Vec<f64>,
    derivative: Vec<f64>,
}

impl DiffeoSample {
    /// `φ = id + p` for a sampled periodic scalar function `p`.
    pub fn from_periodic_part(p: &SampledFunction) -> Result<Self> {
        if p.dim() != 1 {
            return Err(Error::Configuration("periodic part must be scalar".into()));
        }
        let n = p.len();
        let dp = spectral::derivative(p);
        let values: Vec<f64> = (0..n).map(|j| j as f64 / n as f64 + p.point(j)[0]).collect();
        let derivative: Vec<f64> = dp.as_slice().iter().map(|d| 1.0 + d).collect();
        let min = derivative.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) || values.windows(2).any(|w| w[1] <= w[0]) || values[n - 1] >= values[0] + 1.0 {
            return Err(Error::Domain(format!("map is not increasing (min φ_θ = {min:e})")));
        }
        Ok(Self { periodic: TrigInterpolant::new(p), values, derivative })
    }

    /// Lifted samples `φ(θ_j) = θ_j + p(θ_j)`, `n ≥ 8` a power of two.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let p: Vec<f64> = values.iter().enumerate().map(|(j, v)| v - j as f64 / n as f64).collect();
        Self::from_periodic_part(&SampledFunction::new(1, p)?)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_periodic_part(&SampledFunction::zeros(n, 1)?)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `φ(θ_j)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `φ_θ(θ_j)`.
    pub fn derivative(&self) -> &[f64] {
        &self.derivative
    }

    /// `φ(x)` and `φ_θ(x)` for any real `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (mut v, mut d) = ([0.0], [0.0]);
        self.periodic.eval_with_derivative(x, &mut v, &mut d);
        (x + v[0], 1.0 + d[0])
    }

    /// `φ^{-1}(y)` for any real `y`.
    pub fn apply_inverse(&self, y: f64) -> f64 {
        let shift = y.floor();
        let t = y - shift;
        let n = self.values.len();
        // φ(θ_j − 1), φ(θ_j), φ(θ_j + 1) covers every t ∈ [0, 1).
        let table: Vec<f64> = (0..3 * n + 1)
            .map(|i| {
                let (wrap, j) = (i / n, i % n);
                self.values[j] + wrap as f64 - 1.0
            })
            .collect();
        let i = bracket(&table, t);
        let lo = i as f64 / n as f64 - 1.0;
        let hi = lo + 1.0 / n as f64;
        shift + solve_monotone(t, lo, hi, |x| self.eval(x))
    }

    /// The inverse map sampled on the same grid.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.len();
        let p: Vec<f64> = (0..n)
            .map(|j| {
                let t = j as f64 / n as f64;
                self.apply_inverse(t) - t
            })
            .collect();
        Self::from_periodic_part(&SampledFunction::new(1, p)?)
    }

    /// `sup φ_θ` and `inf φ_θ`, estimated on a grid `refine` times finer.
    pub fn derivative_bounds(&self, refine: usize) -> (f64, f64) {
        let m = self.len() * refine.max(1);
        (0..m).fold((0.0f64, f64::INFINITY), |(hi, lo), i| {
            let d = self.eval(i as f64 / m as f64).1;
            (hi.max(d), lo.min(d))
        })
    }
}

/// `f ∘ φ` on the grid of `f`; `φ` must share the grid size.
pub fn compose(f: &SampledFunction, phi: &DiffeoSample) -> Result<SampledFunction> {
    if f.len() != phi.len() {
        return Err(Error::GridMismatch(format!("function has {} nodes, diffeo {}", f.len(), phi.len())));
    }
    let interp = TrigInterpolant::new(f);
    let dim = f.dim();
    let mut data = vec![0.0; f.len() * dim];
    let n = f.len() as f64;
    for (x, out) in phi.values().iter().zip(data.chunks_exact_mut(dim)) {
        // The interpolant reproduces the samples at the nodes; copy them so that
        // composing with the identity is exact.
        let j = x * n;
        if j.fract() == 0.0 {
            out.copy_from_slice(f.point(j.rem_euclid(n) as usize));
        } else {
            interp.eval_into(*x, out);
        }
    }
    SampledFunction::new(dim, data)
}

/// Parameters of [`random_curve`].
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec {
    pub n: usize,
    pub dim: usize,
    /// Mode `m` has amplitude `amplitude · m^{−decay}`.
    pub decay: f64,
    /// Absolute minimal speed accepted.
    pub min_speed: f64,
    pub amplitude: f64,
    pub radius: f64,
    /// Highest perturbation frequency.
    pub max_mode: usize,
}

impl CurveSpec {
    pub fn new(n: usize, dim: usize) -> Self {
        Self { n, dim, decay: 3.0, min_speed: 0.5, amplitude: 0.3, radius: 1.0, max_mode: (n / 8).clamp(1, 8) }
    }
}

/// A random closed curve: a base circle plus decaying random Fourier modes.
///
/// Redraws until the minimal speed reaches `spec.min_speed`.
pub fn random_curve(seed: u64, spec: &CurveSpec) -> Result<DiscreteCurve> {
    random_curve_with(&mut rng_for(seed, 0), spec)
}

pub fn random_curve_with<R: Rng>(rng: &mut R, spec: &CurveSpec) -> Result<DiscreteCurve> {
    if !(spec.decay > 1.0) {
        return Err(Error::Domain(format!("decay must exceed 1, got {}", spec.decay)));
    }
    spectral::check_grid_size(spec.n)?;
    if spec.dim < 2 {
        return Err(Error::Configuration("curves need ambient dimension ≥ 2".into()));
    }
    if spec.max_mode == 0 || 2 * spec.max_mode >= spec.n {
        return Err(Error::Configuration(format!("max_mode {} invalid for n = {}", spec.max_mode, spec.n)));
    }
    for _ in 0..MAX_REJECTIONS {
        let modes: Vec<(f64, f64)> = (0..spec.max_mode * spec.dim)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let position = SampledFunction::from_fn(spec.n, spec.dim, |t, out| {
            out.iter_mut().for_each(|x| *x = 0.0);
            out[0] = spec.radius * (TWO_PI * t).cos();
            out[1] = spec.radius * (TWO_PI * t).sin();
            for m in 1..=spec.max_mode {
                let w = spec.amplitude * (m as f64).powf(-spec.decay);
                let (s, c) = (TWO_PI * m as f64 * t).sin_cos();
                for (k, x) in out.iter_mut().enumerate() {
                    let (a, b) = modes[(m - 1) * spec.dim + k];
                    *x += w * (a * c + b * s);
                }
            }
        })?;
        match DiscreteCurve::new(position) {
            Ok(c) if c.min_speed() >= spec.min_speed => return Ok(c),
            _ => continue,
        }
    }
    Err(Error::GenerationFailure(format!(
        "no curve with min speed ≥ {} after {MAX_REJECTIONS} draws",
        spec.min_speed
    )))
}

/// Parameters of [`random_diffeo`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiffeoSpec {
    pub n: usize,
    /// Bound on `|φ_θ − 1|`; values ≥ 1 may be rejected.
    pub amplitude: f64,
    pub modes: usize,
    /// Smallest accepted `φ_θ`.
    pub min_derivative: f64,
}

impl DiffeoSpec {
    pub fn new(n: usize, amplitude: f64) -> Self {
        Self { n, amplitude, modes: 3, min_derivative: 1e-3 }
    }
}

/// `φ(θ) = θ + p(θ)` with `p'` a random trigonometric polynomial of `spec.modes`
/// low frequencies and `sup |p'| ≤ amplitude`.
pub fn random_diffeo(seed: u64, spec: &DiffeoSpec) -> Result<DiffeoSample> {
    random_diffeo_with(&mut rng_for(seed, 0), spec)
}

pub fn random_diffeo_with<R: Rng>(rng: &mut R, spec: &DiffeoSpec) -> Result<DiffeoSample> {
    spectral::check_grid_size(spec.n)?;
    if !(spec.amplitude >= 0.0) || spec.modes == 0 || 2 * spec.modes >= spec.n {
        return Err(Error::Domain(format!("invalid diffeo spec {spec:?}")));
    }
    let z: f64 = (1..=spec.modes).map(|k| 2.0 / k as f64).sum();
    for _ in 0..MAX_REJECTIONS {
        let coeffs: Vec<(f64, f64)> =
            (0..spec.modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        // p' = A Σ (α_k cos + β_k sin)/(k Z), so p = A Σ (α_k sin − β_k cos)/(2π k² Z).
        let p = |t: f64| -> f64 {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    let k = (i + 1) as f64;
                    let (s, c) = (TWO_PI * k * t).sin_cos();
                    spec.amplitude * (a * s - b * c) / (TWO_PI * k * k * z)
                })
                .sum()
        };
        let p0 = p(0.0);
        let samples = SampledFunction::from_fn(spec.n, 1, |t, o| o[0] = p(t) - p0)?;
        if let Ok(phi) = DiffeoSample::from_periodic_part(&samples) {
            if phi.derivative_bounds(4).1 >= spec.min_derivative {
                return Ok(phi);
            }
        }
    }
    Err(Error::GenerationFailure(format!(
        "no diffeomorphism with φ_θ ≥ {} after {MAX_REJECTIONS} draws",
        spec.min_derivative
    )))
}

/// Circle of radius `r` centered at the origin in the first two coordinates.
pub fn circle(n: usize, dim: usize, r: f64) -> Result<DiscreteCurve> {
    DiscreteCurve::new(SampledFunction::from_fn(n, dim, |t, o| {
        o.iter_mut().for_each(|x| *x = 0.0);
        o[0] = r * (TWO_PI * t).cos();
        o[1] = r * (TWO_PI * t).sin();
    })?)
}
