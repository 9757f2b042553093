//! Time-discrete paths of curves, their energies, a geodesic boundary value solver
//! and a variational shooting integrator.
//!
//! A path is `M + 1` curves at uniform times `t_m = m/M`. Step `m` contributes
//! `Δt · G_{c_{m+1/2}}(ḣ_m, ḣ_m)` to the energy, with `ḣ_m = (c_{m+1} − c_m)/Δt` and
//! `c_{m+1/2}` the pointwise average of the two neighbouring curves.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{DiffeoSample, DiscreteCurve, TangentField};
use crate::error::{Error, Result};
use crate::metric::{quadratic_form_with_gradient, MetricParams, Variant, DEFAULT_OVERSAMPLING};
use crate::optim::{self, LbfgsOptions};
use crate::spectral::{self, fourier_forward, fourier_inverse, lambda_symbol, SampledFunction, TrigInterpolant};

#[derive(Debug, Clone)]
pub struct PathGrid {
    times: Vec<f64>,
    curves: Vec<DiscreteCurve>,
    endpoints_fixed: bool,
}

impl PathGrid {
    /// Path through `curves` at uniform times; at least two curves on a common grid.
    pub fn new(curves: Vec<DiscreteCurve>) -> Result<Self> {
        if curves.len() < 2 {
            return Err(Error::Configuration(format!("a path needs at least 2 curves, got {}", curves.len())));
        }
        for c in &curves[1..] {
            curves[0].check_compatible(c.position())?;
        }
        let m = curves.len() - 1;
        let times = (0..=m).map(|i| i as f64 / m as f64).collect();
        Ok(Self { times, curves, endpoints_fixed: true })
    }

    pub fn from_positions(positions: Vec<SampledFunction>) -> Result<Self> {
        Self::new(positions.into_iter().map(DiscreteCurve::new).collect::<Result<_>>()?)
    }

    /// `(1 − t) c_0 + t c_1`.
    pub fn linear(c0: &DiscreteCurve, c1: &DiscreteCurve, m: usize) -> Result<Self> {
        Self::lifted(c0, c1, m, 0.0)
    }

    /// `(1 − t) c_0 + t c_1 + λ · 4t(1 − t) · (cos 2πθ, sin 2πθ, 0, …)`.
    pub fn lifted(c0: &DiscreteCurve, c1: &DiscreteCurve, m: usize, lambda: f64) -> Result<Self> {
        check_steps(m)?;
        c0.check_compatible(c1.position())?;
        let (n, d) = (c0.len(), c0.dim());
        let bump = SampledFunction::from_fn(n, d, |t, o| {
            o.fill(0.0);
            o[0] = (2.0 * PI * t).cos();
            o[1] = (2.0 * PI * t).sin();
        })?;
        let diff = c1.position().lin_comb(1.0, c0.position(), -1.0)?;
        let curves = (0..=m)
            .map(|i| {
                let t = i as f64 / m as f64;
                match i {
                    0 => Ok(c0.clone()),
                    _ if i == m => Ok(c1.clone()),
                    _ => {
                        // Written as c_0 + t (c_1 − c_0) so that equal endpoints give an exactly constant path.
                        let base = c0.position().lin_comb(1.0, &diff, t)?;
                        DiscreteCurve::new(base.lin_comb(1.0, &bump, lambda * 4.0 * t * (1.0 - t))?)
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves)
    }

    /// Number of time steps `M`.
    pub fn steps(&self) -> usize {
        self.curves.len() - 1
    }

    pub fn grid_size(&self) -> usize {
        self.curves[0].len()
    }

    pub fn dim(&self) -> usize {
        self.curves[0].dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn curves(&self) -> &[DiscreteCurve] {
        &self.curves
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps() as f64
    }

    pub fn endpoints_fixed(&self) -> bool {
        self.endpoints_fixed
    }

    pub fn start(&self) -> &DiscreteCurve {
        &self.curves[0]
    }

    pub fn end(&self) -> &DiscreteCurve {
        &self.curves[self.steps()]
    }

    pub fn min_speed(&self) -> f64 {
        self.curves.iter().map(DiscreteCurve::min_speed).fold(f64::INFINITY, f64::min)
    }

    pub fn min_length(&self) -> f64 {
        self.curves.iter().map(DiscreteCurve::length).fold(f64::INFINITY, f64::min)
    }

    /// Same path on a spatial grid `factor` times finer (spectral upsampling).
    pub fn upsample_space(&self, factor: usize) -> Result<Self> {
        let curves = self
            .curves
            .iter()
            .map(|c| DiscreteCurve::new(spectral::upsample(c.position(), factor)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves)
    }

    fn positions(&self) -> Vec<&SampledFunction> {
        self.curves.iter().map(DiscreteCurve::position).collect()
    }
}

fn check_steps(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Configuration("number of time steps must be ≥ 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub distance_upper_bound: f64,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub min_speed_along_path: f64,
    pub min_length_along_path: f64,
    /// The line search could not find a step that keeps every curve immersed and
    /// decreases the energy. The returned path is the last valid iterate.
    pub line_search_stalled: bool,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub steps: usize,
    pub max_iter: usize,
    /// Relative gradient-norm tolerance, `‖∇E‖ ≤ tol · (1 + E)`.
    pub tol: f64,
    pub oversampling: usize,
    pub precondition: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { steps: 16, max_iter: 500, tol: 1e-6, oversampling: DEFAULT_OVERSAMPLING, precondition: true }
    }
}

impl SolveOptions {
    pub fn with_steps(steps: usize) -> Self {
        Self { steps, ..Default::default() }
    }
}

/// Energies `G_{c_{m+1/2}}(ḣ_m, ḣ_m)` of every step together with their partial
/// gradients (midpoint curve, velocity).
struct StepForms {
    values: Vec<f64>,
    grad_mid: Vec<Vec<f64>>,
    grad_vel: Vec<Vec<f64>>,
}

fn step_forms(positions: &[&SampledFunction], params: MetricParams, oversampling: usize, with_grad: bool) -> Result<StepForms> {
    let m = positions.len() - 1;
    let dt = 1.0 / m as f64;
    let results = (0..m)
        .into_par_iter()
        .map(|i| {
            let mid = DiscreteCurve::new(positions[i].lin_comb(0.5, positions[i + 1], 0.5)?)?;
            let vel = positions[i + 1].lin_comb(1.0 / dt, positions[i], -1.0 / dt)?;
            if with_grad {
                let qf = quadratic_form_with_gradient(&mid, &vel, params, oversampling)?;
                Ok((qf.value, qf.grad_curve, qf.grad_field))
            } else {
                let h = TangentField::from_function(vel);
                Ok((crate::metric::inner_with(&mid, &h, &h, params, oversampling)?, Vec::new(), Vec::new()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut forms = StepForms { values: Vec::with_capacity(m), grad_mid: Vec::new(), grad_vel: Vec::new() };
    for (v, a, b) in results {
        forms.values.push(v);
        forms.grad_mid.push(a);
        forms.grad_vel.push(b);
    }
    Ok(forms)
}

/// Gradient of the discrete energy with respect to every slice (endpoints included).
fn slice_gradients(forms: &StepForms, dt: f64) -> Vec<Vec<f64>> {
    let m = forms.values.len();
    let len = forms.grad_mid[0].len();
    let mut out = vec![vec![0.0; len]; m + 1];
    for i in 0..m {
        let (a, b) = (&forms.grad_mid[i], &forms.grad_vel[i]);
        for k in 0..len {
            out[i][k] += 0.5 * dt * a[k] - b[k];
            out[i + 1][k] += 0.5 * dt * a[k] + b[k];
        }
    }
    out
}

/// Per-step values `G_{c_{m+1/2}}(ḣ_m, ḣ_m)`.
pub fn step_energies(p: &PathGrid, params: MetricParams) -> Result<Vec<f64>> {
    Ok(step_forms(&p.positions(), params, DEFAULT_OVERSAMPLING, false)?.values)
}

/// `Σ_m Δt · G_{c_{m+1/2}}(ḣ_m, ḣ_m)`.
pub fn path_energy(p: &PathGrid, params: MetricParams) -> Result<f64> {
    Ok(step_energies(p, params)?.iter().sum::<f64>() * p.dt())
}

/// `Σ_m Δt · G_{c_{m+1/2}}(ḣ_m, ḣ_m)^{1/2}`.
pub fn path_length(p: &PathGrid, params: MetricParams) -> Result<f64> {
    Ok(step_energies(p, params)?.iter().map(|e| e.max(0.0).sqrt()).sum::<f64>() * p.dt())
}

/// Gradient of [`path_energy`] with respect to the interior slices.
pub fn energy_gradient(p: &PathGrid, params: MetricParams) -> Result<Vec<TangentField>> {
    let forms = step_forms(&p.positions(), params, DEFAULT_OVERSAMPLING, true)?;
    let grads = slice_gradients(&forms, p.dt());
    let dim = p.dim();
    grads[1..p.steps()]
        .iter()
        .map(|g| Ok(TangentField::from_function(SampledFunction::new(dim, g.clone())?)))
        .collect()
}

/// Energy and interior gradient for the flattened interior slices `x`;
/// `None` if some slice or midpoint is not immersed.
fn interior_objective(
    c0: &SampledFunction,
    c1: &SampledFunction,
    x: &[f64],
    params: MetricParams,
    oversampling: usize,
) -> Option<(f64, Vec<f64>)> {
    let (n, dim) = (c0.len(), c0.dim());
    let chunk = n * dim;
    let mut slices = Vec::with_capacity(x.len() / chunk + 2);
    slices.push(c0.clone());
    for s in x.chunks_exact(chunk) {
        let f = SampledFunction::new(dim, s.to_vec()).ok()?;
        DiscreteCurve::new(f.clone()).ok()?;
        slices.push(f);
    }
    slices.push(c1.clone());
    let refs: Vec<&SampledFunction> = slices.iter().collect();
    let forms = step_forms(&refs, params, oversampling, true).ok()?;
    let dt = 1.0 / (refs.len() - 1) as f64;
    let energy = forms.values.iter().sum::<f64>() * dt;
    let grads = slice_gradients(&forms, dt);
    let m = refs.len() - 1;
    Some((energy, grads[1..m].concat()))
}

/// Inverse of the energy Hessian of a straight path on a circle of length `length`:
/// diagonal in Fourier modes, tridiagonal in time.
fn time_space_preconditioner(
    n: usize,
    dim: usize,
    interior: usize,
    dt: f64,
    length: f64,
    params: MetricParams,
) -> impl Fn(&[f64]) -> Vec<f64> {
    let q = params.q.value();
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            let freq = spectral::frequency(k, n);
            let hom = length.powf(1.0 - 2.0 * q) * lambda_symbol(if freq == 0 { 1 } else { freq }, 2.0 * q);
            let w = match params.variant {
                Variant::Full if q == 0.0 => length,
                Variant::Full => length + if freq == 0 { 0.0 } else { hom },
                Variant::Homogeneous => hom,
            };
            2.0 * w / (n as f64 * dt)
        })
        .collect();
    move |v: &[f64]| {
        let chunk = n * dim;
        let mut coeffs: Vec<Vec<Complex64>> = v
            .chunks_exact(chunk)
            .map(|s| {
                let f = SampledFunction::new(dim, s.to_vec()).expect("slice shape");
                let c = fourier_forward(&f);
                c.iter().flat_map(|(_, z)| z.iter().copied()).collect()
            })
            .collect();
        // Thomas algorithm on tridiag(−1, 2, −1) · w_k for each (mode, component).
        for k in 0..n {
            let w = weights[k];
            for comp in 0..dim {
                let idx = k * dim + comp;
                let mut cprime = vec![0.0; interior];
                let mut dprime = vec![Complex64::new(0.0, 0.0); interior];
                for i in 0..interior {
                    let (a, b, c) = (-w, 2.0 * w, -w);
                    let denom = if i == 0 { b } else { b - a * cprime[i - 1] };
                    cprime[i] = c / denom;
                    let prev = if i == 0 { Complex64::new(0.0, 0.0) } else { dprime[i - 1] };
                    dprime[i] = (coeffs[i][idx] - a * prev) / denom;
                }
                for i in (0..interior).rev() {
                    let next = if i + 1 < interior { coeffs[i + 1][idx] } else { Complex64::new(0.0, 0.0) };
                    coeffs[i][idx] = dprime[i] - cprime[i] * next;
                }
            }
        }
        coeffs
            .into_iter()
            .flat_map(|c| {
                let sc = spectral::SpectralCoeffs::from_raw(n, dim, c);
                fourier_inverse(&sc).into_vec()
            })
            .collect()
    }
}

/// Initial path: linear interpolation, or a lifted path if that leaves the immersions.
fn initial_path(c0: &DiscreteCurve, c1: &DiscreteCurve, m: usize, params: MetricParams) -> Result<PathGrid> {
    let ok = |p: &PathGrid| step_energies(p, params).is_ok();
    if let Ok(p) = PathGrid::linear(c0, c1, m) {
        if ok(&p) {
            return Ok(p);
        }
    }
    let mut lambda = 0.05 * (c0.length() + c1.length()) / (2.0 * PI);
    for _ in 0..40 {
        if let Ok(p) = PathGrid::lifted(c0, c1, m, lambda) {
            if ok(&p) {
                log::debug!("linear path not immersed, lifted by {lambda}");
                return Ok(p);
            }
        }
        lambda *= 2.0;
    }
    Err(Error::ImmersionViolation { min_speed: 0.0, threshold: crate::curve::DEFAULT_IMMERSION_TOL })
}

/// Locally minimizes the path energy between `c0` and `c1` starting from the
/// linear path (or a lifted path if the linear one is not immersed).
pub fn solve_bvp(c0: &DiscreteCurve, c1: &DiscreteCurve, params: MetricParams, opts: &SolveOptions) -> Result<(PathGrid, SolveReport)> {
    c0.check_compatible(c1.position())?;
    check_steps(opts.steps)?;
    let init = initial_path(c0, c1, opts.steps, params)?;
    solve_bvp_from(&init, params, opts)
}

/// Like [`solve_bvp`], starting from a given path; its endpoints stay fixed.
pub fn solve_bvp_from(init: &PathGrid, params: MetricParams, opts: &SolveOptions) -> Result<(PathGrid, SolveReport)> {
    let (n, dim, m) = (init.grid_size(), init.dim(), init.steps());
    let (c0, c1) = (init.start().position().clone(), init.end().position().clone());
    let x0: Vec<f64> = init.curves[1..m].iter().flat_map(|c| c.position().as_slice().to_vec()).collect();
    let lopts = LbfgsOptions { max_iter: opts.max_iter, grad_tol: opts.tol, ..Default::default() };
    let objective = |x: &[f64]| interior_objective(&c0, &c1, x, params, opts.oversampling);
    let outcome = if m < 2 {
        objective(&x0).map(|(value, gradient)| optim::LbfgsOutcome {
            x: x0.clone(),
            value,
            gradient,
            iterations: 0,
            converged: true,
            stalled: false,
            history: vec![value],
        })
    } else if opts.precondition {
        let length = 0.5 * (init.start().length() + init.end().length());
        let pre = time_space_preconditioner(n, dim, m - 1, 1.0 / m as f64, length, params);
        optim::minimize(objective, x0, Some(pre), &lopts)
    } else {
        optim::minimize(objective, x0, None::<fn(&[f64]) -> Vec<f64>>, &lopts)
    };
    let outcome = outcome.ok_or_else(|| Error::ImmersionViolation { min_speed: init.min_speed(), threshold: 0.0 })?;
    let mut curves = vec![init.start().clone()];
    for s in outcome.x.chunks_exact(n * dim) {
        curves.push(DiscreteCurve::new(SampledFunction::new(dim, s.to_vec())?)?);
    }
    curves.push(init.end().clone());
    let path = PathGrid::new(curves)?;
    let report = report_for(&path, params, outcome.iterations, outcome.converged, outcome.stalled)?;
    if outcome.stalled {
        log::info!("line search stalled after {} iterations", outcome.iterations);
    }
    Ok((path, report))
}

fn report_for(path: &PathGrid, params: MetricParams, iterations: usize, converged: bool, stalled: bool) -> Result<SolveReport> {
    let steps = step_energies(path, params)?;
    let dt = path.dt();
    Ok(SolveReport {
        distance_upper_bound: steps.iter().map(|e| e.max(0.0).sqrt()).sum::<f64>() * dt,
        energy: steps.iter().sum::<f64>() * dt,
        iterations,
        converged,
        min_speed_along_path: path.min_speed(),
        min_length_along_path: path.min_length(),
        line_search_stalled: stalled,
    })
}

/// Minimizes the path energy over paths `t ↦ c_0∘φ(t)` from `c_0` to `c_0∘φ_1`,
/// where each `φ(t_m)` is represented by its node values.
pub fn solve_bvp_reparametrization(
    c0: &DiscreteCurve,
    phi1: &DiffeoSample,
    params: MetricParams,
    opts: &SolveOptions,
) -> Result<(PathGrid, SolveReport)> {
    if phi1.len() != c0.len() {
        return Err(Error::GridMismatch(format!("diffeo on {} nodes, curve on {}", phi1.len(), c0.len())));
    }
    check_steps(opts.steps)?;
    let n = c0.len();
    let m = opts.steps;
    let end = phi1.values();
    let interior: Vec<Vec<f64>> = (1..m)
        .map(|i| {
            let t = i as f64 / m as f64;
            end.iter().enumerate().map(|(j, b)| j as f64 / n as f64 + t * (b - j as f64 / n as f64)).collect()
        })
        .collect();
    solve_bvp_reparametrization_from(c0, phi1, &interior, params, opts)
}

/// Like [`solve_bvp_reparametrization`], starting from the lifted node values of
/// `φ(t_1), …, φ(t_{M−1})`.
pub fn solve_bvp_reparametrization_from(
    c0: &DiscreteCurve,
    phi1: &DiffeoSample,
    interior: &[Vec<f64>],
    params: MetricParams,
    opts: &SolveOptions,
) -> Result<(PathGrid, SolveReport)> {
    if phi1.len() != c0.len() {
        return Err(Error::GridMismatch(format!("diffeo on {} nodes, curve on {}", phi1.len(), c0.len())));
    }
    check_steps(opts.steps)?;
    let (n, dim, m) = (c0.len(), c0.dim(), opts.steps);
    if interior.len() + 1 != m || interior.iter().any(|v| v.len() != n) {
        return Err(Error::GridMismatch(format!("expected {} interior maps on {n} nodes", m - 1)));
    }
    let interp = TrigInterpolant::new(c0.position());
    let end = phi1.values();
    let compose = |phi: &[f64]| -> (SampledFunction, Vec<f64>) {
        let mut pos = vec![0.0; n * dim];
        let mut der = vec![0.0; n * dim];
        for (j, &x) in phi.iter().enumerate() {
            let (p, d) = (&mut pos[j * dim..(j + 1) * dim], &mut der[j * dim..(j + 1) * dim]);
            interp.eval_with_derivative(x, p, d);
            // Exact samples at the nodes keep the identity path exactly constant.
            let node = x * n as f64;
            if node.fract() == 0.0 {
                p.copy_from_slice(c0.position().point(node.rem_euclid(n as f64) as usize));
            }
        }
        (SampledFunction::new(dim, pos).expect("shape"), der)
    };
    let c_end = DiscreteCurve::new(compose(end).0)?;
    let c_start = c0.position().clone();
    let c_end_pos = c_end.position().clone();
    let x0: Vec<f64> = interior.concat();
    let objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let mut positions = Vec::with_capacity(x.len());
        let mut derivs = Vec::with_capacity(m - 1);
        for phi in x.chunks_exact(n) {
            if phi.windows(2).any(|w| w[1] <= w[0]) || phi[n - 1] >= phi[0] + 1.0 {
                return None;
            }
            let (p, d) = compose(phi);
            positions.extend_from_slice(p.as_slice());
            derivs.push(d);
        }
        let (e, g) = interior_objective(&c_start, &c_end_pos, &positions, params, opts.oversampling)?;
        let grad = g
            .chunks_exact(n * dim)
            .zip(&derivs)
            .flat_map(|(gc, d)| (0..n).map(|j| spectral::dot(&gc[j * dim..(j + 1) * dim], &d[j * dim..(j + 1) * dim])).collect::<Vec<_>>())
            .collect();
        Some((e, grad))
    };
    let lopts = LbfgsOptions { max_iter: opts.max_iter, grad_tol: opts.tol, ..Default::default() };
    let outcome = if m < 2 {
        None
    } else {
        optim::minimize(objective, x0.clone(), None::<fn(&[f64]) -> Vec<f64>>, &lopts)
    };
    let (x, iterations, converged, stalled) = match outcome {
        Some(o) => (o.x, o.iterations, o.converged, o.stalled),
        None if m < 2 => (x0, 0, true, false),
        None => return Err(Error::ImmersionViolation { min_speed: 0.0, threshold: 0.0 }),
    };
    let mut curves = vec![c0.clone()];
    for phi in x.chunks_exact(n) {
        curves.push(DiscreteCurve::new(compose(phi).0)?);
    }
    curves.push(c_end);
    let path = PathGrid::new(curves)?;
    let report = report_for(&path, params, iterations, converged, stalled)?;
    Ok((path, report))
}

/// Inserts `factor − 1` linearly interpolated slices into every step.
pub fn refine_path(p: &PathGrid, factor: usize) -> Result<PathGrid> {
    if factor != 2 && factor != 4 {
        return Err(Error::Configuration(format!("refinement factor must be 2 or 4, got {factor}")));
    }
    let mut curves = Vec::with_capacity(p.steps() * factor + 1);
    for w in p.curves.windows(2) {
        curves.push(w[0].clone());
        for k in 1..factor {
            let s = k as f64 / factor as f64;
            curves.push(DiscreteCurve::new(w[0].position().lin_comb(1.0 - s, w[1].position(), s)?)?);
        }
    }
    curves.push(p.end().clone());
    PathGrid::new(curves)
}

/// Options of the inner Newton solve of [`discrete_exp`].
#[derive(Debug, Clone)]
pub struct ShootingOptions {
    pub tol: f64,
    pub max_newton: usize,
    pub oversampling: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_newton: 30, oversampling: DEFAULT_OVERSAMPLING }
    }
}

/// Shoots from `c0` with initial velocity `h0` over `t ∈ [0, 1]` in `steps` steps.
///
/// Each new slice solves the discrete Euler–Lagrange equations of the path energy
/// given the two previous slices; the first step matches the discrete momentum to
/// `∂_h G_{c_0}(h_0, h_0)`.
pub fn discrete_exp(c0: &DiscreteCurve, h0: &TangentField, params: MetricParams, steps: usize) -> Result<PathGrid> {
    discrete_exp_with(c0, h0, params, steps, &ShootingOptions::default())
}

pub fn discrete_exp_with(
    c0: &DiscreteCurve,
    h0: &TangentField,
    params: MetricParams,
    steps: usize,
    opts: &ShootingOptions,
) -> Result<PathGrid> {
    if params.q.value() < 1.0 {
        return Err(Error::Domain(format!("discrete_exp needs q ≥ 1, got {}", params.q.value())));
    }
    if steps < 2 {
        return Err(Error::Configuration(format!("discrete_exp needs at least 2 steps, got {steps}")));
    }
    c0.check_compatible(h0.as_function())?;
    let dt = 1.0 / steps as f64;
    let dim = c0.dim();
    let momentum0 = quadratic_form_with_gradient(c0, h0.as_function(), params, opts.oversampling)?.grad_field;

    // Residual contributions of a step (a, b): left end and right end.
    let step_terms = |a: &SampledFunction, b: &SampledFunction| -> Result<(Vec<f64>, Vec<f64>)> {
        let mid = DiscreteCurve::new(a.lin_comb(0.5, b, 0.5)?)?;
        let vel = b.lin_comb(1.0 / dt, a, -1.0 / dt)?;
        let qf = quadratic_form_with_gradient(&mid, &vel, params, opts.oversampling)?;
        let left = qf.grad_curve.iter().zip(&qf.grad_field).map(|(x, y)| 0.5 * dt * x - y).collect();
        let right = qf.grad_curve.iter().zip(&qf.grad_field).map(|(x, y)| 0.5 * dt * x + y).collect();
        Ok((left, right))
    };

    let mut slices = vec![c0.position().clone()];
    let mut carried = momentum0;
    for step in 0..steps {
        let prev = slices[step].clone();
        let guess = if step == 0 {
            prev.lin_comb(1.0, h0.as_function(), dt)?
        } else {
            prev.lin_comb(2.0, &slices[step - 1], -1.0)?
        };
        let residual = |x: &[f64]| -> Result<Vec<f64>> {
            let next = SampledFunction::new(dim, x.to_vec())?;
            let (left, _) = step_terms(&prev, &next)?;
            Ok(left.iter().zip(&carried).map(|(a, b)| a + b).collect())
        };
        let next = newton(residual, guess.into_vec(), opts)?;
        let next = SampledFunction::new(dim, next)?;
        DiscreteCurve::new(next.clone())?;
        let (_, right) = step_terms(&prev, &next)?;
        carried = right;
        slices.push(next);
    }
    PathGrid::from_positions(slices)
}

/// Newton's method with a central-difference Jacobian.
fn newton(residual: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync, mut x: Vec<f64>, opts: &ShootingOptions) -> Result<Vec<f64>> {
    let size = x.len();
    let mut r = residual(&x)?;
    let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for _ in 0..opts.max_newton {
        let rn = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if rn <= opts.tol {
            return Ok(x);
        }
        let h = 1e-6 * scale;
        let columns = (0..size)
            .into_par_iter()
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let (rp, rm) = (residual(&xp)?, residual(&xm)?);
                Ok(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let jac = DMatrix::from_fn(size, size, |i, k| columns[k][i]);
        let rhs = DVector::from_iterator(size, r.iter().map(|v| -v));
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InnerSolveFailure("singular Jacobian in shooting step".into()))?;
        // Damped update keeping the residual finite.
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + t * d).collect();
            match residual(&trial) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) => {
                    let tn = rt.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    if tn < rn || t < 1e-3 {
                        x = trial;
                        r = rt;
                        break;
                    }
                }
                Err(e @ Error::ImmersionViolation { .. }) if t < 1e-3 => return Err(e),
                _ => {}
            }
            t *= 0.5;
            if t < 1e-4 {
                return Err(Error::InnerSolveFailure("Newton line search failed".into()));
            }
        }
    }
    let rn = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if rn <= opts.tol * 10.0 {
        Ok(x)
    } else {
        Err(Error::InnerSolveFailure(format!("residual {rn:e} after {} Newton steps", opts.max_newton)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{circle, random_curve, random_diffeo, CurveSpec, DiffeoSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn full(q: f64) -> MetricParams {
        MetricParams::full(q).unwrap()
    }

    /// `∫_1^2 sqrt(G_{circle r}(radial unit field))` by Simpson's rule.
    fn radial_distance(q: f64) -> f64 {
        let f = |r: f64| {
            let l = 2.0 * PI * r;
            (l + l.powf(1.0 - 2.0 * q) * (2.0 * PI).powf(2.0 * q)).sqrt()
        };
        let k = 2000;
        let h = 1.0 / k as f64;
        (0..=k)
            .map(|i| {
                let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * f(1.0 + i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0
    }

    #[test]
    fn constant_path_has_zero_energy_and_length() {
        let c = random_curve(1, &CurveSpec::new(32, 2)).unwrap();
        let p = PathGrid::linear(&c, &c, 4).unwrap();
        assert_eq!(path_energy(&p, full(1.0)).unwrap(), 0.0);
        assert_eq!(path_length(&p, full(1.0)).unwrap(), 0.0);
        assert!(energy_gradient(&p, full(1.0)).unwrap().iter().all(|g| g.as_function().sup_norm() == 0.0));
    }

    #[test]
    fn linear_path_between_circles_matches_radial_integral() {
        let (a, b) = (circle(32, 2, 1.0).unwrap(), circle(32, 2, 2.0).unwrap());
        let p = PathGrid::linear(&a, &b, 64).unwrap();
        let len = path_length(&p, full(1.0)).unwrap();
        assert_relative_eq!(len, radial_distance(1.0), max_relative = 1e-3);
        assert!(len * len <= path_energy(&p, full(1.0)).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn energy_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (random_curve(4, &CurveSpec::new(16, 2)).unwrap(), random_curve(5, &CurveSpec::new(16, 2)).unwrap());
        let p = PathGrid::linear(&a, &b, 4).unwrap();
        for &q in &[0.3, 1.0, 1.7] {
            let params = full(q);
            let g = energy_gradient(&p, params).unwrap();
            let dir: Vec<Vec<f64>> = (0..3).map(|_| (0..32).map(|_| rng.gen_range(-0.1..0.1)).collect()).collect();
            let shifted = |t: f64| {
                let mut curves = vec![a.clone()];
                for (c, d) in p.curves()[1..4].iter().zip(&dir) {
                    let pos: Vec<f64> = c.position().as_slice().iter().zip(d).map(|(x, y)| x + t * y).collect();
                    curves.push(DiscreteCurve::new(SampledFunction::new(2, pos).unwrap()).unwrap());
                }
                curves.push(b.clone());
                path_energy(&PathGrid::new(curves).unwrap(), params).unwrap()
            };
            let h = 1e-5;
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let an: f64 = g.iter().zip(&dir).map(|(g, d)| spectral::dot(g.as_function().as_slice(), d)).sum();
            assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-8), "q={q}: {fd} vs {an}");
        }
    }

    #[test]
    fn circles_distance_close_to_radial_oracle() {
        let (a, b) = (circle(16, 2, 1.0).unwrap(), circle(16, 2, 2.0).unwrap());
        let (path, report) = solve_bvp(&a, &b, full(1.0), &SolveOptions::with_steps(16)).unwrap();
        let oracle = radial_distance(1.0);
        assert!((report.distance_upper_bound - oracle).abs() <= 0.02 * oracle, "{report:?} vs {oracle}");
        assert!(report.distance_upper_bound.powi(2) <= report.energy * (1.0 + 1e-12));
        assert_eq!(path.steps(), 16);
    }

    #[test]
    fn identical_endpoints_give_zero() {
        let c = random_curve(6, &CurveSpec::new(16, 2)).unwrap();
        let (_, report) = solve_bvp(&c, &c, full(1.0), &SolveOptions::with_steps(4)).unwrap();
        assert_eq!(report.distance_upper_bound, 0.0);
        assert!(report.converged);
    }

    #[test]
    fn solver_energy_is_monotone_and_minimizer_is_stationary() {
        let (a, b) = (random_curve(7, &CurveSpec::new(16, 2)).unwrap(), random_curve(8, &CurveSpec::new(16, 2)).unwrap());
        let params = full(1.0);
        let opts = SolveOptions { tol: 1e-8, max_iter: 2000, ..SolveOptions::with_steps(8) };
        let (path, report) = solve_bvp(&a, &b, params, &opts).unwrap();
        assert!(report.converged, "{report:?}");
        let linear = path_energy(&PathGrid::linear(&a, &b, 8).unwrap(), params).unwrap();
        assert!(report.energy <= linear);
        let gnorm: f64 = energy_gradient(&path, params)
            .unwrap()
            .iter()
            .map(|g| g.as_function().as_slice().iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        assert!(gnorm <= 1e-6 * (1.0 + report.energy), "{gnorm}");
    }

    #[test]
    fn refinement_keeps_shared_nodes_and_energy_consistent() {
        let (a, b) = (random_curve(9, &CurveSpec::new(16, 2)).unwrap(), random_curve(10, &CurveSpec::new(16, 2)).unwrap());
        let p = PathGrid::linear(&a, &b, 4).unwrap();
        let r = refine_path(&p, 4).unwrap();
        assert_eq!(r.steps(), 16);
        for i in 0..=4 {
            assert_eq!(r.curves()[4 * i].position(), p.curves()[i].position());
        }
        assert!(refine_path(&p, 3).is_err());
    }

    #[test]
    fn reparametrization_family_solve_ends_at_target() {
        let c0 = circle(16, 2, 1.0).unwrap();
        let phi = random_diffeo(11, &DiffeoSpec::new(16, 0.4)).unwrap();
        let opts = SolveOptions { max_iter: 50, ..SolveOptions::with_steps(4) };
        let (path, report) = solve_bvp_reparametrization(&c0, &phi, full(0.8), &opts).unwrap();
        let target = c0.reparametrize(&phi).unwrap();
        assert!(crate::curve::sup_distance(path.end(), &target).unwrap() < 1e-12);
        assert!(report.distance_upper_bound > 0.0);
        let id = DiffeoSample::identity(16).unwrap();
        let (_, zero) = solve_bvp_reparametrization(&c0, &id, full(0.8), &opts).unwrap();
        assert!(zero.distance_upper_bound < 1e-14);
    }

    #[test]
    fn zero_initial_velocity_stays_put() {
        let c = random_curve(12, &CurveSpec::new(16, 2)).unwrap();
        let h = TangentField::new(&c, SampledFunction::zeros(16, 2).unwrap()).unwrap();
        let p = discrete_exp(&c, &h, full(1.0), 4).unwrap();
        for s in p.curves() {
            assert!(crate::curve::sup_distance(s, &c).unwrap() < 1e-12);
        }
    }

    #[test]
    fn radial_shooting_stays_among_circles() {
        let c = circle(16, 2, 1.0).unwrap();
        let h = TangentField::new(&c, c.position().scaled(0.5)).unwrap();
        let p = discrete_exp(&c, &h, full(1.0), 8).unwrap();
        for s in p.curves() {
            let r: Vec<f64> = s.position().points().map(spectral::norm).collect();
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            assert!(r.iter().all(|x| (x - mean).abs() < 1e-6 * mean));
            assert!(s.position().mean().iter().all(|m| m.abs() < 1e-9));
        }
        let e = step_energies(&p, full(1.0)).unwrap();
        let spread = e.iter().fold(0.0f64, |a, v| a.max((v - e[0]).abs())) / e[0];
        assert!(spread < 1e-2, "{e:?}");
    }
}
