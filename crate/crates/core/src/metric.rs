//! The reparametrization-invariant metrics
//!
//! ```text
//! G^q_c(h,k) = ∫ ⟨h,k⟩ ds + Ġ^q_c(h,k),
//! Ġ^q_c(h,k) = l_c^{1−2q} ⟨Λ^{2q}(h∘ψ_c^{-1}), k∘ψ_c^{-1}⟩_{L²}
//! ```
//!
//! on sampled curves, plus the embedding bound and the distance lower bounds.
//!
//! The pullback `h∘ψ_c^{-1}` is sampled on a grid `oversampling` times finer than
//! the curve grid by evaluating the trigonometric interpolant of `h` at
//! `ψ_c^{-1}(k/K)`. The homogeneous part never sees the mean of the pullback.
//! At `q = 0` the full metric is the plain `L²(ds)` metric.


use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::{sup_distance, DiscreteCurve, TangentField};
use crate::error::{Error, Result};
use crate::spectral::{
    self, dot, fourier_forward, fourier_inverse, lambda_symbol, SampledFunction, SobolevOrder, TrigInterpolant,
};

/// Default refinement factor of the pullback grid.
pub const DEFAULT_OVERSAMPLING: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricParams {
    pub q: SobolevOrder,
    pub variant: Variant,
}

impl MetricParams {
    pub fn full(q: f64) -> Result<Self> {
        Ok(Self { q: SobolevOrder::new(q)?, variant: Variant::Full })
    }

    pub fn homogeneous(q: f64) -> Result<Self> {
        Ok(Self { q: SobolevOrder::new(q)?, variant: Variant::Homogeneous })
    }
}

fn check_fields(c: &DiscreteCurve, h: &TangentField, k: &TangentField) -> Result<()> {
    c.check_compatible(h.as_function())?;
    c.check_compatible(k.as_function())
}

fn check_oversampling(oversampling: usize) -> Result<()> {
    if oversampling == 0 || !oversampling.is_power_of_two() {
        return Err(Error::Configuration(format!("oversampling must be a power of two, got {oversampling}")));
    }
    Ok(())
}

/// `ψ_c^{-1}(k/K)` for `k = 0..K`.
pub fn pullback_nodes(c: &DiscreteCurve, k_points: usize) -> Vec<f64> {
    let map = c.arclength();
    (0..k_points).map(|k| map.inverse(k as f64 / k_points as f64)).collect()
}

/// `h∘ψ_c^{-1}` sampled on `oversampling · N` nodes.
pub fn pullback(c: &DiscreteCurve, h: &SampledFunction, oversampling: usize) -> Result<SampledFunction> {
    c.check_compatible(h)?;
    check_oversampling(oversampling)?;
    let k_points = oversampling * c.len();
    let interp = TrigInterpolant::new(h);
    let dim = h.dim();
    let mut data = vec![0.0; k_points * dim];
    for (x, out) in pullback_nodes(c, k_points).iter().zip(data.chunks_exact_mut(dim)) {
        interp.eval_into(*x, out);
    }
    SampledFunction::new(dim, data)
}

/// `G⁰_c(h,k) = ∫⟨h,k⟩ ds`, trapezoid rule in `θ`.
pub fn g0(c: &DiscreteCurve, h: &TangentField, k: &TangentField) -> Result<f64> {
    check_fields(c, h, k)?;
    let n = c.len() as f64;
    Ok(h.as_function()
        .points()
        .zip(k.as_function().points())
        .zip(c.speed().as_slice())
        .map(|((a, b), s)| dot(a, b) * s)
        .sum::<f64>()
        / n)
}

/// Homogeneous part `Ġ^q_c(h,k)` with the default pullback resolution.
pub fn gq_dot(c: &DiscreteCurve, h: &TangentField, k: &TangentField, q: SobolevOrder) -> Result<f64> {
    gq_dot_with(c, h, k, q, DEFAULT_OVERSAMPLING)
}

pub fn gq_dot_with(
    c: &DiscreteCurve,
    h: &TangentField,
    k: &TangentField,
    q: SobolevOrder,
    oversampling: usize,
) -> Result<f64> {
    check_fields(c, h, k)?;
    let u = fourier_forward(&pullback(c, h.as_function(), oversampling)?);
    let v = if h == k { u.clone() } else { fourier_forward(&pullback(c, k.as_function(), oversampling)?) };
    let two_q = 2.0 * q.value();
    let inner: f64 = u
        .iter()
        .zip(v.iter())
        .filter(|((n, _), _)| *n != 0)
        .map(|((n, a), (_, b))| lambda_symbol(n, two_q) * a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum::<f64>())
        .sum();
    Ok(c.length().powf(1.0 - two_q) * inner)
}

/// `Ġ^q_c(h,k)` evaluated in its operator form
/// `l_c^{−2q} ∫ ⟨(Λ^{2q}(h∘ψ_c^{-1}))∘ψ_c, k⟩ |c_θ| dθ`,
/// by quadrature in the original parameter on an `oversampling · N` grid.
pub fn gq_dot_operator_form(
    c: &DiscreteCurve,
    h: &TangentField,
    k: &TangentField,
    q: SobolevOrder,
    oversampling: usize,
) -> Result<f64> {
    check_fields(c, h, k)?;
    let u = pullback(c, h.as_function(), oversampling)?;
    let mut coeffs = spectral::fractional_multiplier(&fourier_forward(&u), 2.0 * q.value())?;
    // Drop the mean so that q = 0 matches the seminorm convention.
    coeffs.iter_mut().filter(|(m, _)| *m == 0).for_each(|(_, z)| z.fill(Complex64::new(0.0, 0.0)));
    let dim = c.dim();
    let w_interp = TrigInterpolant::new(&fourier_inverse(&coeffs));
    let k_interp = TrigInterpolant::new(k.as_function());
    let map = c.arclength();
    let k_points = oversampling * c.len();
    let (mut wv, mut kv) = (vec![0.0; dim], vec![0.0; dim]);
    let mut total = 0.0;
    for i in 0..k_points {
        let theta = i as f64 / k_points as f64;
        let (psi, dpsi) = map.eval(theta);
        w_interp.eval_into(psi, &mut wv);
        k_interp.eval_into(theta, &mut kv);
        // |c_θ| = l_c ψ'.
        total += dot(&wv, &kv) * dpsi * map.length();
    }
    Ok(c.length().powf(-2.0 * q.value()) * total / k_points as f64)
}

/// Full metric `G^q_c(h,k) = G⁰_c(h,k) + Ġ^q_c(h,k)` (just `G⁰` at `q = 0`).
pub fn gq(c: &DiscreteCurve, h: &TangentField, k: &TangentField, q: SobolevOrder) -> Result<f64> {
    gq_with(c, h, k, q, DEFAULT_OVERSAMPLING)
}

pub fn gq_with(c: &DiscreteCurve, h: &TangentField, k: &TangentField, q: SobolevOrder, oversampling: usize) -> Result<f64> {
    let base = g0(c, h, k)?;
    if q.value() == 0.0 {
        return Ok(base);
    }
    Ok(base + gq_dot_with(c, h, k, q, oversampling)?)
}

/// `G^q_c(h,k)` or `Ġ^q_c(h,k)` according to `params`.
pub fn inner(c: &DiscreteCurve, h: &TangentField, k: &TangentField, params: MetricParams) -> Result<f64> {
    inner_with(c, h, k, params, DEFAULT_OVERSAMPLING)
}

pub fn inner_with(c: &DiscreteCurve, h: &TangentField, k: &TangentField, params: MetricParams, oversampling: usize) -> Result<f64> {
    match params.variant {
        Variant::Full => gq_with(c, h, k, params.q, oversampling),
        Variant::Homogeneous => gq_dot_with(c, h, k, params.q, oversampling),
    }
}

/// `‖h‖` for the metric selected by `params`.
pub fn norm(c: &DiscreteCurve, h: &TangentField, params: MetricParams) -> Result<f64> {
    Ok(inner(c, h, h, params)?.max(0.0).sqrt())
}

/// `sqrt((1/ℓ)(‖h‖²_{G⁰_c} + ℓ^{2q} ‖h‖²_{Ġ^q_c}))` for `ℓ ∈ (0, l_c]`, `q > 1/2`.
///
/// Up to a constant `C(q, d)` this bounds `‖h‖_∞`.
pub fn embedding_bound(c: &DiscreteCurve, h: &TangentField, q: SobolevOrder, ell: f64) -> Result<f64> {
    if q.value() <= 0.5 {
        return Err(Error::Domain(format!("embedding bound needs q > 1/2, got {}", q.value())));
    }
    if !(ell > 0.0 && ell <= c.length()) {
        return Err(Error::Domain(format!("ℓ = {ell} outside (0, l_c = {}]", c.length())));
    }
    let l2 = g0(c, h, h)?;
    let hom = gq_dot(c, h, h, q)?;
    Ok(((l2 + ell.powf(2.0 * q.value()) * hom) / ell).sqrt())
}

/// `‖q(c_0) − q(c_1)‖_{L²}` for the square-root velocity transform `q`; a lower bound on
/// the `G^q` distance when `q ≥ 1`.
pub fn srv_lower_bound(c0: &DiscreteCurve, c1: &DiscreteCurve) -> Result<f64> {
    c0.check_compatible(c1.position())?;
    Ok(c0.srv_transform().lin_comb(1.0, &c1.srv_transform(), -1.0)?.l2_norm())
}

/// `min{‖c_0 − c_1‖_∞, diam_max} · min{diam_max^{1/2}, 1}`: a lower bound on the `G^q`
/// distance (`q > 1/2`) up to a universal constant that is not estimated here.
pub fn distance_lower_bound(c0: &DiscreteCurve, c1: &DiscreteCurve) -> Result<f64> {
    c0.check_compatible(c1.position())?;
    let sup = sup_distance(c0, c1)?;
    let diam = c0.diameter().max(c1.diameter());
    Ok(sup.min(diam) * diam.sqrt().min(1.0))
}

/// Value of `G^q_c(h,h)` together with its gradients with respect to the curve samples
/// and the field samples (row-major, like [`SampledFunction`]).
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub value: f64,
    pub grad_curve: Vec<f64>,
    pub grad_field: Vec<f64>,
}

/// `G^q_c(h,h)` (or `Ġ^q_c(h,h)`) and its exact derivatives with respect to the
/// samples of `c` and `h`.
///
/// The curve enters through the speed, the length and the points `ψ_c^{-1}(k/K)`;
/// the latter are differentiated implicitly through `ψ_c(x_k) = k/K`.
pub fn quadratic_form_with_gradient(
    c: &DiscreteCurve,
    h: &SampledFunction,
    params: MetricParams,
    oversampling: usize,
) -> Result<QuadraticForm> {
    c.check_compatible(h)?;
    check_oversampling(oversampling)?;
    let (n, dim) = (c.len(), c.dim());
    let k_points = oversampling * n;
    let q = params.q.value();
    let l = c.length();
    let speed = c.speed().as_slice();
    let full = params.variant == Variant::Full;

    let mut value = 0.0;
    let mut grad_field = vec![0.0; n * dim];
    // dValue/ds_j
    let mut sigma = vec![0.0; n];

    if full {
        for (j, p) in h.points().enumerate() {
            let hh = dot(p, p);
            value += hh * speed[j] / n as f64;
            sigma[j] += hh / n as f64;
            for (g, x) in grad_field[j * dim..(j + 1) * dim].iter_mut().zip(p) {
                *g += 2.0 * x * speed[j] / n as f64;
            }
        }
    }

    if !(full && q == 0.0) {
        let xs = pullback_nodes(c, k_points);
        let interp = TrigInterpolant::new(h);
        let speed_interp = c.arclength().speed_interpolant();
        let mut u = vec![0.0; k_points * dim];
        let mut du = vec![0.0; k_points * dim];
        let mut s_at = vec![0.0; k_points];
        for (i, x) in xs.iter().enumerate() {
            interp.eval_with_derivative(*x, &mut u[i * dim..(i + 1) * dim], &mut du[i * dim..(i + 1) * dim]);
            let mut s = [0.0];
            speed_interp.eval_into(*x, &mut s);
            s_at[i] = s[0];
        }
        let u_fn = SampledFunction::new(dim, u)?;
        let mut coeffs = fourier_forward(&u_fn);
        let two_q = 2.0 * q;
        let energy = coeffs.weighted_energy(|m| if m == 0 { 0.0 } else { lambda_symbol(m, two_q) });
        let scale = l.powf(1.0 - two_q);
        value += scale * energy;

        // g_k = dValue/du_k = scale (2/K) (W u)_k.
        for (m, chunk) in coeffs.iter_mut() {
            let w = if m == 0 { 0.0 } else { lambda_symbol(m, two_q) };
            chunk.iter_mut().for_each(|z| *z *= w);
        }
        let wu = fourier_inverse(&coeffs);
        let g: Vec<f64> = wu.as_slice().iter().map(|x| scale * 2.0 / k_points as f64 * x).collect();

        let adj = spectral::interpolation_adjoint(n, dim, &xs, &g);
        grad_field.iter_mut().zip(&adj).for_each(|(a, b)| *a += b);

        // Through x_k: dx_k = −(δS(x_k) − τ_k δl)/s(x_k).
        let beta: Vec<f64> = (0..k_points)
            .map(|i| -dot(&g[i * dim..(i + 1) * dim], &du[i * dim..(i + 1) * dim]) / s_at[i])
            .collect();
        let anti = spectral::antiderivative_adjoint(n, &xs, &beta);
        let tau_moment: f64 = beta.iter().enumerate().map(|(i, b)| b * i as f64 / k_points as f64).sum();
        let through_length = (1.0 - two_q) * l.powf(-two_q) * energy;
        for (j, s) in sigma.iter_mut().enumerate() {
            *s += anti[j] + (through_length - tau_moment) / n as f64;
        }
    }

    // s_j = |v_j| with v = D c, and Dᵀ = −D.
    let velocity = c.velocity().as_slice();
    let mut weighted = vec![0.0; n * dim];
    for j in 0..n {
        for k in 0..dim {
            weighted[j * dim + k] = sigma[j] * velocity[j * dim + k] / speed[j];
        }
    }
    let grad_curve = spectral::derivative(&SampledFunction::new(dim, weighted)?).scaled(-1.0).into_vec();
    Ok(QuadraticForm { value, grad_curve, grad_field })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::curve::{circle, random_curve, random_diffeo, CurveSpec, DiffeoSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TWO_PI: f64 = 2.0 * PI;

    fn order(q: f64) -> SobolevOrder {
        SobolevOrder::new(q).unwrap()
    }

    fn field(c: &DiscreteCurve, f: impl Fn(f64, &mut [f64])) -> TangentField {
        TangentField::new(c, SampledFunction::from_fn(c.len(), c.dim(), f).unwrap()).unwrap()
    }

    fn random_field(c: &DiscreteCurve, seed: u64, modes: usize) -> TangentField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef: Vec<f64> = (0..(2 * modes + 1) * c.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dim = c.dim();
        field(c, |t, o| {
            for (k, x) in o.iter_mut().enumerate() {
                *x = coef[k];
                for m in 1..=modes {
                    let (s, cs) = (TWO_PI * m as f64 * t).sin_cos();
                    let w = 1.0 / (m * m) as f64;
                    *x += w * (coef[(2 * m - 1) * dim + k] * cs + coef[2 * m * dim + k] * s);
                }
            }
        })
    }

    #[test]
    fn g0_examples() {
        let c = circle(64, 2, 1.0).unwrap();
        let v = field(&c, |_, o| o.copy_from_slice(&[2.0, -1.0]));
        assert_relative_eq!(g0(&c, &v, &v).unwrap(), TWO_PI * 5.0, max_relative = 1e-12);
        let r = random_curve(1, &CurveSpec::new(64, 2)).unwrap();
        let (h, k) = (random_field(&r, 2, 4), random_field(&r, 3, 4));
        assert_eq!(g0(&r, &h, &k).unwrap(), g0(&r, &k, &h).unwrap());
    }

    #[test]
    fn g0_is_reparametrization_invariant() {
        let c = random_curve(4, &CurveSpec { max_mode: 4, ..CurveSpec::new(256, 2) }).unwrap();
        let h = random_field(&c, 5, 4);
        let phi = random_diffeo(6, &DiffeoSpec::new(256, 0.5)).unwrap();
        let cp = c.reparametrize(&phi).unwrap();
        let hp = TangentField::new(&cp, crate::curve::compose(h.as_function(), &phi).unwrap()).unwrap();
        assert_relative_eq!(g0(&cp, &hp, &hp).unwrap(), g0(&c, &h, &h).unwrap(), max_relative = 1e-8);
    }

    #[test]
    fn constants_are_invisible_to_homogeneous_part() {
        let c = random_curve(8, &CurveSpec::new(64, 2)).unwrap();
        let v = field(&c, |_, o| o.copy_from_slice(&[0.3, 4.0]));
        assert!(gq_dot(&c, &v, &v, order(0.7)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn radial_field_on_circle_matches_single_mode_value() {
        for &rho in &[0.5, 1.0, 3.0] {
            let c = circle(64, 2, rho).unwrap();
            let h = field(&c, |t, o| {
                o[0] = -(TWO_PI * t).cos();
                o[1] = -(TWO_PI * t).sin();
            });
            for &q in &[0.0, 0.4, 1.0, 1.7] {
                let l = TWO_PI * rho;
                let expected = l.powf(1.0 - 2.0 * q) * TWO_PI.powf(2.0 * q);
                assert_relative_eq!(gq_dot(&c, &h, &h, order(q)).unwrap(), expected, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn pullback_resolution_doubling_agrees() {
        let c = random_curve(10, &CurveSpec::new(64, 2)).unwrap();
        let h = random_field(&c, 11, 6);
        for &q in &[0.3, 1.0, 2.0] {
            let a = gq_dot_with(&c, &h, &h, order(q), 4).unwrap();
            let b = gq_dot_with(&c, &h, &h, order(q), 8).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn full_metric_at_zero_order_is_g0() {
        let c = random_curve(12, &CurveSpec::new(32, 2)).unwrap();
        let h = random_field(&c, 13, 3);
        assert_eq!(gq(&c, &h, &h, order(0.0)).unwrap(), g0(&c, &h, &h).unwrap());
    }

    #[test]
    fn operator_form_matches_pullback_form() {
        let c = random_curve(14, &CurveSpec::new(64, 2)).unwrap();
        let (h, k) = (random_field(&c, 15, 5), random_field(&c, 16, 5));
        for &q in &[0.25, 0.8, 1.5, 2.5] {
            let a = gq_dot(&c, &h, &k, order(q)).unwrap();
            let b = gq_dot_operator_form(&c, &h, &k, order(q), 4).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn homogeneous_scaling() {
        let c = random_curve(17, &CurveSpec::new(64, 2)).unwrap();
        let h = random_field(&c, 18, 4);
        let big = c.scaled(2.5).unwrap();
        let hb = TangentField::new(&big, h.as_function().clone()).unwrap();
        for &q in &[0.3, 1.0, 1.8] {
            let a = gq_dot(&big, &hb, &hb, order(q)).unwrap();
            let b = 2.5f64.powf(1.0 - 2.0 * q) * gq_dot(&c, &h, &h, order(q)).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn embedding_bound_domain_and_constant_field() {
        let c = circle(64, 2, 1.0).unwrap();
        let v = field(&c, |_, o| o.copy_from_slice(&[0.6, 0.8]));
        let b = embedding_bound(&c, &v, order(0.75), c.length()).unwrap();
        assert_relative_eq!(b, 1.0, max_relative = 1e-12);
        assert!(embedding_bound(&c, &v, order(0.75), 0.0).is_err());
        assert!(embedding_bound(&c, &v, order(0.75), 7.0).is_err());
        assert!(embedding_bound(&c, &v, order(0.5), 1.0).is_err());
    }

    #[test]
    fn srv_bound_examples() {
        let c = random_curve(19, &CurveSpec::new(64, 2)).unwrap();
        assert_eq!(srv_lower_bound(&c, &c).unwrap(), 0.0);
        let moved = c.translated(&[3.0, -1.0]).unwrap();
        assert!(srv_lower_bound(&c, &moved).unwrap() < 1e-12);
        let (a, b) = (circle(64, 2, 1.0).unwrap(), circle(64, 2, 2.0).unwrap());
        let expected = (TWO_PI * (3.0 - 2.0 * 2f64.sqrt())).sqrt();
        assert_relative_eq!(srv_lower_bound(&a, &b).unwrap(), expected, max_relative = 1e-10);
    }

    #[test]
    fn distance_bound_examples() {
        let c = circle(64, 2, 1.0).unwrap();
        assert_eq!(distance_lower_bound(&c, &c).unwrap(), 0.0);
        let moved = c.translated(&[3.0, 0.0]).unwrap();
        assert_relative_eq!(distance_lower_bound(&c, &moved).unwrap(), 2.0, max_relative = 1e-12);
        let r = random_curve(20, &CurveSpec::new(64, 2)).unwrap();
        assert_eq!(distance_lower_bound(&c, &r).unwrap(), distance_lower_bound(&r, &c).unwrap());
    }

    #[test]
    fn quadratic_form_value_matches_metric() {
        let c = random_curve(21, &CurveSpec::new(32, 2)).unwrap();
        let h = random_field(&c, 22, 4);
        for &q in &[0.0, 0.3, 1.0, 2.0] {
            let qf = quadratic_form_with_gradient(&c, h.as_function(), MetricParams::full(q).unwrap(), 4).unwrap();
            assert_relative_eq!(qf.value, gq(&c, &h, &h, order(q)).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn quadratic_form_gradient_matches_finite_differences() {
        let c = random_curve(23, &CurveSpec::new(16, 2)).unwrap();
        let h = random_field(&c, 24, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for &q in &[0.0, 0.3, 0.75, 1.0, 2.0] {
            for variant in [Variant::Full, Variant::Homogeneous] {
                let params = MetricParams { q: order(q), variant };
                let qf = quadratic_form_with_gradient(&c, h.as_function(), params, 4).unwrap();
                let dir_c: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let dir_h: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let eval = |t: f64| -> f64 {
                    let pos: Vec<f64> = c.position().as_slice().iter().zip(&dir_c).map(|(x, d)| x + t * d).collect();
                    let field: Vec<f64> = h.as_function().as_slice().iter().zip(&dir_h).map(|(x, d)| x + t * d).collect();
                    let cc = DiscreteCurve::new(SampledFunction::new(2, pos).unwrap()).unwrap();
                    quadratic_form_with_gradient(&cc, &SampledFunction::new(2, field).unwrap(), params, 4)
                        .unwrap()
                        .value
                };
                let step = 1e-5;
                let fd = (eval(step) - eval(-step)) / (2.0 * step);
                let analytic: f64 = qf.grad_curve.iter().zip(&dir_c).map(|(g, d)| g * d).sum::<f64>()
                    + qf.grad_field.iter().zip(&dir_h).map(|(g, d)| g * d).sum::<f64>();
                assert!(
                    (fd - analytic).abs() <= 1e-6 * (1.0 + analytic.abs()),
                    "q={q} {variant:?}: fd {fd} vs analytic {analytic}"
                );
            }
        }
    }
}
