//! The flux equation V(t) = V₀(t) − ν ∫₀ᵗ R(t−τ) V(τ) dτ: kernels, forcing,
//! product-integration solvers and residuals.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::flux::{FluxTrajectory, SampledFlux};
use crate::green::quad_semiinfinite;
use crate::par;
use crate::problem::{self, InitialProfile, SourceShape};
use crate::quad::{gauss_legendre10, gauss_legendre10_nodes, integrate, QuadOptions};

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// R(t) = λ
    ConstantLambda { lambda: f64 },
    /// R(t) = −λμ e^{λ²t}
    GrowingExp { lambda: f64, mu: f64 },
    /// R(t) = −λμ e^{−λ²t}
    DecayingExp { lambda: f64, mu: f64 },
    /// R(t) = (2√π t^{3/2})⁻¹ ∫₀^∞ ξ e^{−ξ²/4t} Φ(ξ) dξ by quadrature
    Quadrature { shape: SourceShape },
}

impl Kernel {
    /// Analytic kernel for the built-in shapes, quadrature otherwise.
    pub fn for_shape(shape: &SourceShape) -> Self {
        match *shape {
            SourceShape::LinearX { lambda } => Kernel::ConstantLambda { lambda },
            SourceShape::NegSinh { lambda, mu } => Kernel::GrowingExp { lambda, mu },
            SourceShape::NegSin { lambda, mu } => Kernel::DecayingExp { lambda, mu },
            ref other => Kernel::Quadrature { shape: other.clone() },
        }
    }

    /// (ρ, κ) with R(t) = ρ e^{κt}, for the analytic kinds.
    pub fn exponential_form(&self) -> Option<(f64, f64)> {
        match *self {
            Kernel::ConstantLambda { lambda } => Some((lambda, 0.0)),
            Kernel::GrowingExp { lambda, mu } => Some((-lambda * mu, lambda * lambda)),
            Kernel::DecayingExp { lambda, mu } => Some((-lambda * mu, -lambda * lambda)),
            Kernel::Quadrature { .. } => None,
        }
    }
}

pub fn kernel_eval(k: &Kernel, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("kernel needs t > 0, got {t}"));
    }
    if let Some((rho, kappa)) = k.exponential_form() {
        return Ok(rho * (kappa * t).exp());
    }
    let Kernel::Quadrature { shape } = k else { unreachable!() };
    let opts = QuadOptions::with_tol(1e-14, 1e-12);
    let integral = quad_semiinfinite(
        |xi| xi * (-xi * xi / (4.0 * t)).exp() * shape.eval(xi),
        0.0,
        t,
        shape.growth_rate(),
        &opts,
    )?
    .value;
    Ok(integral / (2.0 * PI.sqrt() * t.powf(1.5)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    /// V₀(t) = c t^exponent
    PowerLaw { c: f64, exponent: f64 },
    /// V₀(t) = (πt)^{-1/2} ∫₀^∞ e^{−ξ²/4t} h′(ξ) dξ by quadrature
    Quadrature { h: InitialProfile },
}

impl Forcing {
    pub fn for_profile(h: &InitialProfile) -> Self {
        match *h {
            InitialProfile::Monomial { eta, m } => Forcing::PowerLaw {
                c: problem::flux_forcing_constant(eta, m),
                exponent: 0.5 * (m - 1.0),
            },
            ref other => Forcing::Quadrature { h: other.clone() },
        }
    }

    /// Limit of V₀ as t → 0⁺, used at the first node.
    pub fn initial_value(&self) -> f64 {
        match *self {
            Forcing::PowerLaw { c, exponent } => {
                if exponent == 0.0 {
                    c
                } else {
                    0.0
                }
            }
            Forcing::Quadrature { ref h } => h.derivative(1, 0.0),
        }
    }

    /// V₀′ as a polynomial in t, when V₀ is one.
    fn derivative_poly(&self) -> Result<Vec<f64>> {
        match *self {
            Forcing::PowerLaw { c, exponent } if exponent >= 0.0 && exponent.fract() == 0.0 => {
                let p = exponent as usize;
                let mut poly = vec![0.0; p.max(1)];
                if p >= 1 {
                    poly[p - 1] = c * p as f64;
                }
                Ok(poly)
            }
            Forcing::PowerLaw { exponent, .. } => domain(format!(
                "resolvent form needs a polynomial forcing (exponent {exponent} is not a non-negative integer)"
            )),
            Forcing::Quadrature { .. } => domain("resolvent form needs a polynomial forcing"),
        }
    }
}

pub fn forcing_eval(f: &Forcing, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("forcing needs t > 0, got {t}"));
    }
    match *f {
        Forcing::PowerLaw { c, exponent } => Ok(if exponent == 0.0 { c } else { c * t.powf(exponent) }),
        Forcing::Quadrature { ref h } => {
            let opts = QuadOptions::with_tol(1e-14, 1e-12);
            let integral = quad_semiinfinite(
                |xi| (-xi * xi / (4.0 * t)).exp() * h.derivative(1, xi),
                0.0,
                t,
                h.growth_rate(),
                &opts,
            )?
            .value;
            Ok(integral / (PI * t).sqrt())
        }
    }
}

/// Per-cell product-integration weights of a kernel on [jh, (j+1)h]:
/// A_j = h⁻¹∫R(s)(s−jh)ds, B_j = h⁻¹∫R(s)((j+1)h−s)ds.
#[derive(Debug, Clone)]
struct ProductWeights {
    a: Vec<f64>,
    b: Vec<f64>,
}

fn product_weights(kernel: &(dyn Fn(f64) -> Result<f64> + Sync), h: f64, n: usize) -> Result<ProductWeights> {
    let cells: Vec<Result<(f64, f64)>> = par::map_range(n, |j| {
        let lo = j as f64 * h;
        let hi = lo + h;
        let mut err = None;
        let mut r = |s: f64| match kernel(s) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let samples: Vec<(f64, f64)> = gauss_legendre10_nodes(lo, hi).map(|(s, w)| (s, w * r(s))).collect();
        if let Some(e) = err {
            return Err(e);
        }
        let a = samples.iter().map(|(s, wr)| wr * (s - lo)).sum::<f64>() / h;
        let b = samples.iter().map(|(s, wr)| wr * (hi - s)).sum::<f64>() / h;
        Ok((a, b))
    });
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for c in cells {
        let (x, y) = c?;
        a.push(x);
        b.push(y);
    }
    Ok(ProductWeights { a, b })
}

/// Solves y_n = g_n − ν Σ (cell integrals of K·y) for piecewise linear y.
fn product_trapezoid(w: &ProductWeights, forcing: &[f64], nu: f64) -> Vec<f64> {
    let n = forcing.len() - 1;
    let mut y = vec![0.0; n + 1];
    y[0] = forcing[0];
    let denom = 1.0 + nu * w.b[0];
    for i in 1..=n {
        // cell k covers [t_k, t_{k+1}] and pairs with kernel cell i−1−k
        let mut conv = 0.0;
        for k in 0..i {
            let j = i - 1 - k;
            conv += y[k] * w.a[j];
            if k + 1 < i {
                conv += y[k + 1] * w.b[j];
            }
        }
        y[i] = (forcing[i] - nu * conv) / denom;
    }
    y
}

fn check_solver_args(nu: f64, t_end: f64, n_steps: usize) -> Result<f64> {
    if !(nu > 0.0) {
        return domain(format!("nu must be positive, got {nu}"));
    }
    if !(t_end > 0.0) {
        return domain(format!("t_end must be positive, got {t_end}"));
    }
    if n_steps < 2 {
        return domain(format!("need at least 2 steps, got {n_steps}"));
    }
    Ok(t_end / n_steps as f64)
}

fn forcing_samples(f: &Forcing, h: f64, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(f.initial_value());
    let rest: Vec<Result<f64>> = par::map_range(n, |i| forcing_eval(f, (i + 1) as f64 * h));
    for v in rest {
        out.push(v?);
    }
    Ok(out)
}

/// Product-trapezoid solution on a uniform grid of `n_steps` cells.
pub fn solve_volterra(k: &Kernel, f: &Forcing, nu: f64, t_end: f64, n_steps: usize) -> Result<FluxTrajectory> {
    let h = check_solver_args(nu, t_end, n_steps)?;
    let w = product_weights(&|s| kernel_eval(k, s.max(f64::MIN_POSITIVE)), h, n_steps)?;
    let g = forcing_samples(f, h, n_steps)?;
    Ok(SampledFlux {
        step: h,
        values: product_trapezoid(&w, &g, nu),
    }
    .into())
}

/// Solves r = 1 − ν R∗r, then forms V = V₀(0) r + V₀′∗r.
pub fn solve_resolvent(k: &Kernel, f: &Forcing, nu: f64, t_end: f64, n_steps: usize) -> Result<FluxTrajectory> {
    if !(nu.is_finite()) {
        return domain("nu must be finite");
    }
    if !(t_end > 0.0) || n_steps < 2 {
        return domain("resolvent needs t_end > 0 and at least 2 steps");
    }
    let dpoly = f.derivative_poly()?;
    let h = t_end / n_steps as f64;
    let w = product_weights(&|s| kernel_eval(k, s.max(f64::MIN_POSITIVE)), h, n_steps)?;
    let r = product_trapezoid(&w, &vec![1.0; n_steps + 1], nu);
    let v0 = f.initial_value();
    let values = if dpoly.iter().all(|c| *c == 0.0) {
        r.iter().map(|ri| v0 * ri).collect()
    } else {
        let dw = product_weights(&|s| Ok(crate::specfun::horner(&dpoly, s)), h, n_steps)?;
        (0..=n_steps)
            .map(|i| {
                let mut conv = 0.0;
                for kk in 0..i {
                    let j = i - 1 - kk;
                    conv += r[kk] * dw.a[j] + r[kk + 1] * dw.b[j];
                }
                v0 * r[i] + conv
            })
            .collect()
    };
    Ok(SampledFlux { step: h, values }.into())
}

/// ∫₀ᵗ R(t−τ) V(τ) dτ: exact for closed trajectories with analytic kernels,
/// cellwise product rule for sampled ones, adaptive quadrature otherwise.
pub fn convolution(v: &FluxTrajectory, k: &Kernel, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    if let (FluxTrajectory::Closed(c), Some((rho, kappa))) = (v, k.exponential_form()) {
        return Ok(c.convolve_exponential(rho, kappa, t));
    }
    let failure = std::cell::RefCell::new(None);
    let integrand = |tau: f64| {
        let s = (t - tau).max(f64::MIN_POSITIVE);
        match kernel_eval(k, s) {
            Ok(r) => r * v.eval(tau),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let value = match v {
        FluxTrajectory::Sampled(s) => {
            let mut acc = 0.0;
            let mut a = 0.0;
            while a < t {
                let b = (a + s.step).min(t);
                acc += gauss_legendre10(&integrand, a, b);
                a = b;
            }
            acc
        }
        FluxTrajectory::Closed(_) => integrate(&integrand, 0.0, t, &QuadOptions::with_tol(1e-13, 1e-11))?.value,
    };
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// max |V(t) − V₀(t) + ν ∫₀ᵗ R(t−τ)V(τ)dτ| over the samples.
pub fn volterra_residual(v: &FluxTrajectory, k: &Kernel, f: &Forcing, nu: f64, t_samples: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in t_samples {
        let v0 = if t > 0.0 { forcing_eval(f, t)? } else { f.initial_value() };
        let r = (v.eval(t) - v0 + nu * convolution(v, k, t)?).abs();
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    Ok(worst)
}

/// Lower bound f(Δ) with ∫₀^Δ R(s) ds ≥ f(Δ), per analytic kernel.
pub fn kernel_lower_bound(k: &Kernel, dt: f64) -> Result<f64> {
    let shape_kernel = match k {
        Kernel::Quadrature { shape } => Kernel::for_shape(shape),
        other => other.clone(),
    };
    match shape_kernel {
        Kernel::ConstantLambda { lambda } => Ok(-lambda * dt),
        Kernel::GrowingExp { lambda, mu } => Ok(-(mu / lambda) * (lambda * lambda * dt).exp_m1()),
        Kernel::DecayingExp { lambda, mu } => Ok((mu / lambda) * (-lambda * lambda * dt).exp_m1()),
        Kernel::Quadrature { .. } => Err(Error::Domain("no lower bound known for this kernel".into())),
    }
}

/// Checks ∫_{t₁}^{t₂} R(t₂−τ) dτ ≥ f(t₂−t₁).
pub fn kernel_bound_check(k: &Kernel, t1: f64, t2: f64) -> Result<bool> {
    if !(t1 >= 0.0) || !(t1 < t2) {
        return domain(format!("kernel bound check needs 0 <= t1 < t2 (t1 = {t1}, t2 = {t2})"));
    }
    let dt = t2 - t1;
    let lhs = match k.exponential_form() {
        Some((rho, kappa)) => rho * crate::specfun::exp_moment(0, kappa, dt)?,
        None => integrate(
            |s| kernel_eval(k, s.max(1e-300)).unwrap_or(f64::NAN),
            0.0,
            dt,
            &QuadOptions::with_tol(1e-12, 1e-10),
        )?
        .value,
    };
    let f = kernel_lower_bound(k, dt)?;
    Ok(lhs >= f - 1e-10 * (1.0 + f.abs()))
}
