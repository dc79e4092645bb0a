//! Heat kernel and Dirichlet Green function of the half-line, semi-infinite
//! quadrature, and the Green-integral identities built on them.

use std::f64::consts::PI;

use serde::Serialize;

use crate::closed_form;
use crate::error::{domain, Error, Result};
use crate::flux::FluxTrajectory;
use crate::problem::{FluxLaw, InitialProfile, ProblemSpec, SourceShape};
use crate::quad::{gauss_legendre10, integrate, QuadOptions, QuadResult};
use crate::specfun::erf;

/// Gaussian half-widths kept on each side of the envelope centre.
pub const TRUNCATION_WIDTHS: f64 = 8.0;

/// K(x,t,ξ,τ) = exp(−(x−ξ)²/4(t−τ)) / (2√(π(t−τ)))
pub fn heat_kernel(x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
    if !(tau < t) {
        return domain(format!("heat kernel needs tau < t (tau = {tau}, t = {t})"));
    }
    Ok(kernel_elapsed(x - xi, t - tau))
}

#[inline]
fn kernel_elapsed(d: f64, s: f64) -> f64 {
    (-d * d / (4.0 * s)).exp() / (2.0 * (PI * s).sqrt())
}

/// G = K(x,·) − K(−x,·), written so that small x keeps full relative accuracy.
#[inline]
pub fn green_elapsed(x: f64, xi: f64, s: f64) -> f64 {
    let d = x - xi;
    (-d * d / (4.0 * s)).exp() * -(-x * xi / s).exp_m1() / (2.0 * (PI * s).sqrt())
}

pub fn green_eval(x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
    if !(tau < t) {
        return domain(format!("Green function needs tau < t (tau = {tau}, t = {t})"));
    }
    Ok(green_elapsed(x, xi, t - tau))
}

/// Truncated support of a Gaussian envelope centred at x with variance 2s,
/// widened for integrands growing like e^{gξ}.
pub fn truncation_window(x: f64, elapsed: f64, growth: f64) -> (f64, f64) {
    let w = TRUNCATION_WIDTHS * 2.0 * elapsed.sqrt();
    let shift = 2.0 * growth.abs() * elapsed;
    ((x - shift - w).max(0.0), x + shift + w)
}

/// ∫₀^∞ f(ξ) dξ for f carrying a Gaussian envelope around x of width 2√elapsed.
pub fn quad_semiinfinite<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    elapsed: f64,
    growth: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !(elapsed > 0.0) {
        return domain(format!("elapsed time must be positive, got {elapsed}"));
    }
    let (lo, hi) = truncation_window(x, elapsed, growth);
    integrate(f, lo, hi, opts)
}

fn u0_options() -> QuadOptions {
    QuadOptions::with_tol(1e-13, 1e-12)
}

/// u₀(x,t) = ∫₀^∞ G(x,t,ξ,0) h(ξ) dξ by quadrature.
pub fn baseline_u0(h: &InitialProfile, x: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(h.eval(x));
    }
    if !(t > 0.0) {
        return domain(format!("baseline needs t >= 0, got {t}"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(quad_semiinfinite(|xi| green_elapsed(x, xi, t) * h.eval(xi), x, t, h.growth_rate(), &u0_options())?.value)
}

/// Baseline for h = (ν/2)x² + ax.
pub fn baseline_u0_quadratic(nu: f64, a: f64, x: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.5 * nu * x * x + a * x;
    }
    let st = t.sqrt();
    (0.5 * nu * x * x + nu * t) * erf(x / (2.0 * st)) + nu / PI.sqrt() * x * st * (-x * x / (4.0 * t)).exp() + a * x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
}

/// ∫₀^∞ G(x,t,ξ,τ) Φ(ξ) dξ by quadrature, for elapsed = t − τ.
pub fn green_source_integral(shape: &SourceShape, x: f64, elapsed: f64, opts: &QuadOptions) -> Result<f64> {
    Ok(quad_semiinfinite(
        |xi| green_elapsed(x, xi, elapsed) * shape.eval(xi),
        x,
        elapsed,
        shape.growth_rate(),
        opts,
    )?
    .value)
}

/// Compares the quadrature of ∫G·Φ against M(t−τ)Φ(x).
pub fn verify_identity_phi(shape: &SourceShape, x: f64, t: f64, tau: f64) -> Result<IdentityCheck> {
    if !(tau < t) {
        return domain(format!("identity needs tau < t (tau = {tau}, t = {t})"));
    }
    let s = t - tau;
    let m = shape
        .green_multiplier(s)
        .ok_or_else(|| Error::Domain(format!("no Green identity for source shape {}", shape.kind_name())))?;
    let lhs = green_source_integral(shape, x, s, &QuadOptions::with_tol(1e-14, 1e-12))?;
    let rhs = m * shape.eval(x);
    Ok(IdentityCheck {
        lhs,
        rhs,
        diff: (lhs - rhs).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssemblyPath {
    /// closed-form inner integrals
    #[default]
    Fast,
    /// raw double quadrature
    Slow,
}

/// ∫₀ᵗ k(t−τ) F(V(τ),τ) dτ, splitting at the sample nodes of a sampled trajectory.
fn time_convolution(
    v: &FluxTrajectory,
    law: &FluxLaw,
    kernel: &dyn Fn(f64) -> Result<f64>,
    t: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    let failure = std::cell::RefCell::new(None);
    let integrand = |tau: f64| match kernel(t - tau) {
        Ok(k) => k * law.eval(v.eval(tau), tau),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
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
        FluxTrajectory::Closed(_) => integrate(&integrand, 0.0, t, opts)?.value,
    };
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// u(x,t) = u₀(x,t) − ∫₀ᵗ (∫₀^∞ G Φ dξ) F(V(τ),τ) dτ for a given flux trajectory.
pub fn assemble_integral_representation(
    spec: &ProblemSpec,
    x: f64,
    t: f64,
    v: &FluxTrajectory,
    path: AssemblyPath,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(spec.h.eval(x));
    }
    let u0 = match path {
        AssemblyPath::Fast => match closed_form::baseline_u0_closed(&spec.h, x, t) {
            Some(u) => u,
            None => baseline_u0(&spec.h, x, t)?,
        },
        AssemblyPath::Slow => baseline_u0(&spec.h, x, t)?,
    };
    if matches!(spec.flux, FluxLaw::Zero) || x == 0.0 {
        return Ok(u0);
    }
    let phi = &spec.phi;
    let opts = QuadOptions::with_tol(1e-13, 1e-11);
    let source = match path {
        AssemblyPath::Fast => {
            let kappa = phi
                .eigen_rate()
                .filter(|_| phi.green_multiplier(0.0).is_some())
                .ok_or_else(|| Error::Domain(format!("no closed-form inner integral for {}", phi.kind_name())))?;
            let conv = match (v, &spec.flux) {
                (FluxTrajectory::Closed(c), FluxLaw::Linear { nu }) => nu * c.weighted_integral(kappa, t),
                _ => time_convolution(v, &spec.flux, &|s| Ok((kappa * s).exp()), t, &opts)?,
            };
            conv * phi.eval(x)
        }
        AssemblyPath::Slow => {
            let inner_opts = QuadOptions::with_tol(1e-14, 1e-12);
            let inner = |s: f64| -> Result<f64> {
                if s <= 0.0 {
                    Ok(phi.eval(x))
                } else {
                    green_source_integral(phi, x, s, &inner_opts)
                }
            };
            time_convolution(v, &spec.flux, &inner, t, &opts)?
        }
    };
    Ok(u0 - source)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_basic_properties() {
        assert_eq!(green_eval(0.0, 1.0, 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(green_eval(1.0, 1.0, 2.0, 0.0).unwrap(), green_eval(2.0, 1.0, 1.0, 0.0).unwrap());
        assert!((heat_kernel(1.0, 1.0, 1.0, 0.0).unwrap() - 0.5 / PI.sqrt()).abs() < 1e-16);
        assert!(green_eval(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(heat_kernel(1.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn gaussian_mass_and_first_moment() {
        let opts = QuadOptions::default();
        let a = quad_semiinfinite(|xi| kernel_elapsed(1.0 - xi, 1.0), 1.0, 1.0, 0.0, &opts).unwrap().value;
        let b = quad_semiinfinite(|xi| kernel_elapsed(-1.0 - xi, 1.0), 1.0, 1.0, 0.0, &opts).unwrap().value;
        assert!((a + b - 1.0).abs() < 1e-10);
        let m = quad_semiinfinite(|xi| green_elapsed(1.0, xi, 1.0) * xi, 1.0, 1.0, 0.0, &opts).unwrap().value;
        assert!((m - 1.0).abs() < 1e-9);
        let z = quad_semiinfinite(|_| 0.0, 1.0, 1.0, 0.0, &opts).unwrap().value;
        assert_eq!(z, 0.0);
    }

    #[test]
    fn identity_examples() {
        let c = verify_identity_phi(&SourceShape::LinearX { lambda: 2.0 }, 1.5, 2.0, 0.5).unwrap();
        assert!(c.diff <= 1e-9, "{c:?}");
        let c = verify_identity_phi(&SourceShape::NegSinh { lambda: 1.0, mu: 1.0 }, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(c.rhs, -(1f64).exp() * (1f64).sinh());
        assert!(c.diff <= 1e-9, "{c:?}");
        let c = verify_identity_phi(&SourceShape::NegSin { lambda: 1.0, mu: 1.0 }, 1.0, 1.0, 0.0).unwrap();
        assert!((c.rhs + (-1f64).exp() * (1f64).sin()).abs() < 1e-16);
        assert!(c.diff <= 1e-9, "{c:?}");
        assert!(verify_identity_phi(&SourceShape::ConstantOne, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn baseline_examples() {
        let lin = InitialProfile::Monomial { eta: 2.5, m: 1.0 };
        for (x, t) in [(0.3, 0.1), (1.0, 2.0), (4.0, 5.0)] {
            assert!((baseline_u0(&lin, x, t).unwrap() - 2.5 * x).abs() < 1e-10);
        }
        let cubic = InitialProfile::Monomial { eta: 1.0, m: 3.0 };
        assert!((baseline_u0(&cubic, 1.0, 1.0).unwrap() - 7.0).abs() < 1e-9);
        let q = InitialProfile::Quadratic { nu: 1.0, a: 0.0 };
        let quad = baseline_u0(&q, 1.0, 1.0).unwrap();
        assert!((quad - baseline_u0_quadratic(1.0, 0.0, 1.0, 1.0)).abs() < 1e-10);
        assert_eq!(baseline_u0(&q, 1.0, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn separable_baseline_decays_for_negative_sigma() {
        for sigma in [-2.0, 0.0, 0.5] {
            let h = InitialProfile::ScaledSeparable { eta: 1.3, sigma, delta: 0.7 };
            for (x, t) in [(0.5, 0.4), (2.0, 1.5)] {
                let q = baseline_u0(&h, x, t).unwrap();
                let exact = h.eval(x) * (sigma * t).exp();
                assert!((q - exact).abs() < 1e-10 * (1.0 + exact.abs()), "{sigma} {q} {exact}");
            }
        }
    }
}
