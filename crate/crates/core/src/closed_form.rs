//! Exact solution fields: stationary, separated-variables and
//! integral-representation families, plus their companion-problem derivatives.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::{ClosedFlux, ExpTerm, FluxTrajectory, MomentForm};
use crate::problem::{
    self, antiderivative_spec, separable_x, FluxLaw, InitialProfile, ProblemSpec, SourceShape, TimeFunction, Variant,
};
use crate::quad::{integrate, QuadOptions};
use crate::specfun::{factorial, gamma_half, HalfInteger, MomentExpansion};
use crate::volterra::{self, Forcing, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Stationary,
    Diffusion,
    Separated,
    IntegralRepPhi1,
    IntegralRepPhi2,
    IntegralRepPhi3,
    TildeConstant,
    TildeDerivative,
}

/// u₀ = Σ a_k t^k x^{m−2k} for h = ηx^m with odd m.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBaseline {
    m: u32,
    coeffs: Vec<f64>,
}

impl MonomialBaseline {
    pub fn new(eta: f64, m: u32) -> Result<Self> {
        if m % 2 == 0 {
            return Err(Error::Domain(format!("polynomial baseline needs odd m, got {m}")));
        }
        let p = (m - 1) / 2;
        let coeffs = (0..=p)
            .map(|k| {
                let g = gamma_half(HalfInteger::from_twice(2 * k + 1).expect("positive"));
                eta / PI.sqrt() * binomial(m, 2 * k) * g * 4f64.powi(k as i32)
            })
            .collect();
        Ok(Self { m, coeffs })
    }

    /// ∂ₓ^order ∂ₜ^dt u₀ with dt ∈ {0, 1}.
    pub fn derivative(&self, order: u32, dt: u32, x: f64, t: f64) -> f64 {
        let mut s = 0.0;
        for (k, a) in self.coeffs.iter().enumerate() {
            let k = k as u32;
            if k < dt {
                continue;
            }
            let power = self.m - 2 * k;
            if order > power {
                continue;
            }
            let tfac = if dt == 1 { k as f64 * t.powi(k as i32 - 1) } else { t.powi(k as i32) };
            s += a * tfac * falling(power, order) * x.powi((power - order) as i32);
        }
        s
    }

    /// u₀(x,·) as a polynomial in t.
    pub fn time_poly(&self, x: f64) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * x.powi((self.m - 2 * k as u32) as i32))
            .collect()
    }

    /// ∂ₓu₀(0,t) as coefficients in t; only the linear-in-x term survives.
    pub fn flux_poly(&self) -> Vec<f64> {
        let top = (self.m as usize - 1) / 2;
        let mut p = vec![0.0; top + 1];
        p[top] = self.coeffs[top];
        p
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn falling(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64)
}

/// Polynomial u₀ for odd monomial profiles.
pub fn baseline_u0_polynomial(h: &InitialProfile, x: f64, t: f64) -> Result<f64> {
    match *h {
        InitialProfile::Monomial { eta, m } => {
            let odd = h
                .odd_exponent()
                .ok_or_else(|| Error::Domain(format!("polynomial baseline needs odd integer m, got {m}")))?;
            Ok(MonomialBaseline::new(eta, odd)?.derivative(0, 0, x, t))
        }
        _ => Err(Error::Domain("polynomial baseline needs a monomial profile".into())),
    }
}

/// Baseline in closed form where one is known.
pub fn baseline_u0_closed(h: &InitialProfile, x: f64, t: f64) -> Option<f64> {
    match *h {
        InitialProfile::Monomial { .. } => baseline_u0_polynomial(h, x, t).ok(),
        InitialProfile::Quadratic { nu, a } => Some(crate::green::baseline_u0_quadratic(nu, a, x, t)),
        InitialProfile::ScaledSeparable { sigma, .. } => Some(h.eval(x) * (sigma * t).exp()),
        _ => None,
    }
}

/// Time factor T(t) of a separated solution, solving T′ = σT − λ_s F(δT, t), T(0) = η.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedComponents {
    pub sigma: f64,
    pub delta: f64,
    pub scale: f64,
    pub eta: f64,
    pub law: FluxLaw,
}

impl SeparatedComponents {
    pub fn x(&self, order: u32, x: f64) -> f64 {
        separable_x(self.sigma, self.delta, x, order)
    }

    pub fn time(&self, t: f64) -> f64 {
        let (sigma, delta, ls, eta) = (self.sigma, self.delta, self.scale, self.eta);
        match &self.law {
            FluxLaw::Linear { nu } => eta * ((sigma - ls * nu * delta) * t).exp(),
            FluxLaw::Zero => eta * (sigma * t).exp(),
            FluxLaw::Constant { nu } => {
                // T′ = σT − λ_s ν
                eta * (sigma * t).exp() - ls * nu * (sigma * t).exp() * crate::specfun::exp_moment(0, -sigma, t).unwrap_or(0.0)
            }
            FluxLaw::Affine { f1, f2 } => {
                let g2 = |tau: f64| sigma * tau - ls * delta * f2.integral(tau);
                let forced = match constant_value(f2) {
                    Some(c2) => f1.weighted_integral(-(sigma - ls * delta * c2), t),
                    None => integrate(|tau| f1.eval(tau) * (-g2(tau)).exp(), 0.0, t, &QuadOptions::tight())
                        .map(|r| r.value)
                        .unwrap_or(f64::NAN),
                };
                (g2(t)).exp() * (eta - ls * forced)
            }
            FluxLaw::PowerLaw { n, f } => {
                let n = *n;
                let base = eta.powf(1.0 - n) + ls * delta.powf(n) * (n - 1.0) * f.weighted_integral(sigma * (n - 1.0), t);
                let g = if n == 0.0 {
                    base
                } else if base <= 0.0 {
                    0.0
                } else {
                    base.powf(1.0 / (1.0 - n))
                };
                g * (sigma * t).exp()
            }
        }
    }

    pub fn time_derivative(&self, t: f64) -> f64 {
        let tv = self.time(t);
        let coupling = self.delta * tv;
        if let FluxLaw::PowerLaw { n, .. } = self.law {
            if tv == 0.0 && n != 0.0 {
                return 0.0;
            }
        }
        self.sigma * tv - self.scale * self.law.eval(coupling, t)
    }

    /// Exponential rate of T for the linear law.
    pub fn linear_rate(&self) -> Option<f64> {
        self.law.linear_nu().map(|nu| self.sigma - self.scale * nu * self.delta)
    }
}

fn constant_value(f: &TimeFunction) -> Option<f64> {
    match f {
        TimeFunction::Polynomial { coeffs } if coeffs.len() <= 1 => Some(coeffs.first().copied().unwrap_or(0.0)),
        TimeFunction::Exponential { amplitude, rate } if *rate == 0.0 => Some(*amplitude),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralRep {
    pub baseline: MonomialBaseline,
    pub phi: SourceShape,
    pub nu: f64,
    pub kappa: f64,
    pub flux: ClosedFlux,
}

impl IntegralRep {
    /// e^{κt}∫₀ᵗ V(τ)e^{−κτ}dτ
    fn weighted(&self, t: f64) -> f64 {
        self.flux.weighted_integral(self.kappa, t)
    }

    /// The weighted flux integral as an exponential polynomial in t.
    fn weighted_expansion(&self) -> ClosedFlux {
        let kappa = self.kappa;
        let mut poly: Vec<f64> = Vec::new();
        let mut exps: Vec<ExpTerm> = Vec::new();
        let add = |poly: &mut Vec<f64>, k: usize, v: f64| {
            if poly.len() <= k {
                poly.resize(k + 1, 0.0);
            }
            poly[k] += v;
        };
        for (k, c) in self.flux.poly.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            if kappa == 0.0 {
                add(&mut poly, k + 1, c / (k as f64 + 1.0));
            } else {
                let e = MomentExpansion::new(k as u32, -kappa).expect("nonzero rate");
                for (j, pj) in e.poly.iter().enumerate() {
                    add(&mut poly, j, c * pj);
                }
                exps.push(ExpTerm {
                    amplitude: -c * e.constant,
                    rate: kappa,
                });
            }
        }
        for e in &self.flux.exps {
            let rel = e.rate - kappa;
            if rel == 0.0 {
                // would need t·e^{κt}; cannot occur since the flux rate differs from κ by νρ ≠ 0
                exps.push(ExpTerm {
                    amplitude: f64::NAN,
                    rate: kappa,
                });
            } else {
                exps.push(ExpTerm {
                    amplitude: e.amplitude / rel,
                    rate: e.rate,
                });
                exps.push(ExpTerm {
                    amplitude: -e.amplitude / rel,
                    rate: kappa,
                });
            }
        }
        ClosedFlux::new(poly, exps)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Stationary(InitialProfile),
    Diffusion(MonomialBaseline),
    Separated { comps: SeparatedComponents, shift: u32 },
    Integral(IntegralRep),
    Derivative(Box<SolutionField>),
    Constant(f64),
}

/// Exact solution u(x,t) with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    spec: ProblemSpec,
    provenance: Provenance,
    repr: Repr,
}

impl SolutionField {
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn u(&self, x: f64, t: f64) -> f64 {
        self.dx(0, x, t)
    }

    /// ∂ₓ^order u
    pub fn dx(&self, order: u32, x: f64, t: f64) -> f64 {
        match &self.repr {
            Repr::Stationary(h) => h.derivative(order, x),
            Repr::Diffusion(b) => b.derivative(order, 0, x, t),
            Repr::Constant(k) => {
                if order == 0 {
                    *k
                } else {
                    0.0
                }
            }
            Repr::Separated { comps, shift } => comps.x(order + shift, x) * comps.time(t),
            Repr::Integral(ir) => {
                ir.baseline.derivative(order, 0, x, t) - ir.nu * ir.phi.derivative(order, x) * ir.weighted(t)
            }
            Repr::Derivative(inner) => inner.dx(order + 1, x, t),
        }
    }

    /// ∂ₜ∂ₓ^order u
    pub fn dxt(&self, order: u32, x: f64, t: f64) -> f64 {
        match &self.repr {
            Repr::Stationary(_) | Repr::Constant(_) => 0.0,
            Repr::Diffusion(b) => b.derivative(order, 1, x, t),
            Repr::Separated { comps, shift } => comps.x(order + shift, x) * comps.time_derivative(t),
            Repr::Integral(ir) => {
                ir.baseline.derivative(order, 1, x, t)
                    - ir.nu * ir.phi.derivative(order, x) * (ir.flux.eval(t) + ir.kappa * ir.weighted(t))
            }
            Repr::Derivative(inner) => inner.dxt(order + 1, x, t),
        }
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        self.dxt(0, x, t)
    }

    /// Coupling value fed to F: u_x(0,t) for problem P, v(0,t) for the companion problem.
    pub fn flux(&self, t: f64) -> f64 {
        match self.spec.variant {
            Variant::P => match &self.repr {
                Repr::Integral(ir) => ir.flux.eval(t),
                _ => self.dx(1, 0.0, t),
            },
            Variant::PTilde => self.dx(0, 0.0, t),
        }
    }

    pub fn flux_trajectory(&self) -> Option<FluxTrajectory> {
        match &self.repr {
            Repr::Integral(ir) => Some(ir.flux.clone().into()),
            Repr::Derivative(inner) => inner.flux_trajectory(),
            _ => self.time_expansion(0.0).map(|_| {
                // flux of stationary and linear separated fields is itself an exponential polynomial
                match &self.repr {
                    Repr::Stationary(h) => ClosedFlux::new(vec![h.derivative(1, 0.0)], vec![]).into(),
                    Repr::Constant(k) => ClosedFlux::new(vec![*k], vec![]).into(),
                    Repr::Diffusion(b) => ClosedFlux::new(b.flux_poly(), vec![]).into(),
                    Repr::Separated { comps, shift } => {
                        let rate = comps.linear_rate().unwrap_or(f64::NAN);
                        let lead = comps.x(1 - shift.min(&1), 0.0);
                        ClosedFlux::exponential(lead * comps.eta, rate).into()
                    }
                    _ => unreachable!(),
                }
            }),
        }
    }

    /// Analytic residual u_t − u_xx + Φ(x)F(V(t),t).
    pub fn pde_residual(&self, x: f64, t: f64) -> f64 {
        self.dt(x, t) - self.dx(2, x, t) + self.spec.source(x, self.flux(t), t)
    }

    /// u(x,·) as Σ pₖtᵏ + Σ Aⱼe^{rⱼt}, for the families where it is finite.
    pub fn time_expansion(&self, x: f64) -> Option<ClosedFlux> {
        let parts = self.time_expansion_parts(x)?;
        let mut poly: Vec<f64> = Vec::new();
        let mut exps = Vec::new();
        for part in parts {
            if poly.len() < part.poly.len() {
                poly.resize(part.poly.len(), 0.0);
            }
            for (k, c) in part.poly.iter().enumerate() {
                poly[k] += c;
            }
            exps.extend(part.exps);
        }
        Some(ClosedFlux::new(poly, exps))
    }

    /// Unsummed pieces of [`Self::time_expansion`]; their sum is u(x,·).
    pub fn time_expansion_parts(&self, x: f64) -> Option<Vec<ClosedFlux>> {
        match &self.repr {
            Repr::Stationary(h) => Some(vec![ClosedFlux::new(vec![h.eval(x)], vec![])]),
            Repr::Constant(k) => Some(vec![ClosedFlux::new(vec![*k], vec![])]),
            Repr::Diffusion(b) => Some(vec![ClosedFlux::new(b.time_poly(x), vec![])]),
            Repr::Separated { comps, shift } => {
                let rate = comps.linear_rate()?;
                Some(vec![ClosedFlux::exponential(comps.x(*shift, x) * comps.eta, rate)])
            }
            Repr::Integral(ir) => {
                let w = ir.weighted_expansion();
                let scale = -ir.nu * ir.phi.eval(x);
                let correction = ClosedFlux::new(
                    w.poly.iter().map(|c| scale * c).collect(),
                    w.exps
                        .iter()
                        .map(|e| ExpTerm {
                            amplitude: scale * e.amplitude,
                            rate: e.rate,
                        })
                        .collect(),
                );
                Some(vec![ClosedFlux::new(ir.baseline.time_poly(x), vec![]), correction])
            }
            Repr::Derivative(_) => None,
        }
    }

    /// Baseline u₀(x,·) as an exponential polynomial, when closed.
    pub fn baseline_expansion(&self, x: f64) -> Option<ClosedFlux> {
        match self.spec.h {
            InitialProfile::Monomial { eta, .. } => {
                let m = self.spec.h.odd_exponent()?;
                Some(ClosedFlux::new(MonomialBaseline::new(eta, m).ok()?.time_poly(x), vec![]))
            }
            InitialProfile::ScaledSeparable { sigma, .. } => {
                Some(ClosedFlux::exponential(self.spec.h.eval(x), sigma))
            }
            _ => None,
        }
    }
}

/// Solutions independent of t: F ≡ 0 with h = ηx, or F ≡ ν with h″ = νΦ and h(0) = 0.
pub fn stationary_solution(spec: &ProblemSpec) -> Result<SolutionField> {
    if spec.variant != Variant::P {
        return Err(Error::Construction("stationary family is defined for problem P".into()));
    }
    let ok = match (&spec.flux, &spec.h) {
        (FluxLaw::Zero, InitialProfile::Monomial { m, .. }) => *m == 1.0,
        (FluxLaw::Zero, InitialProfile::Quadratic { nu, .. }) => *nu == 0.0,
        (FluxLaw::Constant { nu }, h) => {
            h.eval(0.0).abs() <= 1e-14
                && [0.3, 1.0, 2.7, 6.1].iter().all(|&x| {
                    let want = nu * spec.phi.eval(x);
                    (h.derivative(2, x) - want).abs() <= 1e-12 * (1.0 + want.abs())
                })
        }
        _ => false,
    };
    if !ok {
        return Err(Error::Construction(
            "stationary solutions need F = 0 with h = eta x, or F = nu with h'' = nu Phi and h(0) = 0".into(),
        ));
    }
    Ok(SolutionField {
        spec: spec.clone(),
        provenance: Provenance::Stationary,
        repr: Repr::Stationary(spec.h.clone()),
    })
}

/// Pure diffusion: F ≡ 0 with h = ηx^m, m odd, so u is the heat polynomial.
pub fn diffusion_solution(spec: &ProblemSpec) -> Result<SolutionField> {
    let (InitialProfile::Monomial { eta, .. }, FluxLaw::Zero, Variant::P) = (&spec.h, &spec.flux, spec.variant) else {
        return Err(Error::Construction("pure diffusion needs F = 0 and monomial data in problem P".into()));
    };
    let m = spec
        .h
        .odd_exponent()
        .ok_or_else(|| Error::Construction("pure diffusion needs an odd exponent".into()))?;
    Ok(SolutionField {
        spec: spec.clone(),
        provenance: Provenance::Diffusion,
        repr: Repr::Diffusion(MonomialBaseline::new(*eta, m)?),
    })
}

fn separated_components(spec: &ProblemSpec) -> Result<SeparatedComponents> {
    let (sigma, delta, scale) = match spec.phi {
        SourceShape::ScaledSeparable { sigma, delta, scale } | SourceShape::ScaledSeparableTilde { sigma, delta, scale } => {
            (sigma, delta, scale)
        }
        _ => return Err(Error::Construction("separated family needs a scaled separable source".into())),
    };
    let eta = match spec.h {
        InitialProfile::ScaledSeparable { eta, sigma: s, delta: d }
        | InitialProfile::ScaledSeparableTilde { eta, sigma: s, delta: d }
            if s == sigma && d == delta =>
        {
            eta
        }
        _ => {
            return Err(Error::Construction(
                "separated family needs h = eta X with the source's sigma and delta".into(),
            ))
        }
    };
    match &spec.flux {
        FluxLaw::Linear { .. } | FluxLaw::Affine { .. } => {}
        FluxLaw::PowerLaw { n, f } => {
            if !(scale > 0.0 && delta > 0.0 && eta > 0.0) {
                return Err(Error::Construction(
                    "power-law separated solutions need positive scale, delta and eta".into(),
                ));
            }
            if !(*n < 1.0) || !f.is_positive() {
                return Err(Error::Construction("power law needs n < 1 and positive f".into()));
            }
        }
        other => {
            return Err(Error::Construction(format!(
                "separated family is not built for the {} flux law",
                other.kind_name()
            )))
        }
    }
    Ok(SeparatedComponents {
        sigma,
        delta,
        scale,
        eta,
        law: spec.flux.clone(),
    })
}

/// u = X(x)T(t) for Φ = λ_s X, h = ηX.
pub fn separated_solution(spec: &ProblemSpec) -> Result<SolutionField> {
    let comps = separated_components(spec)?;
    let shift = match spec.variant {
        Variant::P => 0,
        Variant::PTilde => 1,
    };
    Ok(SolutionField {
        spec: spec.clone(),
        provenance: Provenance::Separated,
        repr: Repr::Separated { comps, shift },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxBranch {
    /// exponential term present (σ ≠ 0 / δ ≠ 0)
    Generic,
    /// σ = 0 or δ = 0: purely polynomial flux
    Resonant,
}

struct IntegralSetup {
    rho: f64,
    kappa: f64,
    nu: f64,
    c: f64,
    p: u32,
    eta: f64,
    m: u32,
}

fn integral_setup(spec: &ProblemSpec) -> Result<IntegralSetup> {
    if !spec.is_integral_family() {
        return Err(Error::Construction(
            "closed-form flux needs phi in {linear_x, neg_sinh, neg_sin}, a linear law and a monomial profile".into(),
        ));
    }
    let nu = spec.flux.linear_nu().expect("linear law");
    let InitialProfile::Monomial { eta, m } = spec.h else { unreachable!() };
    let m_odd = spec
        .h
        .odd_exponent()
        .ok_or_else(|| Error::Domain(format!("m must be odd for polynomial flux (got m = {m})")))?;
    let (rho, kappa) = Kernel::for_shape(&spec.phi).exponential_form().expect("analytic kernel");
    Ok(IntegralSetup {
        rho,
        kappa,
        nu,
        c: problem::flux_forcing_constant(eta, m),
        p: (m_odd - 1) / 2,
        eta,
        m: m_odd,
    })
}

/// Exponential rate b of the flux and whether it is resonant (b = 0).
pub fn flux_rate(spec: &ProblemSpec) -> Result<(f64, bool)> {
    let s = integral_setup(spec)?;
    let b = s.kappa - s.nu * s.rho;
    let scale = s.kappa.abs() + (s.nu * s.rho).abs();
    Ok((b, b.abs() <= 4.0 * f64::EPSILON * scale))
}

/// V(t) = u_x(0,t) for the integral-representation family, odd m.
pub fn flux_closed_form(spec: &ProblemSpec) -> Result<FluxTrajectory> {
    flux_closed_form_branch(spec, None)
}

pub fn flux_closed_form_branch(spec: &ProblemSpec, branch: Option<FluxBranch>) -> Result<FluxTrajectory> {
    let s = integral_setup(spec)?;
    let (b, resonant) = flux_rate(spec)?;
    match (branch, resonant) {
        (Some(FluxBranch::Generic), true) => {
            return Err(Error::Construction("rate is zero: use the resonant branch".into()))
        }
        (Some(FluxBranch::Resonant), false) => {
            return Err(Error::Construction(format!("rate {b} is non-zero: use the generic branch")))
        }
        _ => {}
    }
    let p = s.p as usize;
    // Laplace image c p! (s−κ) / (s^{p+1}(s−b))
    let flux = if resonant {
        let mut poly = vec![0.0; p + 2];
        poly[p] = s.c;
        poly[p + 1] = -s.c * s.kappa / (p as f64 + 1.0);
        ClosedFlux::new(poly, vec![])
    } else {
        let pf = factorial(s.p);
        let amp = s.c * pf * (b - s.kappa) / b.powi(p as i32 + 1);
        // (s−κ)/(s−b) = Σ dᵢ sⁱ, dᵢ = κ/b^{i+1} − [i≥1]/bⁱ
        let d = |i: usize| {
            let mut v = s.kappa / b.powi(i as i32 + 1);
            if i >= 1 {
                v -= 1.0 / b.powi(i as i32);
            }
            v
        };
        let poly = (0..=p).map(|k| s.c * pf * d(p - k) / factorial(k as u32)).collect();
        ClosedFlux::new(poly, vec![ExpTerm { amplitude: amp, rate: b }]).with_moment_form(MomentForm {
            base: s.c,
            p: s.p,
            scale: s.c * (b - s.kappa),
            rate: b,
        })
    };
    let traj: FluxTrajectory = flux.into();
    if cfg!(debug_assertions) {
        residual_guard(spec, &traj)?;
    }
    Ok(traj)
}

/// Sample times used by the residual guard.
pub fn guard_times() -> Vec<f64> {
    (1..=50).map(|i| i as f64 * 0.1).collect()
}

fn residual_guard(spec: &ProblemSpec, traj: &FluxTrajectory) -> Result<()> {
    let k = Kernel::for_shape(&spec.phi);
    let f = Forcing::for_profile(&spec.h);
    let nu = spec.flux.linear_nu().expect("linear law");
    let ts = guard_times();
    let scale = ts.iter().map(|&t| traj.eval(t).abs()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    let res = volterra::volterra_residual(traj, &k, &f, nu, &ts)?;
    if res <= tol {
        return Ok(());
    }
    let mut note = String::new();
    if let Some(c) = traj.as_closed() {
        let flipped = ClosedFlux::new(
            c.poly.clone(),
            c.exps
                .iter()
                .map(|e| ExpTerm {
                    amplitude: -e.amplitude,
                    rate: e.rate,
                })
                .collect(),
        );
        let r2 = volterra::volterra_residual(&flipped.into(), &k, &f, nu, &ts)?;
        if r2 <= tol {
            note = " (negating the exponential coefficient satisfies the equation)".into();
        }
    }
    Err(Error::Construction(format!(
        "closed-form flux fails the Volterra residual check: {res:.3e} > {tol:.3e}{note}"
    )))
}

/// u = u₀ − νΦ(x) e^{κt}∫₀ᵗ V(τ)e^{−κτ}dτ.
pub fn integral_rep_solution(spec: &ProblemSpec) -> Result<SolutionField> {
    let s = integral_setup(spec)?;
    let flux = flux_closed_form(spec)?.as_closed().cloned().expect("closed");
    let provenance = match spec.phi {
        SourceShape::LinearX { .. } => Provenance::IntegralRepPhi1,
        SourceShape::NegSinh { .. } => Provenance::IntegralRepPhi2,
        _ => Provenance::IntegralRepPhi3,
    };
    Ok(SolutionField {
        spec: spec.clone(),
        provenance,
        repr: Repr::Integral(IntegralRep {
            baseline: MonomialBaseline::new(s.eta, s.m)?,
            phi: spec.phi.clone(),
            nu: s.nu,
            kappa: s.kappa,
            flux,
        }),
    })
}

/// Companion-problem solutions: constant fields, and derivatives of the
/// problem-P families recovered by antidifferentiation.
pub fn tilde_solution(spec: &ProblemSpec) -> Result<SolutionField> {
    if spec.variant != Variant::PTilde {
        return Err(Error::Construction("expected a companion-problem spec".into()));
    }
    let constant = match spec.h {
        InitialProfile::Monomial { eta, m } if m == 0.0 => Some(eta),
        InitialProfile::Affine { slope, intercept } if slope == 0.0 => Some(intercept),
        _ => None,
    };
    if let (FluxLaw::Zero, Some(k)) = (&spec.flux, constant) {
        return Ok(SolutionField {
            spec: spec.clone(),
            provenance: Provenance::TildeConstant,
            repr: Repr::Constant(k),
        });
    }
    let parent = antiderivative_spec(spec)?;
    let inner = solve_exact(&parent)?;
    Ok(SolutionField {
        spec: spec.clone(),
        provenance: Provenance::TildeDerivative,
        repr: Repr::Derivative(Box::new(inner)),
    })
}

/// Picks the exact family that applies to the spec.
pub fn solve_exact(spec: &ProblemSpec) -> Result<SolutionField> {
    if spec.variant == Variant::PTilde {
        return tilde_solution(spec);
    }
    match (&spec.flux, &spec.phi) {
        (FluxLaw::Zero, _) if matches!(spec.h, InitialProfile::Monomial { m, .. } if m > 1.0) => diffusion_solution(spec),
        (FluxLaw::Zero | FluxLaw::Constant { .. }, _) => stationary_solution(spec),
        (_, SourceShape::ScaledSeparable { .. }) => separated_solution(spec),
        _ => integral_rep_solution(spec),
    }
}
