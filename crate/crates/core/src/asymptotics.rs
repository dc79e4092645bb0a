//! Long-time and short-time limit classes of fluxes, solutions and control ratios.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::closed_form::{baseline_u0_closed, flux_rate, solve_exact, SolutionField};
use crate::error::{Error, Result};
use crate::flux::ClosedFlux;
use crate::problem::{derive_parameters, FluxLaw, InitialProfile, ProblemSpec, SourceShape, TimeFunction, Variant};
use crate::volterra::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "value", rename_all = "snake_case")]
pub enum LimitClass {
    Zero,
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl LimitClass {
    /// Finite(0) collapses to Zero.
    pub fn finite(v: f64) -> Self {
        if v == 0.0 {
            LimitClass::Zero
        } else {
            LimitClass::Finite(v)
        }
    }

    pub fn infinite(sign: f64) -> Self {
        if sign < 0.0 {
            LimitClass::MinusInfinity
        } else {
            LimitClass::PlusInfinity
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            LimitClass::Zero => Some(0.0),
            LimitClass::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            LimitClass::Zero => "zero",
            LimitClass::Finite(_) => "finite",
            LimitClass::PlusInfinity => "+inf",
            LimitClass::MinusInfinity => "-inf",
        }
    }

    /// Same tag, and for Finite values within `rel` relative. A NaN value matches any finite value.
    pub fn matches(&self, other: &LimitClass, rel: f64) -> bool {
        match (*self, *other) {
            (LimitClass::Finite(a), LimitClass::Finite(b)) => {
                a.is_nan() || b.is_nan() || (a - b).abs() <= rel * a.abs().max(b.abs())
            }
            (a, b) => a.tag() == b.tag(),
        }
    }
}

impl fmt::Display for LimitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LimitClass::Finite(v) => write!(f, "finite({v:.10e})"),
            other => f.write_str(other.tag()),
        }
    }
}

struct FluxSetup {
    phi: SourceShape,
    eta: f64,
    m: u32,
    nu: f64,
    c: f64,
    p: u32,
    rho: f64,
    kappa: f64,
    b: f64,
    resonant: bool,
}

fn flux_setup(spec: &ProblemSpec) -> Result<FluxSetup> {
    if !spec.is_integral_family() || spec.variant != Variant::P {
        return Err(Error::Domain("flux limits need phi in {linear_x, neg_sinh, neg_sin}, F = nu V and h = eta x^m".into()));
    }
    let InitialProfile::Monomial { eta, m } = spec.h else { unreachable!() };
    let m = spec
        .h
        .odd_exponent()
        .ok_or_else(|| Error::Domain(format!("m must be odd for polynomial flux (got m = {m})")))?;
    let nu = spec.flux.linear_nu().expect("linear law");
    let (rho, kappa) = Kernel::for_shape(&spec.phi).exponential_form().expect("analytic kernel");
    let (b, resonant) = flux_rate(spec)?;
    let d = derive_parameters(spec);
    Ok(FluxSetup {
        phi: spec.phi.clone(),
        eta,
        m,
        nu,
        c: d.c.expect("monomial"),
        p: d.p.expect("odd m"),
        rho,
        kappa,
        b,
        resonant,
    })
}

/// lim_{t→∞} u_x(0,t) from the leading term of the closed-form flux.
pub fn flux_limit(spec: &ProblemSpec) -> Result<LimitClass> {
    let s = flux_setup(spec)?;
    if s.eta == 0.0 {
        return Ok(LimitClass::Zero);
    }
    let (c, b, kappa, p) = (s.c, s.b, s.kappa, s.p);
    if s.resonant {
        // c tᵖ − cκ t^{p+1}/(p+1)
        return Ok(if kappa != 0.0 {
            LimitClass::infinite(-c * kappa)
        } else if p == 0 {
            LimitClass::finite(c)
        } else {
            LimitClass::infinite(c)
        });
    }
    if b > 0.0 {
        // amplitude c p! (b − κ)/b^{p+1} = −c p! νρ / b^{p+1}
        return Ok(LimitClass::infinite(-c * s.nu * s.rho));
    }
    // decaying exponential; the polynomial part Σ c p! d_{p−k} t^k/k! survives
    Ok(if kappa != 0.0 {
        if p == 0 {
            LimitClass::finite(c * kappa / b)
        } else {
            LimitClass::infinite(c * kappa / b)
        }
    } else {
        match p {
            0 => LimitClass::Zero,
            1 => LimitClass::finite(-c / b),
            _ => LimitClass::infinite(-c / b),
        }
    })
}

/// The flux limit as tabulated for each source shape, row by row.
pub fn tabulated_flux_limit(spec: &ProblemSpec) -> Result<LimitClass> {
    let s = flux_setup(spec)?;
    let eta = s.eta;
    let sgn = |v: f64| LimitClass::infinite(v);
    Ok(match s.phi {
        SourceShape::LinearX { lambda } => match s.m {
            1 => LimitClass::Zero,
            3 => LimitClass::finite(6.0 * eta / (s.nu * lambda)),
            _ => sgn(eta),
        },
        SourceShape::NegSinh { lambda, mu } => {
            let sigma = lambda + s.nu * mu;
            if s.resonant {
                sgn(-eta)
            } else if s.m == 1 {
                if sigma > 0.0 {
                    sgn(eta)
                } else {
                    LimitClass::finite(eta * lambda / sigma)
                }
            } else {
                sgn(sigma * eta)
            }
        }
        SourceShape::NegSin { lambda, mu } => {
            let delta = lambda - s.nu * mu;
            if s.resonant {
                sgn(eta)
            } else if s.m == 1 {
                if delta < 0.0 {
                    sgn(eta)
                } else {
                    LimitClass::finite(eta * lambda / delta)
                }
            } else if s.m <= 5 {
                sgn(eta)
            } else {
                sgn(delta * eta)
            }
        }
        _ => unreachable!(),
    })
}

/// lim_{t→0⁺} u_x(0,t): η for m = 1, zero otherwise.
pub fn flux_initial_limit(spec: &ProblemSpec) -> Result<LimitClass> {
    let s = flux_setup(spec)?;
    Ok(if s.m == 1 {
        LimitClass::finite(s.eta)
    } else {
        LimitClass::Zero
    })
}

/// Geometric default ladder for the probe.
pub const DEFAULT_LADDER: [f64; 4] = [10.0, 20.0, 40.0, 80.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeEstimate {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// None when the trend fits no class
    pub class: Option<LimitClass>,
}

fn aitken(a: f64, b: f64, c: f64) -> Option<f64> {
    let den = (c - b) - (b - a);
    (den != 0.0).then(|| c - (c - b).powi(2) / den)
}

/// Polynomial extrapolation in s = 1/t to s = 0 through the given samples (Neville).
fn extrapolate_inverse(t: &[f64], v: &[f64]) -> f64 {
    let s: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
    let mut p = v.to_vec();
    for k in 1..p.len() {
        for i in (k..p.len()).rev() {
            p[i] = (s[i] * p[i - 1] - s[i - k] * p[i]) / (s[i] - s[i - k]);
        }
    }
    p[p.len() - 1]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Classifies the t → ∞ trend of `f` sampled on an increasing ladder (at least three times).
pub fn numeric_limit_probe<F: Fn(f64) -> f64>(f: F, ladder: &[f64]) -> ProbeEstimate {
    let values: Vec<f64> = ladder.iter().map(|t| f(*t)).collect();
    let class = classify_trend(ladder, &values);
    ProbeEstimate {
        times: ladder.to_vec(),
        values,
        class,
    }
}

/// Like [`numeric_limit_probe`], retrying on the ladder scaled by 2, 4, ... while unclassified.
pub fn extended_limit_probe<F: Fn(f64) -> f64>(f: F, ladder: &[f64], doublings: u32) -> ProbeEstimate {
    let mut probe = numeric_limit_probe(&f, ladder);
    for k in 1..=doublings {
        if probe.class.is_some() {
            break;
        }
        let scaled: Vec<f64> = ladder.iter().map(|t| t * f64::from(1u32 << k)).collect();
        probe = numeric_limit_probe(&f, &scaled);
    }
    probe
}

fn classify_trend(t: &[f64], v: &[f64]) -> Option<LimitClass> {
    let n = v.len();
    if n < 3 || v.iter().any(|x| x.is_nan()) {
        return None;
    }
    if v.iter().all(|x| *x == 0.0) {
        return Some(LimitClass::Zero);
    }
    let last = v[n - 1];
    if last.is_infinite() {
        return Some(LimitClass::infinite(last));
    }
    let mag: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    let decaying = mag.windows(2).all(|w| w[1] <= 0.75 * w[0]);
    if decaying || mag[n - 1] <= 1e-12 * peak {
        return Some(LimitClass::Zero);
    }
    if close(v[n - 2], last, 1e-4) {
        return Some(LimitClass::finite(last));
    }
    // algebraic convergence: two Aitken extrapolants agree
    if n >= 4 {
        if let (Some(a1), Some(a2)) = (aitken(v[n - 4], v[n - 3], v[n - 2]), aitken(v[n - 3], v[n - 2], last)) {
            let steps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
            let shrinking = steps.windows(2).all(|w| w[1].abs() < w[0].abs() && w[1] * w[0] > 0.0);
            if shrinking && close(a1, a2, 1e-4) {
                return Some(LimitClass::finite(a2));
            }
            // expansion in powers of 1/t
            let r3 = extrapolate_inverse(&t[n - 3..], &v[n - 3..]);
            let r4 = extrapolate_inverse(&t[n - 4..], &v[n - 4..]);
            if shrinking && close(r3, r4, 1e-4) {
                return Some(LimitClass::finite(r4));
            }
        }
    }
    let same_sign = v.iter().all(|x| x.signum() == last.signum());
    let growing = mag.windows(2).all(|w| w[1] >= 2.0 * w[0]);
    // increments that do not shrink (covers √t and log t growth)
    let steps: Vec<f64> = mag.windows(2).map(|w| w[1] - w[0]).collect();
    let unbounded = steps.iter().all(|d| *d > 0.0) && steps.windows(2).all(|w| w[1] >= 0.999 * w[0]);
    if same_sign && (growing || unbounded) {
        return Some(LimitClass::infinite(last));
    }
    None
}

/// Short-time probe: the value at `t` (1e−8 by default) read as a class.
pub fn initial_limit_probe<F: Fn(f64) -> f64>(f: F, t: f64, zero_tol: f64) -> LimitClass {
    let v = f(t);
    if v.abs() <= zero_tol {
        LimitClass::Zero
    } else {
        LimitClass::finite(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ControlFamily {
    /// Φ ≡ 1, F ≡ ν, h = νx²/2 + ax
    Stationary,
    /// separable data with F = νV
    SeparatedLinear,
    /// separable data with F = νVⁿ, n < 1
    SeparatedPower,
    /// Φ ∈ {φ₁, φ₂, φ₃}, F = νV, h = ηx^m
    IntegralRep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlClassification {
    pub family: ControlFamily,
    pub x: f64,
    pub u0_limit: LimitClass,
    pub u_limit: LimitClass,
    /// None where no row covers the parameters
    pub ratio_limit: Option<LimitClass>,
    /// the ratio row is a rational function of x evaluated at `x`
    pub ratio_rational: bool,
}

fn control_family(spec: &ProblemSpec) -> Result<ControlFamily> {
    let outside = || Error::Domain("spec is outside the three control configurations".into());
    if spec.variant != Variant::P {
        return Err(outside());
    }
    match (&spec.phi, &spec.flux, &spec.h) {
        (SourceShape::ConstantOne, FluxLaw::Constant { nu }, InitialProfile::Quadratic { nu: hn, .. })
            if nu == hn && *nu != 0.0 =>
        {
            Ok(ControlFamily::Stationary)
        }
        (
            SourceShape::ScaledSeparable { sigma, delta, scale },
            law,
            InitialProfile::ScaledSeparable {
                eta,
                sigma: hs,
                delta: hd,
            },
        ) if sigma == hs && delta == hd && *delta != 0.0 && *scale != 0.0 && *eta != 0.0 => match law {
            FluxLaw::Linear { nu } if *nu != 0.0 => Ok(ControlFamily::SeparatedLinear),
            FluxLaw::PowerLaw { n, f } if *n < 1.0 && *scale > 0.0 && *eta > 0.0 && *delta > 0.0 => {
                match constant_of(f) {
                    Some(nu) if nu > 0.0 => Ok(ControlFamily::SeparatedPower),
                    _ => Err(outside()),
                }
            }
            _ => Err(outside()),
        },
        (SourceShape::LinearX { .. } | SourceShape::NegSinh { .. } | SourceShape::NegSin { .. }, FluxLaw::Linear { nu }, InitialProfile::Monomial { eta, .. })
            if *nu > 0.0 && *eta != 0.0 && spec.h.odd_exponent().is_some() =>
        {
            Ok(ControlFamily::IntegralRep)
        }
        _ => Err(outside()),
    }
}

fn constant_of(f: &TimeFunction) -> Option<f64> {
    match f {
        TimeFunction::Polynomial { coeffs } if coeffs.len() <= 1 => Some(coeffs.first().copied().unwrap_or(0.0)),
        TimeFunction::Exponential { amplitude, rate } if *rate == 0.0 => Some(*amplitude),
        _ => None,
    }
}

/// Parameters of the power-law separated family, F = ν(δT)ⁿ with constant ν.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerParameters {
    pub sigma: f64,
    pub delta: f64,
    pub scale: f64,
    pub eta: f64,
    pub n: f64,
    pub nu: f64,
}

fn power_setup(spec: &ProblemSpec) -> PowerParameters {
    let SourceShape::ScaledSeparable { sigma, delta, scale } = spec.phi else { unreachable!() };
    let InitialProfile::ScaledSeparable { eta, .. } = spec.h else { unreachable!() };
    let FluxLaw::PowerLaw { n, ref f } = spec.flux else { unreachable!() };
    PowerParameters {
        sigma,
        delta,
        scale,
        eta,
        n,
        nu: constant_of(f).expect("constant coefficient"),
    }
}

/// Equilibrium T* of Ṫ = σT − λ_s ν (δT)ⁿ, by bisection; None when no sign change is found.
pub fn steady_state(sigma: f64, scale: f64, nu: f64, delta: f64, n: f64) -> Option<f64> {
    let g = |t: f64| {
        let v = delta * t;
        let force = if n == 0.0 { nu } else { nu * v.powf(n) };
        sigma * t - scale * force
    };
    let mut bracket = None;
    'search: for side in [1.0, -1.0] {
        let mut lo: f64 = side * 1e-12;
        let mut hi = lo * 2.0;
        while hi.abs() < 1e12 {
            let (glo, ghi) = (g(lo), g(hi));
            if glo.is_finite() && ghi.is_finite() && glo * ghi <= 0.0 {
                bracket = Some((lo, hi));
                break 'search;
            }
            lo = hi;
            hi *= 2.0;
        }
    }
    let (mut lo, mut hi) = bracket?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(lo) * g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo).abs() <= 4.0 * f64::EPSILON * mid.abs() {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// The tabulated classification, row by row, at the point x.
pub fn control_classification(spec: &ProblemSpec, x: f64) -> Result<ControlClassification> {
    let family = control_family(spec)?;
    let hx = spec.h.eval(x);
    let inf_h = LimitClass::infinite(hx);
    let mut ratio_rational = false;
    let (u0_limit, u_limit, ratio_limit) = match family {
        ControlFamily::Stationary => {
            let InitialProfile::Quadratic { nu, .. } = spec.h else { unreachable!() };
            (LimitClass::infinite(nu), LimitClass::finite(hx), Some(LimitClass::Zero))
        }
        ControlFamily::SeparatedLinear => {
            let d = derive_parameters(spec);
            let (sigma, gamma) = (d.sigma.expect("separable"), d.gamma.expect("linear"));
            let u0 = baseline_class(sigma, hx);
            let u = if gamma == sigma {
                LimitClass::finite(hx)
            } else if gamma < sigma {
                inf_h
            } else {
                LimitClass::Zero
            };
            let ratio = if gamma < 0.0 {
                Some(LimitClass::PlusInfinity)
            } else if gamma > 0.0 {
                Some(LimitClass::Zero)
            } else {
                None
            };
            (u0, u, ratio)
        }
        ControlFamily::SeparatedPower => {
            let s = power_setup(spec);
            let u0 = baseline_class(s.sigma, hx);
            let u = if s.sigma < 0.0 && s.n > 0.0 {
                LimitClass::Zero
            } else if s.sigma < 0.0 && s.n == 0.0 {
                LimitClass::finite(printed_theta1(&s) * hx)
            } else {
                inf_h
            };
            let ratio = if s.sigma <= 0.0 {
                LimitClass::PlusInfinity
            } else {
                LimitClass::finite(1.0 - s.scale * s.nu * s.delta.powf(s.n) / (s.sigma * s.eta.powf(1.0 - s.n)))
            };
            (u0, u, Some(ratio))
        }
        ControlFamily::IntegralRep => {
            let m = spec.h.odd_exponent().expect("odd m");
            let u0 = if m == 1 { LimitClass::finite(hx) } else { inf_h };
            let derived_ratio = || derived_control(spec, x).ok().and_then(|d| d.ratio_limit);
            let rational = |d: Option<LimitClass>| match d {
                Some(LimitClass::Finite(v)) => LimitClass::Finite(v),
                _ => LimitClass::Finite(f64::NAN),
            };
            let (u, ratio) = match spec.phi {
                SourceShape::LinearX { .. } if m == 1 => (LimitClass::Zero, LimitClass::Zero),
                SourceShape::LinearX { .. } => {
                    ratio_rational = true;
                    (inf_h, rational(derived_ratio()))
                }
                SourceShape::NegSinh { .. } => (inf_h, LimitClass::PlusInfinity),
                SourceShape::NegSin { lambda, mu } => {
                    let nu = spec.flux.linear_nu().expect("linear");
                    if lambda - nu * mu > 0.0 {
                        ratio_rational = true;
                        (inf_h, rational(derived_ratio()))
                    } else {
                        (inf_h, LimitClass::PlusInfinity)
                    }
                }
                _ => unreachable!(),
            };
            (u0, u, Some(ratio))
        }
    };
    Ok(ControlClassification {
        family,
        x,
        u0_limit,
        u_limit,
        ratio_limit,
        ratio_rational,
    })
}

fn baseline_class(sigma: f64, hx: f64) -> LimitClass {
    if sigma == 0.0 {
        LimitClass::finite(hx)
    } else if sigma > 0.0 {
        LimitClass::infinite(hx)
    } else {
        LimitClass::Zero
    }
}

/// θ₁ as tabulated for the constant-forcing row, with the coupling ν in the numerator.
pub fn printed_theta1(s: &PowerParameters) -> f64 {
    s.scale * s.nu / (s.sigma * s.eta)
}

/// One term c·t^power·e^{rate t} of an asymptotic expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    rate: f64,
    power: f64,
    value: f64,
    /// sum of |contributions|, for cancellation tests
    magnitude: f64,
}

fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn collect_terms(parts: &[ClosedFlux]) -> Vec<Term> {
    let mut terms: Vec<Term> = Vec::new();
    let mut add = |rate: f64, power: f64, v: f64| {
        let rate = if same_rate(rate, 0.0) { 0.0 } else { rate };
        match terms.iter_mut().find(|t| same_rate(t.rate, rate) && t.power == power) {
            Some(t) => {
                t.value += v;
                t.magnitude += v.abs();
            }
            None => terms.push(Term {
                rate,
                power,
                value: v,
                magnitude: v.abs(),
            }),
        }
    };
    for part in parts {
        for (k, c) in part.poly.iter().enumerate() {
            add(0.0, k as f64, *c);
        }
        for e in &part.exps {
            add(e.rate, 0.0, e.amplitude);
        }
    }
    terms
}

fn dominant(terms: &[Term]) -> Option<Term> {
    terms
        .iter()
        .filter(|t| t.value.abs() > 64.0 * f64::EPSILON * t.magnitude)
        .copied()
        .max_by(|a, b| a.rate.total_cmp(&b.rate).then(a.power.total_cmp(&b.power)))
}

fn term_class(t: Option<Term>) -> LimitClass {
    match t {
        None => LimitClass::Zero,
        Some(t) if t.rate > 0.0 || (t.rate == 0.0 && t.power > 0.0) => LimitClass::infinite(t.value),
        Some(t) if t.rate == 0.0 => LimitClass::finite(t.value),
        Some(_) => LimitClass::Zero,
    }
}

fn ratio_class(num: Option<Term>, den: Option<Term>) -> Option<LimitClass> {
    let d = den?;
    let Some(n) = num else { return Some(LimitClass::Zero) };
    Some(match n.rate.total_cmp(&d.rate).then(n.power.total_cmp(&d.power)) {
        std::cmp::Ordering::Greater => LimitClass::infinite(n.value * d.value),
        std::cmp::Ordering::Equal => LimitClass::finite(n.value / d.value),
        std::cmp::Ordering::Less => LimitClass::Zero,
    })
}

fn single(rate: f64, power: f64, value: f64) -> Option<Term> {
    (value != 0.0).then_some(Term {
        rate,
        power,
        value,
        magnitude: value.abs(),
    })
}

/// Leading terms of u₀(x,·) and u(x,·).
fn leading_terms(spec: &ProblemSpec, family: ControlFamily, x: f64) -> Result<(Option<Term>, Option<Term>)> {
    let u0 = match spec.h {
        InitialProfile::Quadratic { nu, a } => {
            // (νx²/2 + νt) erf(x/2√t) + νx√t e^{−x²/4t}/√π + ax ~ 2νx√t/√π
            let lead = single(0.0, 0.5, 2.0 * nu * x / std::f64::consts::PI.sqrt());
            let _ = a;
            lead
        }
        InitialProfile::ScaledSeparable { sigma, .. } => single(sigma, 0.0, spec.h.eval(x)),
        InitialProfile::Monomial { eta, .. } => {
            let m = spec.h.odd_exponent().expect("odd m");
            let poly = crate::closed_form::MonomialBaseline::new(eta, m)?.time_poly(x);
            dominant(&collect_terms(&[ClosedFlux::new(poly, vec![])]))
        }
        _ => return Err(Error::Domain("no baseline expansion".into())),
    };
    let u = match family {
        ControlFamily::SeparatedPower => power_leading(&power_setup(spec), spec, x),
        _ => {
            let field = solve_exact(spec)?;
            let parts = field
                .time_expansion_parts(x)
                .ok_or_else(|| Error::Domain("solution has no time expansion".into()))?;
            dominant(&collect_terms(&parts))
        }
    };
    Ok((u0, u))
}

/// Leading term of X(x)T(t) for Ṫ = σT − λ_s ν (δT)ⁿ through y = T^{1−n}.
fn power_leading(s: &PowerParameters, spec: &ProblemSpec, x: f64) -> Option<Term> {
    let xx = spec.h.eval(x) / s.eta;
    let q = 1.0 - s.n;
    let force = s.scale * s.nu * s.delta.powf(s.n);
    if s.n == 0.0 {
        // T = (η − y*)e^{σt} + y*, y* = λ_s ν/σ; T = η − λ_s ν t when σ = 0
        if s.sigma == 0.0 {
            return single(0.0, 1.0, -force * xx);
        }
        let ystar = force / s.sigma;
        let parts = [
            ClosedFlux::exponential(s.eta * xx, s.sigma),
            ClosedFlux::exponential(-ystar * xx, s.sigma),
            ClosedFlux::new(vec![ystar * xx], vec![]),
        ];
        return dominant(&collect_terms(&parts));
    }
    // y = (y₀ − y*)e^{σ(1−n)t} + y*, extinct once y reaches 0
    if s.sigma <= 0.0 {
        return None;
    }
    let y0 = s.eta.powf(q);
    let ystar = force / s.sigma;
    let gap = y0 - ystar;
    if gap.abs() <= 64.0 * f64::EPSILON * y0.abs().max(ystar.abs()) {
        single(0.0, 0.0, s.eta * xx)
    } else if gap > 0.0 {
        single(s.sigma, 0.0, gap.powf(1.0 / q) * xx)
    } else {
        None
    }
}

/// Classification derived from the leading terms of the exact solution and baseline.
pub fn derived_control(spec: &ProblemSpec, x: f64) -> Result<ControlClassification> {
    let family = control_family(spec)?;
    let (u0, u) = leading_terms(spec, family, x)?;
    let mut u_limit = term_class(u);
    if family == ControlFamily::SeparatedPower {
        let s = power_setup(spec);
        if let (LimitClass::Finite(_), true) = (u_limit, s.n == 0.0 && s.sigma < 0.0) {
            if let Some(t) = steady_state(s.sigma, s.scale, s.nu, s.delta, s.n) {
                u_limit = LimitClass::finite(t * spec.h.eval(x) / s.eta);
            }
        }
    }
    Ok(ControlClassification {
        family,
        x,
        u0_limit: term_class(u0),
        u_limit,
        ratio_limit: ratio_class(u, u0),
        ratio_rational: false,
    })
}

/// Parameters of a power-law separated spec, if it is one.
pub fn power_parameters(spec: &ProblemSpec) -> Option<PowerParameters> {
    (control_family(spec).ok()? == ControlFamily::SeparatedPower).then(|| power_setup(spec))
}

/// Probes of u₀, u and u/u₀ at x along the ladder.
pub fn control_probe(spec: &ProblemSpec, x: f64, ladder: &[f64]) -> Result<[ProbeEstimate; 3]> {
    control_probe_extended(spec, x, ladder, 0)
}

/// [`control_probe`] with up to `doublings` retries on stretched ladders.
pub fn control_probe_extended(spec: &ProblemSpec, x: f64, ladder: &[f64], doublings: u32) -> Result<[ProbeEstimate; 3]> {
    control_family(spec)?;
    let field = solve_exact(spec)?;
    let u0 = |t: f64| baseline_u0_closed(&spec.h, x, t).unwrap_or(f64::NAN);
    let scale = |_t: f64| 1e-12 * (1.0 + spec.h.eval(x).abs());
    let u = |t: f64| {
        let v = field.u(x, t);
        if v.abs() <= scale(t) {
            0.0
        } else {
            v
        }
    };
    Ok([
        extended_limit_probe(u0, ladder, doublings),
        extended_limit_probe(u, ladder, doublings),
        extended_limit_probe(|t| u(t) / u0(t), ladder, doublings),
    ])
}

/// Probe of the exact field's u(x,·) alone.
pub fn field_probe(field: &SolutionField, x: f64, ladder: &[f64]) -> ProbeEstimate {
    numeric_limit_probe(|t| field.u(x, t), ladder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::flux_closed_form;

    fn ir(phi: SourceShape, nu: f64, eta: f64, m: f64) -> ProblemSpec {
        ProblemSpec::new(phi, FluxLaw::Linear { nu }, InitialProfile::Monomial { eta, m })
    }

    #[test]
    fn probe_classes() {
        let l = DEFAULT_LADDER;
        assert_eq!(numeric_limit_probe(|t| 2.0 * (-t).exp(), &l).class, Some(LimitClass::Zero));
        let f = numeric_limit_probe(|t| 6.0 * (1.0 - (-t).exp()), &l).class.unwrap();
        assert!(f.matches(&LimitClass::Finite(6.0), 1e-4));
        assert_eq!(numeric_limit_probe(|t| t * t, &l).class, Some(LimitClass::PlusInfinity));
        assert_eq!(numeric_limit_probe(|t| -t.sqrt(), &l).class, Some(LimitClass::MinusInfinity));
        assert_eq!(numeric_limit_probe(|t| t.sin() * t, &l).class, None);
        let r = numeric_limit_probe(|t| 3.0 + 1.0 / t, &l).class.unwrap();
        assert!(r.matches(&LimitClass::Finite(3.0), 1e-10), "{r}");
    }

    #[test]
    fn flux_limit_examples() {
        let spec = ir(SourceShape::LinearX { lambda: 1.0 }, 1.0, 1.0, 1.0);
        assert_eq!(flux_limit(&spec).unwrap(), LimitClass::Zero);
        let spec = ir(SourceShape::LinearX { lambda: 1.0 }, 1.0, 1.0, 3.0);
        assert!(flux_limit(&spec).unwrap().matches(&LimitClass::Finite(6.0), 1e-14));
        let spec = ir(SourceShape::NegSinh { lambda: 1.0, mu: 1.0 }, 1.0, 1.0, 1.0);
        assert_eq!(flux_limit(&spec).unwrap(), LimitClass::PlusInfinity);
        // δ = 3 − 1 = 2
        let spec = ir(SourceShape::NegSin { lambda: 3.0, mu: 1.0 }, 1.0, 2.0, 1.0);
        assert!(flux_limit(&spec).unwrap().matches(&LimitClass::Finite(3.0), 1e-14));
        assert!(flux_limit(&ir(SourceShape::LinearX { lambda: 1.0 }, 1.0, 1.0, 2.0)).is_err());
    }

    #[test]
    fn initial_limits() {
        let spec = ir(SourceShape::NegSin { lambda: 1.0, mu: 0.5 }, 1.0, -3.0, 1.0);
        assert_eq!(flux_initial_limit(&spec).unwrap(), LimitClass::Finite(-3.0));
        let spec = ir(SourceShape::NegSinh { lambda: 1.0, mu: 0.5 }, 1.0, 2.0, 5.0);
        assert_eq!(flux_initial_limit(&spec).unwrap(), LimitClass::Zero);
    }

    #[test]
    fn table_and_leading_terms_differ_only_where_expected() {
        // δ = 1 − 2 < 0 with m = 7
        let spec = ir(SourceShape::NegSin { lambda: 1.0, mu: 2.0 }, 1.0, 1.0, 7.0);
        assert_eq!(flux_limit(&spec).unwrap(), LimitClass::PlusInfinity);
        assert_eq!(tabulated_flux_limit(&spec).unwrap(), LimitClass::MinusInfinity);
        let v = flux_closed_form(&spec).unwrap();
        assert_eq!(numeric_limit_probe(|t| v.eval(t), &DEFAULT_LADDER).class, Some(LimitClass::PlusInfinity));
        for (phi, m) in [
            (SourceShape::LinearX { lambda: 2.0 }, 5.0),
            (SourceShape::NegSinh { lambda: 0.5, mu: 0.25 }, 3.0),
            (SourceShape::NegSin { lambda: 1.0, mu: 0.5 }, 7.0),
            (SourceShape::NegSin { lambda: 1.0, mu: 1.0 }, 3.0),
        ] {
            let spec = ir(phi, 1.0, -1.5, m);
            assert_eq!(flux_limit(&spec).unwrap(), tabulated_flux_limit(&spec).unwrap(), "{spec:?}");
        }
    }

    #[test]
    fn stationary_control() {
        let spec = ProblemSpec::new(
            SourceShape::ConstantOne,
            FluxLaw::Constant { nu: 2.0 },
            InitialProfile::Quadratic { nu: 2.0, a: 1.0 },
        );
        let c = control_classification(&spec, 1.0).unwrap();
        assert_eq!(c.u0_limit, LimitClass::PlusInfinity);
        assert_eq!(c.u_limit, LimitClass::Finite(2.0));
        let d = derived_control(&spec, 1.0).unwrap();
        assert_eq!(d.u0_limit, LimitClass::PlusInfinity);
        assert_eq!(d.ratio_limit, Some(LimitClass::Zero));
    }

    fn sv(sigma: f64, delta: f64, scale: f64, eta: f64, law: FluxLaw) -> ProblemSpec {
        ProblemSpec::new(
            SourceShape::ScaledSeparable { sigma, delta, scale },
            law,
            InitialProfile::ScaledSeparable { eta, sigma, delta },
        )
    }

    #[test]
    fn separated_linear_control() {
        // γ = λ_s ν δ = 1·1·2 = 2 = σ
        let spec = sv(2.0, 2.0, 1.0, 1.0, FluxLaw::Linear { nu: 1.0 });
        let c = control_classification(&spec, 0.5).unwrap();
        let d = derived_control(&spec, 0.5).unwrap();
        assert!(c.u_limit.matches(&LimitClass::Finite(spec.h.eval(0.5)), 1e-14));
        assert!(d.u_limit.matches(&c.u_limit, 1e-12));
        assert_eq!(d.u0_limit, LimitClass::PlusInfinity);
        // σ = −1, γ = 1
        let spec = sv(-1.0, 1.0, 1.0, 1.0, FluxLaw::Linear { nu: 1.0 });
        let d = derived_control(&spec, 1.0).unwrap();
        assert_eq!((d.u_limit, d.u0_limit, d.ratio_limit), (LimitClass::Zero, LimitClass::Zero, Some(LimitClass::Zero)));
        assert_eq!(control_classification(&spec, 1.0).unwrap().ratio_limit, Some(LimitClass::Zero));
    }

    #[test]
    fn constant_power_law_steady_state() {
        let law = FluxLaw::PowerLaw {
            n: 0.0,
            f: TimeFunction::constant(0.5),
        };
        let spec = sv(-1.0, 1.0, 2.0, 1.0, law);
        let t = steady_state(-1.0, 2.0, 0.5, 1.0, 0.0).unwrap();
        assert!((t + 1.0).abs() < 1e-14);
        let d = derived_control(&spec, 1.0).unwrap();
        let c = control_classification(&spec, 1.0).unwrap();
        assert!(d.u_limit.matches(&c.u_limit, 1e-12), "{d:?} {c:?}");
        let [_, u, _] = control_probe(&spec, 1.0, &DEFAULT_LADDER).unwrap();
        assert!(u.class.unwrap().matches(&d.u_limit, 1e-3));
    }

    #[test]
    fn cancellation_in_integral_expansion() {
        // u → ηx³ + 6ηx/(νλ) although both u₀ and the correction grow linearly
        let spec = ir(SourceShape::LinearX { lambda: 1.0 }, 1.0, 1.0, 3.0);
        let d = derived_control(&spec, 1.0).unwrap();
        assert!(d.u_limit.matches(&LimitClass::Finite(7.0), 1e-12), "{d:?}");
        assert_eq!(d.ratio_limit, Some(LimitClass::Zero));
        let [_, u, _] = control_probe(&spec, 1.0, &DEFAULT_LADDER).unwrap();
        assert!(u.class.unwrap().matches(&LimitClass::Finite(7.0), 1e-3));
    }

    #[test]
    fn outside_configurations_error() {
        let spec = ProblemSpec::new(
            SourceShape::LinearX { lambda: 1.0 },
            FluxLaw::Zero,
            InitialProfile::Monomial { eta: 1.0, m: 1.0 },
        );
        assert!(control_classification(&spec, 1.0).is_err());
    }
}
