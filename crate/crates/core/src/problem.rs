//! Declarative description of one problem instance: the source shape Φ, the
//! flux law F, the initial profile h, and checks of the hypotheses the
//! explicit solutions rely on.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{self, exp_moment};

/// k-th derivative of `sin(λx)` / `cos(λx)` via the phase shift identity.
fn sin_derivative(lambda: f64, x: f64, order: u32) -> f64 {
    lambda.powi(order as i32) * (lambda * x + order as f64 * FRAC_PI_2).sin()
}

fn cos_derivative(lambda: f64, x: f64, order: u32) -> f64 {
    lambda.powi(order as i32) * (lambda * x + order as f64 * FRAC_PI_2).cos()
}

fn sinh_derivative(lambda: f64, x: f64, order: u32) -> f64 {
    let base = if order % 2 == 0 { (lambda * x).sinh() } else { (lambda * x).cosh() };
    lambda.powi(order as i32) * base
}

fn cosh_derivative(lambda: f64, x: f64, order: u32) -> f64 {
    let base = if order % 2 == 0 { (lambda * x).cosh() } else { (lambda * x).sinh() };
    lambda.powi(order as i32) * base
}

/// `X^{(order)}(x)` for the solution of `X'' = σX, X(0) = 0, X'(0) = δ`.
pub fn separable_x(sigma: f64, delta: f64, x: f64, order: u32) -> f64 {
    if sigma > 0.0 {
        let r = sigma.sqrt();
        delta / r * sinh_derivative(r, x, order)
    } else if sigma < 0.0 {
        let r = (-sigma).sqrt();
        delta / r * sin_derivative(r, x, order)
    } else {
        match order {
            0 => delta * x,
            1 => delta,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceShape {
    /// φ₁(x) = λx
    LinearX { lambda: f64 },
    /// φ₂(x) = −μ sinh(λx)
    NegSinh { lambda: f64, mu: f64 },
    /// φ₃(x) = −μ sin(λx)
    NegSin { lambda: f64, mu: f64 },
    /// λ_s X(x) with X from the separated-variables family
    ScaledSeparable { sigma: f64, delta: f64, scale: f64 },
    ConstantOne,
    /// Companion-problem shapes (derivatives of the ones above).
    Constant { value: f64 },
    NegCosh { lambda: f64, mu: f64 },
    NegCos { lambda: f64, mu: f64 },
    /// λ_s X̃(x), X̃ = X′
    ScaledSeparableTilde { sigma: f64, delta: f64, scale: f64 },
}

impl SourceShape {
    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    pub fn derivative(&self, order: u32, x: f64) -> f64 {
        use SourceShape::*;
        match *self {
            LinearX { lambda } => match order {
                0 => lambda * x,
                1 => lambda,
                _ => 0.0,
            },
            NegSinh { lambda, mu } => -mu * sinh_derivative(lambda, x, order),
            NegSin { lambda, mu } => -mu * sin_derivative(lambda, x, order),
            NegCosh { lambda, mu } => -mu * cosh_derivative(lambda, x, order),
            NegCos { lambda, mu } => -mu * cos_derivative(lambda, x, order),
            ScaledSeparable { sigma, delta, scale } => scale * separable_x(sigma, delta, x, order),
            ScaledSeparableTilde { sigma, delta, scale } => {
                scale * separable_x(sigma, delta, x, order + 1)
            }
            ConstantOne => {
                if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Constant { value } => {
                if order == 0 {
                    value
                } else {
                    0.0
                }
            }
        }
    }

    /// Exponential growth rate of |Φ| for large x (0 for polynomial growth).
    pub fn growth_rate(&self) -> f64 {
        use SourceShape::*;
        match *self {
            NegSinh { lambda, .. } | NegCosh { lambda, .. } => lambda.abs(),
            ScaledSeparable { sigma, .. } | ScaledSeparableTilde { sigma, .. } if sigma > 0.0 => {
                sigma.sqrt()
            }
            _ => 0.0,
        }
    }

    /// Factor `M(s)` with `∫₀^∞ G(x,t,ξ,τ) Φ(ξ) dξ = M(t−τ) Φ(x)`, for shapes
    /// whose odd extension is an eigenfunction of the second derivative.
    pub fn green_multiplier(&self, elapsed: f64) -> Option<f64> {
        use SourceShape::*;
        match *self {
            LinearX { .. } => Some(1.0),
            NegSinh { lambda, .. } => Some((lambda * lambda * elapsed).exp()),
            NegSin { lambda, .. } => Some((-lambda * lambda * elapsed).exp()),
            ScaledSeparable { sigma, .. } => Some((sigma * elapsed).exp()),
            _ => None,
        }
    }

    /// Rate κ with Φ'' = κΦ, when it exists.
    pub fn eigen_rate(&self) -> Option<f64> {
        use SourceShape::*;
        match *self {
            LinearX { .. } => Some(0.0),
            NegSinh { lambda, .. } | NegCosh { lambda, .. } => Some(lambda * lambda),
            NegSin { lambda, .. } | NegCos { lambda, .. } => Some(-lambda * lambda),
            ScaledSeparable { sigma, .. } | ScaledSeparableTilde { sigma, .. } => Some(sigma),
            ConstantOne | Constant { .. } => Some(0.0),
        }
    }

    pub fn is_tilde_shape(&self) -> bool {
        matches!(
            self,
            SourceShape::Constant { .. }
                | SourceShape::NegCosh { .. }
                | SourceShape::NegCos { .. }
                | SourceShape::ScaledSeparableTilde { .. }
        )
    }

    pub fn kind_name(&self) -> &'static str {
        use SourceShape::*;
        match self {
            LinearX { .. } => "linear_x",
            NegSinh { .. } => "neg_sinh",
            NegSin { .. } => "neg_sin",
            ScaledSeparable { .. } => "scaled_separable",
            ConstantOne => "constant_one",
            Constant { .. } => "constant",
            NegCosh { .. } => "neg_cosh",
            NegCos { .. } => "neg_cos",
            ScaledSeparableTilde { .. } => "scaled_separable_tilde",
        }
    }
}

/// Time-dependent coefficient for the affine and power flux laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFunction {
    /// Σ coeffs[k] t^k
    Polynomial { coeffs: Vec<f64> },
    /// amplitude · e^{rate t}
    Exponential { amplitude: f64, rate: f64 },
}

impl TimeFunction {
    pub fn constant(value: f64) -> Self {
        TimeFunction::Polynomial { coeffs: vec![value] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Polynomial { coeffs } => specfun::horner(coeffs, t),
            TimeFunction::Exponential { amplitude, rate } => amplitude * (rate * t).exp(),
        }
    }

    /// `∫₀ᵗ f(τ) dτ`
    pub fn integral(&self, t: f64) -> f64 {
        self.weighted_integral(0.0, t)
    }

    /// `∫₀ᵗ f(τ) e^{rate τ} dτ`, in closed form.
    pub fn weighted_integral(&self, rate: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            TimeFunction::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * exp_moment(k as u32, rate, t).expect("t > 0"))
                .sum(),
            TimeFunction::Exponential { amplitude, rate: r } => {
                amplitude * exp_moment(0, r + rate, t).expect("t > 0")
            }
        }
    }

    /// Sufficient check for f > 0 on t ≥ 0.
    pub fn is_positive(&self) -> bool {
        match self {
            TimeFunction::Polynomial { coeffs } => {
                coeffs.first().is_some_and(|c| *c > 0.0) && coeffs.iter().all(|c| *c >= 0.0)
            }
            TimeFunction::Exponential { amplitude, .. } => *amplitude > 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FluxLaw {
    Zero,
    /// F(V,t) = ν
    Constant { nu: f64 },
    /// F(V,t) = νV
    Linear { nu: f64 },
    /// F(V,t) = f₁(t) + f₂(t)V
    Affine { f1: TimeFunction, f2: TimeFunction },
    /// F(V,t) = Vⁿ f(t), n < 1
    PowerLaw { n: f64, f: TimeFunction },
}

impl FluxLaw {
    pub fn eval(&self, v: f64, t: f64) -> f64 {
        match self {
            FluxLaw::Zero => 0.0,
            FluxLaw::Constant { nu } => *nu,
            FluxLaw::Linear { nu } => nu * v,
            FluxLaw::Affine { f1, f2 } => f1.eval(t) + f2.eval(t) * v,
            FluxLaw::PowerLaw { n, f } => {
                if *n == 0.0 {
                    f.eval(t)
                } else {
                    v.powf(*n) * f.eval(t)
                }
            }
        }
    }

    pub fn linear_nu(&self) -> Option<f64> {
        match self {
            FluxLaw::Linear { nu } => Some(*nu),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FluxLaw::Zero => "zero",
            FluxLaw::Constant { .. } => "constant",
            FluxLaw::Linear { .. } => "linear",
            FluxLaw::Affine { .. } => "affine",
            FluxLaw::PowerLaw { .. } => "power_law",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// ηx^m
    Monomial { eta: f64, m: f64 },
    /// (ν/2)x² + ax
    Quadratic { nu: f64, a: f64 },
    /// slope·x + intercept (derivative of the quadratic profile)
    Affine { slope: f64, intercept: f64 },
    /// ηX(x)
    ScaledSeparable { eta: f64, sigma: f64, delta: f64 },
    /// ηX̃(x)
    ScaledSeparableTilde { eta: f64, sigma: f64, delta: f64 },
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    pub fn derivative(&self, order: u32, x: f64) -> f64 {
        use InitialProfile::*;
        match *self {
            Monomial { eta, m } => {
                let mut coef = eta;
                for k in 0..order {
                    let factor = m - k as f64;
                    if factor == 0.0 {
                        return 0.0;
                    }
                    coef *= factor;
                }
                let power = m - order as f64;
                if power == 0.0 {
                    coef
                } else {
                    coef * x.powf(power)
                }
            }
            Quadratic { nu, a } => match order {
                0 => 0.5 * nu * x * x + a * x,
                1 => nu * x + a,
                2 => nu,
                _ => 0.0,
            },
            Affine { slope, intercept } => match order {
                0 => slope * x + intercept,
                1 => slope,
                _ => 0.0,
            },
            ScaledSeparable { eta, sigma, delta } => eta * separable_x(sigma, delta, x, order),
            ScaledSeparableTilde { eta, sigma, delta } => {
                eta * separable_x(sigma, delta, x, order + 1)
            }
        }
    }

    pub fn growth_rate(&self) -> f64 {
        match *self {
            InitialProfile::ScaledSeparable { sigma, .. }
            | InitialProfile::ScaledSeparableTilde { sigma, .. }
                if sigma > 0.0 =>
            {
                sigma.sqrt()
            }
            _ => 0.0,
        }
    }

    /// Odd integer exponent of a monomial profile, if it has one.
    pub fn odd_exponent(&self) -> Option<u32> {
        match *self {
            InitialProfile::Monomial { m, .. } if m >= 1.0 && m.fract() == 0.0 && (m as u64) % 2 == 1 => {
                Some(m as u32)
            }
            _ => None,
        }
    }

    /// Constants of the growth bound `|h(x)| ≤ c₀ exp(c₁ x^{2−ε})`.
    pub fn growth_bound(&self) -> GrowthBound {
        use InitialProfile::*;
        match *self {
            Monomial { eta, m } => GrowthBound {
                c0: eta.abs(),
                c1: m.max(0.0),
                epsilon: 1.0,
            },
            Quadratic { nu, a } => GrowthBound {
                c0: 0.5 * nu.abs() + a.abs(),
                c1: 2.0,
                epsilon: 1.0,
            },
            Affine { slope, intercept } => GrowthBound {
                c0: slope.abs() + intercept.abs(),
                c1: 1.0,
                epsilon: 1.0,
            },
            ScaledSeparable { eta, sigma, delta } | ScaledSeparableTilde { eta, sigma, delta } => {
                let r = sigma.abs().sqrt();
                let amp = if r > 0.0 { (eta * delta).abs() * (1.0 + 1.0 / r) } else { (eta * delta).abs() };
                GrowthBound {
                    c0: amp,
                    c1: r.max(1.0),
                    epsilon: 1.0,
                }
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        use InitialProfile::*;
        match self {
            Monomial { .. } => "monomial",
            Quadratic { .. } => "quadratic",
            Affine { .. } => "affine",
            ScaledSeparable { .. } => "scaled_separable",
            ScaledSeparableTilde { .. } => "scaled_separable_tilde",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound {
    pub c0: f64,
    pub c1: f64,
    pub epsilon: f64,
}

impl GrowthBound {
    pub fn holds_at(&self, h: &InitialProfile, x: f64) -> bool {
        h.eval(x).abs() <= self.c0 * (self.c1 * x.powf(2.0 - self.epsilon)).exp() * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    P,
    PTilde,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub phi: SourceShape,
    pub flux: FluxLaw,
    pub h: InitialProfile,
    pub variant: Variant,
    /// Companion problem only: g̃(t) = neumann_scale · F̃(v(0,t), t), i.e. Φ(0).
    pub neumann_scale: f64,
    /// Whether the caller insists on closed-form flux (odd m required).
    pub closed_form: bool,
}

impl ProblemSpec {
    pub fn new(phi: SourceShape, flux: FluxLaw, h: InitialProfile) -> Self {
        Self {
            phi,
            flux,
            h,
            variant: Variant::P,
            neumann_scale: 0.0,
            closed_form: false,
        }
    }

    pub fn tilde(phi: SourceShape, flux: FluxLaw, h: InitialProfile) -> Self {
        Self {
            variant: Variant::PTilde,
            ..Self::new(phi, flux, h)
        }
    }

    pub fn requiring_closed_form(mut self) -> Self {
        self.closed_form = true;
        self
    }

    /// Source term value Φ(x) F(V, t).
    pub fn source(&self, x: f64, coupling: f64, t: f64) -> f64 {
        self.phi.eval(x) * self.flux.eval(coupling, t)
    }

    /// Neumann data of the companion problem at time t for coupling value v(0,t).
    pub fn neumann_data(&self, coupling: f64, t: f64) -> f64 {
        if self.neumann_scale == 0.0 {
            0.0
        } else {
            self.neumann_scale * self.flux.eval(coupling, t)
        }
    }

    /// True for Φ ∈ {φ₁, φ₂, φ₃} with a linear flux law.
    pub fn is_integral_family(&self) -> bool {
        self.variant == Variant::P
            && matches!(
                self.phi,
                SourceShape::LinearX { .. } | SourceShape::NegSinh { .. } | SourceShape::NegSin { .. }
            )
            && matches!(self.flux, FluxLaw::Linear { .. })
            && matches!(self.h, InitialProfile::Monomial { .. })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: CaseJson = serde_json::from_str(s)?;
        raw.try_into()
    }

    pub fn from_json_value(v: serde_json::Value) -> Result<Self> {
        let raw: CaseJson = serde_json::from_value(v)?;
        raw.try_into()
    }

    pub fn to_json(&self) -> CaseJson {
        CaseJson::from(self)
    }
}

/// One failed hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Compatibility { h_at_zero: f64 },
    NonPositive { name: &'static str, value: f64 },
    ZeroParameter { name: &'static str },
    NonFinite { name: &'static str },
    ExponentNotOdd { m: f64 },
    ExponentRange { m: f64, min: f64 },
    PowerLawExponent { n: f64 },
    NonPositiveTimeFunction,
    SeparableMismatch,
    GrowthBound { x: f64 },
    VariantMismatch { detail: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Compatibility { h_at_zero } => {
                write!(f, "compatibility condition h(0+) = 0 fails (h(0+) = {h_at_zero})")
            }
            Violation::NonPositive { name, value } => write!(f, "{name} must be positive (got {value})"),
            Violation::ZeroParameter { name } => write!(f, "{name} must be non-zero"),
            Violation::NonFinite { name } => write!(f, "{name} must be finite"),
            Violation::ExponentNotOdd { m } => {
                write!(f, "m must be odd for polynomial flux (got m = {m})")
            }
            Violation::ExponentRange { m, min } => write!(f, "m must be at least {min} (got {m})"),
            Violation::PowerLawExponent { n } => write!(f, "power-law exponent must satisfy n < 1 (got {n})"),
            Violation::NonPositiveTimeFunction => write!(f, "power-law coefficient f(t) must be positive"),
            Violation::SeparableMismatch => {
                write!(f, "separable profile and source must share sigma and delta")
            }
            Violation::GrowthBound { x } => write!(f, "growth bound fails at x = {x}"),
            Violation::VariantMismatch { detail } => write!(f, "variant mismatch: {detail}"),
        }
    }
}

/// Lists every violated hypothesis; an empty list means the spec is admissible.
pub fn validate(spec: &ProblemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let positive = |name: &'static str, value: f64, out: &mut Vec<Violation>| {
        if !value.is_finite() {
            out.push(Violation::NonFinite { name });
        } else if value <= 0.0 {
            out.push(Violation::NonPositive { name, value });
        }
    };
    let nonzero = |name: &'static str, value: f64, out: &mut Vec<Violation>| {
        if !value.is_finite() {
            out.push(Violation::NonFinite { name });
        } else if value == 0.0 {
            out.push(Violation::ZeroParameter { name });
        }
    };

    let tilde = spec.variant == Variant::PTilde;
    match &spec.phi {
        SourceShape::LinearX { lambda } => positive("lambda", *lambda, &mut out),
        SourceShape::NegSinh { lambda, mu }
        | SourceShape::NegSin { lambda, mu }
        | SourceShape::NegCosh { lambda, mu }
        | SourceShape::NegCos { lambda, mu } => {
            positive("lambda", *lambda, &mut out);
            positive("mu", *mu, &mut out);
        }
        SourceShape::ScaledSeparable { sigma, delta, scale }
        | SourceShape::ScaledSeparableTilde { sigma, delta, scale } => {
            if !sigma.is_finite() {
                out.push(Violation::NonFinite { name: "sigma" });
            }
            nonzero("delta", *delta, &mut out);
            nonzero("scale", *scale, &mut out);
        }
        SourceShape::Constant { value } => {
            if !value.is_finite() {
                out.push(Violation::NonFinite { name: "scale" });
            }
        }
        SourceShape::ConstantOne => {}
    }
    if spec.phi.is_tilde_shape() && !tilde {
        out.push(Violation::VariantMismatch {
            detail: "derivative-type source shape used in problem P",
        });
    }
    if matches!(spec.phi, SourceShape::ScaledSeparable { .. }) && tilde {
        out.push(Violation::VariantMismatch {
            detail: "use scaled_separable_tilde for the companion problem",
        });
    }

    match &spec.flux {
        FluxLaw::Zero => {}
        FluxLaw::Constant { nu } => nonzero("nu", *nu, &mut out),
        FluxLaw::Linear { nu } => {
            let integral = matches!(
                spec.phi,
                SourceShape::LinearX { .. } | SourceShape::NegSinh { .. } | SourceShape::NegSin { .. }
            );
            if integral && !tilde {
                positive("nu", *nu, &mut out);
            } else {
                nonzero("nu", *nu, &mut out);
            }
        }
        FluxLaw::Affine { .. } => {}
        FluxLaw::PowerLaw { n, f } => {
            if !(*n < 1.0) {
                out.push(Violation::PowerLawExponent { n: *n });
            }
            if !f.is_positive() {
                out.push(Violation::NonPositiveTimeFunction);
            }
        }
    }

    match &spec.h {
        InitialProfile::Monomial { eta, m } => {
            nonzero("eta", *eta, &mut out);
            let min = if tilde { 0.0 } else { 1.0 };
            if !(*m >= min) {
                out.push(Violation::ExponentRange { m: *m, min });
            }
            let integral = matches!(
                spec.phi,
                SourceShape::LinearX { .. } | SourceShape::NegSinh { .. } | SourceShape::NegSin { .. }
            );
            if spec.closed_form && integral && !tilde && spec.h.odd_exponent().is_none() {
                out.push(Violation::ExponentNotOdd { m: *m });
            }
        }
        InitialProfile::Quadratic { nu, .. } => {
            if !nu.is_finite() {
                out.push(Violation::NonFinite { name: "nu" });
            }
        }
        InitialProfile::Affine { .. } => {}
        InitialProfile::ScaledSeparable { eta, sigma, delta }
        | InitialProfile::ScaledSeparableTilde { eta, sigma, delta } => {
            nonzero("eta", *eta, &mut out);
            let matches_phi = match spec.phi {
                SourceShape::ScaledSeparable { sigma: s, delta: d, .. }
                | SourceShape::ScaledSeparableTilde { sigma: s, delta: d, .. } => s == *sigma && d == *delta,
                _ => true,
            };
            if !matches_phi {
                out.push(Violation::SeparableMismatch);
            }
            if let (FluxLaw::PowerLaw { .. }, SourceShape::ScaledSeparable { delta, scale, .. }
            | SourceShape::ScaledSeparableTilde { delta, scale, .. }) = (&spec.flux, &spec.phi)
            {
                positive("scale", *scale, &mut out);
                positive("delta", *delta, &mut out);
                positive("eta", *eta, &mut out);
            }
        }
    }

    if !tilde {
        let h0 = spec.h.eval(1e-12);
        let h0 = if h0.abs() < 1e-9 { 0.0 } else { h0 };
        if h0 != 0.0 || !h0.is_finite() {
            out.push(Violation::Compatibility { h_at_zero: h0 });
        }
    }

    let bound = spec.h.growth_bound();
    for x in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        if !bound.holds_at(&spec.h, x) {
            out.push(Violation::GrowthBound { x });
            break;
        }
    }
    out
}

pub fn ensure_valid(spec: &ProblemSpec) -> Result<()> {
    let v = validate(spec);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(v))
    }
}

/// Scalars derived from the data; absent fields do not apply to the spec.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DerivedParameters {
    /// σ = λ + νμ (φ₂) or the separable σ
    pub sigma: Option<f64>,
    /// δ = λ − νμ (φ₃) or the separable δ
    pub delta: Option<f64>,
    /// γ = λ_s ν δ (separable, linear law)
    pub gamma: Option<f64>,
    /// c = 2^{m−1} m η Γ(m/2) / √π (monomial profile)
    pub c: Option<f64>,
    /// p = (m − 1)/2 for odd m
    pub p: Option<u32>,
}

pub fn derive_parameters(spec: &ProblemSpec) -> DerivedParameters {
    let mut d = DerivedParameters::default();
    let nu = spec.flux.linear_nu();
    match spec.phi {
        SourceShape::NegSinh { lambda, mu } => d.sigma = nu.map(|nu| lambda + nu * mu),
        SourceShape::NegSin { lambda, mu } => d.delta = nu.map(|nu| lambda - nu * mu),
        SourceShape::ScaledSeparable { sigma, delta, scale }
        | SourceShape::ScaledSeparableTilde { sigma, delta, scale } => {
            d.sigma = Some(sigma);
            d.delta = Some(delta);
            d.gamma = nu.map(|nu| scale * nu * delta);
        }
        _ => {}
    }
    if let InitialProfile::Monomial { eta, m } = spec.h {
        if m > 0.0 {
            d.c = Some(flux_forcing_constant(eta, m));
        }
        d.p = spec.h.odd_exponent().map(|m| (m - 1) / 2);
    }
    d
}

/// c in V₀(t) = c t^{(m−1)/2} for h = ηx^m.
pub fn flux_forcing_constant(eta: f64, m: f64) -> f64 {
    2f64.powf(m - 1.0) * m * eta * specfun::gamma(m / 2.0) / std::f64::consts::PI.sqrt()
}

/// Data of the companion problem satisfied by v = u_x.
pub fn transform_to_tilde(spec: &ProblemSpec) -> Result<ProblemSpec> {
    if spec.variant != Variant::P {
        return Err(Error::Construction("transform expects a problem P spec".into()));
    }
    let phi = match spec.phi {
        SourceShape::LinearX { lambda } => SourceShape::Constant { value: lambda },
        SourceShape::NegSinh { lambda, mu } => SourceShape::NegCosh { lambda, mu: mu * lambda },
        SourceShape::NegSin { lambda, mu } => SourceShape::NegCos { lambda, mu: mu * lambda },
        SourceShape::ScaledSeparable { sigma, delta, scale } => {
            SourceShape::ScaledSeparableTilde { sigma, delta, scale }
        }
        SourceShape::ConstantOne => SourceShape::Constant { value: 0.0 },
        _ => return Err(Error::Construction("source shape is already a derivative".into())),
    };
    let h = match spec.h {
        InitialProfile::Monomial { eta, m } => InitialProfile::Monomial { eta: eta * m, m: m - 1.0 },
        InitialProfile::Quadratic { nu, a } => InitialProfile::Affine {
            slope: nu,
            intercept: a,
        },
        InitialProfile::ScaledSeparable { eta, sigma, delta } => {
            InitialProfile::ScaledSeparableTilde { eta, sigma, delta }
        }
        _ => return Err(Error::Construction("initial profile is already a derivative".into())),
    };
    Ok(ProblemSpec {
        phi,
        flux: spec.flux.clone(),
        h,
        variant: Variant::PTilde,
        neumann_scale: spec.phi.eval(0.0),
        closed_form: spec.closed_form,
    })
}

/// Inverse of [`transform_to_tilde`]: recovers Φ and h from Φ′, h′ and Φ(0),
/// using h(0) = 0.
pub fn antiderivative_spec(spec: &ProblemSpec) -> Result<ProblemSpec> {
    if spec.variant != Variant::PTilde {
        return Err(Error::Construction("expected a companion-problem spec".into()));
    }
    let phi = match spec.phi {
        SourceShape::Constant { value } if value == 0.0 && spec.neumann_scale == 1.0 => SourceShape::ConstantOne,
        SourceShape::Constant { value } if spec.neumann_scale == 0.0 => SourceShape::LinearX { lambda: value },
        SourceShape::NegCosh { lambda, mu } if spec.neumann_scale == 0.0 => {
            SourceShape::NegSinh { lambda, mu: mu / lambda }
        }
        SourceShape::NegCos { lambda, mu } if spec.neumann_scale == 0.0 => SourceShape::NegSin { lambda, mu: mu / lambda },
        SourceShape::ScaledSeparableTilde { sigma, delta, scale } if spec.neumann_scale == 0.0 => {
            SourceShape::ScaledSeparable { sigma, delta, scale }
        }
        _ => {
            return Err(Error::Construction(format!(
                "source shape {} has no antiderivative among the built-in families",
                spec.phi.kind_name()
            )))
        }
    };
    let h = match spec.h {
        InitialProfile::Monomial { eta, m } => InitialProfile::Monomial {
            eta: eta / (m + 1.0),
            m: m + 1.0,
        },
        InitialProfile::Affine { slope, intercept } => InitialProfile::Quadratic { nu: slope, a: intercept },
        InitialProfile::ScaledSeparableTilde { eta, sigma, delta } => {
            InitialProfile::ScaledSeparable { eta, sigma, delta }
        }
        _ => {
            return Err(Error::Construction(format!(
                "initial profile {} has no antiderivative among the built-in families",
                spec.h.kind_name()
            )))
        }
    };
    Ok(ProblemSpec {
        phi,
        flux: spec.flux.clone(),
        h,
        variant: Variant::P,
        neumann_scale: 0.0,
        closed_form: spec.closed_form,
    })
}

// ---------------------------------------------------------------------------
// JSON case schema

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<TimeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2: Option<TimeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<TimeFunction>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseJson {
    pub phi: PhiJson,
    pub flux: FluxJson,
    pub h: ProfileJson,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neumann_scale: Option<f64>,
}

fn default_variant() -> Variant {
    Variant::P
}

fn need(section: &str, name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("{section}.{name} is required")))
}

impl TryFrom<CaseJson> for ProblemSpec {
    type Error = Error;

    fn try_from(c: CaseJson) -> Result<Self> {
        let p = &c.phi;
        let phi = match p.kind.as_str() {
            "linear_x" => SourceShape::LinearX {
                lambda: need("phi", "lambda", p.lambda)?,
            },
            "neg_sinh" => SourceShape::NegSinh {
                lambda: need("phi", "lambda", p.lambda)?,
                mu: need("phi", "mu", p.mu)?,
            },
            "neg_sin" => SourceShape::NegSin {
                lambda: need("phi", "lambda", p.lambda)?,
                mu: need("phi", "mu", p.mu)?,
            },
            "neg_cosh" => SourceShape::NegCosh {
                lambda: need("phi", "lambda", p.lambda)?,
                mu: need("phi", "mu", p.mu)?,
            },
            "neg_cos" => SourceShape::NegCos {
                lambda: need("phi", "lambda", p.lambda)?,
                mu: need("phi", "mu", p.mu)?,
            },
            "scaled_separable" => SourceShape::ScaledSeparable {
                sigma: need("phi", "sigma", p.sigma)?,
                delta: need("phi", "delta", p.delta)?,
                scale: need("phi", "scale", p.scale)?,
            },
            "scaled_separable_tilde" => SourceShape::ScaledSeparableTilde {
                sigma: need("phi", "sigma", p.sigma)?,
                delta: need("phi", "delta", p.delta)?,
                scale: need("phi", "scale", p.scale)?,
            },
            "constant_one" => SourceShape::ConstantOne,
            "constant" => SourceShape::Constant {
                value: need("phi", "scale", p.scale)?,
            },
            other => return Err(Error::Config(format!("unknown phi.kind {other:?}"))),
        };
        let f = &c.flux;
        let flux = match f.kind.as_str() {
            "zero" => FluxLaw::Zero,
            "constant" => FluxLaw::Constant {
                nu: need("flux", "nu", f.nu)?,
            },
            "linear" => FluxLaw::Linear {
                nu: need("flux", "nu", f.nu)?,
            },
            "affine" => FluxLaw::Affine {
                f1: f.f1.clone().ok_or_else(|| Error::Config("flux.f1 is required".into()))?,
                f2: f.f2.clone().ok_or_else(|| Error::Config("flux.f2 is required".into()))?,
            },
            "power_law" => FluxLaw::PowerLaw {
                n: need("flux", "n", f.n)?,
                f: match (&f.f, f.nu) {
                    (Some(tf), _) => tf.clone(),
                    (None, Some(nu)) => TimeFunction::constant(nu),
                    (None, None) => TimeFunction::constant(1.0),
                },
            },
            other => return Err(Error::Config(format!("unknown flux.kind {other:?}"))),
        };
        let hj = &c.h;
        let (sep_sigma, sep_delta) = match phi {
            SourceShape::ScaledSeparable { sigma, delta, .. }
            | SourceShape::ScaledSeparableTilde { sigma, delta, .. } => (Some(sigma), Some(delta)),
            _ => (None, None),
        };
        let h = match hj.kind.as_str() {
            "monomial" => InitialProfile::Monomial {
                eta: need("h", "eta", hj.eta)?,
                m: need("h", "m", hj.m)?,
            },
            "quadratic" => InitialProfile::Quadratic {
                nu: hj
                    .eta
                    .or(f.nu)
                    .ok_or_else(|| Error::Config("h.eta or flux.nu is required for a quadratic profile".into()))?,
                a: hj.a.unwrap_or(0.0),
            },
            "affine" => InitialProfile::Affine {
                slope: need("h", "eta", hj.eta)?,
                intercept: hj.a.unwrap_or(0.0),
            },
            "scaled_separable" => InitialProfile::ScaledSeparable {
                eta: need("h", "eta", hj.eta)?,
                sigma: need("phi", "sigma", sep_sigma)?,
                delta: need("phi", "delta", sep_delta)?,
            },
            "scaled_separable_tilde" => InitialProfile::ScaledSeparableTilde {
                eta: need("h", "eta", hj.eta)?,
                sigma: need("phi", "sigma", sep_sigma)?,
                delta: need("phi", "delta", sep_delta)?,
            },
            other => return Err(Error::Config(format!("unknown h.kind {other:?}"))),
        };
        Ok(ProblemSpec {
            phi,
            flux,
            h,
            variant: c.variant,
            neumann_scale: c.neumann_scale.unwrap_or(0.0),
            closed_form: c.closed_form.unwrap_or(false),
        })
    }
}

impl From<&ProblemSpec> for CaseJson {
    fn from(s: &ProblemSpec) -> Self {
        let mut phi = PhiJson {
            kind: s.phi.kind_name().to_string(),
            ..Default::default()
        };
        match s.phi {
            SourceShape::LinearX { lambda } => phi.lambda = Some(lambda),
            SourceShape::NegSinh { lambda, mu }
            | SourceShape::NegSin { lambda, mu }
            | SourceShape::NegCosh { lambda, mu }
            | SourceShape::NegCos { lambda, mu } => {
                phi.lambda = Some(lambda);
                phi.mu = Some(mu);
            }
            SourceShape::ScaledSeparable { sigma, delta, scale }
            | SourceShape::ScaledSeparableTilde { sigma, delta, scale } => {
                phi.sigma = Some(sigma);
                phi.delta = Some(delta);
                phi.scale = Some(scale);
            }
            SourceShape::Constant { value } => phi.scale = Some(value),
            SourceShape::ConstantOne => {}
        }
        let mut flux = FluxJson {
            kind: s.flux.kind_name().to_string(),
            ..Default::default()
        };
        match &s.flux {
            FluxLaw::Zero => {}
            FluxLaw::Constant { nu } | FluxLaw::Linear { nu } => flux.nu = Some(*nu),
            FluxLaw::Affine { f1, f2 } => {
                flux.f1 = Some(f1.clone());
                flux.f2 = Some(f2.clone());
            }
            FluxLaw::PowerLaw { n, f } => {
                flux.n = Some(*n);
                flux.f = Some(f.clone());
            }
        }
        let mut h = ProfileJson {
            kind: s.h.kind_name().to_string(),
            ..Default::default()
        };
        match s.h {
            InitialProfile::Monomial { eta, m } => {
                h.eta = Some(eta);
                h.m = Some(m);
            }
            InitialProfile::Quadratic { nu, a } => {
                h.eta = Some(nu);
                h.a = Some(a);
            }
            InitialProfile::Affine { slope, intercept } => {
                h.eta = Some(slope);
                h.a = Some(intercept);
            }
            InitialProfile::ScaledSeparable { eta, .. } | InitialProfile::ScaledSeparableTilde { eta, .. } => {
                h.eta = Some(eta)
            }
        }
        CaseJson {
            phi,
            flux,
            h,
            variant: s.variant,
            closed_form: s.closed_form.then_some(true),
            neumann_scale: (s.neumann_scale != 0.0).then_some(s.neumann_scale),
        }
    }
}
