//! Boundary flux trajectories V(t) = u_x(0,t).

use serde::Serialize;

use crate::specfun::{exp_moment, horner};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpTerm {
    pub amplitude: f64,
    pub rate: f64,
}

/// `base·tᵖ + scale·e^{bt}∫₀ᵗ τᵖe^{−bτ}dτ`, an equivalent form of the same
/// function that stays accurate when b is small.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentForm {
    pub base: f64,
    pub p: u32,
    pub scale: f64,
    pub rate: f64,
}

impl MomentForm {
    fn eval(&self, t: f64) -> f64 {
        self.base * t.powi(self.p as i32) + self.scale * scaled_moment(self.p, self.rate, t)
    }

    fn derivative(&self, t: f64) -> f64 {
        let p = self.p as i32;
        let dbase = if p == 0 { 0.0 } else { self.base * p as f64 * t.powi(p - 1) };
        dbase + self.scale * (t.powi(p) + self.rate * scaled_moment(self.p, self.rate, t))
    }

    /// e^{κt}∫₀ᵗ(·)e^{−κτ}dτ of this form.
    fn weighted(&self, kappa: f64, t: f64) -> f64 {
        let (pk, pb) = (scaled_moment(self.p, kappa, t), scaled_moment(self.p, self.rate, t));
        let rel = self.rate - kappa;
        if rel == 0.0 {
            return f64::NAN;
        }
        self.base * pk + self.scale / rel * (pb - pk)
    }
}

/// V(t) = Σ poly[k] t^k + Σ A_j e^{r_j t}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFlux {
    pub poly: Vec<f64>,
    pub exps: Vec<ExpTerm>,
    /// used for evaluation when present
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment: Option<MomentForm>,
}

impl ClosedFlux {
    pub fn new(poly: Vec<f64>, exps: Vec<ExpTerm>) -> Self {
        let mut poly = poly;
        while poly.len() > 1 && poly.last() == Some(&0.0) {
            poly.pop();
        }
        let exps = exps.into_iter().filter(|e| e.amplitude != 0.0).collect();
        Self { poly, exps, moment: None }
    }

    pub fn with_moment_form(mut self, form: MomentForm) -> Self {
        self.moment = Some(form);
        self
    }

    pub fn exponential(amplitude: f64, rate: f64) -> Self {
        Self::new(vec![], vec![ExpTerm { amplitude, rate }])
    }

    pub fn eval(&self, t: f64) -> f64 {
        if let (Some(m), true) = (&self.moment, t > 0.0) {
            return m.eval(t);
        }
        horner(&self.poly, t) + self.exps.iter().map(|e| e.amplitude * (e.rate * t).exp()).sum::<f64>()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if let (Some(m), true) = (&self.moment, t > 0.0) {
            return m.derivative(t);
        }
        let dpoly: Vec<f64> = self.poly.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        horner(&dpoly, t)
            + self
                .exps
                .iter()
                .map(|e| e.amplitude * e.rate * (e.rate * t).exp())
                .sum::<f64>()
    }

    /// Limit as t → 0⁺.
    pub fn initial_value(&self) -> f64 {
        if let Some(m) = &self.moment {
            return if m.p == 0 { m.base } else { 0.0 };
        }
        self.poly.first().copied().unwrap_or(0.0) + self.exps.iter().map(|e| e.amplitude).sum::<f64>()
    }

    /// `e^{κt} ∫₀ᵗ V(τ) e^{−κτ} dτ`, evaluated term by term in closed form.
    pub fn weighted_integral(&self, kappa: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if let Some(m) = &self.moment {
            return m.weighted(kappa, t);
        }
        // each term is folded back with e^{κt} separately to avoid overflow
        let mut acc = 0.0;
        for (k, c) in self.poly.iter().enumerate() {
            if *c != 0.0 {
                acc += c * scaled_moment(k as u32, kappa, t);
            }
        }
        for e in &self.exps {
            // e^{κt} ∫ e^{(r−κ)τ} = ∫₀ᵗ e^{r(t−s)} e^{κs} ds, finite either way
            let rel = e.rate - kappa;
            acc += e.amplitude * (kappa * t).exp() * exp_moment(0, rel, t).expect("t > 0");
        }
        acc
    }

    /// `∫₀ᵗ ρ e^{κ(t−τ)} V(τ) dτ`
    pub fn convolve_exponential(&self, rho: f64, kappa: f64, t: f64) -> f64 {
        rho * self.weighted_integral(kappa, t)
    }
}

/// `e^{κt} ∫₀ᵗ τⁿ e^{−κτ} dτ`, computed as `∫₀ᵗ (t−s)ⁿ e^{κs} ds` when κ > 0 would
/// otherwise overflow the prefactor.
fn scaled_moment(n: u32, kappa: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if kappa * t < -600.0 {
        // Σₖ C(n,k) t^{n−k} (−1)ᵏ ∫₀ᵗ sᵏ e^{κs} ds, led by its first term
        let mut acc = 0.0;
        let mut binom = 1.0;
        for k in 0..=n {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * t.powi((n - k) as i32) * exp_moment(k, kappa, t).expect("t > 0");
            binom *= (n - k) as f64 / (k + 1) as f64;
        }
        return acc;
    }
    let e = (kappa * t).exp();
    if e.is_finite() {
        e * exp_moment(n, -kappa, t).expect("t > 0")
    } else {
        f64::INFINITY
    }
}

/// Samples on a uniform grid tᵢ = i·h, interpolated linearly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFlux {
    pub step: f64,
    pub values: Vec<f64>,
}

impl SampledFlux {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| i as f64 * self.step)
    }

    pub fn t_end(&self) -> f64 {
        self.step * (self.values.len().saturating_sub(1)) as f64
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.values.is_empty() || t < 0.0 {
            return f64::NAN;
        }
        let pos = t / self.step;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return if (t - self.t_end()).abs() <= 1e-12 * self.t_end().max(1.0) {
                *self.values.last().unwrap()
            } else {
                f64::NAN
            };
        }
        let w = pos - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluxTrajectory {
    Closed(ClosedFlux),
    Sampled(SampledFlux),
}

impl FluxTrajectory {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FluxTrajectory::Closed(c) => c.eval(t),
            FluxTrajectory::Sampled(s) => s.eval(t),
        }
    }

    pub fn as_closed(&self) -> Option<&ClosedFlux> {
        match self {
            FluxTrajectory::Closed(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_sampled(&self) -> Option<&SampledFlux> {
        match self {
            FluxTrajectory::Sampled(s) => Some(s),
            _ => None,
        }
    }
}

impl From<ClosedFlux> for FluxTrajectory {
    fn from(c: ClosedFlux) -> Self {
        FluxTrajectory::Closed(c)
    }
}

impl From<SampledFlux> for FluxTrajectory {
    fn from(s: SampledFlux) -> Self {
        FluxTrajectory::Sampled(s)
    }
}
