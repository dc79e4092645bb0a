//! Special functions: Gamma at half-integers, the error function and the
//! exponential moments `∫₀ᵗ τⁿ e^{aτ} dτ` used to integrate flux trajectories
//! in closed form.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// A positive integer or half-integer, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInteger(u32);

impl HalfInteger {
    /// `twice` is 2z; zero is rejected.
    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return domain("Gamma argument must be positive");
        }
        Ok(Self(twice))
    }

    pub fn from_f64(z: f64) -> Result<Self> {
        let twice = 2.0 * z;
        if !(z > 0.0) || twice.fract() != 0.0 || twice > u32::MAX as f64 {
            return domain(format!("{z} is not a positive integer or half-integer"));
        }
        Ok(Self(twice as u32))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }
}

/// Γ(z) for positive integers and half-integers, by upward recurrence from
/// Γ(1) = 1 or Γ(1/2) = √π. Each step multiplies the previous value once, so
/// `gamma_half(z + 1) == z * gamma_half(z)` bit for bit.
pub fn gamma_half(z: HalfInteger) -> f64 {
    let (mut acc, mut twice) = if z.is_integer() { (1.0, 2) } else { (PI.sqrt(), 1) };
    while twice < z.0 {
        acc *= twice as f64 / 2.0;
        twice += 2;
    }
    acc
}

/// Convenience wrapper over [`gamma_half`] taking a float argument.
pub fn gamma_half_f64(z: f64) -> Result<f64> {
    Ok(gamma_half(HalfInteger::from_f64(z)?))
}

/// Γ for arbitrary positive real arguments (used for non-integer exponents).
pub fn gamma(z: f64) -> f64 {
    match HalfInteger::from_f64(z) {
        Ok(h) => gamma_half(h),
        Err(_) => libm::tgamma(z),
    }
}

/// Conventional error function, `(2/√π)∫₀ˣ e^{-s²} ds`.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Coefficients of the finite-sum identity
/// `∫₀ᵗ τⁿ e^{aτ} dτ = e^{at} P(t) − K` for `a ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentExpansion {
    /// Ascending coefficients of `P`; degree `n`.
    pub poly: Vec<f64>,
    pub constant: f64,
}

impl MomentExpansion {
    pub fn new(n: u32, a: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return domain("moment expansion needs a finite non-zero rate");
        }
        let n_fact = factorial(n);
        // P_j = n!/j! (-1)^{n-j} / a^{n-j+1}
        let poly = (0..=n)
            .map(|j| {
                let k = n - j;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * n_fact / factorial(j) / a.powi(k as i32 + 1)
            })
            .collect();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(Self {
            poly,
            constant: sign * n_fact / a.powi(n as i32 + 1),
        })
    }

    pub fn eval(&self, a: f64, t: f64) -> f64 {
        (a * t).exp() * horner(&self.poly, t) - self.constant
    }
}

pub(crate) fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// `∫₀ᵗ τⁿ e^{aτ} dτ`.
///
/// Branches are chosen so every evaluated sum has terms of one sign, except
/// the finite-sum identity for `a·t > 40`, where its leading term dominates.
pub fn exp_moment(n: u32, a: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("exp_moment needs t > 0, got {t}"));
    }
    let np1 = n as f64 + 1.0;
    if a == 0.0 {
        return Ok(t.powf(np1) / np1);
    }
    let x = a * t;
    if a > 0.0 {
        if x <= 40.0 {
            // t^{n+1} Σ_j x^j / (j! (n+j+1))
            let mut term = 1.0;
            let mut sum = 1.0 / np1;
            let mut j = 0.0;
            loop {
                j += 1.0;
                term *= x / j;
                let add = term / (np1 + j);
                sum += add;
                if add <= sum * 1e-17 {
                    break;
                }
            }
            return Ok(t.powf(np1) * sum);
        }
        return Ok(MomentExpansion::new(n, a)?.eval(a, t));
    }
    let b = -a;
    if x.abs() < np1 {
        // lower incomplete gamma series: t^{n+1} e^{-bt} Σ_k (bt)^k / ((n+1)…(n+1+k))
        let y = -x;
        let mut term = 1.0 / np1;
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= y / (np1 + k);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        Ok(t.powf(np1) * (-y).exp() * sum)
    } else {
        // n!/b^{n+1} (1 − e^{-y} Σ_{k≤n} y^k/k!)
        let y = -x;
        let mut term = 1.0;
        let mut partial = 1.0;
        for k in 1..=n {
            term *= y / k as f64;
            partial += term;
        }
        Ok(factorial(n) / b.powf(np1) * (1.0 - (-y).exp() * partial))
    }
}

/// The finite-sum identity evaluated literally (for cross-checks).
pub fn exp_moment_finite_sum(n: u32, a: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("exp_moment needs t > 0, got {t}"));
    }
    Ok(MomentExpansion::new(n, a)?.eval(a, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn gamma_base_cases() {
        let sqrt_pi = PI.sqrt();
        assert_eq!(gamma_half_f64(0.5).unwrap(), sqrt_pi);
        assert_eq!(gamma_half_f64(1.0).unwrap(), 1.0);
        assert!((gamma_half_f64(1.5).unwrap() - sqrt_pi / 2.0).abs() <= 4.0 * f64::EPSILON);
        assert!((gamma_half_f64(2.5).unwrap() - 3.0 * sqrt_pi / 4.0).abs() <= 4.0 * f64::EPSILON * 1.33);
        assert_eq!(gamma_half_f64(5.0).unwrap(), 24.0);
        assert!((gamma_half_f64(3.5).unwrap() / (15.0 * sqrt_pi / 8.0) - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn gamma_rejects_bad_arguments() {
        assert!(gamma_half_f64(0.0).is_err());
        assert!(gamma_half_f64(-0.5).is_err());
        assert!(gamma_half_f64(0.75).is_err());
        assert!(HalfInteger::from_twice(0).is_err());
    }

    #[test]
    fn gamma_recurrence_is_bitwise() {
        for twice in 1..120u32 {
            let z = HalfInteger::from_twice(twice).unwrap();
            let z1 = HalfInteger::from_twice(twice + 2).unwrap();
            assert_eq!(gamma_half(z1), z.value() * gamma_half(z));
        }
    }

    #[test]
    fn gamma_matches_libm_elsewhere() {
        assert!((gamma(0.3) - libm::tgamma(0.3)).abs() < 1e-15);
        assert!((gamma(4.5) / libm::tgamma(4.5) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn erf_values() {
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(6.0) - 1.0).abs() <= 1e-15);
        assert!((erf(1.0) - 0.8427007929497149).abs() <= 1e-14);
        // independent oracle: Simpson on the defining integral
        let q = 2.0 / PI.sqrt() * simpson(|s| (-s * s).exp(), 0.0, 1.0, 2000);
        assert!((erf(1.0) - q).abs() <= 1e-13);
        assert!((erf(0.3) + erfc(0.3) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn exp_moment_examples() {
        assert_eq!(exp_moment(1, 0.0, 2.0).unwrap(), 2.0);
        assert!((exp_moment(0, 1.0, 1.0).unwrap() - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        let q = simpson(|s| s.powi(3) * (-2.0 * s).exp(), 0.0, 1.5, 4000);
        // Simpson with 4000 panels: error ~ 1e-15 here
        assert!((exp_moment(3, -2.0, 1.5).unwrap() - q).abs() <= 1e-10);
        assert!(exp_moment(2, 1.0, 0.0).is_err());
        assert!(exp_moment(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn exp_moment_branches_agree_at_crossovers() {
        for n in 0..8u32 {
            // a > 0 crossover at a t = 40
            let a = 4.0;
            let series = exp_moment(n, a, 10.0).unwrap();
            let closed = exp_moment_finite_sum(n, a, 10.0).unwrap();
            assert!((series / closed - 1.0).abs() < 1e-13, "n={n} {series} {closed}");
            // a < 0 crossover at |a| t = n + 1
            let a = -1.0;
            let t = n as f64 + 1.0;
            let lo = exp_moment(n, a, t - 1e-12).unwrap();
            let hi = exp_moment(n, a, t + 1e-12).unwrap();
            let slope = t.powi(n as i32) * (a * t).exp();
            assert!((hi - lo - 2e-12 * slope).abs() < 1e-13 * hi, "n={n} {lo} {hi}");
        }
    }

    #[test]
    fn tiny_rates_match_the_unperturbed_moment() {
        for n in 0..6u32 {
            let exact0 = 2f64.powi(n as i32 + 1) / (n as f64 + 1.0);
            for a in [1e-12, -1e-12, 1e-9, -1e-9] {
                let v = exp_moment(n, a, 2.0).unwrap();
                assert!((v / exact0 - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn finite_sum_identity_matches() {
        for (n, a, t) in [(2u32, 0.7, 3.0), (5, -1.3, 2.0), (0, 2.0, 1.0), (4, 50.0, 1.0)] {
            let s = exp_moment_finite_sum(n, a, t).unwrap();
            let m = exp_moment(n, a, t).unwrap();
            assert!((s - m).abs() <= 1e-10 * (1.0 + m.abs()), "{n} {a} {t}: {s} vs {m}");
        }
    }

    proptest! {
        #[test]
        fn exp_moment_matches_simpson(n in 0u32..7, a in -3.0f64..3.0, t in 0.05f64..3.0) {
            let exact = exp_moment(n, a, t).unwrap();
            let q = simpson(|s| s.powi(n as i32) * (a * s).exp(), 0.0, t, 2000);
            prop_assert!((exact - q).abs() <= 1e-10 * (1.0 + exact.abs()));
        }

        #[test]
        fn erf_is_odd_and_monotone(x in -8.0f64..8.0, dx in 1e-6f64..1.0) {
            prop_assert!((erf(x) + erf(-x)).abs() <= f64::EPSILON);
            prop_assert!(erf(x + dx) >= erf(x));
        }
    }
}
