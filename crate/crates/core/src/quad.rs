//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
    /// Equal panels the interval is split into before adapting.
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_evals: 1_000_000,
            initial_panels: 4,
        }
    }
}

impl QuadOptions {
    pub fn tight() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            ..Self::default()
        }
    }

    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    /// part of `error` that bisection cannot remove
    floor: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(floor);
    }
    Panel {
        a,
        b,
        value,
        error,
        floor,
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    if b < a {
        let r = integrate(f, b, a, opts)?;
        return Ok(QuadResult {
            value: -r.value,
            ..r
        });
    }
    let panels = opts.initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(64);
    let mut evaluations = 0;
    let (mut value, mut error, mut floor) = (0.0, 0.0, 0.0);
    for i in 0..panels {
        let lo = a + i as f64 * width;
        let hi = if i + 1 == panels { b } else { lo + width };
        let p = gk15(&f, lo, hi);
        value += p.value;
        error += p.error;
        floor += p.floor;
        heap.push(p);
        evaluations += 15;
    }
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        // error made only of rounding floors cannot shrink further
        if error <= target || error <= 2.0 * floor {
            let value = heap.iter().map(|p| p.value).sum();
            return Ok(QuadResult {
                value,
                error,
                evaluations,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if evaluations + 30 > opts.max_evals || !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            let value = heap.iter().map(|p| p.value).sum();
            return Err(Error::Quadrature {
                estimate: value,
                error,
                tolerance: target,
                evaluations,
            });
        }
        let l = gk15(&f, worst.a, mid);
        let r = gk15(&f, mid, worst.b);
        value += l.value + r.value - worst.value;
        error += l.error + r.error - worst.error;
        floor += l.floor + r.floor - worst.floor;
        heap.push(l);
        heap.push(r);
        evaluations += 30;
    }
}

const GL10_X: [f64; 5] = [
    0.148874338981631210884826001129720,
    0.433395394129247190799265943165784,
    0.679409568299024406234327365114874,
    0.865063366688984510732096688423493,
    0.973906528517171720077964012084452,
];
const GL10_W: [f64; 5] = [
    0.295524224714752870173892994651338,
    0.269266719309996355091226921569469,
    0.219086362515982043995534934228163,
    0.149451349150580593145776339657697,
    0.066671344308688137593568809893332,
];

/// Nodes and weights of the 10-point Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre10_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (0..10).map(move |i| {
        let (x, w) = (GL10_X[i % 5], GL10_W[i % 5]);
        let x = if i < 5 { -x } else { x };
        (c + h * x, h * w)
    })
}

/// Fixed 10-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre10<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..5 {
        s += GL10_W[i] * (f(c - h * GL10_X[i]) + f(c + h * GL10_X[i]));
    }
    s * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert!((r.value - 8.0).abs() < 1e-14);
        assert!((gauss_legendre10(|x| x.powi(19), 0.0, 1.0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn peaked_integrand() {
        let r = integrate(|x| (-(x - 3.0).powi(2) * 100.0).exp(), 0.0, 10.0, &QuadOptions::tight()).unwrap();
        let exact = (std::f64::consts::PI / 100.0).sqrt();
        assert!((r.value - exact).abs() < 1e-13, "{}", r.value - exact);
    }

    #[test]
    fn reversed_and_empty_intervals() {
        let o = QuadOptions::default();
        assert_eq!(integrate(|x| x, 1.0, 1.0, &o).unwrap().value, 0.0);
        let r = integrate(|x| x, 1.0, 0.0, &o).unwrap();
        assert!((r.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let o = QuadOptions {
            abs_tol: 1e-30,
            rel_tol: 0.0,
            max_evals: 60,
            initial_panels: 1,
        };
        match integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, &o) {
            Err(Error::Quadrature { estimate, .. }) => assert!((estimate - 4.0 / 3.0).abs() < 1e-2),
            other => panic!("expected quadrature failure, got {other:?}"),
        }
    }
}
