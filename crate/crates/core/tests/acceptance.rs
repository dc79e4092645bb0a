use std::path::PathBuf;
use std::time::{Duration, Instant};

use heatflux::asymptotics::{control_classification, control_probe_extended, numeric_limit_probe, LimitClass, DEFAULT_LADDER};
use heatflux::bench::{catalog_files, load_case, CaseFile};
use heatflux::closed_form::{flux_closed_form, solve_exact};
use heatflux::fd::{self, FarField, Grid1D, Reference, SolverOptions};
use heatflux::green::{baseline_u0, verify_identity_phi};
use heatflux::problem::{
    derive_parameters, transform_to_tilde, FluxLaw, InitialProfile, ProblemSpec, SourceShape, Variant,
};
use heatflux::volterra::{solve_volterra, Forcing, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, title: &str, pass: bool, detail: &str, elapsed: Duration) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {verdict} {title} ({detail}; {:.3} s)", elapsed.as_secs_f64());
}

fn catalog() -> Vec<CaseFile> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("catalog");
    catalog_files(&dir)
        .expect("catalog directory")
        .iter()
        .map(|p| load_case(p).expect("catalog case parses"))
        .collect()
}

fn integral_cases() -> Vec<(String, ProblemSpec)> {
    catalog()
        .into_iter()
        .filter_map(|c| {
            let spec = c.spec().ok()?;
            let odd = spec.h.odd_exponent().is_some();
            let shape = matches!(
                spec.phi,
                SourceShape::LinearX { .. } | SourceShape::NegSinh { .. } | SourceShape::NegSin { .. }
            );
            let linear = matches!(spec.flux, FluxLaw::Linear { .. });
            (odd && shape && linear && spec.variant == Variant::P).then_some((c.id, spec))
        })
        .collect()
}

fn monomial(spec: &ProblemSpec) -> (f64, u32) {
    match spec.h {
        InitialProfile::Monomial { eta, m } => (eta, m as u32),
        _ => panic!("monomial data expected"),
    }
}

/// R(s) for the three shapes, written out directly.
fn kernel_oracle(shape: &SourceShape, s: f64) -> f64 {
    match *shape {
        SourceShape::LinearX { lambda } => lambda,
        SourceShape::NegSinh { lambda, mu } => -lambda * mu * (lambda * lambda * s).exp(),
        SourceShape::NegSin { lambda, mu } => -lambda * mu * (-lambda * lambda * s).exp(),
        _ => unreachable!(),
    }
}

/// u_x(0,t) of the free heat polynomial for ηx^m: the t^p term with coefficient η m!/p!.
fn forcing_oracle(eta: f64, m: u32, t: f64) -> f64 {
    let p = (m - 1) / 2;
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    eta * fact(m) / fact(p) * t.powi(p as i32)
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn criterion_01_flux_closed_forms_solve_volterra() {
    let start = Instant::now();
    let times: Vec<f64> = (1..=50).map(|k| 0.1 * k as f64).collect();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (id, spec) in integral_cases() {
        let traj = flux_closed_form(&spec).unwrap_or_else(|e| panic!("{id}: {e}"));
        let nu = spec.flux.linear_nu().unwrap();
        let (eta, m) = monomial(&spec);
        for &t in &times {
            let conv = simpson(|tau| kernel_oracle(&spec.phi, t - tau) * traj.eval(tau), 0.0, t, 4000);
            let r = traj.eval(t) + nu * conv - forcing_oracle(eta, m, t);
            let scale = traj.eval(t).abs().max(forcing_oracle(eta, m, t).abs()).max(1.0);
            worst = worst.max(r.abs() / scale);
        }
        count += 1;
    }
    let elapsed = start.elapsed();
    let pass = count >= 12 && worst <= 1e-8;
    report(1, "closed-form flux solves the Volterra equation", pass, &format!("{count} cases, worst residual {worst:.2e}"), elapsed);
    assert!(pass);
}

#[test]
fn criterion_02_numeric_volterra_order_two() {
    let start = Instant::now();
    let kernel = Kernel::for_shape(&SourceShape::LinearX { lambda: 1.0 });
    let forcing = Forcing::for_profile(&InitialProfile::Monomial { eta: 1.0, m: 1.0 });
    let ns = [250usize, 500, 1000, 2000];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let v = solve_volterra(&kernel, &forcing, 1.0, 2.0, n).unwrap();
            (v.eval(2.0) - (-2.0f64).exp()).abs()
        })
        .collect();
    // halving the step each time
    let order = (errs[0] / errs[errs.len() - 1]).log2() / (errs.len() - 1) as f64;
    let elapsed = start.elapsed();
    let pass = (order - 2.0).abs() <= 0.3 && elapsed < Duration::from_secs(5);
    report(2, "numeric Volterra solver converges at order 2", pass, &format!("order {order:.3}, final error {:.2e}", errs[errs.len() - 1]), elapsed);
    assert!(pass);
}

#[test]
fn criterion_03_known_flux_limits() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for (id, spec) in integral_cases() {
        let (eta, m) = monomial(&spec);
        let nu = spec.flux.linear_nu().unwrap();
        let want = match spec.phi {
            SourceShape::LinearX { lambda } if m == 3 => 6.0 * eta / (nu * lambda),
            SourceShape::NegSin { lambda, .. } if m == 1 => match derive_parameters(&spec).delta {
                Some(d) if d > 0.0 => eta * lambda / d,
                _ => continue,
            },
            _ => continue,
        };
        let traj = flux_closed_form(&spec).unwrap();
        let probe = numeric_limit_probe(|t| traj.eval(t), &DEFAULT_LADDER);
        let ok = match probe.class {
            Some(LimitClass::Finite(v)) => (v - want).abs() <= 1e-3 * want.abs(),
            _ => false,
        };
        pass &= ok;
        lines.push(format!("{id}: {:?} vs {want:.6}", probe.class));
    }
    let elapsed = start.elapsed();
    pass &= lines.len() >= 2 && elapsed < Duration::from_secs(1);
    report(3, "flux limits 6η/(νλ) and ηλ/δ", pass, &lines.join(", "), elapsed);
    assert!(pass);
}

#[test]
fn criterion_04_short_time_flux() {
    let start = Instant::now();
    let mut worst_m1: f64 = 0.0;
    let mut worst_high: f64 = 0.0;
    let shapes = [
        SourceShape::LinearX { lambda: 1.0 },
        SourceShape::NegSinh { lambda: 0.5, mu: 0.25 },
        SourceShape::NegSin { lambda: 1.0, mu: 0.5 },
    ];
    for shape in &shapes {
        for m in [1.0, 3.0, 5.0, 7.0] {
            let eta = 1.5;
            let spec = ProblemSpec::new(shape.clone(), FluxLaw::Linear { nu: 1.0 }, InitialProfile::Monomial { eta, m });
            let v = flux_closed_form(&spec).unwrap().eval(1e-8);
            if m == 1.0 {
                worst_m1 = worst_m1.max((v - eta).abs() / eta);
            } else {
                worst_high = worst_high.max(v.abs());
            }
        }
    }
    let pass = worst_m1 <= 1e-6 && worst_high <= 1e-6;
    report(4, "t → 0⁺ flux values", pass, &format!("m=1 rel dev {worst_m1:.2e}, m>1 max {worst_high:.2e}"), start.elapsed());
    assert!(pass);
}

/// η Σ_k m!/(k!(m−2k)!) t^k x^{m−2k}
fn heat_polynomial(eta: f64, m: u32, x: f64, t: f64) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    (0..=m / 2)
        .map(|k| fact(m) / (fact(k) * fact(m - 2 * k)) * t.powi(k as i32) * x.powi((m - 2 * k) as i32))
        .sum::<f64>()
        * eta
}

#[test]
fn criterion_05_green_identities() {
    let start = Instant::now();
    let shapes = [
        SourceShape::LinearX { lambda: 1.0 },
        SourceShape::NegSinh { lambda: 0.5, mu: 0.25 },
        SourceShape::NegSin { lambda: 1.0, mu: 0.5 },
    ];
    let mut worst_phi: f64 = 0.0;
    for shape in &shapes {
        for x in [0.25, 1.0, 4.0] {
            for s in [0.25, 1.0, 4.0] {
                for tau in [0.0, 0.3] {
                    let c = verify_identity_phi(shape, x, s + tau, tau).unwrap();
                    worst_phi = worst_phi.max(c.diff / c.rhs.abs().max(1.0));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_h: f64 = 0.0;
    for m in [1u32, 3, 5, 7] {
        let h = InitialProfile::Monomial { eta: 0.8, m: f64::from(m) };
        for _ in 0..10 {
            let x = rng.gen_range(0.05..4.0);
            let t = rng.gen_range(0.05..2.0);
            let want = heat_polynomial(0.8, m, x, t);
            let got = baseline_u0(&h, x, t).unwrap();
            worst_h = worst_h.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_phi <= 1e-8 && worst_h <= 1e-8 && elapsed < Duration::from_secs(30);
    report(5, "Green identities for Φ and h", pass, &format!("Φ worst {worst_phi:.2e}, h worst {worst_h:.2e}"), elapsed);
    assert!(pass);
}

#[test]
fn criterion_06_baseline_cross_check() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_poly: f64 = 0.0;
    for m in [1u32, 3, 5, 7] {
        let h = InitialProfile::Monomial { eta: -1.2, m: f64::from(m) };
        for _ in 0..10 {
            let x = rng.gen_range(0.0..3.0);
            let t = rng.gen_range(0.01..2.0);
            let want = heat_polynomial(-1.2, m, x, t);
            worst_poly = worst_poly.max((baseline_u0(&h, x, t).unwrap() - want).abs() / want.abs().max(1.0));
        }
    }
    let (nu, a) = (0.7, -0.4);
    let h = InitialProfile::Quadratic { nu, a };
    let mut worst_quad: f64 = 0.0;
    for _ in 0..10 {
        let x: f64 = rng.gen_range(0.0..3.0);
        let t: f64 = rng.gen_range(0.01..2.0);
        let z = x / (2.0 * t.sqrt());
        let want = (0.5 * nu * x * x + nu * t) * libm::erf(z)
            + nu * x * (t / std::f64::consts::PI).sqrt() * (-z * z).exp()
            + a * x;
        worst_quad = worst_quad.max((baseline_u0(&h, x, t).unwrap() - want).abs() / want.abs().max(1.0));
    }
    let pass = worst_poly <= 1e-8 && worst_quad <= 1e-8;
    report(6, "quadrature u₀ against closed forms", pass, &format!("polynomial {worst_poly:.2e}, erf form {worst_quad:.2e}"), start.elapsed());
    assert!(pass);
}

#[test]
fn criterion_07_pde_residual_of_catalog_fields() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut refined = true;
    let mut count = 0;
    for case in catalog() {
        let Ok(field) = case.spec().and_then(|s| solve_exact(&s)) else { continue };
        let at = |delta: f64| {
            fd::pde_residual_samples(&field, 10, delta, 7, (0.1, 3.0), (0.1, 2.0))
                .iter()
                .map(|s| s.scaled.abs())
                .fold(0.0, f64::max)
        };
        refined &= at(1e-2) <= at(1e-1) + 1e-9;
        worst = worst.max(at(1e-3));
        count += 1;
    }
    let pass = worst <= 1e-6 && refined && count > 20;
    report(7, "PDE residual of exact fields", pass, &format!("{count} fields, worst scaled residual {worst:.2e}"), start.elapsed());
    assert!(pass);
}

#[test]
fn criterion_08_fd_against_exact() {
    let start = Instant::now();
    let specs = [
        ProblemSpec::new(SourceShape::LinearX { lambda: 1.0 }, FluxLaw::Linear { nu: 1.0 }, InitialProfile::Monomial { eta: 1.0, m: 1.0 }),
        ProblemSpec::new(SourceShape::NegSin { lambda: 1.0, mu: 0.5 }, FluxLaw::Linear { nu: 1.0 }, InitialProfile::Monomial { eta: 2.0, m: 1.0 }),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for spec in &specs {
        let field = solve_exact(spec).unwrap();
        let grid = Grid1D::new(8.0, 512, 1.0, 512, 0.5).unwrap();
        let sol = fd::solve(spec, grid, FarField::Manufactured(&field), SolverOptions::default()).unwrap();
        let err = fd::error_against(&sol, &field).max;
        let ladder = Grid1D::new(8.0, 128, 1.0, 128, 0.5).unwrap().ladder(3);
        let rep = fd::convergence_order(spec, &ladder, Reference::SelfFinest, FarField::Manufactured(&field), SolverOptions::default())
            .unwrap();
        pass &= err <= 5e-3 && rep.order_max >= 1.0;
        lines.push(format!("{}: err {err:.2e}, order {:.2}", spec.phi.kind_name(), rep.order_max));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    report(8, "finite differences against exact fields", pass, &lines.join(", "), elapsed);
    assert!(pass);
}

#[test]
fn criterion_09_control_classifications() {
    let start = Instant::now();
    let mut rows = 0;
    let mut failures = Vec::new();
    for case in catalog() {
        let Ok(spec) = case.spec() else { continue };
        for &x in case.probe_x.as_deref().unwrap_or(&[1.0]) {
            let Ok(table) = control_classification(&spec, x) else { continue };
            let [p0, pu, pr] = control_probe_extended(&spec, x, &DEFAULT_LADDER, 2).unwrap();
            let mut row = vec![("u0", Some(table.u0_limit), p0.class), ("u", Some(table.u_limit), pu.class)];
            if table.ratio_limit.is_some() {
                row.push(("u/u0", table.ratio_limit, pr.class));
            }
            rows += 1;
            for (name, want, got) in row {
                let ok = match (want, got) {
                    (Some(w), Some(g)) => g.matches(&w, 1e-3),
                    _ => false,
                };
                let verdict = if ok { "ok" } else { "MISMATCH" };
                println!("  {}@x={x} {name}: tabulated {} probe {} {verdict}", case.id, fmt(want), fmt(got));
                if !ok {
                    failures.push(format!("{}@x={x} {name}", case.id));
                }
            }
        }
    }
    let pass = rows > 0 && failures.is_empty();
    report(9, "tabulated control limits confirmed by probes", pass, &format!("{rows} rows, mismatches: [{}]", failures.join(", ")), start.elapsed());
    assert!(pass);
}

fn fmt(c: Option<LimitClass>) -> String {
    c.map(|c| c.to_string()).unwrap_or_else(|| "unclassified".into())
}

#[test]
fn criterion_10_companion_problem() {
    let start = Instant::now();
    let parent = ProblemSpec::new(SourceShape::LinearX { lambda: 1.0 }, FluxLaw::Linear { nu: 1.0 }, InitialProfile::Monomial { eta: 1.0, m: 1.0 });
    let pu = solve_exact(&parent).unwrap();
    let tilde = solve_exact(&transform_to_tilde(&parent).unwrap()).unwrap();
    let cd = |x: f64, t: f64, h: f64| (pu.u(x + h, t) - pu.u(x - h, t)) / (2.0 * h);
    let mut worst_v: f64 = 0.0;
    for i in 0..10 {
        let x = 0.2 + 0.35 * i as f64;
        let t = 0.1 + 0.2 * i as f64;
        let ux = (4.0 * cd(x, t, 5e-4) - cd(x, t, 1e-3)) / 3.0;
        worst_v = worst_v.max((tilde.u(x, t) - ux).abs() / ux.abs().max(1.0));
    }
    let k = 2.5;
    let constant = ProblemSpec::tilde(SourceShape::Constant { value: 1.0 }, FluxLaw::Zero, InitialProfile::Monomial { eta: k, m: 0.0 });
    let field = solve_exact(&constant).unwrap();
    let grid = Grid1D::new(4.0, 64, 1.0, 64, 0.5).unwrap();
    let sol = fd::solve(&constant, grid, FarField::Manufactured(&field), SolverOptions::default()).unwrap();
    let drift = sol
        .history
        .iter()
        .chain(std::iter::once(&sol.last))
        .flat_map(|f| f.values.iter())
        .map(|v| (v - k).abs())
        .fold(0.0, f64::max);
    let pass = worst_v <= 1e-8 && drift <= 64.0 * f64::EPSILON * k;
    report(10, "companion problem", pass, &format!("v − u_x worst {worst_v:.2e}, constant drift {drift:.2e}"), start.elapsed());
    assert!(pass);
}
