mod common;

use common::shape;
use heatflux::problem::{InitialProfile, SourceShape};
use heatflux::volterra::{kernel_eval, solve_resolvent, solve_volterra, Forcing, Kernel};
use proptest::prelude::*;

#[test]
fn halving_the_step_quarters_the_error() {
    let k = Kernel::for_shape(&SourceShape::LinearX { lambda: 1.0 });
    let f = Forcing::for_profile(&InitialProfile::Monomial { eta: 1.0, m: 1.0 });
    let err = |n: usize| (solve_volterra(&k, &f, 1.0, 2.0, n).unwrap().eval(2.0) - (-2.0f64).exp()).abs();
    for n in [250, 500, 1000] {
        let ratio = err(n) / err(2 * n);
        assert!((3.5..=4.5).contains(&ratio), "n={n}: ratio {ratio}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn direct_and_resolvent_solvers_agree(phi in shape(), nu in 0.2..1.5f64, m in prop_oneof![Just(1.0), Just(3.0)]) {
        let k = Kernel::for_shape(&phi);
        let f = Forcing::for_profile(&InitialProfile::Monomial { eta: 1.0, m });
        let (coarse, fine) = (solve_volterra(&k, &f, nu, 2.0, 200).unwrap(), solve_volterra(&k, &f, nu, 2.0, 400).unwrap());
        let (res, res_fine) = (solve_resolvent(&k, &f, nu, 2.0, 200).unwrap(), solve_resolvent(&k, &f, nu, 2.0, 400).unwrap());
        for t in [0.5, 1.0, 2.0] {
            // Richardson estimates of each solver's order-2 discretisation error
            let bound = (4.0 / 3.0) * ((coarse.eval(t) - fine.eval(t)).abs() + (res.eval(t) - res_fine.eval(t)).abs()) + 1e-12;
            prop_assert!((res.eval(t) - coarse.eval(t)).abs() <= 5.0 * bound, "t={t}");
        }
    }

    #[test]
    fn quadrature_kernel_equals_analytic(phi in shape(), t in 0.01..5.0f64) {
        let analytic = kernel_eval(&Kernel::for_shape(&phi), t).unwrap();
        let quad = kernel_eval(&Kernel::Quadrature { shape: phi }, t).unwrap();
        prop_assert!((analytic - quad).abs() <= 1e-8 * analytic.abs().max(1.0), "{analytic} vs {quad}");
    }
}
