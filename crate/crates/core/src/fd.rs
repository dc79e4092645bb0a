//! θ-scheme finite differences for problem P (Dirichlet at 0) and the
//! companion problem (Neumann at 0) on a truncated interval [0, L].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::closed_form::{baseline_u0_closed, SolutionField};
use crate::error::{Error, Result};
use crate::flux::SampledFlux;
use crate::green::baseline_u0;
use crate::par;
use crate::problem::{ProblemSpec, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub length: f64,
    pub nx: usize,
    pub t_end: f64,
    pub nt: usize,
    pub theta: f64,
}

impl Grid1D {
    pub fn new(length: f64, nx: usize, t_end: f64, nt: usize, theta: f64) -> Result<Self> {
        if !(length > 0.0) || !(t_end > 0.0) {
            return Err(Error::Domain("grid length and t_end must be positive".into()));
        }
        if nx < 8 || nt < 1 {
            return Err(Error::Domain(format!("grid needs nx >= 8 and nt >= 1 (nx = {nx}, nt = {nt})")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Domain(format!("theta must lie in [0, 1], got {theta}")));
        }
        Ok(Self {
            length,
            nx,
            t_end,
            nt,
            theta,
        })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    /// Largest stable Δt for θ < 1/2.
    pub fn max_stable_dt(&self) -> Option<f64> {
        (self.theta < 0.5).then(|| self.dx().powi(2) / (2.0 * (1.0 - 2.0 * self.theta)))
    }

    pub fn check_stability(&self) -> Result<()> {
        match self.max_stable_dt() {
            Some(req) if self.dt() > req * (1.0 + 1e-12) => Err(Error::Stability { dt: self.dt(), required: req }),
            _ => Ok(()),
        }
    }

    /// Successive grids halving Δx; Δt follows Δx for θ ≥ 1/2 and Δx² otherwise.
    pub fn ladder(&self, levels: usize) -> Vec<Grid1D> {
        let quadratic = self.theta < 0.5;
        (0..levels)
            .map(|k| Grid1D {
                nx: self.nx << k,
                nt: if quadratic { self.nt << (2 * k) } else { self.nt << k },
                ..*self
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FarField<'a> {
    /// Dirichlet data taken from a reference solution
    Manufactured(&'a SolutionField),
    /// Dirichlet data from the free solution u₀ (quadrature when no closed form exists)
    Baseline,
    ZeroDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum SourceTime {
    /// F(Vⁿ, tⁿ)
    #[default]
    Lagged,
    /// (3Fⁿ − Fⁿ⁻¹)/2, an estimate at the half step
    Extrapolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum FluxStencil {
    /// (−3u₀ + 4u₁ − u₂)/(2Δx)
    #[default]
    SecondOrder,
    /// (u₁ − u₀)/Δx
    FirstOrder,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverOptions {
    pub source: SourceTime,
    pub stencil: FluxStencil,
    /// keep every k-th time level in the history (0 keeps only the last)
    pub record_every: usize,
}

/// Nodal values at one time level plus the coupling value there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteField {
    pub step: usize,
    pub t: f64,
    pub values: Vec<f64>,
    pub coupling: f64,
}

impl DiscreteField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct FdSolution {
    pub grid: Grid1D,
    pub history: Vec<DiscreteField>,
    pub last: DiscreteField,
    /// coupling value at every time level
    pub flux: SampledFlux,
}

/// Refuses homogeneous Dirichlet far fields for data that does not vanish there or grows.
pub fn check_far_field(spec: &ProblemSpec, grid: &Grid1D, far: &FarField) -> Result<()> {
    if let FarField::ZeroDirichlet = far {
        let l = grid.length;
        let h_l = spec.h.eval(l);
        let h_scale = (0..=16).map(|i| spec.h.eval(l * i as f64 / 16.0).abs()).fold(0.0, f64::max);
        if h_l.abs() > 1e-6 * h_scale.max(1e-300) {
            return Err(Error::Config(format!(
                "zero far-field data is inconsistent: h(L) = {h_l:e}; use the manufactured far field"
            )));
        }
        if spec.phi.growth_rate() > 0.0 || spec.h.growth_rate() > 0.0 {
            return Err(Error::Config(
                "zero far-field data is invalid for exponentially growing solutions; use the manufactured far field"
                    .into(),
            ));
        }
    }
    Ok(())
}

/// Thomas elimination for a tridiagonal system; `sub[0]` and `sup[n−1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = sup[0] / beta;
    rhs[0] /= beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / beta } else { 0.0 };
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Time stepper owning the scheme state.
pub struct Stepper<'a> {
    spec: &'a ProblemSpec,
    grid: Grid1D,
    far: FarField<'a>,
    opts: SolverOptions,
    phi: Vec<f64>,
    previous_source: Option<f64>,
    previous_neumann: Option<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: Grid1D, far: FarField<'a>, opts: SolverOptions) -> Result<Self> {
        grid.check_stability()?;
        check_far_field(spec, &grid, &far)?;
        let dx = grid.dx();
        let phi = (0..=grid.nx).map(|i| spec.phi.eval(i as f64 * dx)).collect();
        Ok(Self {
            spec,
            grid,
            far,
            opts,
            phi,
            previous_source: None,
            previous_neumann: None,
        })
    }

    pub fn initial(&self) -> DiscreteField {
        let dx = self.grid.dx();
        let mut values: Vec<f64> = (0..=self.grid.nx).map(|i| self.spec.h.eval(i as f64 * dx)).collect();
        if self.spec.variant == Variant::P {
            values[0] = 0.0;
        }
        values[self.grid.nx] = self.far_value(0.0).unwrap_or(values[self.grid.nx]);
        let coupling = self.coupling(&values);
        DiscreteField {
            step: 0,
            t: 0.0,
            values,
            coupling,
        }
    }

    /// u_x(0) for problem P, v(0) for the companion problem.
    pub fn coupling(&self, u: &[f64]) -> f64 {
        match self.spec.variant {
            Variant::PTilde => u[0],
            Variant::P => {
                let dx = self.grid.dx();
                match self.opts.stencil {
                    FluxStencil::SecondOrder => (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx),
                    FluxStencil::FirstOrder => (u[1] - u[0]) / dx,
                }
            }
        }
    }

    /// None leaves the initial value in place.
    fn far_value(&self, t: f64) -> Option<f64> {
        let l = self.grid.length;
        match self.far {
            FarField::Manufactured(r) => Some(r.u(l, t)),
            FarField::Baseline => {
                Some(baseline_u0_closed(&self.spec.h, l, t).unwrap_or_else(|| baseline_u0(&self.spec.h, l, t).unwrap_or(f64::NAN)))
            }
            FarField::ZeroDirichlet if t == 0.0 => None,
            FarField::ZeroDirichlet => Some(0.0),
        }
    }

    fn half_step_estimate(&self, now: f64, previous: Option<f64>) -> f64 {
        match (self.opts.source, previous) {
            (SourceTime::Extrapolated, Some(prev)) => 1.5 * now - 0.5 * prev,
            _ => now,
        }
    }

    /// One θ-step with the source evaluated from the lagged coupling value.
    pub fn step(&mut self, state: &DiscreteField) -> DiscreteField {
        let g = &self.grid;
        let (nx, dx, dt, theta) = (g.nx, g.dx(), g.dt(), g.theta);
        let r = dt / (dx * dx);
        let u = &state.values;
        let f_now = self.spec.flux.eval(state.coupling, state.t);
        let f_src = self.half_step_estimate(f_now, self.previous_source);
        self.previous_source = Some(f_now);
        let t_next = state.t + dt;
        let right = self.far_value(t_next).unwrap_or(0.0);

        let tilde = self.spec.variant == Variant::PTilde;
        // unknowns: i = 1..nx−1 for P, i = 0..nx−1 for the companion problem
        let first = if tilde { 0 } else { 1 };
        let n = nx - first;
        let mut sub = vec![-theta * r; n];
        let mut diag = vec![1.0 + 2.0 * theta * r; n];
        let mut sup = vec![-theta * r; n];
        let mut rhs = vec![0.0; n];
        for (k, i) in (first..nx).enumerate() {
            let left = if i == 0 { f64::NAN } else { u[i - 1] };
            let lap = if i == 0 { 0.0 } else { left - 2.0 * u[i] + u[i + 1] };
            rhs[k] = u[i] + (1.0 - theta) * r * lap - dt * self.phi[i] * f_src;
        }
        if tilde {
            // ghost node v₋₁ = v₁ − 2Δx g
            let g_now = self.spec.neumann_data(state.coupling, state.t);
            let g_src = self.half_step_estimate(g_now, self.previous_neumann);
            self.previous_neumann = Some(g_now);
            sup[0] = -2.0 * theta * r;
            rhs[0] += (1.0 - theta) * r * (2.0 * u[1] - 2.0 * u[0] - 2.0 * dx * g_src);
            rhs[0] -= theta * r * 2.0 * dx * g_src;
        } else {
            // u₀ = 0
            rhs[0] += theta * r * 0.0;
        }
        rhs[n - 1] += theta * r * right;
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
        sub.clear();
        diag.clear();

        let mut values = vec![0.0; nx + 1];
        values[first..nx].copy_from_slice(&rhs);
        values[nx] = right;
        let coupling = self.coupling(&values);
        DiscreteField {
            step: state.step + 1,
            t: t_next,
            values,
            coupling,
        }
    }
}

pub fn solve(spec: &ProblemSpec, grid: Grid1D, far: FarField, opts: SolverOptions) -> Result<FdSolution> {
    let mut stepper = Stepper::new(spec, grid, far, opts)?;
    let mut state = stepper.initial();
    let mut history = Vec::new();
    let mut flux = Vec::with_capacity(grid.nt + 1);
    flux.push(state.coupling);
    if opts.record_every > 0 {
        history.push(state.clone());
    }
    for n in 1..=grid.nt {
        state = stepper.step(&state);
        // the last level lands exactly on t_end
        if n == grid.nt {
            state.t = grid.t_end;
        }
        flux.push(state.coupling);
        if opts.record_every > 0 && n % opts.record_every == 0 {
            history.push(state.clone());
        }
    }
    Ok(FdSolution {
        grid,
        history,
        last: state,
        flux: SampledFlux {
            step: grid.dt(),
            values: flux,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub max: f64,
    pub l2: f64,
    /// max over time levels of the coupling error
    pub flux_max: f64,
}

/// Errors of an FD solution against an exact field at the final time level.
pub fn error_against(sol: &FdSolution, reference: &SolutionField) -> ErrorNorms {
    let dx = sol.grid.dx();
    let t = sol.last.t;
    let mut max: f64 = 0.0;
    let mut sq = 0.0;
    for (i, v) in sol.last.values.iter().enumerate() {
        let e = v - reference.u(i as f64 * dx, t);
        max = max.max(e.abs());
        sq += e * e * dx;
    }
    let flux_max = sol
        .flux
        .times()
        .zip(&sol.flux.values)
        .skip(1)
        .map(|(t, v)| (v - reference.flux(t)).abs())
        .fold(0.0, f64::max);
    ErrorNorms {
        max,
        l2: sq.sqrt(),
        flux_max,
    }
}

fn self_error(coarse: &FdSolution, fine: &FdSolution) -> ErrorNorms {
    let ratio = fine.grid.nx / coarse.grid.nx;
    let dx = coarse.grid.dx();
    let mut max: f64 = 0.0;
    let mut sq = 0.0;
    for (i, v) in coarse.last.values.iter().enumerate() {
        let e = v - fine.last.values[i * ratio];
        max = max.max(e.abs());
        sq += e * e * dx;
    }
    let flux_max = coarse
        .flux
        .times()
        .zip(&coarse.flux.values)
        .skip(1)
        .map(|(t, v)| (v - fine.flux.eval(t)).abs())
        .fold(0.0, f64::max);
    ErrorNorms {
        max,
        l2: sq.sqrt(),
        flux_max,
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Exact(&'a SolutionField),
    /// finest rung of the ladder
    SelfFinest,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderRow {
    pub dx: f64,
    pub dt: f64,
    pub errors: ErrorNorms,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<LadderRow>,
    pub order_max: f64,
    pub order_l2: f64,
    pub order_flux: f64,
    /// false when errors do not decrease monotonically along the ladder
    pub monotone: bool,
}

/// Least-squares slope of log y against log x.
pub fn fitted_order(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn convergence_order(
    spec: &ProblemSpec,
    grids: &[Grid1D],
    reference: Reference,
    far: FarField,
    opts: SolverOptions,
) -> Result<ConvergenceReport> {
    if grids.len() < 3 {
        return Err(Error::Domain(format!("need >= 3 grids, got {}", grids.len())));
    }
    let solutions: Vec<Result<FdSolution>> = par::map(grids, |g| solve(spec, *g, far, opts));
    let solutions = solutions.into_iter().collect::<Result<Vec<_>>>()?;
    let rows: Vec<LadderRow> = match reference {
        Reference::Exact(field) => solutions
            .iter()
            .map(|s| LadderRow {
                dx: s.grid.dx(),
                dt: s.grid.dt(),
                errors: error_against(s, field),
            })
            .collect(),
        Reference::SelfFinest => {
            let finest = solutions.last().expect("non-empty");
            if solutions.iter().any(|s| finest.grid.nx % s.grid.nx != 0) {
                return Err(Error::Domain("self-convergence needs nested grids".into()));
            }
            solutions[..solutions.len() - 1]
                .iter()
                .map(|s| LadderRow {
                    dx: s.grid.dx(),
                    dt: s.grid.dt(),
                    errors: self_error(s, finest),
                })
                .collect()
        }
    };
    let dxs: Vec<f64> = rows.iter().map(|r| r.dx).collect();
    let pick = |f: fn(&ErrorNorms) -> f64| rows.iter().map(|r| f(&r.errors)).collect::<Vec<f64>>();
    let max = pick(|e| e.max);
    let monotone = max.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceReport {
        order_max: fitted_order(&dxs, &max),
        order_l2: fitted_order(&dxs, &pick(|e| e.l2)),
        order_flux: fitted_order(&dxs, &pick(|e| e.flux_max)),
        monotone,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSample {
    pub x: f64,
    pub t: f64,
    /// Richardson-extrapolated residual divided by the local magnitude
    pub scaled: f64,
    pub coarse: f64,
    pub fine: f64,
}

/// Central-difference residual u_t − u_xx + Φ F(V, t), with V from a one-sided stencil at x = 0.
fn fd_residual(field: &SolutionField, x: f64, t: f64, d: f64) -> (f64, f64) {
    let u = |x: f64, t: f64| field.u(x, t);
    let ut = (u(x, t + d) - u(x, t - d)) / (2.0 * d);
    let uxx = (u(x + d, t) - 2.0 * u(x, t) + u(x - d, t)) / (d * d);
    let coupling = match field.spec().variant {
        Variant::P => (-3.0 * u(0.0, t) + 4.0 * u(d, t) - u(2.0 * d, t)) / (2.0 * d),
        Variant::PTilde => u(0.0, t),
    };
    let src = field.spec().source(x, coupling, t);
    (ut - uxx + src, ut.abs() + uxx.abs() + src.abs() + u(x, t).abs())
}

/// Extrapolated residual (4R(Δ/2) − R(Δ))/3 at one point.
pub fn pde_residual(field: &SolutionField, x: f64, t: f64, delta: f64) -> ResidualSample {
    let (coarse, scale) = fd_residual(field, x, t, delta);
    let (fine, _) = fd_residual(field, x, t, delta / 2.0);
    let ext = (4.0 * fine - coarse) / 3.0;
    ResidualSample {
        x,
        t,
        scaled: ext / scale.max(1.0),
        coarse,
        fine,
    }
}

/// Residual samples at `count` points of [x_lo, x_hi] × [t_lo, t_hi] drawn from a fixed seed.
pub fn pde_residual_samples(
    field: &SolutionField,
    count: usize,
    delta: f64,
    seed: u64,
    x_range: (f64, f64),
    t_range: (f64, f64),
) -> Vec<ResidualSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = rng.gen_range(x_range.0..x_range.1);
            let t = rng.gen_range(t_range.0..t_range.1);
            pde_residual(field, x, t, delta)
        })
        .collect()
}
