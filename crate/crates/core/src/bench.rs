//! Case pipeline behind the command-line driver: configs, checks, reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::asymptotics::{
    control_classification, control_probe_extended, derived_control, flux_initial_limit, flux_limit, initial_limit_probe,
    numeric_limit_probe, tabulated_flux_limit, ControlClassification, LimitClass, DEFAULT_LADDER,
};
use crate::closed_form::{baseline_u0_closed, flux_closed_form, flux_rate, guard_times, solve_exact, SolutionField};
use crate::error::{Error, Result};
use crate::fd::{self, FarField, Grid1D, Reference, SolverOptions, SourceTime};
use crate::green::{assemble_integral_representation, baseline_u0, AssemblyPath};
use crate::par;
use crate::problem::{antiderivative_spec, ensure_valid, CaseJson, FluxLaw, ProblemSpec, Variant};
use crate::volterra::{solve_volterra, volterra_residual, Forcing, Kernel};

/// Largest number of cases one sweep may expand to.
pub const MAX_SWEEP_CASES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// false for advisory records that do not enter the overall verdict
    pub gating: bool,
    pub note: String,
}

impl CheckRecord {
    fn compare(check: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let abs_diff = (lhs - rhs).abs();
        Self {
            check: check.into(),
            lhs,
            rhs,
            abs_diff,
            tolerance,
            pass: abs_diff <= tolerance,
            gating: true,
            note: String::new(),
        }
    }

    fn bound(check: &str, value: f64, tolerance: f64) -> Self {
        Self::compare(check, value, 0.0, tolerance)
    }

    fn classes(check: &str, observed: Option<LimitClass>, expected: LimitClass, rel: f64) -> Self {
        let pass = observed.map(|o| o.matches(&expected, rel)).unwrap_or(false);
        let lhs = observed.map(class_number).unwrap_or(f64::NAN);
        let rhs = class_number(expected);
        let abs_diff = if lhs.is_finite() && rhs.is_finite() {
            (lhs - rhs).abs()
        } else if pass {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            check: check.into(),
            lhs,
            rhs,
            abs_diff,
            tolerance: rel,
            pass,
            gating: true,
            note: format!(
                "{} vs {}",
                observed.map(|o| o.to_string()).unwrap_or_else(|| "unclassified".into()),
                expected
            ),
        }
    }

    fn advisory(mut self) -> Self {
        self.gating = false;
        self
    }

    fn failed(check: &str, note: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            abs_diff: f64::NAN,
            tolerance: 0.0,
            pass: false,
            gating: true,
            note: note.into(),
        }
    }
}

fn class_number(c: LimitClass) -> f64 {
    match c {
        LimitClass::Zero => 0.0,
        LimitClass::Finite(v) => v,
        LimitClass::PlusInfinity => f64::INFINITY,
        LimitClass::MinusInfinity => f64::NEG_INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub id: String,
    pub family: String,
    /// "generic" or "resonant" for the integral family
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    pub elapsed_ms: f64,
}

impl CaseResult {
    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| c.gating && !c.pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    #[serde(default = "FdConfig::default_length")]
    pub length: f64,
    #[serde(default = "FdConfig::default_n")]
    pub nx: usize,
    #[serde(default = "FdConfig::default_t_end")]
    pub t_end: f64,
    #[serde(default = "FdConfig::default_n")]
    pub nt: usize,
    #[serde(default = "FdConfig::default_theta")]
    pub theta: f64,
    /// max-norm tolerance, relative to max(1, max|u|)
    #[serde(default = "FdConfig::default_tolerance")]
    pub tolerance: f64,
}

impl FdConfig {
    fn default_length() -> f64 {
        8.0
    }
    fn default_n() -> usize {
        256
    }
    fn default_t_end() -> f64 {
        1.0
    }
    fn default_theta() -> f64 {
        0.5
    }
    fn default_tolerance() -> f64 {
        5e-3
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.length, self.nx, self.t_end, self.nt, self.theta)
    }
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            length: Self::default_length(),
            nx: Self::default_n(),
            t_end: Self::default_t_end(),
            nt: Self::default_n(),
            theta: Self::default_theta(),
            tolerance: Self::default_tolerance(),
        }
    }
}

/// A catalog entry: an id, the problem, and optional check settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub case: CaseJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd: Option<FdConfig>,
    /// points at which limit classes are probed
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_x: Option<Vec<f64>>,
}

impl CaseFile {
    pub fn spec(&self) -> Result<ProblemSpec> {
        ProblemSpec::try_from(self.case.clone())
    }
}

/// Reads a case file; a bare problem object takes its id from the file stem.
pub fn load_case(path: &Path) -> Result<CaseFile> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    if value.get("case").is_some() {
        return Ok(serde_json::from_value(value)?);
    }
    Ok(CaseFile {
        id: file_stem(path),
        description: None,
        case: serde_json::from_value(value)?,
        fd: None,
        probe_x: None,
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "case".into())
}

/// Catalog files in a directory, sorted by name.
pub fn catalog_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub tol_scale: f64,
    pub slow_oracles: bool,
    /// skip the finite-difference cross-check
    pub skip_fd: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tol_scale: 1.0,
            slow_oracles: false,
            skip_fd: false,
        }
    }
}

fn family_name(spec: &ProblemSpec) -> String {
    let variant = match spec.variant {
        Variant::P => "p",
        Variant::PTilde => "p_tilde",
    };
    format!("{variant}/{}/{}/{}", spec.phi.kind_name(), spec.flux.kind_name(), spec.h.kind_name())
}

fn flux_branch(spec: &ProblemSpec) -> Option<String> {
    if !(spec.is_integral_family() && spec.variant == Variant::P) {
        return None;
    }
    let (_, resonant) = flux_rate(spec).ok()?;
    Some(if resonant { "resonant" } else { "generic" }.into())
}

/// Validates a case and runs every check that applies to its family.
pub fn run_case(case: &CaseFile, opts: &RunOptions) -> Result<CaseResult> {
    let spec = case.spec()?;
    ensure_valid(&spec)?;
    let start = Instant::now();
    let probe_x = case.probe_x.clone().unwrap_or_else(|| vec![1.0]);
    let fd_cfg = case.fd.unwrap_or_default();
    let checks = checks_for(&spec, opts, &probe_x, &fd_cfg);
    let pass = checks.iter().filter(|c| c.gating).all(|c| c.pass);
    Ok(CaseResult {
        id: case.id.clone(),
        family: family_name(&spec),
        branch: flux_branch(&spec),
        checks,
        pass,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn checks_for(spec: &ProblemSpec, opts: &RunOptions, probe_x: &[f64], fd_cfg: &FdConfig) -> Vec<CheckRecord> {
    let ts = opts.tol_scale;
    let mut out = Vec::new();
    let field = match solve_exact(spec) {
        Ok(f) => f,
        Err(e) => {
            out.push(CheckRecord::failed("exact_solution", e.to_string()).advisory());
            if !opts.skip_fd {
                out.push(self_convergence_check(spec, fd_cfg));
            }
            return out;
        }
    };
    let stationary = spec.variant == Variant::P && matches!(spec.flux, FluxLaw::Zero | FluxLaw::Constant { .. });
    out.push(residual_check(&field, ts));
    if stationary {
        let worst = probe_x
            .iter()
            .flat_map(|x| [0.5, 2.0, 10.0].map(|t| (field.u(*x, t) - spec.h.eval(*x)).abs()))
            .fold(0.0, f64::max);
        out.push(CheckRecord::bound("stationary", worst, 1e-12 * ts));
        out.extend(control_checks(spec, probe_x));
        return out;
    }
    if spec.variant == Variant::PTilde {
        out.extend(tilde_checks(spec, &field, ts));
    }
    if spec.is_integral_family() && spec.variant == Variant::P {
        out.extend(integral_checks(spec, &field, opts));
    }
    out.extend(control_checks(spec, probe_x));
    if !opts.skip_fd {
        out.push(fd_check(spec, &field, fd_cfg, ts));
    }
    out
}

fn residual_check(field: &SolutionField, ts: f64) -> CheckRecord {
    let samples = fd::pde_residual_samples(field, 20, 1e-3, 0x5EED, (0.05, 3.0), (0.05, 2.0));
    let worst = samples.iter().map(|s| s.scaled.abs()).fold(0.0, f64::max);
    CheckRecord::bound("pde_residual", worst, 1e-6 * ts)
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

fn integral_checks(spec: &ProblemSpec, field: &SolutionField, opts: &RunOptions) -> Vec<CheckRecord> {
    let ts = opts.tol_scale;
    let mut out = Vec::new();
    let traj = match flux_closed_form(spec) {
        Ok(t) => t,
        Err(e) => return vec![CheckRecord::failed("flux_closed_form", e.to_string())],
    };
    let nu = spec.flux.linear_nu().expect("linear law");
    let kernel = Kernel::for_shape(&spec.phi);
    let forcing = Forcing::for_profile(&spec.h);
    let times = guard_times();
    let vscale = max_abs(times.iter().map(|t| traj.eval(*t))).max(1.0);
    match volterra_residual(&traj, &kernel, &forcing, nu, &times) {
        Ok(r) => out.push(CheckRecord::bound("volterra_residual", r, 1e-8 * ts * vscale)),
        Err(e) => out.push(CheckRecord::failed("volterra_residual", e.to_string())),
    }
    let t_end = 2.0;
    match solve_volterra(&kernel, &forcing, nu, t_end, 2000) {
        Ok(num) => {
            let exact = traj.eval(t_end);
            out.push(CheckRecord::compare(
                "volterra_numeric",
                num.eval(t_end),
                exact,
                1e-5 * ts * exact.abs().max(1.0),
            ))
        }
        Err(e) => out.push(CheckRecord::failed("volterra_numeric", e.to_string())),
    }
    if let Ok(initial) = flux_initial_limit(spec) {
        let observed = initial_limit_probe(|t| traj.eval(t), 1e-8, 1e-6);
        out.push(CheckRecord::classes("flux_initial_limit", Some(observed), initial, 1e-6 * ts));
    }
    if let Ok(limit) = flux_limit(spec) {
        let probe = numeric_limit_probe(|t| traj.eval(t), &DEFAULT_LADDER);
        out.push(CheckRecord::classes("flux_limit", probe.class, limit, 1e-3 * ts));
        if let Ok(table) = tabulated_flux_limit(spec) {
            out.push(CheckRecord::classes("flux_limit_table", Some(table), limit, 1e-12).advisory());
        }
    }
    let (x, t) = (1.0, 1.0);
    let path = if opts.slow_oracles {
        AssemblyPath::Slow
    } else {
        AssemblyPath::Fast
    };
    let exact = field.u(x, t);
    match assemble_integral_representation(spec, x, t, &traj, path) {
        Ok(u) => out.push(CheckRecord::compare("green_assembly", u, exact, 1e-8 * ts * exact.abs().max(1.0))),
        Err(e) => out.push(CheckRecord::failed("green_assembly", e.to_string())),
    }
    if let (Ok(q), Some(c)) = (baseline_u0(&spec.h, x, t), baseline_u0_closed(&spec.h, x, t)) {
        out.push(CheckRecord::compare("baseline_u0", q, c, 1e-8 * ts * c.abs().max(1.0)));
    }
    out
}

fn tilde_checks(spec: &ProblemSpec, field: &SolutionField, ts: f64) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let worst_bc = max_abs([0.25, 0.5, 1.0, 2.0].iter().map(|t| {
        let v0 = field.u(0.0, *t);
        field.dx(1, 0.0, *t) - spec.neumann_data(v0, *t)
    }));
    out.push(CheckRecord::bound("neumann_condition", worst_bc, 1e-10 * ts));
    if let Ok(anti) = antiderivative_spec(spec) {
        if let Ok(parent) = solve_exact(&anti) {
            out.push(derivative_check(field, &parent, ts));
        }
    }
    out
}

/// max |v − u_x| with u_x from Richardson-extrapolated central differences of the parent field.
pub fn derivative_check(tilde: &SolutionField, parent: &SolutionField, ts: f64) -> CheckRecord {
    let d = 1e-3;
    let cd = |x: f64, t: f64, h: f64| (parent.u(x + h, t) - parent.u(x - h, t)) / (2.0 * h);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let x = 0.3 + 0.27 * i as f64;
        let t = 0.2 + 0.15 * i as f64;
        let ux = (4.0 * cd(x, t, d / 2.0) - cd(x, t, d)) / 3.0;
        worst = worst.max((tilde.u(x, t) - ux).abs() / tilde.u(x, t).abs().max(1.0));
    }
    CheckRecord::bound("v_equals_u_x", worst, 1e-8 * ts)
}

fn fd_check(spec: &ProblemSpec, field: &SolutionField, cfg: &FdConfig, ts: f64) -> CheckRecord {
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return CheckRecord::failed("fd_vs_exact", e.to_string()),
    };
    let opts = SolverOptions {
        source: SourceTime::Extrapolated,
        ..Default::default()
    };
    match fd::solve(spec, grid, FarField::Manufactured(field), opts) {
        Ok(sol) => {
            let err = fd::error_against(&sol, field);
            let dx = grid.dx();
            let scale = max_abs((0..=grid.nx).map(|i| field.u(i as f64 * dx, sol.last.t))).max(1.0);
            let mut r = CheckRecord::bound("fd_vs_exact", err.max, cfg.tolerance * ts * scale);
            r.note = format!("nx={} nt={} flux_err={:.3e}", grid.nx, grid.nt, err.flux_max);
            r
        }
        Err(e) => CheckRecord::failed("fd_vs_exact", e.to_string()),
    }
}

fn self_convergence_check(spec: &ProblemSpec, cfg: &FdConfig) -> CheckRecord {
    let base = Grid1D {
        length: cfg.length,
        nx: 32,
        t_end: cfg.t_end,
        nt: 16,
        theta: cfg.theta,
    };
    let far = FarField::ZeroDirichlet;
    match fd::convergence_order(spec, &base.ladder(4), Reference::SelfFinest, far, SolverOptions::default()) {
        Ok(rep) => {
            let mut r = CheckRecord::compare("fd_self_convergence", rep.order_max, 1.0, f64::INFINITY);
            r.pass = rep.order_max >= 0.9;
            r.note = format!("order_max={:.3} monotone={}", rep.order_max, rep.monotone);
            r
        }
        Err(e) => CheckRecord::failed("fd_self_convergence", e.to_string()),
    }
}

fn control_checks(spec: &ProblemSpec, probe_x: &[f64]) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for &x in probe_x {
        let (Ok(table), Ok(derived)) = (control_classification(spec, x), derived_control(spec, x)) else {
            return out;
        };
        let Ok([p0, pu, pr]) = control_probe_extended(spec, x, &DEFAULT_LADDER, 2) else {
            return out;
        };
        let tag = |s: &str| format!("{s}@x={x}");
        out.push(CheckRecord::classes(&tag("u0_limit"), p0.class, derived.u0_limit, 1e-3));
        out.push(CheckRecord::classes(&tag("u_limit"), pu.class, derived.u_limit, 1e-3));
        if let Some(r) = derived.ratio_limit {
            out.push(CheckRecord::classes(&tag("ratio_limit"), pr.class, r, 1e-3));
        }
        out.extend(table_records(&table, &derived, &tag));
    }
    out
}

/// Advisory comparison of the tabulated classification with the derived one.
pub fn table_records(
    table: &ControlClassification,
    derived: &ControlClassification,
    tag: &dyn Fn(&str) -> String,
) -> Vec<CheckRecord> {
    let mut out = vec![
        CheckRecord::classes(&tag("u0_limit_table"), Some(table.u0_limit), derived.u0_limit, 1e-10).advisory(),
        CheckRecord::classes(&tag("u_limit_table"), Some(table.u_limit), derived.u_limit, 1e-10).advisory(),
    ];
    match (table.ratio_limit, derived.ratio_limit) {
        (Some(t), Some(d)) => out.push(CheckRecord::classes(&tag("ratio_limit_table"), Some(t), d, 1e-10).advisory()),
        (None, Some(d)) => {
            let mut r = CheckRecord::failed(&tag("ratio_limit_table"), format!("no tabulated row; derived {d}"));
            r.gating = false;
            out.push(r);
        }
        _ => {}
    }
    out
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub id: String,
    pub base: Value,
    /// dotted path into `base` → values to substitute
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd: Option<FdConfig>,
}

fn value_order(a: &Value, b: &Value) -> std::cmp::Ordering {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => match (a.as_str(), b.as_str()) {
            (Some(x), Some(y)) => x.cmp(y),
            _ => a.to_string().cmp(&b.to_string()),
        },
    }
}

fn set_path(root: &mut Value, path: &str, v: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("sweep path {path} does not address an object")))?;
        if i + 1 == parts.len() {
            obj.insert((*key).to_string(), v);
            return Ok(());
        }
        cur = obj.entry((*key).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub params: Vec<(String, Value)>,
    pub case: Value,
}

/// Cartesian expansion in lexicographic parameter order; an empty grid expands to nothing.
pub fn expand_sweep(cfg: &SweepConfig) -> Result<Vec<SweepPoint>> {
    if cfg.grid.is_empty() || cfg.grid.values().any(|v| v.is_empty()) {
        return Ok(Vec::new());
    }
    let axes: Vec<(String, Vec<Value>)> = cfg
        .grid
        .iter()
        .map(|(k, vs)| {
            let mut vs = vs.clone();
            vs.sort_by(value_order);
            (k.clone(), vs)
        })
        .collect();
    let total = axes.iter().try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()));
    match total {
        Some(n) if n <= MAX_SWEEP_CASES => {}
        _ => return Err(Error::Config(format!("sweep expands to more than {MAX_SWEEP_CASES} cases"))),
    }
    let mut points = Vec::new();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let mut case = cfg.base.clone();
        let mut params = Vec::with_capacity(axes.len());
        for (a, (key, vals)) in axes.iter().enumerate() {
            set_path(&mut case, key, vals[idx[a]].clone())?;
            params.push((key.clone(), vals[idx[a]].clone()));
        }
        points.push(SweepPoint { params, case });
        // odometer, last axis fastest
        let mut a = axes.len();
        loop {
            if a == 0 {
                return Ok(points);
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < axes[a].1.len() {
                break;
            }
            idx[a] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub params: Vec<(String, Value)>,
    pub result: std::result::Result<CaseResult, String>,
}

pub fn run_sweep(cfg: &SweepConfig, opts: &RunOptions) -> Result<Vec<SweepRow>> {
    let points = expand_sweep(cfg)?;
    let rows = par::map(&points, |p| {
        let result = serde_json::from_value::<CaseJson>(p.case.clone())
            .map_err(Error::from)
            .and_then(|case| {
                let label = p
                    .params
                    .iter()
                    .map(|(k, v)| format!("{k}={}", compact(v)))
                    .collect::<Vec<_>>()
                    .join(",");
                let file = CaseFile {
                    id: format!("{}[{label}]", cfg.id),
                    description: None,
                    case,
                    fd: cfg.fd,
                    probe_x: None,
                };
                run_case(&file, opts)
            })
            .map_err(|e| e.to_string());
        SweepRow {
            params: p.params.clone(),
            result,
        }
    });
    Ok(rows)
}

fn compact(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

// ---------------------------------------------------------------------------
// convergence studies

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    #[default]
    Exact,
    SelfFinest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarFieldKind {
    #[default]
    Manufactured,
    Baseline,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub id: String,
    pub case: CaseJson,
    pub grid: FdConfig,
    #[serde(default = "ConvergenceConfig::default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub reference: ReferenceKind,
    #[serde(default)]
    pub far_field: FarFieldKind,
    #[serde(default)]
    pub extrapolated_source: bool,
    /// lower bound asserted on the fitted max-norm order
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_order: Option<f64>,
}

impl ConvergenceConfig {
    fn default_levels() -> usize {
        3
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceResult {
    pub id: String,
    pub report: fd::ConvergenceReport,
    pub pass: bool,
}

pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceResult> {
    let spec = ProblemSpec::try_from(cfg.case.clone())?;
    ensure_valid(&spec)?;
    let field = match cfg.reference {
        ReferenceKind::Exact => Some(solve_exact(&spec)?),
        ReferenceKind::SelfFinest => None,
    };
    let far_field_source = match cfg.far_field {
        FarFieldKind::Manufactured => Some(match &field {
            Some(f) => f.clone(),
            None => solve_exact(&spec)?,
        }),
        FarFieldKind::Baseline | FarFieldKind::Zero => None,
    };
    let far = match (&far_field_source, cfg.far_field) {
        (Some(f), _) => FarField::Manufactured(f),
        (None, FarFieldKind::Baseline) => FarField::Baseline,
        (None, _) => FarField::ZeroDirichlet,
    };
    let reference = match &field {
        Some(f) => Reference::Exact(f),
        None => Reference::SelfFinest,
    };
    let opts = SolverOptions {
        source: if cfg.extrapolated_source {
            SourceTime::Extrapolated
        } else {
            SourceTime::Lagged
        },
        ..Default::default()
    };
    let grids = cfg.grid.grid()?.ladder(cfg.levels);
    let report = fd::convergence_order(&spec, &grids, reference, far, opts)?;
    let pass = report.monotone && cfg.min_order.map(|m| report.order_max >= m).unwrap_or(true);
    Ok(ConvergenceResult {
        id: cfg.id.clone(),
        report,
        pass,
    })
}

// ---------------------------------------------------------------------------
// output

/// Round-trip formatting with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn case_csv(results: &[CaseResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case_id", "check", "lhs", "rhs", "abs_diff", "tolerance", "pass", "gating", "note"])?;
    for r in results {
        for c in &r.checks {
            w.write_record([
                r.id.as_str(),
                &c.check,
                &fmt_num(c.lhs),
                &fmt_num(c.rhs),
                &fmt_num(c.abs_diff),
                &fmt_num(c.tolerance),
                bool_str(c.pass),
                bool_str(c.gating),
                &c.note,
            ])?;
        }
    }
    finish(w)
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep_csv(cfg: &SweepConfig, rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = cfg.grid.keys().cloned().collect();
    header.extend(["family", "branch", "checks", "failed", "pass", "worst_check", "worst_ratio", "error"].map(String::from));
    w.write_record(&header)?;
    for row in rows {
        let mut rec: Vec<String> = row.params.iter().map(|(_, v)| compact(v)).collect();
        match &row.result {
            Ok(r) => {
                let worst = r
                    .checks
                    .iter()
                    .filter(|c| c.gating && c.tolerance > 0.0 && c.abs_diff.is_finite())
                    .map(|c| (c.check.as_str(), c.abs_diff / c.tolerance))
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                rec.push(r.family.clone());
                rec.push(r.branch.clone().unwrap_or_default());
                rec.push(r.checks.len().to_string());
                rec.push(r.failures().count().to_string());
                rec.push(bool_str(r.pass).into());
                rec.push(worst.map(|w| w.0.to_string()).unwrap_or_default());
                rec.push(worst.map(|w| fmt_num(w.1)).unwrap_or_default());
                rec.push(String::new());
            }
            Err(e) => {
                rec.extend(["", "", "0", "0", "false", "", ""].map(String::from));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn convergence_csv(res: &ConvergenceResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "dx", "dt", "err_max", "err_l2", "err_flux", "order_max", "order_l2", "order_flux"])?;
    for (i, row) in res.report.rows.iter().enumerate() {
        w.write_record([
            i.to_string(),
            fmt_num(row.dx),
            fmt_num(row.dt),
            fmt_num(row.errors.max),
            fmt_num(row.errors.l2),
            fmt_num(row.errors.flux_max),
            fmt_num(res.report.order_max),
            fmt_num(res.report.order_l2),
            fmt_num(res.report.order_flux),
        ])?;
    }
    finish(w)
}

/// Writes `{stem}.csv` and `{stem}.json` into `dir`.
pub fn write_outputs<T: Serialize>(dir: &Path, stem: &str, csv_text: &str, mirror: &T) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let safe: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    let csv_path = dir.join(format!("{safe}.csv"));
    let json_path = dir.join(format!("{safe}.json"));
    fs::write(&csv_path, csv_text)?;
    fs::write(&json_path, serde_json::to_string_pretty(mirror)? + "\n")?;
    Ok((csv_path, json_path))
}

/// Exit code for a configuration or input error.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code when any check fails.
pub const EXIT_FAILURE: i32 = 1;

pub fn exit_code(all_pass: bool) -> i32 {
    if all_pass {
        0
    } else {
        EXIT_FAILURE
    }
}
