//! Built-in acceptance suite, shared by `convdiss verify` and the
//! `acceptance` integration test.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;

use crate::diagnostics::{fit_dissipative, DiagnosticsConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    absorbing_set_check, classify_run, convergence_study, fitted_order, run_cell, temporal_study, InitialProfile,
    Regime, SPREAD_LIMIT,
};
use crate::grid::{diff_operator, make_grid, quad_trapz, BcScheme, Field};
use crate::models::{weighted_flux_residual, EquationSpec, ExactSolution, FSpec, Model};
use crate::stepper::{estimate_blowup_time, integrate, RunOutcome, Scheme, StepControls};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcceptanceOptions {
    /// Main resolution; criteria comparing two grids use `n_cells / 2` too.
    pub n_cells: usize,
    /// Criteria evaluated concurrently.
    pub jobs: usize,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self { n_cells: 256, jobs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("[{verdict}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "operator and quadrature accuracy"),
    (2, "heat eigenfunction decay"),
    (3, "manufactured-solution convergence"),
    (4, "burgers dichotomy"),
    (5, "convection ablation"),
    (6, "kuramoto-sivashinsky dichotomy"),
    (7, "cahn-hilliard dichotomy"),
    (8, "kdv dichotomy and smoothing"),
    (9, "blow-up time estimator"),
    (10, "weighted flux identity"),
];

/// Runs one criterion by id (1..=10).
pub fn run_criterion(id: u32, opts: &AcceptanceOptions) -> Result<CriterionResult> {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .ok_or_else(|| Error::InvalidArgument(format!("no criterion {id}")))?;
    let n = opts.n_cells;
    let outcome = match id {
        1 => operators(n),
        2 => heat_decay(n),
        3 => mms(),
        4 => burgers(n),
        5 => ablation(n),
        6 => ks(n),
        7 => ch(n),
        8 => kdv(n),
        9 => estimator(),
        _ => weighted_identity(),
    };
    Ok(match outcome {
        Ok((passed, detail)) => CriterionResult { id, name, passed, detail },
        Err(e) => CriterionResult { id, name, passed: false, detail: format!("error: {e}") },
    })
}

pub fn run_all(opts: &AcceptanceOptions) -> Vec<CriterionResult> {
    let run = |&(id, _): &(u32, &str)| run_criterion(id, opts).expect("known id");
    if opts.jobs <= 1 {
        return CRITERIA.iter().map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build() {
        Ok(pool) => pool.install(|| CRITERIA.par_iter().map(run).collect()),
        Err(_) => CRITERIA.iter().map(run).collect(),
    }
}

type Check = Result<(bool, String)>;

fn sine(amplitude: f64) -> InitialProfile {
    InitialProfile::Sine { amplitude }
}

fn signed(q: f64) -> FSpec {
    FSpec::SignedPower { c: 1.0, q }
}

fn abs(q: f64) -> FSpec {
    FSpec::AbsPower { c: 1.0, q }
}

fn run(spec: &EquationSpec, profile: &InitialProfile, n: usize, controls: &StepControls) -> Result<RunOutcome> {
    run_cell(spec, profile, n, controls, &DiagnosticsConfig::for_spec(spec))
}

fn until(t_max: f64) -> StepControls {
    StepControls { t_max, ..StepControls::default() }
}

fn describe(outcome: &RunOutcome) -> String {
    match outcome {
        RunOutcome::BlowUp { t_detect, reason, .. } => format!("blow_up at t={t_detect:.4e} ({})", reason.name()),
        other => other.label().to_string(),
    }
}

fn operators(n: usize) -> Check {
    let k = PI / 2.0;
    // u = sin(k(x+1)) + sin(3k(x+1))/4
    let deriv = |m: i32, x: f64| {
        let d = |w: f64| w.powi(m) * (w * (x + 1.0) + m as f64 * PI / 2.0).sin();
        d(k) + d(3.0 * k) / 4.0
    };
    let bc = [BcScheme::DirichletPair, BcScheme::DirichletPair, BcScheme::SimplySupported, BcScheme::SimplySupported];
    let mut passed = true;
    let mut parts = Vec::new();
    for order in 1..=4usize {
        let err = |cells: usize| -> Result<f64> {
            let g = make_grid(cells)?;
            let u = Field::from_fn(g, |x| deriv(0, x))?;
            let op = diff_operator(g, order, bc[order - 1])?;
            let mut out = vec![0.0; g.n_nodes()];
            op.apply_nodal(u.values(), &mut out);
            Ok((2..=cells - 2).map(|i| (out[i] - deriv(order as i32, g.x(i))).abs()).fold(0.0, f64::max))
        };
        let (coarse, fine) = (err(n / 2)?, err(n)?);
        let rate = (coarse / fine).log2();
        passed &= rate >= 1.8;
        parts.push(format!("D{order} order {rate:.3}"));
    }
    let g = make_grid(n)?;
    let q = quad_trapz(g, &g.sample(|x| (-x).exp()))?;
    let qerr = (q - (1f64.exp() - (-1f64).exp())).abs();
    passed &= qerr <= 1e-4;
    parts.push(format!("trapz error {qerr:.2e}"));
    Ok((passed, parts.join(", ")))
}

fn heat_decay(n: usize) -> Check {
    let spec = EquationSpec { a: 0.0, f: FSpec::Zero, ..EquationSpec::new(Model::Burgers) };
    let controls = StepControls { t_max: 1.0, tol: 1e-6, scheme: Scheme::Cnab2, ..StepControls::default() };
    let outcome = run(&spec, &sine(1.0), n, &controls)?;
    let RunOutcome::Completed { final_field, .. } = &outcome else {
        return Ok((false, describe(&outcome)));
    };
    let g = final_field.grid();
    let decay = (-(PI / 2.0).powi(2)).exp();
    let exact = g.sample(|x| decay * (PI * (x + 1.0) / 2.0).sin());
    let diff: Vec<f64> = final_field.values().iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).collect();
    let norm: Vec<f64> = exact.iter().map(|v| v * v).collect();
    let rel = (quad_trapz(g, &diff)? / quad_trapz(g, &norm)?).sqrt();
    Ok((rel <= 1e-3, format!("relative L2 error {rel:.3e}")))
}

fn mms() -> Check {
    let mut passed = true;
    let mut parts = Vec::new();
    for model in [Model::Burgers, Model::KuramotoSivashinsky, Model::CahnHilliard, Model::KdV] {
        let spec = EquationSpec {
            f: signed(1.0),
            lambda: if model == Model::KuramotoSivashinsky { 1.0 } else { 0.0 },
            ..EquationSpec::new(model)
        };
        let exact = if model == Model::KdV {
            ExactSolution::DecayingSineRamp { amplitude: 1.0, rate: 1.0, mode: 1 }
        } else {
            ExactSolution::DecayingSine { amplitude: 1.0, rate: 1.0, mode: 1 }
        };
        let space = convergence_study(
            &spec,
            &exact,
            &[64, 128, 256],
            &StepControls { t_max: 1.0, tol: 1e-8, ..StepControls::default() },
        )?;
        let order = space.order.unwrap_or(f64::NAN);
        passed &= (1.8..=2.2).contains(&order);
        let mut line = format!("{} space {order:.3}", model.name());
        for scheme in [Scheme::Euler1, Scheme::Cnab2] {
            let controls = StepControls { t_max: 0.5, scheme, ..StepControls::default() };
            let time = temporal_study(&spec, &exact, 64, &[0.02, 0.01, 0.005], 3.125e-4, &controls)?;
            let order = time.order.unwrap_or(f64::NAN);
            passed &= (order - scheme.order() as f64).abs() <= 0.3;
            line.push_str(&format!(" {} {order:.3}", scheme.name()));
        }
        parts.push(line);
    }
    Ok((passed, parts.join("; ")))
}

fn burgers(n: usize) -> Check {
    let base = EquationSpec::new(Model::Burgers);
    let diss = EquationSpec { p: 1.0, f: signed(1.0), ..base.clone() };
    let report = absorbing_set_check(&diss, &[1.0, 5.0, 20.0], n, &until(30.0), 0.0)?;
    let mut passed = report.failure.is_none() && report.spread <= SPREAD_LIMIT;
    let mut detail = match &report.failure {
        Some(f) => format!("absorbing check failed: {f}"),
        None => format!("spread {:.2e}", report.spread),
    };
    let blow = EquationSpec { p: 1.0, f: abs(2.0), ..base };
    let mut regimes = Vec::new();
    for cells in [n / 2, n] {
        let outcome = run(&blow, &sine(20.0), cells, &until(20.0))?;
        let early = matches!(outcome, RunOutcome::BlowUp { t_detect, .. } if t_detect < 5.0);
        passed &= early;
        regimes.push(classify_run(&outcome));
        detail.push_str(&format!(", n={cells} {}", describe(&outcome)));
    }
    passed &= regimes.windows(2).all(|w| w[0] == w[1]);
    Ok((passed, detail))
}

fn ablation(n: usize) -> Check {
    let base = EquationSpec { p: 1.0, f: FSpec::QuadraticK { k: 1.0 }, ..EquationSpec::new(Model::Burgers) };
    let heat = run(&EquationSpec { a: 0.0, ..base.clone() }, &sine(20.0), n, &until(20.0))?;
    let conv = run(&EquationSpec { a: 1.0, ..base }, &sine(20.0), n, &until(20.0))?;
    let passed = classify_run(&heat) == Regime::BlowUp && classify_run(&conv) == Regime::Dissipative;
    Ok((passed, format!("a=0 {}, a=1 {}", describe(&heat), describe(&conv))))
}

fn ks(n: usize) -> Check {
    let base = EquationSpec::new(Model::KuramotoSivashinsky);
    let diss = EquationSpec { p: 2.0, lambda: 4.0, f: signed(1.0), ..base.clone() };
    let outcome = run(&diss, &sine(20.0), n, &until(50.0))?;
    let mut passed = classify_run(&outcome) == Regime::Dissipative;
    let mut detail = format!("p=2 q=1 {}", describe(&outcome));
    let h1 = outcome.series().get("H1").unwrap_or(&[]);
    let bounded = !h1.is_empty() && h1.iter().all(|v| v.is_finite()) && fit_dissipative(outcome.series(), "H1").is_ok();
    passed &= bounded;
    let peak = h1.iter().copied().fold(0.0, f64::max);
    detail.push_str(&format!(" (H1 max {peak:.3e}, final {:.3e})", h1.last().copied().unwrap_or(f64::NAN)));
    let blow = EquationSpec { p: 1.0, f: abs(2.0), ..base };
    let controls = until(20.0);
    let outcome = run(&blow, &sine(20.0), n, &controls)?;
    passed &= matches!(outcome, RunOutcome::BlowUp { t_detect, .. } if t_detect < controls.t_max);
    detail.push_str(&format!(", p=1 q=2 {}", describe(&outcome)));
    Ok((passed, detail))
}

/// Strictly increasing with strictly increasing difference quotients.
fn increasing_convex(t: &[f64], y: &[f64]) -> bool {
    let slopes: Vec<f64> = t.windows(2).zip(y.windows(2)).map(|(t, y)| (y[1] - y[0]) / (t[1] - t[0])).collect();
    slopes.iter().all(|s| *s > 0.0) && slopes.windows(2).all(|w| w[1] > w[0])
}

fn ch(n: usize) -> Check {
    let base = EquationSpec::new(Model::CahnHilliard);
    let diss = EquationSpec { p: 2.0, f: signed(1.0), ..base.clone() };
    let outcome = run(&diss, &sine(2.0), n, &until(20.0))?;
    let mut passed = classify_run(&outcome) == Regime::Dissipative;
    let mut detail = format!("p=2 q=1 {}", describe(&outcome));
    let blow = EquationSpec { p: 1.0, f: abs(3.0), ..base };
    let outcome = run(&blow, &sine(2.0), n, &until(20.0))?;
    passed &= classify_run(&outcome) == Regime::BlowUp;
    detail.push_str(&format!(", p=1 q=3 {}", describe(&outcome)));
    let s = outcome.series();
    let m = s.get("ch_moment").unwrap_or(&[]);
    const TAIL: usize = 5;
    let convex = m.len() >= TAIL && increasing_convex(&s.times[s.len() - TAIL..], &m[m.len() - TAIL..]);
    passed &= convex;
    detail.push_str(if convex { ", moment tail increasing and convex" } else { ", moment tail not increasing-convex" });
    Ok((passed, detail))
}

fn kdv(n: usize) -> Check {
    let base = EquationSpec::new(Model::KdV);
    let smooth = EquationSpec { p: 2.0, f: signed(1.0), ..base.clone() };
    let rough = InitialProfile::Rough { amplitude: 1.0, seed: 20241016 };
    let controls = StepControls { t_max: 1.0, scheme: Scheme::Euler1, ..StepControls::default() };
    let diag = DiagnosticsConfig { sobolev: vec![3], ..DiagnosticsConfig::for_spec(&smooth) };
    let mut passed = true;
    let mut h3 = Vec::new();
    for cells in [n / 2, n] {
        let outcome = run_cell(&smooth, &rough, cells, &controls, &diag)?;
        passed &= classify_run(&outcome) == Regime::Dissipative;
        h3.push(outcome.series().last("H3").unwrap_or(f64::NAN));
    }
    let drift = (h3[0] - h3[1]).abs() / h3[1].abs();
    passed &= h3.iter().all(|v| v.is_finite()) && drift <= 0.2;
    let mut detail = format!("H3(t=1) {:.4e} / {:.4e}, drift {drift:.3}", h3[0], h3[1]);

    let blow = EquationSpec { p: 1.0, f: abs(2.0), ..base.clone() };
    let outcome = run(&blow, &sine(20.0), n, &until(20.0))?;
    passed &= classify_run(&outcome) == Regime::BlowUp;
    detail.push_str(&format!(", p=1 q=2 {}", describe(&outcome)));

    // Energy balance on a boundary-compatible bump with dense sampling, so
    // the time quadrature error stays below the spatial one.
    let controls = StepControls { t_max: 0.2, tol: 1e-9, record_every: 1e-4, ..StepControls::default() };
    let diag = DiagnosticsConfig { kdv_energy: true, ..DiagnosticsConfig::default() };
    let sizes = [64usize, 128];
    let mut worst = Vec::new();
    for cells in sizes {
        let u0 = Field::from_fn(make_grid(cells)?, |x| (1.0 - x * x).powi(4))?;
        let outcome = integrate(&base, &u0, &controls, &diag)?;
        let r = outcome.series().get("flux_residual").unwrap_or(&[]);
        worst.push(r.iter().filter(|v| v.is_finite()).fold(0.0, |a: f64, v| a.max(v.abs())));
    }
    let hs: Vec<f64> = sizes.iter().map(|&c| 2.0 / c as f64).collect();
    let order = fitted_order(&hs, &worst).unwrap_or(f64::NAN);
    passed &= order >= 1.0;
    detail.push_str(&format!(", energy-flux residual order {order:.3}"));
    Ok((passed, detail))
}

fn estimator() -> Check {
    let times: Vec<f64> = (1..=8).map(|k| 1.0 - 0.5f64.powi(k)).collect();
    let exact: Vec<(f64, f64)> = times.iter().map(|&t| (t, 1.0 / (1.0 - t))).collect();
    let t_exact = estimate_blowup_time(&exact, 1.0)?;
    let mut rng = SplitMix64::seed_from_u64(7);
    let noisy: Vec<(f64, f64)> =
        exact.iter().map(|&(t, y)| (t, y * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)))).collect();
    let t_noisy = estimate_blowup_time(&noisy, 1.0)?;
    let passed = (t_exact - 1.0).abs() <= 1e-12 && (t_noisy - 1.0).abs() <= 0.02;
    Ok((passed, format!("exact samples T={t_exact:.15}, 1% noise T={t_noisy:.5}")))
}

fn weighted_identity() -> Check {
    let sizes = [64usize, 128, 256];
    let residuals = sizes
        .iter()
        .map(|&cells| {
            let u = Field::from_fn(make_grid(cells)?, |x| (PI * (x + 1.0) / 2.0).sin())?;
            Ok(weighted_flux_residual(&u, 1.0, 1.0)?.abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let hs: Vec<f64> = sizes.iter().map(|&c| 2.0 / c as f64).collect();
    let order = fitted_order(&hs, &residuals).unwrap_or(f64::NAN);
    Ok((order >= 1.8, format!("order {order:.3}, residual at n=256 {:.3e}", residuals[2])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convexity_check() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert!(increasing_convex(&t, &[0.0, 1.0, 4.0, 9.0]));
        assert!(!increasing_convex(&t, &[0.0, 1.0, 2.0, 3.0]));
        assert!(!increasing_convex(&t, &[9.0, 4.0, 1.0, 0.0]));
    }

    #[test]
    fn unknown_criterion() {
        assert!(run_criterion(11, &AcceptanceOptions::default()).is_err());
    }

    #[test]
    fn fast_criteria_pass() {
        let opts = AcceptanceOptions::default();
        for id in [1, 9, 10] {
            let r = run_criterion(id, &opts).unwrap();
            assert!(r.passed, "{}", r.line());
        }
    }
}
