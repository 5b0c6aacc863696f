//! Regime classification, parameter sweeps, manufactured-solution
//! convergence studies and absorbing-set checks.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{least_squares, DiagnosticsConfig};
use crate::error::{Error, Result};
use crate::grid::{make_grid, trapz, BcScheme, Field, Grid};
use crate::models::{mms_forcing, EquationSpec, ExactSolution, Model};
use crate::stepper::{integrate, RunOutcome, Scheme, StepControls};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Dissipative,
    BlowUp,
    Inconclusive,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Dissipative => "dissipative",
            Regime::BlowUp => "blow_up",
            Regime::Inconclusive => "inconclusive",
        }
    }
}

pub fn classify_run(outcome: &RunOutcome) -> Regime {
    match outcome {
        RunOutcome::Completed { .. } => Regime::Dissipative,
        RunOutcome::BlowUp { .. } => Regime::BlowUp,
        RunOutcome::Inconclusive { .. } => Regime::Inconclusive,
    }
}

/// Initial data. Smooth and rough profiles are multiplied by `(1 - x)` for
/// KdV so that `u_x(1) = 0` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    /// `amplitude * sin(pi (x + 1) / 2)`
    Sine { amplitude: f64 },
    /// `amplitude * sum_{m=1}^{16} c_m / m * sin(m pi (x + 1) / 2)`, with
    /// `c_m = 2 U_m - 1` and `U_m` the successive 53-bit uniform doubles of a
    /// SplitMix64 stream seeded with `seed`.
    Rough { amplitude: f64, seed: u64 },
    /// Explicit nodal values, boundary entries included.
    Nodal { values: Vec<f64> },
}

pub const ROUGH_MODES: usize = 16;

/// Coefficients `c_m / m` of the rough profile.
pub fn rough_coefficients(seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (1..=ROUGH_MODES).map(|m| (2.0 * rng.random::<f64>() - 1.0) / m as f64).collect()
}

pub fn initial_field(profile: &InitialProfile, model: Model, grid: Grid) -> Result<Field> {
    let ramp = |x: f64| if model.bc() == BcScheme::KdVMixed { 1.0 - x } else { 1.0 };
    let mut values = match profile {
        InitialProfile::Sine { amplitude } => grid.sample(|x| amplitude * ramp(x) * (PI * (x + 1.0) / 2.0).sin()),
        InitialProfile::Rough { amplitude, seed } => {
            let c = rough_coefficients(*seed);
            grid.sample(|x| {
                let s: f64 =
                    c.iter().enumerate().map(|(k, ck)| ck * ((k + 1) as f64 * PI * (x + 1.0) / 2.0).sin()).sum();
                amplitude * ramp(x) * s
            })
        }
        InitialProfile::Nodal { values } => return Field::new(grid, values.clone()),
    };
    // sin(m pi) is not exactly zero in floating point
    let n = grid.n_cells();
    values[0] = 0.0;
    values[n] = 0.0;
    Field::new(grid, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub p: f64,
    pub q: f64,
    pub amplitude: f64,
    pub regime: Regime,
    /// Detection time for blow-up cells, final-quarter sup-norm bound
    /// otherwise.
    pub t_detect_or_bound: f64,
    pub n_cells: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeMap {
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub amplitude_values: Vec<f64>,
    /// Ordered by p, then q, then amplitude.
    pub cells: Vec<CellResult>,
}

impl RegimeMap {
    pub fn cell(&self, p: f64, q: f64, amplitude: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.p == p && c.q == q && c.amplitude == amplitude)
    }
}

/// Largest sup-norm over the last quarter of the recorded times.
fn tail_bound(outcome: &RunOutcome) -> f64 {
    let s = outcome.series();
    let Some(sup) = s.get("Linf") else { return f64::NAN };
    let Some(&t_end) = s.times.last() else { return f64::NAN };
    s.times.iter().zip(sup).filter(|(t, _)| **t >= 0.75 * t_end).map(|(_, v)| *v).fold(0.0, f64::max)
}

/// Runs one cell and summarizes it.
pub fn run_cell(
    spec: &EquationSpec,
    profile: &InitialProfile,
    n_cells: usize,
    controls: &StepControls,
    diag: &DiagnosticsConfig,
) -> Result<RunOutcome> {
    let grid = make_grid(n_cells)?;
    let u0 = initial_field(profile, spec.model, grid)?;
    integrate(spec, &u0, controls, diag)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSetup {
    pub template: EquationSpec,
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub amplitude_values: Vec<f64>,
    pub n_cells: usize,
    pub controls: StepControls,
    pub diagnostics: DiagnosticsConfig,
    /// Worker threads; 1 runs sequentially.
    pub jobs: usize,
}

pub fn sweep(setup: &SweepSetup) -> Result<RegimeMap> {
    if setup.p_values.is_empty() || setup.q_values.is_empty() || setup.amplitude_values.is_empty() {
        return Err(Error::InvalidArgument("sweep axes must be nonempty".into()));
    }
    setup.template.validate()?;
    setup.controls.validate()?;
    let mut tuples = Vec::new();
    for &p in &setup.p_values {
        for &q in &setup.q_values {
            for &a in &setup.amplitude_values {
                tuples.push((p, q, a));
            }
        }
    }
    let run = |&(p, q, amplitude): &(f64, f64, f64)| -> CellResult {
        let mut spec = setup.template.clone();
        spec.p = p;
        spec.f = spec.f.with_exponent(q);
        let profile = InitialProfile::Sine { amplitude };
        let base = CellResult {
            p,
            q,
            amplitude,
            regime: Regime::Inconclusive,
            t_detect_or_bound: f64::NAN,
            n_cells: setup.n_cells,
            note: None,
        };
        match run_cell(&spec, &profile, setup.n_cells, &setup.controls, &setup.diagnostics) {
            Ok(outcome) => {
                let regime = classify_run(&outcome);
                let (value, note) = match &outcome {
                    RunOutcome::BlowUp { t_detect, reason, .. } => (*t_detect, Some(reason.name().to_string())),
                    RunOutcome::Inconclusive { note, .. } => (tail_bound(&outcome), Some(note.clone())),
                    RunOutcome::Completed { .. } => (tail_bound(&outcome), None),
                };
                CellResult { regime, t_detect_or_bound: value, note, ..base }
            }
            Err(e) => CellResult { note: Some(e.to_string()), ..base },
        }
    };
    let cells = if setup.jobs <= 1 {
        tuples.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(setup.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| tuples.par_iter().map(run).collect())
    };
    Ok(RegimeMap {
        p_values: setup.p_values.clone(),
        q_values: setup.q_values.clone(),
        amplitude_values: setup.amplitude_values.clone(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub model: Model,
    pub scheme: Scheme,
    /// Grid sizes; a single entry for temporal studies.
    pub resolutions: Vec<usize>,
    /// Step sizes of a temporal study, empty for spatial studies.
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// `None` when the errors sit at roundoff.
    pub order: Option<f64>,
}

const ROUNDOFF_ERROR: f64 = 1e-13;

/// Slope of `log(error)` against `log(size)`.
pub fn fitted_order(sizes: &[f64], errors: &[f64]) -> Option<f64> {
    if sizes.len() < 2 || sizes.len() != errors.len() || errors.iter().any(|e| !(*e > ROUNDOFF_ERROR)) {
        return None;
    }
    let pts: Vec<(f64, f64)> = sizes.iter().zip(errors).map(|(h, e)| (h.ln(), e.ln())).collect();
    Some(least_squares(&pts).0)
}

/// Discrete L2 distance between a field and the exact solution at time `t`.
fn l2_error(u: &Field, exact: &ExactSolution, t: f64) -> f64 {
    let g = u.grid();
    let sq: Vec<f64> = u.values().iter().enumerate().map(|(i, v)| (v - exact.value(t, g.x(i))).powi(2)).collect();
    trapz(g.h(), &sq).sqrt()
}

fn l2_distance(a: &Field, b: &Field) -> f64 {
    let sq: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).collect();
    trapz(a.grid().h(), &sq).sqrt()
}

fn mms_run(spec: &EquationSpec, exact: &ExactSolution, n_cells: usize, controls: &StepControls) -> Result<Field> {
    let mut forced = spec.clone();
    forced.g = mms_forcing(spec, *exact)?;
    let grid = make_grid(n_cells)?;
    let u0 = Field::from_fn(grid, |x| exact.value(0.0, x))?;
    let diag = DiagnosticsConfig { s_list: vec![], sobolev: vec![], kdv_energy: false, ..DiagnosticsConfig::default() };
    match integrate(&forced, &u0, controls, &diag)? {
        RunOutcome::Completed { final_field, .. } => Ok(final_field),
        other => Err(Error::InvalidArgument(format!(
            "manufactured-solution run at n_cells = {n_cells} ended as {}",
            other.label()
        ))),
    }
}

/// Spatial convergence of the manufactured solution `exact` at `controls.t_max`.
pub fn convergence_study(
    spec: &EquationSpec,
    exact: &ExactSolution,
    resolutions: &[usize],
    controls: &StepControls,
) -> Result<ConvergenceReport> {
    if resolutions.len() < 2 || resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("resolutions must be strictly increasing, at least two".into()));
    }
    let errors = resolutions
        .iter()
        .map(|&n| Ok(l2_error(&mms_run(spec, exact, n, controls)?, exact, controls.t_max)))
        .collect::<Result<Vec<f64>>>()?;
    let hs: Vec<f64> = resolutions.iter().map(|&n| 2.0 / n as f64).collect();
    Ok(ConvergenceReport {
        model: spec.model,
        scheme: controls.scheme,
        resolutions: resolutions.to_vec(),
        steps: Vec::new(),
        order: fitted_order(&hs, &errors),
        errors,
    })
}

/// Temporal convergence at fixed `n_cells`: fixed-step runs at each `dt`,
/// compared with a fixed-step reference at `dt_ref`.
pub fn temporal_study(
    spec: &EquationSpec,
    exact: &ExactSolution,
    n_cells: usize,
    dts: &[f64],
    dt_ref: f64,
    controls: &StepControls,
) -> Result<ConvergenceReport> {
    if dts.len() < 2 || dts.windows(2).any(|w| w[1] >= w[0]) || !(dt_ref > 0.0 && dt_ref < dts[dts.len() - 1]) {
        return Err(Error::InvalidArgument("step sizes must decrease and exceed the reference step".into()));
    }
    let fixed = |dt: f64| StepControls {
        dt_init: dt,
        dt_min: dt.min(controls.dt_min),
        dt_max: dt,
        adaptive: false,
        record_every: controls.t_max,
        ..controls.clone()
    };
    let reference = mms_run(spec, exact, n_cells, &fixed(dt_ref))?;
    let errors = dts
        .iter()
        .map(|&dt| Ok(l2_distance(&mms_run(spec, exact, n_cells, &fixed(dt))?, &reference)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConvergenceReport {
        model: spec.model,
        scheme: controls.scheme,
        resolutions: vec![n_cells],
        steps: dts.to_vec(),
        order: fitted_order(dts, &errors),
        errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingReport {
    pub amplitudes: Vec<f64>,
    /// Largest L2 norm over the last quarter of each run.
    pub tail_l2: Vec<f64>,
    /// `(max - min) / (1 + max)` of `tail_l2`.
    pub spread: f64,
    pub common_bound: f64,
    pub passed: bool,
    pub failure: Option<String>,
}

pub const SPREAD_LIMIT: f64 = 0.05;

/// Runs every amplitude to `controls.t_max` and compares the long-time L2
/// levels. Passes when they agree within 5% or all stay below `common_bound`.
pub fn absorbing_set_check(
    spec: &EquationSpec,
    amplitudes: &[f64],
    n_cells: usize,
    controls: &StepControls,
    common_bound: f64,
) -> Result<AbsorbingReport> {
    if amplitudes.is_empty() {
        return Err(Error::InvalidArgument("need at least one amplitude".into()));
    }
    let diag = DiagnosticsConfig { s_list: vec![], sobolev: vec![], ..DiagnosticsConfig::for_spec(spec) };
    let mut tail_l2 = Vec::with_capacity(amplitudes.len());
    let mut failure = None;
    for &amplitude in amplitudes {
        let outcome = run_cell(spec, &InitialProfile::Sine { amplitude }, n_cells, controls, &diag)?;
        match &outcome {
            RunOutcome::Completed { series, .. } => {
                let t_end = *series.times.last().unwrap_or(&0.0);
                let l2 = series.get("L2").unwrap_or(&[]);
                let tail = series.times.iter().zip(l2).filter(|(t, _)| **t >= 0.75 * t_end).map(|(_, v)| *v);
                tail_l2.push(tail.fold(0.0, f64::max));
            }
            other => {
                failure.get_or_insert(format!("amplitude {amplitude} ended as {}", other.label()));
                tail_l2.push(f64::NAN);
            }
        }
    }
    let max = tail_l2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail_l2.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = (max - min) / (1.0 + max);
    let passed = failure.is_none() && (spread <= SPREAD_LIMIT || tail_l2.iter().all(|v| *v <= common_bound));
    Ok(AbsorbingReport { amplitudes: amplitudes.to_vec(), tail_l2, spread, common_bound, passed, failure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::NormSeries;
    use crate::stepper::BlowUpReason;

    fn series() -> NormSeries {
        let mut s = NormSeries::new(vec!["Linf".into()]);
        s.push(0.0, &[1.0]);
        s
    }

    #[test]
    fn classification_is_total() {
        let g = make_grid(8).unwrap();
        assert_eq!(
            classify_run(&RunOutcome::Completed { final_field: Field::zeros(g), series: series() }),
            Regime::Dissipative
        );
        let b = RunOutcome::BlowUp { t_detect: 3.2, t_est: None, reason: BlowUpReason::Threshold, series: series() };
        assert_eq!(classify_run(&b), Regime::BlowUp);
        let i = RunOutcome::Inconclusive { series: series(), note: String::new() };
        assert_eq!(classify_run(&i), Regime::Inconclusive);
    }

    #[test]
    fn observed_order_definition() {
        let o = fitted_order(&[2.0 / 64.0, 2.0 / 128.0], &[4e-3, 1e-3]).unwrap();
        assert!((o - 2.0).abs() < 1e-12);
        assert_eq!(fitted_order(&[0.1, 0.05], &[1e-17, 0.0]), None);
    }

    #[test]
    fn profiles_meet_boundary_conditions() {
        let g = make_grid(64).unwrap();
        for model in [Model::Burgers, Model::KuramotoSivashinsky, Model::KdV] {
            for p in [InitialProfile::Sine { amplitude: 3.0 }, InitialProfile::Rough { amplitude: 1.0, seed: 7 }] {
                let u = initial_field(&p, model, g).unwrap();
                assert_eq!(u.values()[0], 0.0);
                assert_eq!(u.values()[64], 0.0);
            }
        }
        let kdv = initial_field(&InitialProfile::Sine { amplitude: 1.0 }, Model::KdV, g).unwrap();
        // one-sided slope at x = 1 is O(h)
        assert!((kdv.values()[64] - kdv.values()[63]).abs() / g.h() < 0.1);
        assert!(initial_field(&InitialProfile::Nodal { values: vec![0.0; 3] }, Model::Burgers, g).is_err());
    }

    #[test]
    fn rough_coefficients_are_seeded() {
        let a = rough_coefficients(42);
        assert_eq!(a, rough_coefficients(42));
        assert_ne!(a, rough_coefficients(43));
        assert_eq!(a.len(), ROUGH_MODES);
        assert!(a.iter().enumerate().all(|(k, c)| c.abs() <= 1.0 / (k + 1) as f64));
    }

    #[test]
    fn single_cell_sweep_matches_direct_run() {
        let template = EquationSpec { a: 0.0, ..EquationSpec::new(Model::Burgers) };
        let controls = StepControls { t_max: 0.5, ..StepControls::default() };
        let setup = SweepSetup {
            template: template.clone(),
            p_values: vec![1.0],
            q_values: vec![1.0],
            amplitude_values: vec![1.0],
            n_cells: 32,
            controls: controls.clone(),
            diagnostics: DiagnosticsConfig::default(),
            jobs: 1,
        };
        let map = sweep(&setup).unwrap();
        assert_eq!(map.cells.len(), 1);
        let direct =
            run_cell(&template, &InitialProfile::Sine { amplitude: 1.0 }, 32, &controls, &DiagnosticsConfig::default())
                .unwrap();
        assert_eq!(map.cells[0].regime, classify_run(&direct));
        assert!(sweep(&SweepSetup { p_values: vec![], ..setup }).is_err());
    }

    #[test]
    fn zero_exact_solution_has_no_order() {
        let spec = EquationSpec::new(Model::Burgers);
        let c = StepControls { t_max: 0.1, ..StepControls::default() };
        let r = convergence_study(&spec, &ExactSolution::Zero, &[16, 32], &c).unwrap();
        assert!(r.errors.iter().all(|e| *e == 0.0));
        assert_eq!(r.order, None);
    }

    #[test]
    fn heat_absorbing_set() {
        let spec = EquationSpec { a: 0.0, ..EquationSpec::new(Model::Burgers) };
        let c = StepControls { t_max: 10.0, ..StepControls::default() };
        let r = absorbing_set_check(&spec, &[1.0], 64, &c, 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.tail_l2[0] < 1e-6);
    }
}
