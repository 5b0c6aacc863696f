//! IMEX time stepping with step-doubling error control, blow-up detection
//! and blow-up time estimation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{least_squares, DiagnosticsConfig, NormSeries, Recorder};
use crate::error::{Error, Result};
use crate::grid::{BandedLu, Field};
use crate::models::{EquationSpec, FSpec, SemiDiscrete};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// implicit/explicit Euler
    Euler1,
    /// Crank-Nicolson for `L`, second-order Adams-Bashforth for `N`
    Cnab2,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::Euler1 => 1,
            Scheme::Cnab2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler1 => "euler1",
            Scheme::Cnab2 => "cnab2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControls {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub tol: f64,
    pub safety: f64,
    pub t_max: f64,
    pub blowup_threshold: f64,
    pub record_every: f64,
    pub scheme: Scheme,
    /// With `false` every step uses `dt_init` and no error estimate is formed.
    pub adaptive: bool,
    /// Runs exceeding this many step attempts end as inconclusive.
    pub max_steps: usize,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_min: 1e-12,
            dt_max: 0.05,
            tol: 1e-6,
            safety: 0.9,
            t_max: 20.0,
            blowup_threshold: 1e8,
            record_every: 0.05,
            scheme: Scheme::Cnab2,
            adaptive: true,
            max_steps: 2_000_000,
        }
    }
}

impl StepControls {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        let all_finite = [self.dt_init, self.dt_min, self.dt_max, self.tol, self.safety, self.t_max, self.record_every]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return bad("step controls must be finite");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("need 0 < dt_min <= dt_init <= dt_max");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad("safety must lie in (0, 1]");
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blowup_threshold must be positive");
        }
        if !(self.t_max > 0.0) {
            return bad("t_max must be positive");
        }
        if !(self.record_every > 0.0) {
            return bad("record_every must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowUpReason {
    Threshold,
    DtCollapse,
    Overflow,
}

impl BlowUpReason {
    pub fn name(self) -> &'static str {
        match self {
            BlowUpReason::Threshold => "threshold",
            BlowUpReason::DtCollapse => "dt-collapse",
            BlowUpReason::Overflow => "overflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed {
        final_field: Field,
        series: NormSeries,
    },
    BlowUp {
        t_detect: f64,
        /// `None` when the tail fit failed.
        t_est: Option<f64>,
        reason: BlowUpReason,
        series: NormSeries,
    },
    Inconclusive {
        series: NormSeries,
        note: String,
    },
}

impl RunOutcome {
    pub fn series(&self) -> &NormSeries {
        match self {
            RunOutcome::Completed { series, .. }
            | RunOutcome::BlowUp { series, .. }
            | RunOutcome::Inconclusive { series, .. } => series,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunOutcome::Completed { .. } => "completed",
            RunOutcome::BlowUp { .. } => "blow_up",
            RunOutcome::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Implicit solves for one semi-discrete system, with factorizations cached
/// by the implicit shift.
#[derive(Debug, Clone)]
pub struct ImexStepper {
    sys: SemiDiscrete,
    scheme: Scheme,
    cache: HashMap<u64, BandedLu>,
}

const CACHE_LIMIT: usize = 32;

impl ImexStepper {
    pub fn new(spec: &EquationSpec, grid: crate::grid::Grid, scheme: Scheme) -> Result<Self> {
        Ok(Self { sys: SemiDiscrete::new(spec, grid)?, scheme, cache: HashMap::new() })
    }

    pub fn system(&self) -> &SemiDiscrete {
        &self.sys
    }

    pub fn nonlinear(&mut self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; u.len()];
        self.sys.nonlinear_into(u, t, &mut out)?;
        Ok(out)
    }

    fn factor(&mut self, shift: f64) -> Result<&BandedLu> {
        let key = shift.to_bits();
        if !self.cache.contains_key(&key) {
            if self.cache.len() >= CACHE_LIMIT {
                self.cache.clear();
            }
            let lu = BandedLu::shifted(self.sys.linear(), shift)?;
            self.cache.insert(key, lu);
        }
        Ok(&self.cache[&key])
    }

    /// One step from `u` with `nu = N(u, t)`. `history` holds the previous
    /// nonlinear evaluation and the step that led to `u`; CNAB2 without
    /// history falls back to Euler.
    pub fn step(&mut self, u: &[f64], nu: &[f64], history: Option<(&[f64], f64)>, dt: f64) -> Result<Vec<f64>> {
        let n = u.len() - 1;
        let mut rhs = vec![0.0; u.len()];
        let shift = match (self.scheme, history) {
            (Scheme::Cnab2, Some((prev, dt_prev))) => {
                let w = dt / dt_prev;
                let (c0, c1) = (1.0 + 0.5 * w, -0.5 * w);
                let mut lu = vec![0.0; n.saturating_sub(1)];
                self.sys.linear().mul_interior(&u[1..n], &mut lu);
                for i in 1..n {
                    rhs[i] = u[i] + 0.5 * dt * lu[i - 1] + dt * (c0 * nu[i] + c1 * prev[i]);
                }
                0.5 * dt
            }
            _ => {
                for i in 1..n {
                    rhs[i] = u[i] + dt * nu[i];
                }
                dt
            }
        };
        let lu = self.factor(shift)?;
        lu.solve_in_place(&mut rhs[1..n]);
        rhs[0] = 0.0;
        rhs[n] = 0.0;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow);
        }
        Ok(rhs)
    }
}

/// Single step of `scheme` from `(u, t)`; CNAB2 starts with an Euler step
/// since no earlier nonlinear evaluation exists.
pub fn step_imex(spec: &EquationSpec, u: &Field, t: f64, dt: f64, scheme: Scheme) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut st = ImexStepper::new(spec, u.grid(), scheme)?;
    let nu = st.nonlinear(u.values(), t)?;
    let next = st.step(u.values(), &nu, None, dt)?;
    Field::new(u.grid(), next)
}

/// Proposed next step before clamping.
fn raw_dt(err_rel: f64, dt: f64, order: u32, c: &StepControls) -> f64 {
    if err_rel <= 0.0 {
        return f64::INFINITY;
    }
    c.safety * dt * (c.tol / err_rel).powf(1.0 / (order as f64 + 1.0))
}

pub fn adapt_dt(err_rel: f64, dt: f64, order: u32, controls: &StepControls) -> f64 {
    raw_dt(err_rel, dt, order, controls).clamp(controls.dt_min, controls.dt_max)
}

pub fn detect_blowup(u: &Field, dt_proposed: f64, controls: &StepControls) -> Option<BlowUpReason> {
    let sup = u.values().iter().fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::NAN });
    if sup.is_nan() {
        Some(BlowUpReason::Overflow)
    } else if sup > controls.blowup_threshold {
        Some(BlowUpReason::Threshold)
    } else if dt_proposed < controls.dt_min {
        Some(BlowUpReason::DtCollapse)
    } else {
        None
    }
}

/// Fits `y^{-q} = m t + b` and returns the zero crossing `-b / m`.
pub fn estimate_blowup_time(samples: &[(f64, f64)], q_eff: f64) -> Result<f64> {
    if !(q_eff > 0.0) {
        return Err(Error::InvalidArgument(format!("q_eff must be positive, got {q_eff}")));
    }
    if samples.len() < 4 {
        return Err(Error::FitFailed(format!("need at least 4 samples, got {}", samples.len())));
    }
    if samples.iter().any(|(t, y)| !t.is_finite() || !(y.is_finite() && *y > 0.0)) {
        return Err(Error::FitFailed("samples must be finite with positive values".into()));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
        return Err(Error::FitFailed("tail is not monotonically increasing".into()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|(t, y)| (*t, y.powf(-q_eff))).collect();
    let (m, b) = least_squares(&pts);
    if !(m < 0.0) {
        return Err(Error::FitFailed("fitted slope is not negative".into()));
    }
    Ok(-b / m)
}

/// Exponent used to linearize the growth near blow-up.
pub fn effective_growth_exponent(spec: &EquationSpec) -> f64 {
    match spec.f {
        FSpec::SignedPower { q, .. } | FSpec::AbsPower { q, .. } => q,
        FSpec::QuadraticK { .. } | FSpec::Zero => 1.0,
    }
}

const TAIL_SAMPLES: usize = 8;

fn blowup_estimate(series: &NormSeries, q_eff: f64, t_detect: f64) -> Option<f64> {
    let sup = series.get("Linf")?;
    let mut start = sup.len().saturating_sub(1);
    while start > 0 && sup[start - 1] < sup[start] && sup.len() - start < TAIL_SAMPLES {
        start -= 1;
    }
    let tail: Vec<(f64, f64)> = series.times[start..].iter().copied().zip(sup[start..].iter().copied()).collect();
    estimate_blowup_time(&tail, q_eff).ok().map(|t| t.max(t_detect))
}

struct Trial {
    next: Vec<f64>,
    history: Vec<f64>,
    history_dt: f64,
    err: f64,
}

/// Integrates `u0` to `controls.t_max`. Errors are returned only for invalid
/// inputs; numerical failures end up in the outcome.
pub fn integrate(
    spec: &EquationSpec,
    u0: &Field,
    controls: &StepControls,
    diag: &DiagnosticsConfig,
) -> Result<RunOutcome> {
    spec.validate()?;
    controls.validate()?;
    let grid = u0.grid();
    let n = grid.n_cells();
    let edge_tol = 1e-12 * (1.0 + u0.sup_norm());
    if u0.values()[0].abs() > edge_tol || u0.values()[n].abs() > edge_tol {
        return Err(Error::BoundaryViolation(spec.bc().name()));
    }
    let mut recorder = Recorder::new(diag, spec)?;
    let mut series = recorder.empty_series();
    let mut stepper = ImexStepper::new(spec, grid, controls.scheme)?;
    let order = controls.scheme.order();
    let q_eff = effective_growth_exponent(spec);

    let mut t = 0.0;
    let mut u = u0.values().to_vec();
    let mut dt = controls.dt_init;
    let mut history: Option<(Vec<f64>, f64)> = None;
    series.push(t, &recorder.evaluate(t, u0)?);
    let mut last_recorded_sup = u0.sup_norm();
    let mut next_record = controls.record_every;
    let t_end = controls.t_max;
    let mut attempts = 0usize;

    let blowup = |series: NormSeries, t_detect: f64, reason: BlowUpReason| RunOutcome::BlowUp {
        t_est: blowup_estimate(&series, q_eff, t_detect),
        t_detect,
        reason,
        series,
    };

    while t < t_end * (1.0 - 1e-14) {
        attempts += 1;
        if attempts > controls.max_steps {
            return Ok(RunOutcome::Inconclusive {
                series,
                note: format!("step limit {} reached at t = {t}", controls.max_steps),
            });
        }
        let h = dt.min(t_end - t);
        let hist = history.as_ref().map(|(v, d)| (v.as_slice(), *d));
        let trial = attempt(&mut stepper, &u, t, hist, h, controls.adaptive);
        let (accepted, proposal) = match trial {
            Ok(tr) if !controls.adaptive || tr.err <= controls.tol => {
                let p = if controls.adaptive { adapt_dt(tr.err, h, order, controls) } else { dt };
                (Some(tr), p)
            }
            Ok(tr) => (None, raw_dt(tr.err, h, order, controls)),
            Err(Error::Overflow) | Err(Error::SingularSystem { .. }) => (None, 0.25 * h),
            Err(e) => return Err(e),
        };
        let Some(tr) = accepted else {
            if !controls.adaptive || h <= controls.dt_min {
                let last = Field::new(grid, u.clone()).unwrap_or_else(|_| Field::zeros(grid));
                let reason = detect_blowup(&last, proposal, controls).unwrap_or(BlowUpReason::DtCollapse);
                let reason = if controls.adaptive { reason } else { BlowUpReason::Overflow };
                return Ok(blowup(series, t, reason));
            }
            dt = proposal.clamp(controls.dt_min, controls.dt_max);
            continue;
        };

        t += h;
        u = tr.next;
        history = Some((tr.history, tr.history_dt));
        dt = proposal;

        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !sup.is_finite() {
            return Ok(blowup(series, t, BlowUpReason::Overflow));
        }
        let field = Field::new(grid, u.clone())?;
        let threshold = sup > controls.blowup_threshold;
        let growth = (sup - last_recorded_sup).abs() > 0.1 * last_recorded_sup && sup.max(last_recorded_sup) > 1e-10;
        let finished = t >= t_end * (1.0 - 1e-14);
        if threshold || growth || finished || t >= next_record * (1.0 - 1e-12) {
            series.push(t, &recorder.evaluate(t, &field)?);
            last_recorded_sup = sup;
            while next_record <= t * (1.0 + 1e-12) {
                next_record += controls.record_every;
            }
        }
        if threshold {
            return Ok(blowup(series, t, BlowUpReason::Threshold));
        }
        if finished {
            if let Some(note) = growing_tail(&series, t_end) {
                return Ok(RunOutcome::Inconclusive { series, note });
            }
            return Ok(RunOutcome::Completed { final_field: field, series });
        }
    }
    let final_field = Field::new(grid, u)?;
    Ok(RunOutcome::Completed { final_field, series })
}

fn attempt(
    st: &mut ImexStepper,
    u: &[f64],
    t: f64,
    history: Option<(&[f64], f64)>,
    dt: f64,
    adaptive: bool,
) -> Result<Trial> {
    let nu = st.nonlinear(u, t)?;
    if !adaptive {
        let next = st.step(u, &nu, history, dt)?;
        return Ok(Trial { next, history: nu, history_dt: dt, err: 0.0 });
    }
    let big = st.step(u, &nu, history, dt)?;
    let half = 0.5 * dt;
    let mid = st.step(u, &nu, history, half)?;
    let n_mid = st.nonlinear(&mid, t + half)?;
    let next = st.step(&mid, &n_mid, Some((&nu, half)), half)?;
    let diff = next.iter().zip(&big).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = 1.0 + next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Trial { next, history: n_mid, history_dt: half, err: diff / scale })
}

/// Note when the sup-norm grew more than tenfold over the last 10% of the run.
fn growing_tail(series: &NormSeries, t_end: f64) -> Option<String> {
    let sup = series.get("Linf")?;
    let start = series.times.iter().position(|&s| s >= 0.9 * t_end)?;
    let (first, last) = (sup[start], *sup.last()?);
    let first_ref = if start > 0 { sup[start - 1].min(first) } else { first };
    (last > 10.0 * first_ref && last > 1e-10)
        .then(|| format!("sup-norm grew from {first_ref:e} to {last:e} over the last 10% of the run"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{diff_operator, make_grid, BcScheme};
    use crate::models::Model;
    use std::f64::consts::PI;

    fn heat() -> EquationSpec {
        EquationSpec { a: 0.0, ..EquationSpec::new(Model::Burgers) }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = make_grid(32).unwrap();
        for scheme in [Scheme::Euler1, Scheme::Cnab2] {
            let u = step_imex(&EquationSpec::new(Model::KdV), &Field::zeros(g), 0.0, 0.01, scheme).unwrap();
            assert!(u.values().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn euler_step_on_discrete_eigenvector() {
        let g = make_grid(16).unwrap();
        let h = g.h();
        let mu = 4.0 / (h * h) * (PI * h / 4.0).sin().powi(2);
        let u = Field::from_fn(g, |x| (PI * (x + 1.0) / 2.0).sin()).unwrap();
        let dt = 0.01;
        let next = step_imex(&heat(), &u, 0.0, dt, Scheme::Euler1).unwrap();
        for (a, b) in next.values().iter().zip(u.values()) {
            assert!((a - b / (1.0 + dt * mu)).abs() < 1e-12);
        }
        // the eigenvalue itself
        let d2 = diff_operator(g, 2, BcScheme::DirichletPair).unwrap();
        let mut out = vec![0.0; g.n_nodes()];
        d2.apply_nodal(u.values(), &mut out);
        assert!((out[5] + mu * u.values()[5]).abs() < 1e-10);
    }

    #[test]
    fn controller_examples() {
        let c = StepControls { dt_max: 1.0, ..StepControls::default() };
        let dt = 1e-3;
        assert!((adapt_dt(c.tol, dt, 1, &c) - c.safety * dt).abs() < 1e-18);
        assert_eq!(adapt_dt(0.0, dt, 2, &c), c.dt_max);
        assert!((adapt_dt(16.0 * c.tol, dt, 1, &c) - c.safety * dt / 4.0).abs() < 1e-18);
        assert_eq!(adapt_dt(1e300, dt, 1, &c), c.dt_min);
    }

    #[test]
    fn detection_examples() {
        let g = make_grid(16).unwrap();
        let c = StepControls::default();
        let mut big = vec![0.0; 17];
        big[3] = 1e9;
        assert_eq!(detect_blowup(&Field::new(g, big).unwrap(), 1e-3, &c), Some(BlowUpReason::Threshold));
        let u = Field::from_fn(g, |x| 1.0 - x * x).unwrap();
        assert_eq!(detect_blowup(&u, 1e-13, &c), Some(BlowUpReason::DtCollapse));
        assert_eq!(detect_blowup(&u, 1e-3, &c), None);
    }

    #[test]
    fn estimator_examples() {
        let exact: Vec<(f64, f64)> = (0..10).map(|i| 0.5 + 0.05 * i as f64).map(|t| (t, 1.0 / (1.0 - t))).collect();
        assert!((estimate_blowup_time(&exact, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let sq: Vec<(f64, f64)> =
            (0..10).map(|i| 0.5 + 0.05 * i as f64).map(|t| (t, (2.0 * (1.0 - t)).powf(-0.5))).collect();
        assert!((estimate_blowup_time(&sq, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(estimate_blowup_time(&exact[..3], 1.0).is_err());
        let mut wobble = exact.clone();
        wobble[5].1 = wobble[2].1;
        assert!(matches!(estimate_blowup_time(&wobble, 1.0), Err(Error::FitFailed(_))));
    }

    #[test]
    fn zero_run_completes_with_zero_series() {
        let g = make_grid(32).unwrap();
        let c = StepControls { t_max: 0.5, ..StepControls::default() };
        let out = integrate(
            &EquationSpec::new(Model::KuramotoSivashinsky),
            &Field::zeros(g),
            &c,
            &DiagnosticsConfig::default(),
        )
        .unwrap();
        let RunOutcome::Completed { series, .. } = out else { panic!("{out:?}") };
        assert!(series.len() >= 10);
        assert!(series.columns.iter().flatten().all(|v| *v == 0.0));
        assert!((series.times.last().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn heat_eigenfunction_decay() {
        let g = make_grid(256).unwrap();
        let u0 = Field::from_fn(g, |x| (PI * (x + 1.0) / 2.0).sin()).unwrap();
        let c = StepControls { t_max: 1.0, ..StepControls::default() };
        let out = integrate(&heat(), &u0, &c, &DiagnosticsConfig::default()).unwrap();
        let RunOutcome::Completed { final_field, .. } = out else { panic!() };
        let decay = (-(PI / 2.0).powi(2)).exp();
        let err: f64 = final_field.values().iter().zip(u0.values()).map(|(a, b)| (a - decay * b).powi(2)).sum();
        let nrm: f64 = u0.values().iter().map(|b| (decay * b).powi(2)).sum();
        assert!((err / nrm).sqrt() < 1e-3, "{}", (err / nrm).sqrt());
    }

    #[test]
    fn bad_initial_data_is_rejected() {
        let g = make_grid(16).unwrap();
        let u0 = Field::from_fn(g, |_| 1.0).unwrap();
        assert!(integrate(&heat(), &u0, &StepControls::default(), &DiagnosticsConfig::default()).is_err());
        let c = StepControls { dt_min: 1.0, ..StepControls::default() };
        assert!(integrate(&heat(), &Field::zeros(g), &c, &DiagnosticsConfig::default()).is_err());
    }
}
