//! Functionals evaluated along trajectories: Lebesgue and exponentially
//! weighted norms, polynomial-weight moments, discrete Sobolev seminorms,
//! the KdV energy with its boundary-flux balance, and a crude fit of the
//! dissipative bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative_samples, trapz, BcScheme, Field};
use crate::models::{EquationSpec, FSpec, FluxForm, GSpec, Model};

/// Polynomial weights for the moment functional `\int u phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentSpec {
    /// `(eps^2 - x^2)^n` on `(-eps, eps)`, zero outside.
    PowerWeight { epsilon: f64, n: u32 },
    /// `(1 - x^2)(x^4 - 14 x^2 + 61)`.
    ChWeight,
}

impl Default for MomentSpec {
    fn default() -> Self {
        MomentSpec::PowerWeight { epsilon: 1.0, n: 4 }
    }
}

impl MomentSpec {
    pub fn weight(&self, x: f64) -> f64 {
        match *self {
            MomentSpec::PowerWeight { epsilon, n } => {
                if x.abs() < epsilon {
                    (epsilon * epsilon - x * x).powi(n as i32)
                } else {
                    0.0
                }
            }
            MomentSpec::ChWeight => ch_weight(x),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            MomentSpec::PowerWeight { epsilon, n } if !(epsilon > 0.0 && epsilon <= 1.0) || n == 0 => Err(
                Error::InvalidArgument(format!("power weight needs 0 < eps <= 1 and n >= 1, got eps={epsilon}, n={n}")),
            ),
            _ => Ok(()),
        }
    }
}

/// `-x^6 + 15 x^4 - 75 x^2 + 61`.
pub fn ch_weight(x: f64) -> f64 {
    let y = x * x;
    ((-y + 15.0) * y - 75.0) * y + 61.0
}

/// Second derivative of [`ch_weight`] from its expanded coefficients.
pub fn ch_weight_d2(x: f64) -> f64 {
    let y = x * x;
    (-30.0 * y + 180.0) * y - 150.0
}

/// Fourth derivative of [`ch_weight`].
pub fn ch_weight_d4(x: f64) -> f64 {
    -360.0 * x * x + 360.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSign {
    /// weight `e^{-Lx}`
    Plus,
    /// weight `e^{Lx}`
    Minus,
}

pub fn sup_norm(u: &Field) -> f64 {
    u.sup_norm()
}

fn check_exponent(s: f64) -> Result<()> {
    if s >= 1.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Lebesgue exponent must be >= 1, got {s}")))
    }
}

fn weighted_power_integral(u: &Field, s: f64, weight: impl Fn(f64) -> f64) -> f64 {
    let g = u.grid();
    let vals: Vec<f64> = u.values().iter().enumerate().map(|(i, v)| v.abs().powf(s) * weight(g.x(i))).collect();
    trapz(g.h(), &vals)
}

pub fn lebesgue_norm(u: &Field, s: f64) -> Result<f64> {
    check_exponent(s)?;
    Ok(weighted_power_integral(u, s, |_| 1.0).powf(1.0 / s))
}

pub fn weighted_norm(u: &Field, s: f64, l: f64, sign: WeightSign) -> Result<f64> {
    check_exponent(s)?;
    let rate = match sign {
        WeightSign::Plus => -l,
        WeightSign::Minus => l,
    };
    Ok(weighted_power_integral(u, s, |x| (rate * x).exp()).powf(1.0 / s))
}

/// `(|u_+|_{L^s(e^{-Lx})}, |u_-|_{L^s(e^{Lx})})`.
pub fn split_weighted_norm(u: &Field, s: f64, l: f64) -> Result<(f64, f64)> {
    check_exponent(s)?;
    let pos = Field::new(u.grid(), u.values().iter().map(|v| v.max(0.0)).collect())?;
    let neg = Field::new(u.grid(), u.values().iter().map(|v| v.min(0.0)).collect())?;
    Ok((weighted_norm(&pos, s, l, WeightSign::Plus)?, weighted_norm(&neg, s, l, WeightSign::Minus)?))
}

pub fn moment(u: &Field, spec: &MomentSpec) -> Result<f64> {
    spec.validate()?;
    let g = u.grid();
    let vals: Vec<f64> = u.values().iter().enumerate().map(|(i, v)| v * spec.weight(g.x(i))).collect();
    Ok(trapz(g.h(), &vals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelOrder {
    SecondOrder,
    FourthOrder,
}

/// Smallest integer power `n` for the weight `(eps^2 - x^2)^n` that keeps the
/// interior blow-up argument free of boundary singularities.
pub fn min_moment_order(kind: ModelOrder, p: f64, q: f64) -> Result<u32> {
    if !(q > 0.0) || !(q > p) {
        return Err(Error::InvalidArgument(format!("moment weight needs q > p and q > 0, got p={p}, q={q}")));
    }
    let up = |v: f64| (v - 1e-12).ceil().max(1.0) as u32;
    let mut n = up((q + 1.0) / (q - p)).max(up(2.0 * (q + 1.0) / q));
    if kind == ModelOrder::FourthOrder {
        let strict = (4.0 * (q + 1.0) / q + 1e-12).floor() as u32 + 1;
        n = n.max(strict);
    }
    Ok(n)
}

/// L2 norm of the discrete `k`-th derivative, with one-sided differences at
/// the boundary nodes.
pub fn sobolev_seminorm(u: &Field, k: usize, bc: BcScheme) -> Result<f64> {
    let d = derivative_samples(u, k, bc)?;
    let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
    Ok(trapz(u.grid().h(), &sq).sqrt())
}

/// `\int 1/2 |u_x|^2 + a/(p+2) |u|^{p+2}`.
fn kdv_energy_scaled(u: &Field, p: f64, a: f64) -> Result<f64> {
    let ux = derivative_samples(u, 1, BcScheme::KdVMixed)?;
    let dens: Vec<f64> =
        ux.iter().zip(u.values()).map(|(d, v)| 0.5 * d * d + a / (p + 2.0) * v.abs().powf(p + 2.0)).collect();
    Ok(trapz(u.grid().h(), &dens))
}

pub fn kdv_energy(u: &Field, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::InvalidArgument(format!("kdv energy needs p >= 0, got {p}")));
    }
    kdv_energy_scaled(u, p, 1.0)
}

/// `(E, u_xx(-1)^2 / 2, u_xx(1)^2 / 2)` for one snapshot.
fn kdv_balance_terms(u: &Field, p: f64, a: f64) -> Result<(f64, f64, f64)> {
    let uxx = derivative_samples(u, 2, BcScheme::KdVMixed)?;
    let n = uxx.len() - 1;
    Ok((kdv_energy_scaled(u, p, a)?, 0.5 * uxx[0] * uxx[0], 0.5 * uxx[n] * uxx[n]))
}

fn kdv_flux_applicable(spec: &EquationSpec) -> Result<()> {
    if spec.model != Model::KdV {
        return Err(Error::InvalidArgument("energy-flux residual needs the KdV model".into()));
    }
    if spec.f != FSpec::Zero || spec.g != GSpec::Zero || spec.flux_form != FluxForm::Signed {
        return Err(Error::InvalidArgument("energy-flux residual needs f = 0, g = 0 and the signed flux".into()));
    }
    Ok(())
}

/// Residual of `dE/dt + u_xx(-1)^2/2 - u_xx(1)^2/2 = 0` on each interval
/// between consecutive samples, boundary terms averaged over the interval.
pub fn kdv_energy_flux_residual(samples: &[(f64, Field)], spec: &EquationSpec) -> Result<Vec<f64>> {
    kdv_flux_applicable(spec)?;
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("energy-flux residual needs at least two samples".into()));
    }
    let terms: Vec<(f64, (f64, f64, f64))> =
        samples.iter().map(|(t, u)| Ok((*t, kdv_balance_terms(u, spec.p, spec.a)?))).collect::<Result<_>>()?;
    Ok(terms.windows(2).map(|w| flux_residual_between(w[0], w[1])).collect())
}

fn flux_residual_between(a: (f64, (f64, f64, f64)), b: (f64, (f64, f64, f64))) -> f64 {
    let (t0, (e0, l0, r0)) = a;
    let (t1, (e1, l1, r1)) = b;
    (e1 - e0) / (t1 - t0) + 0.5 * (l0 + l1) - 0.5 * (r0 + r1)
}

/// Which functionals to record along a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Exponential weight rate `L`.
    pub l_weight: f64,
    pub s_list: Vec<f64>,
    pub moment: MomentSpec,
    pub kdv_energy: bool,
    /// Subset of {1, 2, 3}.
    pub sobolev: Vec<usize>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { l_weight: 1.0, s_list: vec![4.0], moment: MomentSpec::default(), kdv_energy: false, sobolev: vec![1] }
    }
}

impl DiagnosticsConfig {
    /// Defaults tuned to an equation: `L = k + 1` for the quadratic Burgers
    /// source, `L = 1` otherwise; energy recorded for KdV.
    pub fn for_spec(spec: &EquationSpec) -> Self {
        let l_weight = match (spec.model, spec.f) {
            (Model::Burgers, FSpec::QuadraticK { k }) => k.abs() + 1.0,
            _ => 1.0,
        };
        Self { l_weight, kdv_energy: spec.model == Model::KdV, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.l_weight.is_finite() || self.l_weight < 0.0 {
            return Err(Error::InvalidArgument(format!("l_weight must be finite and >= 0, got {}", self.l_weight)));
        }
        self.s_list.iter().try_for_each(|&s| check_exponent(s))?;
        if let Some(k) = self.sobolev.iter().find(|k| !(1..=3).contains(*k)) {
            return Err(Error::InvalidArgument(format!("sobolev order {k} not in 1..=3")));
        }
        self.moment.validate()
    }
}

/// Time series of recorded diagnostics, one column per id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl NormSeries {
    pub fn new(names: Vec<String>) -> Self {
        let columns = vec![Vec::new(); names.len()];
        Self { times: Vec::new(), names, columns }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns.len());
        if let Some(&last) = self.times.last() {
            debug_assert!(t > last, "series times must increase");
        }
        self.times.push(t);
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == key).map(|i| self.columns[i].as_slice())
    }

    pub fn last(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|c| c.last().copied())
    }
}

/// Evaluates the configured functionals for successive snapshots.
#[derive(Debug, Clone)]
pub struct Recorder {
    config: DiagnosticsConfig,
    spec: EquationSpec,
    names: Vec<String>,
    flux_residual: bool,
    previous: Option<(f64, (f64, f64, f64))>,
}

pub fn lebesgue_id(s: f64) -> String {
    format!("Ls_{s}")
}

impl Recorder {
    pub fn new(config: &DiagnosticsConfig, spec: &EquationSpec) -> Result<Self> {
        config.validate()?;
        let mut names: Vec<String> = vec!["L2".into(), "Linf".into()];
        names.extend(config.s_list.iter().map(|&s| lebesgue_id(s)));
        names.extend(["WL2p", "WL2m", "moment", "ch_moment"].map(String::from));
        let mut sob = config.sobolev.clone();
        sob.sort_unstable();
        sob.dedup();
        names.extend(sob.iter().map(|k| format!("H{k}")));
        let flux_residual = config.kdv_energy && kdv_flux_applicable(spec).is_ok();
        if config.kdv_energy {
            names.push("kdv_energy".into());
        }
        if flux_residual {
            names.push("flux_residual".into());
        }
        let mut config = config.clone();
        config.sobolev = sob;
        Ok(Self { config, spec: spec.clone(), names, flux_residual, previous: None })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn empty_series(&self) -> NormSeries {
        NormSeries::new(self.names.clone())
    }

    /// Row of values aligned with [`Recorder::names`]. The flux residual of
    /// the first snapshot is NaN (it needs a previous sample).
    pub fn evaluate(&mut self, t: f64, u: &Field) -> Result<Vec<f64>> {
        let c = &self.config;
        let bc = self.spec.bc();
        let mut row = vec![lebesgue_norm(u, 2.0)?, u.sup_norm()];
        for &s in &c.s_list {
            row.push(lebesgue_norm(u, s)?);
        }
        let (wp, wm) = split_weighted_norm(u, 2.0, c.l_weight)?;
        row.extend([wp, wm, moment(u, &c.moment)?, moment(u, &MomentSpec::ChWeight)?]);
        for &k in &c.sobolev {
            row.push(sobolev_seminorm(u, k, bc)?);
        }
        if c.kdv_energy {
            let terms = kdv_balance_terms(u, self.spec.p, self.spec.a)?;
            row.push(kdv_energy(u, self.spec.p)?);
            if self.flux_residual {
                let r = match self.previous {
                    Some(prev) if t > prev.0 => flux_residual_between(prev, (t, terms)),
                    _ => f64::NAN,
                };
                row.push(r);
                self.previous = Some((t, terms));
            }
        }
        Ok(row)
    }
}

/// Empirical surrogates of the dissipative estimate
/// `|u(t)|^2 <= C |u0|^2 e^{-alpha t} + C (|g|^2 + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub decay_rate: f64,
    pub asymptotic_bound: f64,
    pub residual: f64,
}

pub fn fit_dissipative(series: &NormSeries, key: &str) -> Result<FitReport> {
    let values = series.get(key).ok_or_else(|| Error::InvalidArgument(format!("unknown diagnostic id {key}")))?;
    let times = &series.times;
    if values.len() < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 samples, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    let n = values.len();
    let tail_start = n - (n / 10).max(1) - 1;
    if values[n - 1] > 10.0 * values[tail_start].abs().max(f64::MIN_POSITIVE) && values[n - 1] > 1e-12 {
        return Err(Error::InvalidArgument("series ends in a growing tail".into()));
    }
    let quarter = (n / 4).max(1);
    let bound = values[n - quarter..].iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)).max(0.0);
    let floor = 0.99 * bound;
    // transient: leading samples still well above the asymptotic level
    let transient: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .take_while(|(_, v)| **v - floor > 20.0 * bound && **v > 0.0)
        .map(|(t, v)| (*t, (v - floor).ln()))
        .collect();
    if transient.len() < 2 {
        return Ok(FitReport { decay_rate: 0.0, asymptotic_bound: bound, residual: 0.0 });
    }
    let (slope, intercept) = least_squares(&transient);
    let residual = (transient.iter().map(|(t, y)| (y - slope * t - intercept).powi(2)).sum::<f64>()
        / transient.len() as f64)
        .sqrt();
    Ok(FitReport { decay_rate: (-slope).max(0.0), asymptotic_bound: bound, residual })
}

/// Ordinary least-squares line `y = m t + b`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    let m = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (m, my - m * mt)
}
